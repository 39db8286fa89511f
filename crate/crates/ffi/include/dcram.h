#ifndef DCRAM_H
#define DCRAM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. Zero means success.
 */
typedef enum DcramStatus {
  DCRAM_STATUS_OK = 0,
  DCRAM_STATUS_NULL_POINTER = 1,
  DCRAM_STATUS_INVALID_UTF8 = 2,
  DCRAM_STATUS_INVALID_CONFIG = 3,
  DCRAM_STATUS_INVALID_ARGUMENT = 4,
  DCRAM_STATUS_SIMULATION_FAILED = 5,
  DCRAM_STATUS_BUFFER_TOO_SMALL = 6,
  DCRAM_STATUS_PANIC = 7,
} DcramStatus;

/**
 * Resolved experiment configuration.
 */
typedef struct DcramContext DcramContext;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or NULL. The pointer stays
 * valid until the next call into the library from the same thread.
 */
const char *dcram_last_error_message(void);

/**
 * Frees a string returned by this library.
 *
 * # Safety
 * `s` must come from this library and not have been freed yet.
 */
void dcram_string_free(char *s);

/**
 * Context with the built-in reference parameters.
 */
struct DcramContext *dcram_context_new_default(void);

/**
 * Parses a TOML configuration. `preset` may be NULL.
 *
 * # Safety
 * `toml` (and `preset` if non-NULL) must be NUL-terminated strings; `out`
 * must be writable.
 */
enum DcramStatus dcram_context_from_toml(const char *toml,
                                         const char *preset,
                                         struct DcramContext **out);

/**
 * # Safety
 * `ctx` must come from a constructor of this library, or be NULL.
 */
void dcram_context_free(struct DcramContext *ctx);

/**
 * Hex SHA-256 of the resolved configuration; free with [`dcram_string_free`].
 *
 * # Safety
 * `ctx` must be a live context and `out` writable.
 */
enum DcramStatus dcram_config_hash(const struct DcramContext *ctx, char **out);

/**
 * Tunneling current through the barrier at voltage `v` [A].
 *
 * # Safety
 * `ctx` must be a live context and `out_a` writable.
 */
enum DcramStatus dcram_tunnel_current(const struct DcramContext *ctx, double v, double *out_a);

/**
 * Storage-mode IVD decay on `n` log-spaced times ending at `t_end_s`.
 * Writes `n` values into each of `times_s` and `ivd_v`.
 *
 * # Safety
 * `ctx` must be a live context; both buffers must hold `n` doubles.
 */
enum DcramStatus dcram_storage_decay(const struct DcramContext *ctx,
                                     double ivd0_v,
                                     double t_end_s,
                                     uintptr_t n,
                                     double *times_s,
                                     double *ivd_v);

/**
 * Simulated write of `bit` (0 or 1) into a cell holding `ivd0_v`.
 *
 * # Safety
 * `ctx` must be a live context and the outputs writable.
 */
enum DcramStatus dcram_write_bit(const struct DcramContext *ctx,
                                 double ivd0_v,
                                 int32_t bit,
                                 double *out_ivd_v,
                                 double *out_energy_fj);

/**
 * Destructive read plus refresh of a cell holding `stored_ivd_v`.
 *
 * # Safety
 * `ctx` must be a live context and the outputs writable.
 */
enum DcramStatus dcram_read_refresh(const struct DcramContext *ctx,
                                    double stored_ivd_v,
                                    int32_t *out_bit,
                                    double *out_refreshed_ivd_v,
                                    double *out_energy_fj);

/**
 * Throughput ratio for the context's speedup parameters with a different
 * number of outputs per gate.
 *
 * # Safety
 * `ctx` must be a live context and `out` writable.
 */
enum DcramStatus dcram_speedup(const struct DcramContext *ctx,
                               double outputs_per_gate,
                               double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DCRAM_H */
