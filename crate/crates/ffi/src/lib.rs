//! C ABI over the dcram simulator.
//!
//! Handles are opaque and owned by the caller. Every fallible function
//! returns a [`DcramStatus`]; on failure the message is kept per thread and
//! can be fetched with [`dcram_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use dcram::compiler::{estimate_speedup, SpeedupParams};
use dcram::config::ExperimentConfig;
use dcram::device::storage_decay;
use dcram::memops::{read_refresh, write_bit};

/// Result codes. Zero means success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DcramStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidConfig = 3,
    InvalidArgument = 4,
    SimulationFailed = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

/// Resolved experiment configuration.
pub struct DcramContext {
    config: ExperimentConfig,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: DcramStatus, msg: impl Into<String>) -> DcramStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> DcramStatus) -> DcramStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == DcramStatus::Ok {
                LAST_ERROR.with(|e| *e.borrow_mut() = None);
            }
            s
        }
        Err(_) => fail(DcramStatus::Panic, "internal panic"),
    }
}

unsafe fn context<'a>(ctx: *const DcramContext) -> Result<&'a DcramContext, DcramStatus> {
    if ctx.is_null() {
        Err(fail(DcramStatus::NullPointer, "null context"))
    } else {
        Ok(&*ctx)
    }
}

macro_rules! try_status {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

macro_rules! out_ptr {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            return fail(DcramStatus::NullPointer, concat!("null ", stringify!($p)));
        })+
    };
}

/// Message of the last failure on this thread, or NULL. The pointer stays
/// valid until the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn dcram_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Frees a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not have been freed yet.
#[no_mangle]
pub unsafe extern "C" fn dcram_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Context with the built-in reference parameters.
#[no_mangle]
pub extern "C" fn dcram_context_new_default() -> *mut DcramContext {
    Box::into_raw(Box::new(DcramContext {
        config: ExperimentConfig::paper(),
    }))
}

/// Parses a TOML configuration. `preset` may be NULL.
///
/// # Safety
/// `toml` (and `preset` if non-NULL) must be NUL-terminated strings; `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn dcram_context_from_toml(
    toml: *const c_char,
    preset: *const c_char,
    out: *mut *mut DcramContext,
) -> DcramStatus {
    guard(|| {
        out_ptr!(toml, out);
        let text = match CStr::from_ptr(toml).to_str() {
            Ok(t) => t,
            Err(e) => return fail(DcramStatus::InvalidUtf8, e.to_string()),
        };
        let preset = if preset.is_null() {
            None
        } else {
            match CStr::from_ptr(preset).to_str() {
                Ok(p) => Some(p),
                Err(e) => return fail(DcramStatus::InvalidUtf8, e.to_string()),
            }
        };
        match ExperimentConfig::from_toml(text, preset) {
            Ok(config) => {
                *out = Box::into_raw(Box::new(DcramContext { config }));
                DcramStatus::Ok
            }
            Err(e) => fail(DcramStatus::InvalidConfig, e.to_string()),
        }
    })
}

/// # Safety
/// `ctx` must come from a constructor of this library, or be NULL.
#[no_mangle]
pub unsafe extern "C" fn dcram_context_free(ctx: *mut DcramContext) {
    if !ctx.is_null() {
        drop(Box::from_raw(ctx));
    }
}

/// Hex SHA-256 of the resolved configuration; free with [`dcram_string_free`].
///
/// # Safety
/// `ctx` must be a live context and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dcram_config_hash(ctx: *const DcramContext, out: *mut *mut c_char) -> DcramStatus {
    guard(|| {
        let ctx = try_status!(context(ctx));
        out_ptr!(out);
        match CString::new(ctx.config.hash()) {
            Ok(s) => {
                *out = s.into_raw();
                DcramStatus::Ok
            }
            Err(e) => fail(DcramStatus::Panic, e.to_string()),
        }
    })
}

/// Tunneling current through the barrier at voltage `v` [A].
///
/// # Safety
/// `ctx` must be a live context and `out_a` writable.
#[no_mangle]
pub unsafe extern "C" fn dcram_tunnel_current(ctx: *const DcramContext, v: f64, out_a: *mut f64) -> DcramStatus {
    guard(|| {
        let ctx = try_status!(context(ctx));
        out_ptr!(out_a);
        if !v.is_finite() {
            return fail(DcramStatus::InvalidArgument, "voltage must be finite");
        }
        *out_a = ctx.config.device.junction().current(v);
        DcramStatus::Ok
    })
}

/// Storage-mode IVD decay on `n` log-spaced times ending at `t_end_s`.
/// Writes `n` values into each of `times_s` and `ivd_v`.
///
/// # Safety
/// `ctx` must be a live context; both buffers must hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn dcram_storage_decay(
    ctx: *const DcramContext,
    ivd0_v: f64,
    t_end_s: f64,
    n: usize,
    times_s: *mut f64,
    ivd_v: *mut f64,
) -> DcramStatus {
    guard(|| {
        let ctx = try_status!(context(ctx));
        out_ptr!(times_s, ivd_v);
        if n == 0 {
            return fail(DcramStatus::BufferTooSmall, "n must be >= 1");
        }
        match storage_decay(ivd0_v, &ctx.config.device, t_end_s, n) {
            Ok(c) => {
                std::slice::from_raw_parts_mut(times_s, n).copy_from_slice(&c.times_s);
                std::slice::from_raw_parts_mut(ivd_v, n).copy_from_slice(&c.ivd);
                DcramStatus::Ok
            }
            Err(e) => fail(DcramStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Simulated write of `bit` (0 or 1) into a cell holding `ivd0_v`.
///
/// # Safety
/// `ctx` must be a live context and the outputs writable.
#[no_mangle]
pub unsafe extern "C" fn dcram_write_bit(
    ctx: *const DcramContext,
    ivd0_v: f64,
    bit: i32,
    out_ivd_v: *mut f64,
    out_energy_fj: *mut f64,
) -> DcramStatus {
    guard(|| {
        let ctx = try_status!(context(ctx));
        out_ptr!(out_ivd_v, out_energy_fj);
        if bit != 0 && bit != 1 {
            return fail(DcramStatus::InvalidArgument, "bit must be 0 or 1");
        }
        match write_bit(&ctx.config.memory_context(), ivd0_v, bit == 1) {
            Ok(w) => {
                *out_ivd_v = w.bit.ivd;
                *out_energy_fj = w.energy_fj;
                DcramStatus::Ok
            }
            Err(e) => fail(DcramStatus::SimulationFailed, e.to_string()),
        }
    })
}

/// Destructive read plus refresh of a cell holding `stored_ivd_v`.
///
/// # Safety
/// `ctx` must be a live context and the outputs writable.
#[no_mangle]
pub unsafe extern "C" fn dcram_read_refresh(
    ctx: *const DcramContext,
    stored_ivd_v: f64,
    out_bit: *mut i32,
    out_refreshed_ivd_v: *mut f64,
    out_energy_fj: *mut f64,
) -> DcramStatus {
    guard(|| {
        let ctx = try_status!(context(ctx));
        out_ptr!(out_bit, out_refreshed_ivd_v, out_energy_fj);
        match read_refresh(&ctx.config.memory_context(), stored_ivd_v) {
            Ok(r) => {
                *out_bit = i32::from(r.bit);
                *out_refreshed_ivd_v = r.refreshed.ivd;
                *out_energy_fj = r.energy_fj;
                DcramStatus::Ok
            }
            Err(e) => fail(DcramStatus::SimulationFailed, e.to_string()),
        }
    })
}

/// Throughput ratio for the context's speedup parameters with a different
/// number of outputs per gate.
///
/// # Safety
/// `ctx` must be a live context and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dcram_speedup(ctx: *const DcramContext, outputs_per_gate: f64, out: *mut f64) -> DcramStatus {
    guard(|| {
        let ctx = try_status!(context(ctx));
        out_ptr!(out);
        let p = SpeedupParams {
            outputs_per_gate,
            ..ctx.config.speedup
        };
        match estimate_speedup(&p) {
            Ok(s) => {
                *out = s;
                DcramStatus::Ok
            }
            Err(e) => fail(DcramStatus::InvalidArgument, e.to_string()),
        }
    })
}
