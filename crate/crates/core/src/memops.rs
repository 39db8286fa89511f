//! Memory protocol on a single cell: bit encoding, WRITE, destructive READ
//! followed by REFRESH, write-threshold extraction and retention sweeps.
//!
//! Bit 1 is a positive IVD. A positive pulse on the bit line writes 1, a
//! negative one writes 0. The read pulse is positive too, so reading leaves
//! every cell at 1 and the sense amplifier has to write 0 back when it sees
//! the larger response of a stored 0.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{
    build_read, build_single_cell, fmt_sci, CircuitError, PulseSpec, SolveError, StepControl, Transient,
    TransmissionLineParams, VsaParams, Waveforms, SETTLE_NS,
};
use crate::device::{log_time_grid, storage_decay, storage_decay_at, DeviceError, MemcapacitorParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MemopsError {
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("write of bit {bit} left the cell undefined (IVD {ivd} V)")]
    WriteUndefined { bit: u8, ivd: f64 },
    #[error("pulse amplitude {amplitude} V cannot write bit {bit}")]
    PulseSign { bit: u8, amplitude: f64 },
    #[error("stored IVD {0} V is not a readable bit")]
    Unreadable(f64),
    #[error("no threshold crossing in the amplitude grid (largest post-pulse IVD {0} V)")]
    NoCrossing(f64),
    #[error("empty {0} grid")]
    EmptyGrid(&'static str),
    #[error("sense resistance calibration failed: {0}")]
    Calibration(&'static str),
}

/// Logic levels. The IVD threshold is `Q_r / C2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogicThresholds {
    pub ivd_threshold_v: f64,
}

impl Default for LogicThresholds {
    fn default() -> Self {
        Self { ivd_threshold_v: 0.3 }
    }
}

impl LogicThresholds {
    /// Internal-charge threshold `Q_r` [C].
    pub fn charge_threshold(&self, params: &MemcapacitorParams) -> f64 {
        self.ivd_threshold_v * params.c2()
    }

    pub fn classify(&self, ivd: f64) -> CellBit {
        let value = if ivd >= self.ivd_threshold_v {
            Bit::One
        } else if ivd <= -self.ivd_threshold_v {
            Bit::Zero
        } else {
            Bit::Undefined
        };
        CellBit { value, ivd }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bit {
    Zero,
    One,
    Undefined,
}

impl Bit {
    pub fn from_bool(b: bool) -> Self {
        if b {
            Bit::One
        } else {
            Bit::Zero
        }
    }

    pub fn as_bool(self) -> Option<bool> {
        match self {
            Bit::Zero => Some(false),
            Bit::One => Some(true),
            Bit::Undefined => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellBit {
    pub value: Bit,
    pub ivd: f64,
}

/// Electrical setting of the single-cell protocol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MemoryContext {
    pub device: MemcapacitorParams,
    pub line: TransmissionLineParams,
    /// Pulse for writing 1; its mirror writes 0.
    pub write_pulse: PulseSpec,
    pub read_pulse: PulseSpec,
    pub vsa: VsaParams,
    pub thresholds: LogicThresholds,
    pub step: StepControl,
}

impl Default for MemoryContext {
    fn default() -> Self {
        Self {
            device: MemcapacitorParams::paper_cell(),
            line: TransmissionLineParams::default(),
            write_pulse: PulseSpec::new(1.0, 1.0),
            read_pulse: PulseSpec::new(1.0, 0.5),
            vsa: VsaParams::default(),
            thresholds: LogicThresholds::default(),
            step: StepControl::default(),
        }
    }
}

/// Single-cell drive with an arbitrary pulse.
pub fn apply_pulse(ctx: &MemoryContext, ivd0: f64, pulse: &PulseSpec) -> Result<Waveforms, MemopsError> {
    let net = build_single_cell(&ctx.device, &ctx.line, pulse, ivd0)?;
    Ok(crate::circuit::transient_solve(&net, net.t_stop_ns, ctx.step)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct WriteOutcome {
    pub bit: CellBit,
    pub energy_fj: f64,
    pub periphery_energy_fj: f64,
    #[serde(skip)]
    pub waveforms: Waveforms,
}

/// Writes `bit` with the context's write pulse (mirrored for 0).
pub fn write_bit(ctx: &MemoryContext, ivd0: f64, bit: bool) -> Result<WriteOutcome, MemopsError> {
    let a = ctx.write_pulse.amplitude_v.abs();
    let pulse = ctx.write_pulse.with_amplitude(if bit { a } else { -a });
    write_bit_with(ctx, ivd0, bit, &pulse)
}

/// Writes `bit` with an explicit pulse whose sign must match the bit.
pub fn write_bit_with(ctx: &MemoryContext, ivd0: f64, bit: bool, pulse: &PulseSpec) -> Result<WriteOutcome, MemopsError> {
    let bit_num = bit as u8;
    if (pulse.amplitude_v > 0.0) != bit {
        return Err(MemopsError::PulseSign {
            bit: bit_num,
            amplitude: pulse.amplitude_v,
        });
    }
    let w = apply_pulse(ctx, ivd0, pulse)?;
    let ivd = w.final_ivd()[0];
    let cb = ctx.thresholds.classify(ivd);
    if cb.value != Bit::from_bool(bit) {
        return Err(MemopsError::WriteUndefined { bit: bit_num, ivd });
    }
    Ok(WriteOutcome {
        bit: cb,
        energy_fj: w.final_cell_energy_fj(),
        periphery_energy_fj: w.final_periphery_energy_fj(),
        waveforms: w,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ReadOutcome {
    /// Bit recovered by the sense amplifier.
    pub bit: bool,
    pub stored: CellBit,
    /// Cell state at the end of the read pulse, before any refresh.
    pub pre_refresh: CellBit,
    pub refreshed: CellBit,
    pub vsa_activated: bool,
    pub vsa_peak_v: f64,
    /// Tunneling dissipation plus sense amplifier cost.
    pub energy_fj: f64,
    pub periphery_energy_fj: f64,
    #[serde(skip)]
    pub waveforms: Waveforms,
}

/// Destructive read followed by refresh.
pub fn read_refresh(ctx: &MemoryContext, stored_ivd: f64) -> Result<ReadOutcome, MemopsError> {
    let stored = ctx.thresholds.classify(stored_ivd);
    if stored.value == Bit::Undefined {
        return Err(MemopsError::Unreadable(stored_ivd));
    }
    let net = build_read(&ctx.device, &ctx.line, &ctx.read_pulse, &ctx.vsa, stored_ivd)?;
    let vsa = net.vsa.as_ref().expect("read netlist has a VSA");
    let decide_at = vsa.read_start_ns + vsa.params.delay_ns;
    let refresh_at = decide_at + vsa.params.refresh_pulse.start_ns;
    let mut tr = Transient::new(&net, ctx.step)?;
    tr.advance_to(decide_at)?;
    let peak = tr.vsa_peak().unwrap_or(0.0);
    let activated = peak > vsa.params.threshold_v;
    tr.set_vsa_outcome(activated);
    let pre_at = refresh_at.max(ctx.read_pulse.end_ns());
    let mut refresh = vsa.params.refresh_pulse;
    refresh.start_ns = pre_at;
    if activated {
        tr.add_pulse(vsa.source, refresh);
        tr.add_vsa_loss(vsa.params.internal_loss_fj);
    }
    tr.advance_to(pre_at)?;
    let pre_refresh = ctx.thresholds.classify(tr.cell_ivd()[0]);
    tr.advance_to(net.t_stop_ns.max(refresh.end_ns() + SETTLE_NS))?;
    let w = tr.finish();
    let refreshed = ctx.thresholds.classify(w.final_ivd()[0]);
    Ok(ReadOutcome {
        bit: !activated,
        stored,
        pre_refresh,
        refreshed,
        vsa_activated: activated,
        vsa_peak_v: peak,
        energy_fj: w.operation_energy_fj(),
        periphery_energy_fj: w.final_periphery_energy_fj(),
        waveforms: w,
    })
}

/// Peak sense voltage during the read window for a stored IVD.
pub fn sense_peak(ctx: &MemoryContext, stored_ivd: f64) -> Result<f64, MemopsError> {
    let mut vsa = ctx.vsa;
    // Keep the amplifier from ever firing; only the peak matters here.
    vsa.threshold_v = f64::MAX;
    let net = build_read(&ctx.device, &ctx.line, &ctx.read_pulse, &vsa, stored_ivd)?;
    let att = net.vsa.as_ref().expect("read netlist has a VSA");
    let mut tr = Transient::new(&net, ctx.step)?;
    tr.advance_to(att.read_start_ns + att.params.delay_ns)?;
    Ok(tr.vsa_peak().unwrap_or(0.0))
}

/// Sense resistance that puts the response of an empty cell (IVD 0) exactly
/// at the VSA threshold, so stored 0 fires and stored 1 does not.
pub fn calibrate_sense_resistance(ctx: &MemoryContext) -> Result<f64, MemopsError> {
    let peak_at = |r: f64| -> Result<f64, MemopsError> {
        let mut c = *ctx;
        c.vsa.sense_resistance_ohm = r;
        sense_peak(&c, 0.0)
    };
    let target = ctx.vsa.threshold_v;
    let (mut lo, mut hi) = (100.0_f64, 1e6_f64);
    if peak_at(lo)? > target || peak_at(hi)? < target {
        return Err(MemopsError::Calibration("threshold outside the reachable sense range"));
    }
    // The peak grows monotonically with the resistance; bisect in log space.
    for _ in 0..30 {
        let mid = (lo * hi).sqrt();
        if peak_at(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo < 1.0 + 1e-4 {
            break;
        }
    }
    Ok((lo * hi).sqrt())
}

/// IVD left after writing 1 into an empty cell: the input level used by the
/// logic experiments.
pub fn written_level(ctx: &MemoryContext) -> Result<f64, MemopsError> {
    Ok(write_bit(ctx, 0.0, true)?.bit.ivd)
}

/// Writes `!bit` and then `bit`. A single write adds to charge already of
/// the same sign, so repeated plain writes drift upward; the conditioning
/// write first brings the cell to the opposite level, which depends little
/// on where it started, and the final level is nearly state independent.
pub fn restore_bit(ctx: &MemoryContext, ivd0: f64, bit: bool) -> Result<WriteOutcome, MemopsError> {
    let first = write_bit(ctx, ivd0, !bit)?;
    let mut w = write_bit(ctx, first.bit.ivd, bit)?;
    w.energy_fj += first.energy_fj;
    w.periphery_energy_fj += first.periphery_energy_fj;
    Ok(w)
}

/// IVD after [`restore_bit`] of 1 from an empty cell.
pub fn restored_level(ctx: &MemoryContext) -> Result<f64, MemopsError> {
    Ok(restore_bit(ctx, 0.0, true)?.bit.ivd)
}

/// Time between the end of a pulse and the threshold measurement [s].
pub const THRESHOLD_PROBE_S: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdPoint {
    pub amplitude_v: f64,
    pub ivd_after_pulse: f64,
    pub ivd_after_1s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdReport {
    pub v_t: f64,
    /// |IVD| one second after the largest pulse in the grid.
    pub saturation_ivd: f64,
    pub points: Vec<ThresholdPoint>,
}

/// Post-pulse IVD for each amplitude, starting from an empty cell.
pub fn write_response(
    ctx: &MemoryContext,
    template: &PulseSpec,
    amplitudes: &[f64],
) -> Result<Vec<ThresholdPoint>, MemopsError> {
    use rayon::prelude::*;
    amplitudes
        .par_iter()
        .map(|&a| {
            let ivd = if a == 0.0 {
                0.0
            } else {
                apply_pulse(ctx, 0.0, &template.with_amplitude(a))?.final_ivd()[0]
            };
            let later = storage_decay_at(ivd, &ctx.device, &[THRESHOLD_PROBE_S])?.ivd[0];
            Ok(ThresholdPoint {
                amplitude_v: a,
                ivd_after_pulse: ivd,
                ivd_after_1s: later,
            })
        })
        .collect()
}

/// Amplitude at which the IVD measured 1 s after the pulse reaches 10% of
/// its value for the largest amplitude in the grid (linear interpolation).
pub fn extract_write_threshold(
    ctx: &MemoryContext,
    template: &PulseSpec,
    amplitudes: &[f64],
) -> Result<ThresholdReport, MemopsError> {
    if amplitudes.is_empty() {
        return Err(MemopsError::EmptyGrid("amplitude"));
    }
    let mut grid = amplitudes.to_vec();
    grid.sort_by(f64::total_cmp);
    let points = write_response(ctx, template, &grid)?;
    let saturation = points.last().map_or(0.0, |p| p.ivd_after_1s.abs());
    let level = 0.1 * saturation;
    let mut v_t = None;
    for w in points.windows(2) {
        let (a, b) = (w[0].ivd_after_1s.abs(), w[1].ivd_after_1s.abs());
        if a < level && b >= level {
            let f = (level - a) / (b - a);
            v_t = Some(w[0].amplitude_v + f * (w[1].amplitude_v - w[0].amplitude_v));
            break;
        }
    }
    // A response large enough at the grid start still counts only if it is
    // a genuine write; a grid that never leaves the noise floor has no crossing.
    let v_t = match v_t {
        Some(v) if saturation >= ctx.thresholds.ivd_threshold_v => v,
        _ => return Err(MemopsError::NoCrossing(saturation)),
    };
    Ok(ThresholdReport {
        v_t,
        saturation_ivd: saturation,
        points,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetentionRow {
    pub rel_permittivity: f64,
    pub thickness_nm: f64,
    pub ivd: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetentionTable {
    pub ivd0: f64,
    pub times_s: Vec<f64>,
    pub rows: Vec<RetentionRow>,
}

impl RetentionTable {
    pub fn row(&self, k: f64, d: f64) -> Option<&RetentionRow> {
        self.rows.iter().find(|r| r.rel_permittivity == k && r.thickness_nm == d)
    }

    pub fn to_csv(&self) -> Result<String, csv::Error> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let mut header = vec!["t_s".to_string()];
        header.extend(self.rows.iter().map(|r| format!("ivd_k{}_d{}nm", r.rel_permittivity, r.thickness_nm)));
        w.write_record(&header)?;
        for (i, t) in self.times_s.iter().enumerate() {
            let mut rec = vec![fmt_sci(*t)];
            rec.extend(self.rows.iter().map(|r| fmt_sci(r.ivd[i])));
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }
}

/// Storage decay from `ivd0` for every (k, d) stack on the given grids.
pub fn retention_sweep(
    base: &MemcapacitorParams,
    permittivities: &[f64],
    thicknesses_nm: &[f64],
    ivd0: f64,
    t_end_s: f64,
    n_samples: usize,
) -> Result<RetentionTable, MemopsError> {
    use rayon::prelude::*;
    if permittivities.is_empty() {
        return Err(MemopsError::EmptyGrid("permittivity"));
    }
    if thicknesses_nm.is_empty() {
        return Err(MemopsError::EmptyGrid("thickness"));
    }
    let pairs: Vec<(f64, f64)> = permittivities
        .iter()
        .flat_map(|&k| thicknesses_nm.iter().map(move |&d| (k, d)))
        .collect();
    let rows = pairs
        .par_iter()
        .map(|&(k, d)| {
            let curve = storage_decay(ivd0, &base.with_middle(k, d), t_end_s, n_samples)?;
            Ok(RetentionRow {
                rel_permittivity: k,
                thickness_nm: d,
                ivd: curve.ivd,
            })
        })
        .collect::<Result<Vec<_>, MemopsError>>()?;
    Ok(RetentionTable {
        ivd0,
        times_s: log_time_grid(t_end_s, n_samples),
        rows,
    })
}

/// Time for the storage-mode IVD to fall to half of `ivd0` [s].
pub fn retention_half_life(params: &MemcapacitorParams, ivd0: f64) -> Result<f64, MemopsError> {
    let curve = storage_decay(ivd0, params, 1e12, 561)?;
    let half = 0.5 * ivd0.abs();
    let idx = curve.ivd.iter().position(|v| v.abs() <= half);
    match idx {
        None => Ok(f64::INFINITY),
        Some(0) => Ok(curve.times_s[0]),
        Some(i) => {
            // Interpolate in log time.
            let (t0, t1) = (curve.times_s[i - 1].ln(), curve.times_s[i].ln());
            let (v0, v1) = (curve.ivd[i - 1].abs(), curve.ivd[i].abs());
            Ok((t0 + (half - v0) / (v1 - v0) * (t1 - t0)).exp())
        }
    }
}

/// Compact characterization of the default cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellReport {
    pub v_t: f64,
    pub saturation_ivd: f64,
    pub written_ivd: f64,
    pub retention_half_life_s: f64,
    pub write_energy_fj: f64,
    pub read_energy_stored_1_fj: f64,
    pub read_energy_stored_0_fj: f64,
    pub sense_resistance_ohm: f64,
}

/// Amplitude grid 0..=1.5 V in 0.05 V steps.
pub fn default_amplitude_grid() -> Vec<f64> {
    (0..=30).map(|i| i as f64 * 0.05).collect()
}

pub fn cell_report(ctx: &MemoryContext) -> Result<CellReport, MemopsError> {
    let th = extract_write_threshold(ctx, &ctx.write_pulse, &default_amplitude_grid())?;
    let write = write_bit(ctx, 0.0, true)?;
    let r1 = read_refresh(ctx, 0.5)?;
    let r0 = read_refresh(ctx, -0.5)?;
    Ok(CellReport {
        v_t: th.v_t,
        saturation_ivd: th.saturation_ivd,
        written_ivd: write.bit.ivd,
        retention_half_life_s: retention_half_life(&ctx.device, write.bit.ivd)?,
        write_energy_fj: write.energy_fj,
        read_energy_stored_1_fj: r1.energy_fj,
        read_energy_stored_0_fj: r0.energy_fj,
        sense_resistance_ohm: ctx.vsa.sense_resistance_ohm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classification_bands() {
        let t = LogicThresholds::default();
        assert_eq!(t.classify(0.3).value, Bit::One);
        assert_eq!(t.classify(-0.3).value, Bit::Zero);
        assert_eq!(t.classify(0.29).value, Bit::Undefined);
        let p = MemcapacitorParams::paper_cell();
        assert!((t.charge_threshold(&p) / p.c2() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn pulse_sign_must_match_bit() {
        let ctx = MemoryContext::default();
        let err = write_bit_with(&ctx, 0.0, false, &PulseSpec::new(1.0, 1.0)).unwrap_err();
        assert!(matches!(err, MemopsError::PulseSign { bit: 0, .. }));
    }

    #[test]
    fn undefined_cell_is_not_read() {
        let ctx = MemoryContext::default();
        assert_eq!(read_refresh(&ctx, 0.1).unwrap_err(), MemopsError::Unreadable(0.1));
    }

    #[test]
    fn empty_grids_rejected() {
        let p = MemcapacitorParams::paper_cell();
        assert!(matches!(retention_sweep(&p, &[], &[8.0], 1.0, 1e6, 10), Err(MemopsError::EmptyGrid(_))));
        let ctx = MemoryContext::default();
        assert!(matches!(extract_write_threshold(&ctx, &ctx.write_pulse, &[]), Err(MemopsError::EmptyGrid(_))));
    }
}
