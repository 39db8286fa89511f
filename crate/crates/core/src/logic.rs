//! Coupled-cell computation.
//!
//! Two or three cells in series between two drives receive synchronized
//! pulses; the charge each cell ends with is a boolean function of the bits
//! all of them started with. Truth tables are stored as bitmasks over input
//! rows, row `r` giving cell `k` (of `n`) the bit `(r >> (n - 1 - k)) & 1`,
//! so the first cell is the most significant bit of the row index.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{
    build_coupled, CircuitError, CouplingConfig, CouplingParams, PulseSpec, SolveError, StepControl,
};
use crate::device::MemcapacitorParams;
use crate::memops::{self, Bit, LogicThresholds, MemoryContext, MemopsError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LogicError {
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Memops(#[from] MemopsError),
    #[error("expected {expected} input bits, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("empty {0} grid")]
    EmptyGrid(&'static str),
    #[error("level {level}: cell {cell} is not readable (IVD {ivd} V)")]
    Unreadable { level: usize, cell: usize, ivd: f64 },
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
}

/// Electrical and protocol setting of coupled-cell experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LogicContext {
    pub device: MemcapacitorParams,
    pub coupling: CouplingParams,
    /// Pulse shape shared by both drives; only the amplitude differs.
    pub pulse: PulseSpec,
    /// IVD magnitude of a freshly written input bit [V].
    pub input_ivd_v: f64,
    pub thresholds: LogicThresholds,
    /// IVD magnitudes bracketing every level a REFRESH or WRITE can leave
    /// behind [V]. Library gates must behave the same across this band.
    pub level_band_v: (f64, f64),
    /// Step control of the coupled solves.
    pub step: StepControl,
    /// Single-cell context used for REFRESH and WRITE post-steps.
    pub memory: MemoryContext,
}

impl Default for LogicContext {
    fn default() -> Self {
        let memory = MemoryContext {
            step: StepControl::fast(5.0).with_stride(1000),
            ..MemoryContext::default()
        };
        Self {
            device: MemcapacitorParams::paper_cell(),
            coupling: CouplingParams::default(),
            pulse: PulseSpec::new(1.0, 1.0),
            // Level left by a restoring write (`memops::restore_bit`).
            input_ivd_v: 3.361,
            thresholds: LogicThresholds::default(),
            level_band_v: (3.3, 3.42),
            step: StepControl::fast(10.0).with_stride(1000),
            memory,
        }
    }
}

/// Bit of cell `k` (of `n`) in input row `row`.
pub fn row_bit(row: usize, k: usize, n: usize) -> bool {
    (row >> (n - 1 - k)) & 1 == 1
}

/// Truth-table mask of the projection onto cell `k`.
pub fn projection_mask(k: usize, n: usize) -> u8 {
    (0..1usize << n).filter(|&r| row_bit(r, k, n)).fold(0, |m, r| m | 1 << r)
}

pub fn full_mask(n: usize) -> u8 {
    ((1u16 << (1 << n)) - 1) as u8
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoupledOutcome {
    pub final_ivd: Vec<f64>,
    pub bits: Vec<Bit>,
    /// Tunneling dissipation in all cells [fJ].
    pub energy_fj: f64,
    pub periphery_energy_fj: f64,
}

/// Synchronized pulses on cells starting from arbitrary IVDs.
pub fn run_coupled_ivd(
    ctx: &LogicContext,
    config: &CouplingConfig,
    v1: f64,
    v2: f64,
    ivd: &[f64],
) -> Result<CoupledOutcome, LogicError> {
    let cells: Vec<(MemcapacitorParams, f64)> = ivd.iter().map(|&u| (ctx.device, u)).collect();
    let net = build_coupled(
        &cells,
        config,
        (ctx.pulse.with_amplitude(v1), ctx.pulse.with_amplitude(v2)),
        &ctx.coupling,
    )?;
    let w = crate::circuit::transient_solve(&net, net.t_stop_ns, ctx.step)?;
    let final_ivd = w.final_ivd();
    Ok(CoupledOutcome {
        bits: final_ivd.iter().map(|&u| ctx.thresholds.classify(u).value).collect(),
        final_ivd,
        energy_fj: w.final_cell_energy_fj(),
        periphery_energy_fj: w.final_periphery_energy_fj(),
    })
}

/// Writes `inputs` at the standard level and applies the pulse pair.
pub fn run_coupled(
    ctx: &LogicContext,
    config: &CouplingConfig,
    v1: f64,
    v2: f64,
    inputs: &[bool],
) -> Result<CoupledOutcome, LogicError> {
    if inputs.len() != config.arity() {
        return Err(LogicError::Arity {
            expected: config.arity(),
            got: inputs.len(),
        });
    }
    let ivd: Vec<f64> = inputs
        .iter()
        .map(|&b| if b { ctx.input_ivd_v } else { -ctx.input_ivd_v })
        .collect();
    run_coupled_ivd(ctx, config, v1, v2, &ivd)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Identity,
    LogicOperation,
    ForcedState,
    NonReadable,
}

impl Region {
    pub fn label(self) -> &'static str {
        match self {
            Region::Identity => "identity",
            Region::LogicOperation => "logic_operation",
            Region::ForcedState => "forced_state",
            Region::NonReadable => "non_readable",
        }
    }

    /// Region implied by per-cell output masks and the rows on which every
    /// cell ended readable.
    pub fn classify(outputs: &[u8], defined_rows: u8) -> Region {
        let n = outputs.len();
        let full = full_mask(n);
        if defined_rows != full {
            Region::NonReadable
        } else if outputs.iter().enumerate().all(|(k, &m)| m == projection_mask(k, n)) {
            Region::Identity
        } else if outputs.iter().all(|&m| m == 0 || m == full) {
            Region::ForcedState
        } else {
            Region::LogicOperation
        }
    }
}

/// Per-cell boolean functions realized at one operating point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateLibraryEntry {
    pub config: CouplingConfig,
    pub v1: f64,
    pub v2: f64,
    /// Truth table of each cell's final bit. Rows outside `defined_rows`
    /// carry no meaning.
    pub outputs: Vec<u8>,
    /// Input rows after which every cell is readable.
    pub defined_rows: u8,
    pub region: Region,
    /// Largest tunneling energy over the input rows [fJ].
    pub max_energy_fj: f64,
}

impl GateLibraryEntry {
    pub fn arity(&self) -> usize {
        self.outputs.len()
    }

    /// Conjugate functions: each mask maps to `!f(!x)`.
    pub fn conjugate_outputs(&self) -> Vec<u8> {
        let n = self.arity();
        let rows = 1usize << n;
        self.outputs
            .iter()
            .map(|&m| (0..rows).filter(|&r| m >> (rows - 1 - r) & 1 == 0).fold(0, |acc, r| acc | 1 << r))
            .collect()
    }
}

/// Runs all input combinations at one operating point, inputs written at
/// the nominal level.
pub fn extract_gate(ctx: &LogicContext, config: &CouplingConfig, v1: f64, v2: f64) -> Result<GateLibraryEntry, LogicError> {
    let levels = vec![vec![ctx.input_ivd_v; config.arity()]];
    extract_at_levels(ctx, config, v1, v2, &levels)
}

/// As [`extract_gate`], but a row only counts as defined if the outputs are
/// readable and identical with the inputs at the nominal level and at every
/// corner of `level_band_v`, each input at either end independently.
pub fn extract_robust_gate(ctx: &LogicContext, config: &CouplingConfig, v1: f64, v2: f64) -> Result<GateLibraryEntry, LogicError> {
    let n = config.arity();
    let (lo, hi) = ctx.level_band_v;
    let mut levels = vec![vec![ctx.input_ivd_v; n]];
    levels.extend((0..1usize << n).map(|c| (0..n).map(|k| if c >> k & 1 == 1 { hi } else { lo }).collect()));
    extract_at_levels(ctx, config, v1, v2, &levels)
}

/// `levels[i][k]` is the IVD magnitude of input `k` in evaluation `i`; the
/// first evaluation supplies the outputs.
fn extract_at_levels(
    ctx: &LogicContext,
    config: &CouplingConfig,
    v1: f64,
    v2: f64,
    levels: &[Vec<f64>],
) -> Result<GateLibraryEntry, LogicError> {
    let n = config.arity();
    let mut outputs = vec![0u8; n];
    let mut defined_rows = 0u8;
    let mut max_energy: f64 = 0.0;
    for row in 0..1usize << n {
        let inputs: Vec<bool> = (0..n).map(|k| row_bit(row, k, n)).collect();
        let mut nominal: Option<Vec<Bit>> = None;
        let mut defined = true;
        for level in levels {
            let ivd: Vec<f64> = inputs.iter().zip(level).map(|(&b, &m)| if b { m } else { -m }).collect();
            let out = run_coupled_ivd(ctx, config, v1, v2, &ivd)?;
            max_energy = max_energy.max(out.energy_fj);
            defined &= out.bits.iter().all(|b| *b != Bit::Undefined);
            match &nominal {
                None => nominal = Some(out.bits),
                Some(bits) => defined &= *bits == out.bits,
            }
            if !defined {
                break;
            }
        }
        if defined {
            defined_rows |= 1 << row;
        }
        for (k, b) in nominal.unwrap_or_default().iter().enumerate() {
            if *b == Bit::One {
                outputs[k] |= 1 << row;
            }
        }
    }
    Ok(GateLibraryEntry {
        config: config.clone(),
        v1,
        v2,
        region: Region::classify(&outputs, defined_rows),
        outputs,
        defined_rows,
        max_energy_fj: max_energy,
    })
}

/// Uniform grid of `n` points from `lo` to `hi`.
pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperationMap {
    pub config: CouplingConfig,
    pub v1_grid: Vec<f64>,
    pub v2_grid: Vec<f64>,
    /// Row-major over (v1, v2).
    pub entries: Vec<GateLibraryEntry>,
}

impl OperationMap {
    pub fn at(&self, i: usize, j: usize) -> &GateLibraryEntry {
        &self.entries[i * self.v2_grid.len() + j]
    }

    /// Entry at the grid point closest to (v1, v2).
    pub fn nearest(&self, v1: f64, v2: f64) -> &GateLibraryEntry {
        let pick = |g: &[f64], v: f64| {
            (0..g.len())
                .min_by(|&a, &b| (g[a] - v).abs().total_cmp(&(g[b] - v).abs()))
                .unwrap_or(0)
        };
        self.at(pick(&self.v1_grid, v1), pick(&self.v2_grid, v2))
    }

    pub fn count(&self, region: Region) -> usize {
        self.entries.iter().filter(|e| e.region == region).count()
    }

    /// CSV with columns `V1, V2, region, fA_mask, fB_mask[, fC_mask], defined_mask`.
    pub fn to_csv(&self) -> Result<String, csv::Error> {
        let n = self.config.arity();
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let mut header = vec!["V1".to_string(), "V2".into(), "region".into()];
        header.extend((0..n).map(|k| format!("f{}_mask", (b'A' + k as u8) as char)));
        header.push("defined_mask".into());
        w.write_record(&header)?;
        for e in &self.entries {
            let mut rec = vec![format!("{}", e.v1), format!("{}", e.v2), e.region.label().to_string()];
            rec.extend(e.outputs.iter().map(|m| m.to_string()));
            rec.push(e.defined_rows.to_string());
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }
}

/// Gate extraction over the (V1, V2) grid, in parallel.
pub fn sweep_operation_map(
    ctx: &LogicContext,
    config: &CouplingConfig,
    v1_grid: &[f64],
    v2_grid: &[f64],
) -> Result<OperationMap, LogicError> {
    sweep_with(ctx, config, v1_grid, v2_grid, extract_gate)
}

/// Operation map built from [`extract_robust_gate`]; the input of
/// compiler libraries.
pub fn sweep_robust_map(
    ctx: &LogicContext,
    config: &CouplingConfig,
    v1_grid: &[f64],
    v2_grid: &[f64],
) -> Result<OperationMap, LogicError> {
    sweep_with(ctx, config, v1_grid, v2_grid, extract_robust_gate)
}

type Extractor = fn(&LogicContext, &CouplingConfig, f64, f64) -> Result<GateLibraryEntry, LogicError>;

fn sweep_with(
    ctx: &LogicContext,
    config: &CouplingConfig,
    v1_grid: &[f64],
    v2_grid: &[f64],
    extract: Extractor,
) -> Result<OperationMap, LogicError> {
    if v1_grid.is_empty() {
        return Err(LogicError::EmptyGrid("V1"));
    }
    if v2_grid.is_empty() {
        return Err(LogicError::EmptyGrid("V2"));
    }
    let points: Vec<(f64, f64)> = v1_grid
        .iter()
        .flat_map(|&a| v2_grid.iter().map(move |&b| (a, b)))
        .collect();
    let entries = points
        .par_iter()
        .map(|&(a, b)| extract(ctx, config, a, b))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(OperationMap {
        config: config.clone(),
        v1_grid: v1_grid.to_vec(),
        v2_grid: v2_grid.to_vec(),
        entries,
    })
}

/// Initial content of one registry cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegistryCell {
    /// Input variable by index (0 = A). Repeating an index duplicates it.
    Input(u8),
    Const(bool),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RegistrySpec {
    pub arity: u8,
    pub cells: Vec<RegistryCell>,
}

impl RegistrySpec {
    pub fn new(arity: u8, cells: Vec<RegistryCell>) -> Self {
        Self { arity, cells }
    }

    /// `(1, A, B)`: two inputs and a constant-1 cell.
    pub fn two_bit() -> Self {
        use RegistryCell::*;
        Self::new(2, vec![Const(true), Input(0), Input(1)])
    }

    /// `(1, A, B, C, A)`: three inputs, a constant 1 and a copy of A.
    pub fn three_bit() -> Self {
        use RegistryCell::*;
        Self::new(3, vec![Const(true), Input(0), Input(1), Input(2), Input(0)])
    }

    pub fn size(&self) -> usize {
        self.cells.len()
    }

    pub fn validate(&self) -> Result<(), LogicError> {
        if !(1..=3).contains(&self.arity) {
            return Err(LogicError::InvalidSchedule(format!("arity {} outside 1-3", self.arity)));
        }
        if self.size() < self.arity as usize {
            return Err(LogicError::InvalidSchedule("registry smaller than arity".into()));
        }
        for c in &self.cells {
            if let RegistryCell::Input(i) = c {
                if *i >= self.arity {
                    return Err(LogicError::InvalidSchedule(format!("input {i} out of range")));
                }
            }
        }
        for i in 0..self.arity {
            if !self.cells.contains(&RegistryCell::Input(i)) {
                return Err(LogicError::InvalidSchedule(format!("input {i} missing from registry")));
            }
        }
        Ok(())
    }

    /// Truth-table mask of every cell before any operation.
    pub fn initial_masks(&self) -> Vec<u8> {
        let n = self.arity as usize;
        self.cells
            .iter()
            .map(|c| match c {
                RegistryCell::Input(i) => projection_mask(*i as usize, n),
                RegistryCell::Const(true) => full_mask(n),
                RegistryCell::Const(false) => 0,
            })
            .collect()
    }

    pub fn initial_bits(&self, inputs: &[bool]) -> Vec<bool> {
        self.cells
            .iter()
            .map(|c| match c {
                RegistryCell::Input(i) => inputs[*i as usize],
                RegistryCell::Const(b) => *b,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PostStep {
    None,
    /// Destructive read, sense-amplifier refresh, then a restoring write
    /// of the sensed bit so the cell is back at the input level.
    Refresh,
    /// Restoring writes.
    Write0,
    Write1,
}

/// One synchronized pulse pair plus its post-steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleLevel {
    pub config: CouplingConfig,
    pub v1: f64,
    pub v2: f64,
    /// Registry cell placed at each chain position.
    pub cells: Vec<usize>,
    /// Post-step for every registry cell.
    pub post: Vec<PostStep>,
    /// Truth tables and defined rows of the gate used, from the library.
    pub gate_outputs: Vec<u8>,
    pub gate_defined_rows: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperationSchedule {
    pub registry: RegistrySpec,
    pub levels: Vec<ScheduleLevel>,
    pub output_cell: usize,
}

impl OperationSchedule {
    pub fn validate(&self) -> Result<(), LogicError> {
        self.registry.validate()?;
        let size = self.registry.size();
        if self.output_cell >= size {
            return Err(LogicError::InvalidSchedule("output cell outside registry".into()));
        }
        for (l, level) in self.levels.iter().enumerate() {
            let k = level.config.arity();
            let bad = |msg: &str| Err(LogicError::InvalidSchedule(format!("level {l}: {msg}")));
            if level.cells.len() != k || level.gate_outputs.len() != k {
                return bad("gate arity mismatch");
            }
            if level.post.len() != size {
                return bad("post-steps must cover the registry");
            }
            let mut seen = vec![false; size];
            for &c in &level.cells {
                if c >= size || seen[c] {
                    return bad("cells must be distinct registry indices");
                }
                seen[c] = true;
            }
            // Every participating cell must leave the level restored.
            if level.cells.iter().any(|&c| level.post[c] == PostStep::None) {
                return bad("participating cell without REFRESH or WRITE");
            }
        }
        Ok(())
    }

    /// Symbolic registry contents after all levels, or `None` when some
    /// level would see an input row on which its gate is not readable.
    pub fn predict(&self) -> Option<Vec<u8>> {
        let n = self.registry.arity as usize;
        let mut state = self.registry.initial_masks();
        for level in &self.levels {
            let out = apply_gate(&level.gate_outputs, level.gate_defined_rows, &level.cells.iter().map(|&c| state[c]).collect::<Vec<_>>(), n)?;
            for (pos, &c) in level.cells.iter().enumerate() {
                state[c] = out[pos];
            }
            for (c, p) in level.post.iter().enumerate() {
                match p {
                    PostStep::Write0 => state[c] = 0,
                    PostStep::Write1 => state[c] = full_mask(n),
                    PostStep::None | PostStep::Refresh => {}
                }
            }
        }
        Some(state)
    }

    pub fn predicted_output(&self) -> Option<u8> {
        self.predict().map(|s| s[self.output_cell])
    }
}

/// Applies a gate to input functions (masks over the `n`-variable rows).
/// Returns `None` if some variable assignment feeds the gate an undefined row.
pub fn apply_gate(outputs: &[u8], defined_rows: u8, inputs: &[u8], n: usize) -> Option<Vec<u8>> {
    let mut res = vec![0u8; outputs.len()];
    for r in 0..1usize << n {
        let idx = inputs.iter().fold(0usize, |acc, m| acc << 1 | (m >> r & 1) as usize);
        if defined_rows >> idx & 1 == 0 {
            return None;
        }
        for (o, m) in res.iter_mut().zip(outputs) {
            *o |= (m >> idx & 1) << r;
        }
    }
    Some(res)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScheduleRun {
    pub output: bool,
    pub bits: Vec<bool>,
    pub ivd: Vec<f64>,
    /// Coupled pulses, reads and writes of every level [fJ].
    pub energy_fj: f64,
    pub level_energy_fj: Vec<f64>,
}

/// Simulates every level of `schedule` for one assignment of the inputs.
pub fn execute_schedule(ctx: &LogicContext, schedule: &OperationSchedule, inputs: &[bool]) -> Result<ScheduleRun, LogicError> {
    schedule.validate()?;
    if inputs.len() != schedule.registry.arity as usize {
        return Err(LogicError::Arity {
            expected: schedule.registry.arity as usize,
            got: inputs.len(),
        });
    }
    let mut ivd: Vec<f64> = schedule
        .registry
        .initial_bits(inputs)
        .iter()
        .map(|&b| if b { ctx.input_ivd_v } else { -ctx.input_ivd_v })
        .collect();
    let mut level_energy = Vec::with_capacity(schedule.levels.len());
    let mem = MemoryContext {
        device: ctx.device,
        thresholds: ctx.thresholds,
        ..ctx.memory
    };
    for (l, level) in schedule.levels.iter().enumerate() {
        let start: Vec<f64> = level.cells.iter().map(|&c| ivd[c]).collect();
        let out = run_coupled_ivd(ctx, &level.config, level.v1, level.v2, &start)?;
        let mut energy = out.energy_fj;
        for (pos, &c) in level.cells.iter().enumerate() {
            ivd[c] = out.final_ivd[pos];
        }
        for (c, step) in level.post.iter().enumerate() {
            let write = |from: f64, bit: bool| memops::restore_bit(&mem, from, bit);
            match step {
                PostStep::None => {}
                PostStep::Write0 | PostStep::Write1 => {
                    let w = write(ivd[c], *step == PostStep::Write1)?;
                    energy += w.energy_fj;
                    ivd[c] = w.bit.ivd;
                }
                PostStep::Refresh => {
                    if ctx.thresholds.classify(ivd[c]).value == Bit::Undefined {
                        return Err(LogicError::Unreadable { level: l, cell: c, ivd: ivd[c] });
                    }
                    let r = memops::read_refresh(&mem, ivd[c])?;
                    let w = write(r.refreshed.ivd, r.bit)?;
                    energy += r.energy_fj + w.energy_fj;
                    ivd[c] = w.bit.ivd;
                }
            }
        }
        level_energy.push(energy);
    }
    let mut bits = Vec::with_capacity(ivd.len());
    for (c, &u) in ivd.iter().enumerate() {
        match ctx.thresholds.classify(u).value.as_bool() {
            Some(b) => bits.push(b),
            None if c == schedule.output_cell => {
                return Err(LogicError::Unreadable {
                    level: schedule.levels.len(),
                    cell: c,
                    ivd: u,
                })
            }
            None => bits.push(u > 0.0),
        }
    }
    Ok(ScheduleRun {
        output: bits[schedule.output_cell],
        bits,
        ivd,
        energy_fj: level_energy.iter().fold(0.0, |a, e| a + e),
        level_energy_fj: level_energy,
    })
}

/// Runs `schedule` on every input assignment and returns the simulated truth
/// table of the output cell.
pub fn simulate_truth_table(ctx: &LogicContext, schedule: &OperationSchedule) -> Result<(u8, f64), LogicError> {
    let n = schedule.registry.arity as usize;
    let runs = (0..1usize << n)
        .into_par_iter()
        .map(|row| {
            let inputs: Vec<bool> = (0..n).map(|k| row_bit(row, k, n)).collect();
            execute_schedule(ctx, schedule, &inputs).map(|r| (row, r))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mask = runs.iter().filter(|(_, r)| r.output).fold(0u8, |m, (row, _)| m | 1 << row);
    let worst = runs.iter().map(|(_, r)| r.energy_fj).fold(0.0, f64::max);
    Ok((mask, worst))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn masks_put_first_cell_at_msb() {
        assert_eq!(projection_mask(0, 2), 0xC);
        assert_eq!(projection_mask(1, 2), 0xA);
        assert_eq!(projection_mask(0, 3), 0xF0);
        assert_eq!(projection_mask(2, 3), 0xAA);
        assert_eq!(full_mask(2), 0xF);
        assert_eq!(full_mask(3), 0xFF);
    }

    #[test]
    fn region_rules() {
        assert_eq!(Region::classify(&[0xC, 0xA], 0xF), Region::Identity);
        assert_eq!(Region::classify(&[0xF, 0x0], 0xF), Region::ForcedState);
        assert_eq!(Region::classify(&[0xE, 0x8], 0xF), Region::LogicOperation);
        assert_eq!(Region::classify(&[0xC, 0xA], 0x7), Region::NonReadable);
    }

    #[test]
    fn gate_application_composes_truth_tables() {
        // OR/AND gate on (A, B) then on (OR, AND) again.
        let or_and = [0xE, 0x8];
        let once = apply_gate(&or_and, 0xF, &[0xC, 0xA], 2).unwrap();
        assert_eq!(once, vec![0xE, 0x8]);
        let twice = apply_gate(&or_and, 0xF, &once, 2).unwrap();
        assert_eq!(twice, vec![0xE, 0x8]);
        // (OR, AND) feeds gate rows (0,0), (1,0) and (1,1) but never (0,1).
        assert!(apply_gate(&or_and, 0b1011, &once, 2).is_none());
        assert!(apply_gate(&or_and, 0b1101, &once, 2).is_some());
    }

    #[test]
    fn conjugate_of_or_is_and() {
        let e = GateLibraryEntry {
            config: CouplingConfig::TwoCell { index: 2 },
            v1: 0.0,
            v2: 0.0,
            outputs: vec![0xE, 0x8],
            defined_rows: 0xF,
            region: Region::LogicOperation,
            max_energy_fj: 0.0,
        };
        assert_eq!(e.conjugate_outputs(), vec![0x8, 0xE]);
    }

    #[test]
    fn registry_presets() {
        assert_eq!(RegistrySpec::two_bit().initial_masks(), vec![0xF, 0xC, 0xA]);
        assert_eq!(RegistrySpec::three_bit().initial_masks(), vec![0xFF, 0xF0, 0xCC, 0xAA, 0xF0]);
        assert!(RegistrySpec::new(2, vec![RegistryCell::Input(0)]).validate().is_err());
    }

    #[test]
    fn participating_cells_need_post_steps() {
        let s = OperationSchedule {
            registry: RegistrySpec::two_bit(),
            levels: vec![ScheduleLevel {
                config: CouplingConfig::TwoCell { index: 2 },
                v1: 0.73,
                v2: -0.73,
                cells: vec![1, 2],
                post: vec![PostStep::None, PostStep::Refresh, PostStep::None],
                gate_outputs: vec![0xE, 0x8],
                gate_defined_rows: 0xF,
            }],
            output_cell: 2,
        };
        assert!(s.validate().is_err());
    }
}
