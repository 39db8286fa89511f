//! Netlists of memcapacitive cells, RC transmission lines, access switches,
//! pulse sources and a behavioral voltage sense amplifier (VSA).
//!
//! Node 0 is ground. Every other node is either driven by a pulse source or
//! free; free node voltages are solved for by [`transient_solve`].
//!
//! Cell orientation: a cell sits between a bit-line terminal `bl` and a
//! dual-bit-line terminal `dbl`, with `V_C = V(dbl) - V(bl)`. A positive
//! pulse on `bl` therefore pushes the internal charge towards positive IVD,
//! which encodes logic 1.

mod export;
mod solver;

pub use export::{fmt_sci, waveforms_csv, WaveformSummary};
pub use solver::{transient_solve, SolveError, StepControl, Transient, Waveforms};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::{DeviceError, MemcapacitorParams};

pub type NodeId = usize;
pub const GROUND: NodeId = 0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CircuitError {
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("coupling config expects {expected} cells, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("node {0} has no path to a driven node or ground")]
    Disconnected(String),
    #[error(transparent)]
    Device(#[from] DeviceError),
}

fn positive(name: &'static str, value: f64) -> Result<(), CircuitError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(CircuitError::InvalidParameter {
            name,
            value,
            reason: "must be finite and > 0",
        })
    }
}

fn non_negative(name: &'static str, value: f64) -> Result<(), CircuitError> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(CircuitError::InvalidParameter {
            name,
            value,
            reason: "must be finite and >= 0",
        })
    }
}

/// Distributed RC line, lumped into `n_segments` series-R / shunt-C sections.
/// A zero length removes the line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransmissionLineParams {
    pub r_per_mm_kohm: f64,
    pub c_per_mm_pf: f64,
    pub length_mm: f64,
    pub n_segments: usize,
}

impl Default for TransmissionLineParams {
    fn default() -> Self {
        Self {
            r_per_mm_kohm: 1.5,
            c_per_mm_pf: 0.2,
            length_mm: 1.0,
            n_segments: 10,
        }
    }
}

impl TransmissionLineParams {
    pub fn none() -> Self {
        Self {
            length_mm: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), CircuitError> {
        positive("r_per_mm_kohm", self.r_per_mm_kohm)?;
        positive("c_per_mm_pf", self.c_per_mm_pf)?;
        non_negative("length_mm", self.length_mm)?;
        if self.n_segments == 0 {
            return Err(CircuitError::InvalidParameter {
                name: "n_segments",
                value: 0.0,
                reason: "must be >= 1",
            });
        }
        Ok(())
    }

    pub fn is_present(&self) -> bool {
        self.length_mm > 0.0
    }

    pub fn segment_resistance(&self) -> f64 {
        self.r_per_mm_kohm * 1e3 * self.length_mm / self.n_segments as f64
    }

    pub fn segment_capacitance(&self) -> f64 {
        self.c_per_mm_pf * 1e-12 * self.length_mm / self.n_segments as f64
    }
}

/// Trapezoidal pulse. Edges are linear with the given slew rate and `width`
/// is the full width at half amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSpec {
    pub amplitude_v: f64,
    pub width_ns: f64,
    pub slew_v_per_ns: f64,
    pub start_ns: f64,
}

impl PulseSpec {
    /// Pulse with 10 V/ns edges starting at 0.1 ns.
    pub fn new(amplitude_v: f64, width_ns: f64) -> Self {
        Self {
            amplitude_v,
            width_ns,
            slew_v_per_ns: 10.0,
            start_ns: 0.1,
        }
    }

    pub fn starting_at(mut self, start_ns: f64) -> Self {
        self.start_ns = start_ns;
        self
    }

    pub fn with_amplitude(mut self, amplitude_v: f64) -> Self {
        self.amplitude_v = amplitude_v;
        self
    }

    pub fn validate(&self) -> Result<(), CircuitError> {
        positive("width_ns", self.width_ns)?;
        positive("slew_v_per_ns", self.slew_v_per_ns)?;
        non_negative("start_ns", self.start_ns)?;
        if !self.amplitude_v.is_finite() {
            return Err(CircuitError::InvalidParameter {
                name: "amplitude_v",
                value: self.amplitude_v,
                reason: "must be finite",
            });
        }
        if self.rise_ns() > self.width_ns {
            return Err(CircuitError::InvalidParameter {
                name: "slew_v_per_ns",
                value: self.slew_v_per_ns,
                reason: "edges longer than the pulse width",
            });
        }
        Ok(())
    }

    pub fn rise_ns(&self) -> f64 {
        self.amplitude_v.abs() / self.slew_v_per_ns
    }

    /// Time at which the falling edge reaches zero.
    pub fn end_ns(&self) -> f64 {
        self.start_ns + self.width_ns + self.rise_ns()
    }

    pub fn value(&self, t_ns: f64) -> f64 {
        let tr = self.rise_ns();
        let t0 = self.start_ns;
        let t1 = t0 + tr;
        let t2 = t0 + self.width_ns;
        let t3 = t2 + tr;
        if tr == 0.0 || t_ns <= t0 || t_ns >= t3 {
            0.0
        } else if t_ns < t1 {
            self.amplitude_v * (t_ns - t0) / tr
        } else if t_ns <= t2 {
            self.amplitude_v
        } else {
            self.amplitude_v * (t3 - t_ns) / tr
        }
    }

    /// Corner times of the waveform.
    pub fn breakpoints(&self) -> [f64; 4] {
        let tr = self.rise_ns();
        [
            self.start_ns,
            self.start_ns + tr,
            self.start_ns + self.width_ns,
            self.end_ns(),
        ]
    }
}

/// Behavioral voltage sense amplifier.
///
/// `V_VSA` is the voltage across a sense resistor between the cell's dual
/// bit line terminal and ground. During `delay_ns` after the read pulse
/// starts the amplifier only observes; if the peak `V_VSA` exceeded
/// `threshold_v` it then drives `refresh_pulse` (relative to the end of the
/// delay) onto the bit line, writing 0 back.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VsaParams {
    pub threshold_v: f64,
    pub delay_ns: f64,
    pub refresh_pulse: PulseSpec,
    pub internal_loss_fj: f64,
    /// Default puts the response of an empty default cell on the threshold
    /// (see `memops::calibrate_sense_resistance`).
    pub sense_resistance_ohm: f64,
}

impl Default for VsaParams {
    fn default() -> Self {
        Self {
            threshold_v: 0.1,
            delay_ns: 0.5,
            refresh_pulse: PulseSpec::new(-1.0, 1.0).starting_at(0.05),
            internal_loss_fj: 1.0,
            sense_resistance_ohm: 14_830.0,
        }
    }
}

impl VsaParams {
    pub fn validate(&self, read_width_ns: f64) -> Result<(), CircuitError> {
        positive("threshold_v", self.threshold_v)?;
        positive("sense_resistance_ohm", self.sense_resistance_ohm)?;
        non_negative("internal_loss_fj", self.internal_loss_fj)?;
        self.refresh_pulse.validate()?;
        if !(self.delay_ns >= read_width_ns) {
            return Err(CircuitError::InvalidParameter {
                name: "delay_ns",
                value: self.delay_ns,
                reason: "VSA delay shorter than the read pulse",
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResistorKind {
    Line,
    Switch,
    Sense,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Resistor {
    pub a: NodeId,
    pub b: NodeId,
    pub ohms: f64,
    pub kind: ResistorKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Capacitor {
    pub a: NodeId,
    pub b: NodeId,
    pub farads: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellInstance {
    pub label: String,
    pub params: MemcapacitorParams,
    pub bl: NodeId,
    pub dbl: NodeId,
    /// +1 when the bit-line terminal faces the external drive.
    pub polarity: i8,
    pub initial_ivd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Source {
    pub node: NodeId,
    pub pulses: Vec<PulseSpec>,
}

impl Source {
    pub fn value(&self, t_ns: f64) -> f64 {
        self.pulses.iter().map(|p| p.value(t_ns)).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VsaAttachment {
    pub params: VsaParams,
    pub sense_node: NodeId,
    pub source: usize,
    pub read_start_ns: f64,
}

/// Circuit topology plus initial cell states.
#[derive(Debug, Clone, PartialEq)]
pub struct Netlist {
    pub node_names: Vec<String>,
    pub resistors: Vec<Resistor>,
    pub capacitors: Vec<Capacitor>,
    pub cells: Vec<CellInstance>,
    pub sources: Vec<Source>,
    pub vsa: Option<VsaAttachment>,
    /// Resistor whose current is reported as the end-of-line current.
    pub probe: Option<usize>,
    /// Suggested simulation end [ns].
    pub t_stop_ns: f64,
}

impl Default for Netlist {
    fn default() -> Self {
        Self::new()
    }
}

impl Netlist {
    pub fn new() -> Self {
        Self {
            node_names: vec!["gnd".into()],
            resistors: Vec::new(),
            capacitors: Vec::new(),
            cells: Vec::new(),
            sources: Vec::new(),
            vsa: None,
            probe: None,
            t_stop_ns: 0.0,
        }
    }

    pub fn node_count(&self) -> usize {
        self.node_names.len()
    }

    pub fn add_node(&mut self, name: impl Into<String>) -> NodeId {
        self.node_names.push(name.into());
        self.node_names.len() - 1
    }

    pub fn add_resistor(&mut self, a: NodeId, b: NodeId, ohms: f64, kind: ResistorKind) -> usize {
        self.resistors.push(Resistor { a, b, ohms, kind });
        self.resistors.len() - 1
    }

    pub fn add_capacitor(&mut self, a: NodeId, b: NodeId, farads: f64) {
        self.capacitors.push(Capacitor { a, b, farads });
    }

    pub fn add_source(&mut self, node: NodeId, pulses: Vec<PulseSpec>) -> usize {
        self.sources.push(Source { node, pulses });
        self.sources.len() - 1
    }

    /// Lays an RC ladder from `from` towards `to`; returns the far-end node.
    /// When `to` is given the last resistor lands on it.
    pub fn add_line(&mut self, from: NodeId, line: &TransmissionLineParams, prefix: &str, to: Option<NodeId>) -> NodeId {
        if !line.is_present() {
            return match to {
                Some(t) if t != from => {
                    // Degenerate line: ideal wire, modelled as a tiny resistor.
                    self.add_resistor(from, t, 1e-3, ResistorKind::Line);
                    t
                }
                _ => from,
            };
        }
        let r = line.segment_resistance();
        let c = line.segment_capacitance();
        let mut prev = from;
        for k in 0..line.n_segments {
            let last = k + 1 == line.n_segments;
            let next = match (last, to) {
                (true, Some(t)) => t,
                _ => self.add_node(format!("{prefix}{}", k + 1)),
            };
            // Pi section: half the segment capacitance at each end.
            self.add_resistor(prev, next, r, ResistorKind::Line);
            for end in [prev, next] {
                if end != GROUND {
                    self.add_capacitor(end, GROUND, 0.5 * c);
                }
            }
            prev = next;
        }
        prev
    }

    pub fn driven_nodes(&self) -> Vec<bool> {
        let mut d = vec![false; self.node_count()];
        for s in &self.sources {
            d[s.node] = true;
        }
        d
    }

    /// Checks parameters and that every free node reaches ground or a source
    /// through resistors, capacitors or cells.
    pub fn validate(&self) -> Result<(), CircuitError> {
        for c in &self.cells {
            c.params.validate()?;
        }
        for r in &self.resistors {
            positive("resistance", r.ohms)?;
        }
        for c in &self.capacitors {
            positive("capacitance", c.farads)?;
        }
        for s in &self.sources {
            for p in &s.pulses {
                p.validate()?;
            }
        }
        let n = self.node_count();
        let mut adj = vec![Vec::new(); n];
        let mut link = |a: NodeId, b: NodeId| {
            adj[a].push(b);
            adj[b].push(a);
        };
        self.resistors.iter().for_each(|r| link(r.a, r.b));
        self.capacitors.iter().for_each(|c| link(c.a, c.b));
        self.cells.iter().for_each(|c| link(c.bl, c.dbl));
        let mut seen = vec![false; n];
        let mut stack = vec![GROUND];
        stack.extend(self.sources.iter().map(|s| s.node));
        while let Some(k) = stack.pop() {
            if std::mem::replace(&mut seen[k], true) {
                continue;
            }
            stack.extend(adj[k].iter().copied().filter(|&j| !seen[j]));
        }
        if let Some(k) = seen.iter().position(|s| !s) {
            return Err(CircuitError::Disconnected(self.node_names[k].clone()));
        }
        Ok(())
    }

    /// Latest breakpoint of all sources.
    pub fn last_event_ns(&self) -> f64 {
        self.sources
            .iter()
            .flat_map(|s| s.pulses.iter().map(|p| p.end_ns()))
            .fold(0.0, f64::max)
    }
}

/// Access switch on-resistance [ohm].
pub const SWITCH_ON_RESISTANCE: f64 = 1_000.0;

/// Time allowed for the lines to discharge after the last pulse edge [ns].
pub const SETTLE_NS: f64 = 1.0;

/// `drive -> BL line -> switch -> cell -> DBL line -> ground`.
pub fn build_single_cell(
    device: &MemcapacitorParams,
    line: &TransmissionLineParams,
    drive: &PulseSpec,
    initial_ivd: f64,
) -> Result<Netlist, CircuitError> {
    device.validate()?;
    line.validate()?;
    drive.validate()?;
    let mut net = Netlist::new();
    let src = net.add_node("drive");
    net.add_source(src, vec![*drive]);
    let bl_end = net.add_line(src, line, "bl", None);
    let cell_bl = net.add_node("cell_bl");
    let sw = net.add_resistor(bl_end, cell_bl, SWITCH_ON_RESISTANCE, ResistorKind::Switch);
    net.probe = Some(sw);
    let cell_dbl = if line.is_present() { net.add_node("cell_dbl") } else { GROUND };
    net.cells.push(CellInstance {
        label: "cell".into(),
        params: *device,
        bl: cell_bl,
        dbl: cell_dbl,
        polarity: 1,
        initial_ivd,
    });
    if cell_dbl != GROUND {
        net.add_line(cell_dbl, line, "dbl", Some(GROUND));
    }
    net.t_stop_ns = net.last_event_ns() + SETTLE_NS;
    net.validate()?;
    Ok(net)
}

/// Read circuit: `drive -> BL line -> switch -> cell -> sense resistor -> ground`,
/// with the VSA observing the sense node.
pub fn build_read(
    device: &MemcapacitorParams,
    line: &TransmissionLineParams,
    read: &PulseSpec,
    vsa: &VsaParams,
    initial_ivd: f64,
) -> Result<Netlist, CircuitError> {
    device.validate()?;
    line.validate()?;
    read.validate()?;
    vsa.validate(read.width_ns)?;
    let mut net = Netlist::new();
    let src = net.add_node("drive");
    let source = net.add_source(src, vec![*read]);
    let bl_end = net.add_line(src, line, "bl", None);
    let cell_bl = net.add_node("cell_bl");
    let sw = net.add_resistor(bl_end, cell_bl, SWITCH_ON_RESISTANCE, ResistorKind::Switch);
    net.probe = Some(sw);
    let sense = net.add_node("vsa_in");
    net.cells.push(CellInstance {
        label: "cell".into(),
        params: *device,
        bl: cell_bl,
        dbl: sense,
        polarity: 1,
        initial_ivd,
    });
    net.add_resistor(sense, GROUND, vsa.sense_resistance_ohm, ResistorKind::Sense);
    net.vsa = Some(VsaAttachment {
        params: *vsa,
        sense_node: sense,
        source,
        read_start_ns: read.start_ns,
    });
    let refresh_end = read.start_ns + vsa.delay_ns + vsa.refresh_pulse.end_ns();
    net.t_stop_ns = read.end_ns().max(refresh_end) + SETTLE_NS;
    net.validate()?;
    Ok(net)
}

/// How coupled cells are wired between the two drives.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum CouplingConfig {
    /// Series chain of two cells, one of the four orientation pairs.
    TwoCell { index: u8 },
    /// Fixed series chain of three cells.
    ThreeCellFixed,
}

impl CouplingConfig {
    pub const ALL_TWO_CELL: [CouplingConfig; 4] = [
        CouplingConfig::TwoCell { index: 1 },
        CouplingConfig::TwoCell { index: 2 },
        CouplingConfig::TwoCell { index: 3 },
        CouplingConfig::TwoCell { index: 4 },
    ];

    pub fn two_cell(index: u8) -> Result<Self, CircuitError> {
        if (1..=4).contains(&index) {
            Ok(CouplingConfig::TwoCell { index })
        } else {
            Err(CircuitError::InvalidParameter {
                name: "config_index",
                value: index as f64,
                reason: "two-cell configs are numbered 1-4",
            })
        }
    }

    pub fn arity(&self) -> usize {
        match self {
            CouplingConfig::TwoCell { .. } => 2,
            CouplingConfig::ThreeCellFixed => 3,
        }
    }

    /// Orientation of each cell along the chain, from the V1 end. +1 means
    /// the cell's bit-line terminal faces V1.
    pub fn polarities(&self) -> Vec<i8> {
        match self {
            // Config 2: both bit lines face their own outer drive.
            CouplingConfig::TwoCell { index: 1 } => vec![1, 1],
            CouplingConfig::TwoCell { index: 2 } => vec![1, -1],
            CouplingConfig::TwoCell { index: 3 } => vec![-1, 1],
            CouplingConfig::TwoCell { .. } => vec![-1, -1],
            CouplingConfig::ThreeCellFixed => vec![1, 1, 1],
        }
    }

    pub fn label(&self) -> String {
        match self {
            CouplingConfig::TwoCell { index } => format!("config{index}"),
            CouplingConfig::ThreeCellFixed => "fixed3".into(),
        }
    }
}

/// Electrical context shared by all coupled-cell experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingParams {
    pub line: TransmissionLineParams,
    /// Parasitic capacitance from each internal chain node to ground [fF].
    pub node_parasitic_ff: f64,
    pub switch_ohm: f64,
}

impl Default for CouplingParams {
    fn default() -> Self {
        Self {
            line: TransmissionLineParams::default(),
            node_parasitic_ff: 1.0,
            switch_ohm: SWITCH_ON_RESISTANCE,
        }
    }
}

/// Series chain `V1 -> line -> switch -> cell_0 -> ... -> cell_n -> switch -> line -> V2`.
///
/// Cell `k` is oriented by `config.polarities()[k]`; internal chain nodes
/// carry a parasitic capacitance to ground.
pub fn build_coupled(
    cells: &[(MemcapacitorParams, f64)],
    config: &CouplingConfig,
    drives: (PulseSpec, PulseSpec),
    coupling: &CouplingParams,
) -> Result<Netlist, CircuitError> {
    if cells.len() != config.arity() {
        return Err(CircuitError::Arity {
            expected: config.arity(),
            got: cells.len(),
        });
    }
    build_chain(cells, &config.polarities(), drives, coupling)
}

/// Series chain with explicit orientations (+1: bit-line terminal towards V1).
pub fn build_chain(
    cells: &[(MemcapacitorParams, f64)],
    polarities: &[i8],
    drives: (PulseSpec, PulseSpec),
    coupling: &CouplingParams,
) -> Result<Netlist, CircuitError> {
    if cells.len() != polarities.len() || cells.is_empty() {
        return Err(CircuitError::Arity {
            expected: polarities.len(),
            got: cells.len(),
        });
    }
    coupling.line.validate()?;
    positive("switch_ohm", coupling.switch_ohm)?;
    non_negative("node_parasitic_ff", coupling.node_parasitic_ff)?;
    drives.0.validate()?;
    drives.1.validate()?;

    let mut net = Netlist::new();
    let d1 = net.add_node("v1");
    net.add_source(d1, vec![drives.0]);
    let end1 = net.add_line(d1, &coupling.line, "l1_", None);
    let mut left = net.add_node("c0_left");
    let sw = net.add_resistor(end1, left, coupling.switch_ohm, ResistorKind::Switch);
    net.probe = Some(sw);
    let n = cells.len();
    for (k, ((params, ivd), &pol)) in cells.iter().zip(polarities).enumerate() {
        let right = net.add_node(format!("c{k}_right"));
        let (bl, dbl) = if pol > 0 { (left, right) } else { (right, left) };
        net.cells.push(CellInstance {
            label: format!("cell{k}"),
            params: *params,
            bl,
            dbl,
            polarity: pol,
            initial_ivd: *ivd,
        });
        if k + 1 < n {
            if coupling.node_parasitic_ff > 0.0 {
                net.add_capacitor(right, GROUND, coupling.node_parasitic_ff * 1e-15);
            }
            let next_left = net.add_node(format!("c{}_left", k + 1));
            net.add_resistor(right, next_left, coupling.switch_ohm, ResistorKind::Switch);
            if coupling.node_parasitic_ff > 0.0 {
                net.add_capacitor(next_left, GROUND, coupling.node_parasitic_ff * 1e-15);
            }
            left = next_left;
        } else {
            left = right;
        }
    }
    let end2 = net.add_node("l2_end");
    net.add_resistor(left, end2, coupling.switch_ohm, ResistorKind::Switch);
    let d2 = net.add_node("v2");
    net.add_source(d2, vec![drives.1]);
    // Lay the second line from the drive towards the chain so that node order
    // stays banded: the far end of that ladder is end2.
    net.add_line(d2, &coupling.line, "l2_", Some(end2));
    net.t_stop_ns = net.last_event_ns() + SETTLE_NS;
    net.validate()?;
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pulse_shape() {
        let p = PulseSpec::new(1.0, 1.0);
        assert_eq!(p.value(0.0), 0.0);
        assert!((p.value(0.15) - 0.5).abs() < 1e-12);
        assert_eq!(p.value(0.5), 1.0);
        assert!((p.value(1.15) - 0.5).abs() < 1e-12);
        assert_eq!(p.value(1.3), 0.0);
        assert!((p.end_ns() - 1.2).abs() < 1e-12);
        let n = PulseSpec::new(-0.5, 0.5);
        assert!(n.value(0.3) < 0.0);
    }

    #[test]
    fn single_cell_default_has_two_ladders() {
        let net = build_single_cell(
            &MemcapacitorParams::default(),
            &TransmissionLineParams::default(),
            &PulseSpec::new(1.0, 1.0),
            0.0,
        )
        .unwrap();
        let line_r = net.resistors.iter().filter(|r| r.kind == ResistorKind::Line).count();
        assert_eq!(line_r, 20);
        // Two half capacitors per segment; the grounded far end gets none.
        assert_eq!(net.capacitors.len(), 39);
        assert_eq!(net.cells.len(), 1);
    }

    #[test]
    fn segment_count_changes_size_only() {
        let mk = |n| {
            let line = TransmissionLineParams {
                n_segments: n,
                ..Default::default()
            };
            build_single_cell(&MemcapacitorParams::default(), &line, &PulseSpec::new(1.0, 1.0), 0.0).unwrap()
        };
        let (a, b) = (mk(1), mk(20));
        assert!(b.node_count() > a.node_count());
        assert_eq!(a.cells.len(), b.cells.len());
        assert_eq!(a.sources.len(), b.sources.len());
    }

    #[test]
    fn omitted_line_drives_cell_directly() {
        let net = build_single_cell(
            &MemcapacitorParams::default(),
            &TransmissionLineParams::none(),
            &PulseSpec::new(1.0, 1.0),
            0.0,
        )
        .unwrap();
        assert!(net.capacitors.is_empty());
        assert_eq!(net.cells[0].dbl, GROUND);
    }

    #[test]
    fn coupled_arity_checked() {
        let cell = (MemcapacitorParams::default(), 0.0);
        let p = PulseSpec::new(0.73, 1.0);
        let err = build_coupled(&[cell], &CouplingConfig::TwoCell { index: 2 }, (p, p), &CouplingParams::default());
        assert_eq!(err.unwrap_err(), CircuitError::Arity { expected: 2, got: 1 });
        assert!(build_coupled(&[cell; 3], &CouplingConfig::ThreeCellFixed, (p, p), &CouplingParams::default()).is_ok());
    }

    #[test]
    fn two_cell_configs_cover_all_orientations() {
        let mut seen: Vec<Vec<i8>> = CouplingConfig::ALL_TWO_CELL.iter().map(|c| c.polarities()).collect();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 4);
        assert!(CouplingConfig::two_cell(5).is_err());
    }

    #[test]
    fn disconnected_node_rejected() {
        let mut net = Netlist::new();
        let a = net.add_node("a");
        net.add_source(a, vec![PulseSpec::new(1.0, 1.0)]);
        net.add_node("island");
        assert!(matches!(net.validate(), Err(CircuitError::Disconnected(n)) if n == "island"));
    }
}
