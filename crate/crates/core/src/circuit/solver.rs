//! Charge-based transient analysis.
//!
//! Unknowns per step are the free node voltages and the IVD `u = Q/C2` of
//! every cell. Capacitors and cell plates are integrated on their charges,
//! cell IVDs on `C2 du/dt = -I(V_mid)`, all with the trapezoidal rule; the
//! first step uses backward Euler to absorb inconsistent initial currents.
//! Each step is solved by damped Newton iteration with an analytic Jacobian.

use serde::Serialize;
use thiserror::Error;

use super::{Netlist, NodeId, PulseSpec, GROUND};
use crate::device::SimmonsJunction;
use crate::numerics::DenseMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("Newton iteration did not converge at t = {t_ns} ns (residual {residual:e})")]
    NewtonFailure { t_ns: f64, residual: f64 },
    #[error("time step underflow at t = {t_ns} ns")]
    StepUnderflow { t_ns: f64 },
    #[error("singular circuit matrix at t = {t_ns} ns")]
    Singular { t_ns: f64 },
    #[error("invalid time span {0} ns")]
    InvalidSpan(f64),
    #[error(transparent)]
    Circuit(#[from] super::CircuitError),
}

/// Step size and accuracy controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepControl {
    pub dt_ps: f64,
    /// Compare each step against two half steps and subdivide when they differ
    /// by more than `halving_tol_v`.
    pub halving_check: bool,
    pub halving_tol_v: f64,
    pub min_dt_ps: f64,
    pub max_newton: usize,
    /// Newton update tolerance on voltages [V].
    pub newton_tol_v: f64,
    /// Record every n-th accepted step (the last one is always recorded).
    pub record_stride: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            dt_ps: 1.0,
            halving_check: true,
            halving_tol_v: 1e-3,
            min_dt_ps: 1e-4,
            max_newton: 60,
            newton_tol_v: 1e-9,
            record_stride: 1,
        }
    }
}

impl StepControl {
    /// Fixed steps without the halving check, for parameter sweeps.
    pub fn fast(dt_ps: f64) -> Self {
        Self {
            dt_ps,
            halving_check: false,
            record_stride: 10,
            ..Self::default()
        }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.record_stride = stride.max(1);
        self
    }
}

/// Simulated time series. Energies are cumulative.
#[derive(Debug, Clone, Serialize)]
pub struct Waveforms {
    pub time_ns: Vec<f64>,
    pub node_names: Vec<String>,
    /// `[node][sample]`, ground excluded.
    pub node_voltages: Vec<Vec<f64>>,
    pub cell_labels: Vec<String>,
    /// `[cell][sample]` internal charge Q [C].
    pub cell_q: Vec<Vec<f64>>,
    /// `[cell][sample]` plate charge q [C].
    pub cell_plate_q: Vec<Vec<f64>>,
    /// `[cell][sample]` IVD [V].
    pub cell_ivd: Vec<Vec<f64>>,
    /// Current through the probe resistor [uA].
    pub end_current_ua: Vec<f64>,
    /// Tunneling dissipation summed over cells [fJ].
    pub cell_energy_fj: Vec<f64>,
    /// Line, switch and sense resistor dissipation [fJ].
    pub periphery_energy_fj: Vec<f64>,
    /// VSA internal loss [fJ].
    pub vsa_energy_fj: Vec<f64>,
    pub total_energy_fj: Vec<f64>,
    pub max_kcl_residual_a: f64,
    pub vsa_activated: Option<bool>,
    pub vsa_peak_v: Option<f64>,
    pub accepted_steps: usize,
}

impl Waveforms {
    pub fn final_ivd(&self) -> Vec<f64> {
        self.cell_ivd.iter().map(|v| *v.last().unwrap_or(&0.0)).collect()
    }

    pub fn node(&self, name: &str) -> Option<&[f64]> {
        self.node_names
            .iter()
            .position(|n| n == name)
            .map(|k| self.node_voltages[k].as_slice())
    }

    pub fn peak_abs_current_ua(&self) -> f64 {
        self.end_current_ua.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn final_cell_energy_fj(&self) -> f64 {
        *self.cell_energy_fj.last().unwrap_or(&0.0)
    }

    pub fn final_total_energy_fj(&self) -> f64 {
        *self.total_energy_fj.last().unwrap_or(&0.0)
    }

    pub fn final_periphery_energy_fj(&self) -> f64 {
        *self.periphery_energy_fj.last().unwrap_or(&0.0)
    }

    /// Operation energy: tunneling in the cells plus VSA activation cost.
    pub fn operation_energy_fj(&self) -> f64 {
        self.final_cell_energy_fj() + *self.vsa_energy_fj.last().unwrap_or(&0.0)
    }
}

#[derive(Debug, Clone)]
struct CellModel {
    junction: SimmonsJunction,
    c0: f64,
    c2: f64,
    ratio: f64,
    bl: NodeId,
    dbl: NodeId,
}

/// Everything that changes from step to step.
#[derive(Debug, Clone)]
struct StepState {
    t_ns: f64,
    v: Vec<f64>,
    u: Vec<f64>,
    cap_i: Vec<f64>,
    plate_i: Vec<f64>,
    tunnel_i: Vec<f64>,
    cell_energy: f64,
    periphery_energy: f64,
    /// Trapezoidal history has been established.
    started: bool,
}

/// Incremental transient run; lets a caller change sources between segments.
pub struct Transient<'a> {
    net: &'a Netlist,
    ctl: StepControl,
    cells: Vec<CellModel>,
    /// Unknown index of each node, `None` for ground and driven nodes.
    node_unknown: Vec<Option<usize>>,
    cell_unknown: Vec<usize>,
    n_unknowns: usize,
    extra: Vec<(usize, PulseSpec)>,
    state: StepState,
    vsa_energy: f64,
    vsa_activated: Option<bool>,
    vsa_peak: Option<f64>,
    max_kcl: f64,
    steps: usize,
    out: Waveforms,
    matrix: DenseMatrix,
}

impl<'a> Transient<'a> {
    pub fn new(net: &'a Netlist, ctl: StepControl) -> Result<Self, SolveError> {
        net.validate()?;
        let driven = net.driven_nodes();
        let cells: Vec<CellModel> = net
            .cells
            .iter()
            .map(|c| CellModel {
                junction: c.params.junction(),
                c0: c.params.c0(),
                c2: c.params.c2(),
                ratio: c.params.coupling_ratio(),
                bl: c.bl,
                dbl: c.dbl,
            })
            .collect();
        // Node order follows construction order (chains are banded); each
        // cell IVD goes right after the later of its two terminals.
        let mut after_node: Vec<Vec<usize>> = vec![Vec::new(); net.node_count()];
        for (k, c) in net.cells.iter().enumerate() {
            after_node[c.bl.max(c.dbl)].push(k);
        }
        let mut node_unknown = vec![None; net.node_count()];
        let mut cell_unknown = vec![0; cells.len()];
        let mut n = 0;
        for node in 0..net.node_count() {
            if node != GROUND && !driven[node] {
                node_unknown[node] = Some(n);
                n += 1;
            }
            for &k in &after_node[node] {
                cell_unknown[k] = n;
                n += 1;
            }
        }
        let mut v = vec![0.0; net.node_count()];
        for s in &net.sources {
            v[s.node] = s.value(0.0);
        }
        let state = StepState {
            t_ns: 0.0,
            v,
            u: net.cells.iter().map(|c| c.initial_ivd).collect(),
            cap_i: vec![0.0; net.capacitors.len()],
            plate_i: vec![0.0; cells.len()],
            tunnel_i: vec![0.0; cells.len()],
            cell_energy: 0.0,
            periphery_energy: 0.0,
            started: false,
        };
        let out = Waveforms {
            time_ns: Vec::new(),
            node_names: net.node_names[1..].to_vec(),
            node_voltages: vec![Vec::new(); net.node_count() - 1],
            cell_labels: net.cells.iter().map(|c| c.label.clone()).collect(),
            cell_q: vec![Vec::new(); cells.len()],
            cell_plate_q: vec![Vec::new(); cells.len()],
            cell_ivd: vec![Vec::new(); cells.len()],
            end_current_ua: Vec::new(),
            cell_energy_fj: Vec::new(),
            periphery_energy_fj: Vec::new(),
            vsa_energy_fj: Vec::new(),
            total_energy_fj: Vec::new(),
            max_kcl_residual_a: 0.0,
            vsa_activated: None,
            vsa_peak_v: None,
            accepted_steps: 0,
        };
        let mut tr = Self {
            net,
            ctl,
            cells,
            node_unknown,
            cell_unknown,
            n_unknowns: n,
            extra: Vec::new(),
            state,
            vsa_energy: 0.0,
            vsa_activated: None,
            vsa_peak: None,
            max_kcl: 0.0,
            steps: 0,
            out,
            matrix: DenseMatrix::zeros(n),
        };
        let tunnel: Vec<f64> = (0..tr.cells.len())
            .map(|k| tr.tunnel_current(k, &tr.state.v, tr.state.u[k]).0)
            .collect();
        tr.state.tunnel_i = tunnel;
        tr.record();
        Ok(tr)
    }

    pub fn time_ns(&self) -> f64 {
        self.state.t_ns
    }

    pub fn cell_ivd(&self) -> &[f64] {
        &self.state.u
    }

    pub fn node_voltage(&self, node: NodeId) -> f64 {
        self.state.v[node]
    }

    /// Adds a pulse to source `source` for the rest of the run.
    pub fn add_pulse(&mut self, source: usize, pulse: PulseSpec) {
        self.extra.push((source, pulse));
    }

    pub fn add_vsa_loss(&mut self, fj: f64) {
        self.vsa_energy += fj;
    }

    fn source_value(&self, node: NodeId, t_ns: f64) -> Option<f64> {
        let mut found = false;
        let mut v = 0.0;
        for (k, s) in self.net.sources.iter().enumerate() {
            if s.node == node {
                found = true;
                v += s.value(t_ns);
                v += self
                    .extra
                    .iter()
                    .filter(|(src, _)| *src == k)
                    .map(|(_, p)| p.value(t_ns))
                    .sum::<f64>();
            }
        }
        found.then_some(v)
    }

    fn breakpoints_between(&self, t0: f64, t1: f64) -> Option<f64> {
        self.net
            .sources
            .iter()
            .flat_map(|s| s.pulses.iter())
            .chain(self.extra.iter().map(|(_, p)| p))
            .flat_map(|p| p.breakpoints())
            .filter(|&b| b > t0 + 1e-9 && b < t1 - 1e-9)
            .fold(None, |m: Option<f64>, b| Some(m.map_or(b, |m| m.min(b))))
    }

    fn tunnel_current(&self, k: usize, v: &[f64], u: f64) -> (f64, f64, f64) {
        let c = &self.cells[k];
        let vc = v[c.dbl] - v[c.bl];
        let vm = u * (1.0 - c.ratio) + c.ratio * vc;
        let (i, g) = c.junction.current_and_conductance(vm);
        (i, g, vm)
    }

    /// Advances the solution to `t_end_ns`.
    pub fn advance_to(&mut self, t_end_ns: f64) -> Result<(), SolveError> {
        if !t_end_ns.is_finite() {
            return Err(SolveError::InvalidSpan(t_end_ns));
        }
        let dt = self.ctl.dt_ps * 1e-3;
        while self.state.t_ns < t_end_ns - 1e-12 {
            let mut t1 = (self.state.t_ns + dt).min(t_end_ns);
            if let Some(b) = self.breakpoints_between(self.state.t_ns, t1) {
                t1 = b;
            }
            // Avoid a sliver step right before an event.
            if t_end_ns - t1 < 1e-3 * dt {
                t1 = t_end_ns;
            }
            let from = self.state.clone();
            let next = self.controlled_step(&from, t1)?;
            self.accept(next);
        }
        Ok(())
    }

    fn controlled_step(&mut self, from: &StepState, t1: f64) -> Result<StepState, SolveError> {
        let full = self.newton_step(from, t1)?;
        if !self.ctl.halving_check {
            return Ok(full);
        }
        let h = t1 - from.t_ns;
        let tm = from.t_ns + 0.5 * h;
        let half1 = self.newton_step(from, tm)?;
        let half2 = self.newton_step(&half1, t1)?;
        let err = full
            .v
            .iter()
            .zip(&half2.v)
            .chain(full.u.iter().zip(&half2.u))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if err <= self.ctl.halving_tol_v {
            return Ok(half2);
        }
        if 0.5 * h < self.ctl.min_dt_ps * 1e-3 {
            return Err(SolveError::StepUnderflow { t_ns: from.t_ns });
        }
        let first = self.controlled_step(from, tm)?;
        self.controlled_step(&first, t1)
    }

    /// One implicit step from `from` to `t1`.
    fn newton_step(&mut self, from: &StepState, t1: f64) -> Result<StepState, SolveError> {
        let h = (t1 - from.t_ns) * 1e-9;
        let trap = from.started;
        let alpha = if trap { 2.0 / h } else { 1.0 / h };
        let beta = if trap { 1.0 } else { 0.0 };
        let net = self.net;

        let mut v = from.v.clone();
        for s in &net.sources {
            v[s.node] = self.source_value(s.node, t1).unwrap_or(0.0);
        }
        let mut u = from.u.clone();
        let n = self.n_unknowns;
        let mut rhs = vec![0.0; n];
        let mut converged = false;
        let mut residual = f64::INFINITY;

        for _ in 0..self.ctl.max_newton {
            self.matrix.clear();
            rhs.iter_mut().for_each(|x| *x = 0.0);
            residual = self.assemble(from, &v, &u, alpha, beta, true, &mut rhs);
            // Newton: J dx = -F
            rhs.iter_mut().for_each(|x| *x = -*x);
            if !self.matrix.solve_in_place(&mut rhs) {
                return Err(SolveError::Singular { t_ns: t1 });
            }
            // Damping: cap the change of any middle-layer voltage.
            let mut scale: f64 = 1.0;
            for (k, c) in self.cells.iter().enumerate() {
                let dv = |node: NodeId| self.node_unknown[node].map_or(0.0, |j| rhs[j]);
                let dvm = rhs[self.cell_unknown[k]] * (1.0 - c.ratio) + c.ratio * (dv(c.dbl) - dv(c.bl));
                if dvm.abs() > 0.25 {
                    scale = scale.min(0.25 / dvm.abs());
                }
            }
            let mut max_dx: f64 = 0.0;
            for (node, idx) in self.node_unknown.iter().enumerate() {
                if let Some(j) = idx {
                    let d = scale * rhs[*j];
                    v[node] += d;
                    max_dx = max_dx.max(d.abs() / (1.0 + v[node].abs()));
                }
            }
            for (k, &j) in self.cell_unknown.iter().enumerate() {
                let d = scale * rhs[j];
                u[k] += d;
                max_dx = max_dx.max(d.abs() / (1.0 + u[k].abs()));
            }
            if scale == 1.0 && max_dx < self.ctl.newton_tol_v {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(SolveError::NewtonFailure { t_ns: t1, residual });
        }

        // Final residual and branch currents at the accepted point.
        let kcl = {
            let mut r = vec![0.0; n];
            self.assemble(from, &v, &u, alpha, beta, false, &mut r);
            self.node_unknown
                .iter()
                .flatten()
                .map(|&j| r[j].abs())
                .fold(0.0, f64::max)
        };
        self.max_kcl = self.max_kcl.max(kcl);

        let mut next = StepState {
            t_ns: t1,
            cap_i: vec![0.0; net.capacitors.len()],
            plate_i: vec![0.0; self.cells.len()],
            tunnel_i: vec![0.0; self.cells.len()],
            cell_energy: from.cell_energy,
            periphery_energy: from.periphery_energy,
            started: true,
            v,
            u,
        };
        for (k, c) in net.capacitors.iter().enumerate() {
            let q_old = c.farads * (from.v[c.a] - from.v[c.b]);
            let q_new = c.farads * (next.v[c.a] - next.v[c.b]);
            next.cap_i[k] = alpha * (q_new - q_old) - beta * from.cap_i[k];
        }
        let mut p_cells_old = 0.0;
        let mut p_cells_new = 0.0;
        for (k, c) in self.cells.iter().enumerate() {
            let q_old = c.c0 * (from.v[c.dbl] - from.v[c.bl] - from.u[k]);
            let q_new = c.c0 * (next.v[c.dbl] - next.v[c.bl] - next.u[k]);
            next.plate_i[k] = alpha * (q_new - q_old) - beta * from.plate_i[k];
            let (i_new, _, vm_new) = self.tunnel_current(k, &next.v, next.u[k]);
            let (i_old, _, vm_old) = self.tunnel_current(k, &from.v, from.u[k]);
            next.tunnel_i[k] = i_new;
            p_cells_old += vm_old * i_old;
            p_cells_new += vm_new * i_new;
        }
        let p_res = |v: &[f64]| -> f64 {
            net.resistors
                .iter()
                .map(|r| {
                    let d = v[r.a] - v[r.b];
                    d * d / r.ohms
                })
                .sum()
        };
        let hh = 0.5 * h;
        next.cell_energy += hh * (p_cells_old + p_cells_new);
        next.periphery_energy += hh * (p_res(&from.v) + p_res(&next.v));
        Ok(next)
    }

    /// Builds the residual (and optionally the Jacobian) of one step; returns
    /// the largest KCL residual among free nodes.
    fn assemble(
        &mut self,
        from: &StepState,
        v: &[f64],
        u: &[f64],
        alpha: f64,
        beta: f64,
        jacobian: bool,
        f: &mut [f64],
    ) -> f64 {
        let net = self.net;
        let nu = &self.node_unknown;
        let m = &mut self.matrix;
        // Current `i` leaving node a towards node b, with conductance g.
        let branch = |a: NodeId, b: NodeId, i: f64, g: f64, f: &mut [f64], m: &mut DenseMatrix| {
            if let Some(ra) = nu[a] {
                f[ra] += i;
                if jacobian {
                    m.add(ra, ra, g);
                    if let Some(rb) = nu[b] {
                        m.add(ra, rb, -g);
                    }
                }
            }
            if let Some(rb) = nu[b] {
                f[rb] -= i;
                if jacobian {
                    m.add(rb, rb, g);
                    if let Some(ra) = nu[a] {
                        m.add(rb, ra, -g);
                    }
                }
            }
        };
        for r in &net.resistors {
            let g = 1.0 / r.ohms;
            branch(r.a, r.b, g * (v[r.a] - v[r.b]), g, f, m);
        }
        for (k, c) in net.capacitors.iter().enumerate() {
            let q_old = c.farads * (from.v[c.a] - from.v[c.b]);
            let q_new = c.farads * (v[c.a] - v[c.b]);
            let i = alpha * (q_new - q_old) - beta * from.cap_i[k];
            branch(c.a, c.b, i, alpha * c.farads, f, m);
        }
        let trap = beta > 0.0;
        for (k, c) in self.cells.iter().enumerate() {
            let q_old = c.c0 * (from.v[c.dbl] - from.v[c.bl] - from.u[k]);
            let q_new = c.c0 * (v[c.dbl] - v[c.bl] - u[k]);
            // Plate current flows from dbl through the cell into bl.
            let ip = alpha * (q_new - q_old) - beta * from.plate_i[k];
            branch(c.dbl, c.bl, ip, alpha * c.c0, f, m);
            let row = self.cell_unknown[k];
            if jacobian {
                // d(ip)/du = -alpha C0, entering dbl row with + and bl row with -.
                if let Some(r) = nu[c.dbl] {
                    m.add(r, row, -alpha * c.c0);
                }
                if let Some(r) = nu[c.bl] {
                    m.add(r, row, alpha * c.c0);
                }
            }
            // Internal charge: C2 du/dt = -I(V_mid), in amperes.
            let vc = v[c.dbl] - v[c.bl];
            let vm = u[k] * (1.0 - c.ratio) + c.ratio * vc;
            let (i, g) = c.junction.current_and_conductance(vm);
            let i_old = if trap { from.tunnel_i[k] } else { 0.0 };
            f[row] += alpha * c.c2 * (u[k] - from.u[k]) + i + i_old;
            if jacobian {
                m.add(row, row, alpha * c.c2 + g * (1.0 - c.ratio));
                if let Some(r) = nu[c.dbl] {
                    m.add(row, r, g * c.ratio);
                }
                if let Some(r) = nu[c.bl] {
                    m.add(row, r, -g * c.ratio);
                }
            }
        }
        nu.iter().flatten().map(|&j| f[j].abs()).fold(0.0, f64::max)
    }

    fn accept(&mut self, next: StepState) {
        self.state = next;
        self.steps += 1;
        if let Some(vsa) = &self.net.vsa {
            let x = self.state.v[vsa.sense_node];
            let window_end = vsa.read_start_ns + vsa.params.delay_ns;
            if self.state.t_ns <= window_end + 1e-9 {
                self.vsa_peak = Some(self.vsa_peak.map_or(x, |p: f64| p.max(x)));
            }
        }
        if self.steps.is_multiple_of(self.ctl.record_stride) {
            self.record();
        }
    }

    fn record(&mut self) {
        let s = &self.state;
        if self.out.time_ns.last() == Some(&s.t_ns) {
            return;
        }
        self.out.time_ns.push(s.t_ns);
        for (k, series) in self.out.node_voltages.iter_mut().enumerate() {
            series.push(s.v[k + 1]);
        }
        for (k, c) in self.cells.iter().enumerate() {
            let q_int = s.u[k] * c.c2;
            let q_plate = c.c0 * (s.v[c.dbl] - s.v[c.bl] - s.u[k]);
            self.out.cell_q[k].push(q_int);
            self.out.cell_plate_q[k].push(q_plate);
            self.out.cell_ivd[k].push(s.u[k]);
        }
        let probe = self.net.probe.map_or(0.0, |p| {
            let r = &self.net.resistors[p];
            (s.v[r.a] - s.v[r.b]) / r.ohms * 1e6
        });
        self.out.end_current_ua.push(probe);
        let ce = s.cell_energy * 1e15;
        let pe = s.periphery_energy * 1e15;
        self.out.cell_energy_fj.push(ce);
        self.out.periphery_energy_fj.push(pe);
        self.out.vsa_energy_fj.push(self.vsa_energy);
        self.out.total_energy_fj.push(ce + pe + self.vsa_energy);
    }

    pub fn set_vsa_outcome(&mut self, activated: bool) {
        self.vsa_activated = Some(activated);
    }

    pub fn vsa_peak(&self) -> Option<f64> {
        self.vsa_peak
    }

    pub fn finish(mut self) -> Waveforms {
        // Always end on the final state.
        self.record();
        self.out.max_kcl_residual_a = self.max_kcl;
        self.out.vsa_activated = self.vsa_activated;
        self.out.vsa_peak_v = self.vsa_peak;
        self.out.accepted_steps = self.steps;
        self.out
    }
}

/// Solves `net` from t = 0 to `t_span_ns`.
///
/// Netlists with a VSA run the sense window first, decide activation from the
/// peak sense voltage and then drive the refresh pulse if needed.
pub fn transient_solve(net: &Netlist, t_span_ns: f64, ctl: StepControl) -> Result<Waveforms, SolveError> {
    if !(t_span_ns > 0.0) || !t_span_ns.is_finite() {
        return Err(SolveError::InvalidSpan(t_span_ns));
    }
    let mut tr = Transient::new(net, ctl)?;
    if let Some(vsa) = &net.vsa {
        let decide_at = (vsa.read_start_ns + vsa.params.delay_ns).min(t_span_ns);
        tr.advance_to(decide_at)?;
        let activated = tr.vsa_peak().unwrap_or(0.0) > vsa.params.threshold_v;
        tr.set_vsa_outcome(activated);
        if activated {
            let mut pulse = vsa.params.refresh_pulse;
            pulse.start_ns += decide_at;
            tr.add_pulse(vsa.source, pulse);
            tr.add_vsa_loss(vsa.params.internal_loss_fj);
        }
    }
    tr.advance_to(t_span_ns)?;
    Ok(tr.finish())
}
