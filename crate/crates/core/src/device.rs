//! Three-insulator solid-state memcapacitive system.
//!
//! The cell is a stack `metal | high-k | metal | low-k | metal | high-k | metal`.
//! The outer high-k layers block conduction completely, the middle low-k layer
//! lets charge tunnel between the two internal plates. Two charges describe the
//! device completely:
//!
//! * `q`, the charge on the external plates, and
//! * `Q`, the charge moved between the internal plates by tunneling.
//!
//! ```text
//! V_C   = Q / C2 + q / C0
//! dQ/dt = -I((Q + q) / C2)
//! ```
//!
//! where `I` is the tunneling current through the middle layer, evaluated with
//! the Simmons expressions for a rectangular barrier, `C2` is the geometric
//! capacitance of the middle layer and `C0` is the series capacitance of the
//! three layers.
//!
//! Parameters are given in interface units (eV, nm, um^2); everything that is
//! computed is SI.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{dopri5_log_decay, DecayIntegrationFailure};

/// Elementary charge [C].
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Planck constant [J s].
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Electron rest mass [kg].
pub const ELECTRON_MASS: f64 = 9.109_383_701_5e-31;
/// Vacuum permittivity [F/m].
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;

const NM: f64 = 1e-9;
const UM2: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DeviceError {
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("dynamic capacitance diverges: V_C = 0 with plate charge {plate_charge:e} C")]
    DivergentCapacitance { plate_charge: f64 },
    #[error("dynamic capacitance undefined: V_C = 0 and q = 0")]
    UndefinedCapacitance,
    #[error("storage decay integration failed after t = {last_time:e} s")]
    DecayIntegration { last_time: f64 },
}

/// One insulating layer of the stack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarrierParams {
    /// Barrier height above the Fermi level [eV].
    pub height_ev: f64,
    /// Physical thickness [nm].
    pub thickness_nm: f64,
    /// Relative permittivity.
    pub rel_permittivity: f64,
    /// Tunneling effective mass in units of the electron mass.
    #[serde(default = "default_mass_ratio")]
    pub eff_mass_ratio: f64,
}

fn default_mass_ratio() -> f64 {
    1.0
}

impl BarrierParams {
    pub fn validate(&self) -> Result<(), DeviceError> {
        check_positive("height_ev", self.height_ev)?;
        check_positive("thickness_nm", self.thickness_nm)?;
        check_finite("rel_permittivity", self.rel_permittivity)?;
        if self.rel_permittivity < 1.0 {
            return Err(DeviceError::InvalidParameter {
                name: "rel_permittivity",
                value: self.rel_permittivity,
                reason: "must be >= 1",
            });
        }
        check_positive("eff_mass_ratio", self.eff_mass_ratio)
    }

    /// Parallel-plate capacitance of this layer over `area_um2` [F].
    pub fn capacitance(&self, area_um2: f64) -> f64 {
        VACUUM_PERMITTIVITY * self.rel_permittivity * area_um2 * UM2 / (self.thickness_nm * NM)
    }
}

fn check_finite(name: &'static str, value: f64) -> Result<(), DeviceError> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(DeviceError::NonFinite(name))
    }
}

fn check_positive(name: &'static str, value: f64) -> Result<(), DeviceError> {
    check_finite(name, value)?;
    if value > 0.0 {
        Ok(())
    } else {
        Err(DeviceError::InvalidParameter {
            name,
            value,
            reason: "must be > 0",
        })
    }
}

/// Layer stack of one memcapacitive cell. Both outer layers share `outer_layer`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemcapacitorParams {
    /// Plate area [um^2].
    pub area_um2: f64,
    /// High-k layers, treated as perfect insulators.
    pub outer_layer: BarrierParams,
    /// Low-k tunneling layer.
    pub middle_layer: BarrierParams,
}

impl Default for MemcapacitorParams {
    fn default() -> Self {
        Self::paper_cell()
    }
}

impl MemcapacitorParams {
    /// ITRS-like stack: 0.25 um^2 plates, 6 nm k=50 outer layers and a
    /// 0.2 eV SiO2-like middle layer, 8 nm thick.
    ///
    /// The middle thickness sets the write threshold near 0.5 V with a unit
    /// effective mass; see [`MemcapacitorParams::with_middle`] for the
    /// retention-optimized variants.
    pub fn paper_cell() -> Self {
        Self {
            area_um2: 0.25,
            outer_layer: BarrierParams {
                height_ev: 3.0,
                thickness_nm: 6.0,
                rel_permittivity: 50.0,
                eff_mass_ratio: 1.0,
            },
            middle_layer: BarrierParams {
                height_ev: 0.2,
                thickness_nm: 8.0,
                rel_permittivity: 3.9,
                eff_mass_ratio: 1.0,
            },
        }
    }

    /// Same stack with a different middle layer permittivity and thickness.
    pub fn with_middle(mut self, rel_permittivity: f64, thickness_nm: f64) -> Self {
        self.middle_layer.rel_permittivity = rel_permittivity;
        self.middle_layer.thickness_nm = thickness_nm;
        self
    }

    pub fn validate(&self) -> Result<(), DeviceError> {
        check_positive("area_um2", self.area_um2)?;
        self.outer_layer.validate()?;
        self.middle_layer.validate()
    }

    /// Outer layer capacitance C1 = C3 [F].
    pub fn c1(&self) -> f64 {
        self.outer_layer.capacitance(self.area_um2)
    }

    /// Middle layer capacitance C2 = A eps0 k / d [F].
    pub fn c2(&self) -> f64 {
        self.middle_layer.capacitance(self.area_um2)
    }

    /// Outer layer capacitance C3 [F]; equal to C1 for this symmetric stack.
    pub fn c3(&self) -> f64 {
        self.c1()
    }

    /// Series capacitance 1/C0 = 1/C1 + 1/C2 + 1/C3 [F].
    pub fn c0(&self) -> f64 {
        1.0 / (1.0 / self.c1() + 1.0 / self.c2() + 1.0 / self.c3())
    }

    /// C0 / C2, the fraction of an applied voltage that drops on the middle
    /// layer when no internal charge is stored.
    pub fn coupling_ratio(&self) -> f64 {
        self.c0() / self.c2()
    }

    pub fn junction(&self) -> SimmonsJunction {
        SimmonsJunction::new(&self.middle_layer, self.area_um2)
    }
}

/// Charge pair carrying the full device memory.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MemcapacitorState {
    /// Internal charge Q [C].
    pub internal_charge: f64,
    /// Plate charge q [C].
    pub plate_charge: f64,
}

impl MemcapacitorState {
    /// State with internal voltage difference `ivd` that is consistent with
    /// the applied voltage `v_c`.
    pub fn from_ivd(ivd: f64, v_c: f64, params: &MemcapacitorParams) -> Self {
        let internal_charge = ivd * params.c2();
        Self {
            internal_charge,
            plate_charge: plate_charge(v_c, internal_charge, params),
        }
    }

    /// Internal voltage difference Q / C2 [V].
    pub fn ivd(&self, params: &MemcapacitorParams) -> f64 {
        self.internal_charge / params.c2()
    }

    /// Voltage across the middle layer, (Q + q) / C2 [V].
    pub fn middle_voltage(&self, params: &MemcapacitorParams) -> f64 {
        (self.internal_charge + self.plate_charge) / params.c2()
    }

    /// Applied voltage implied by the charge pair [V].
    pub fn applied_voltage(&self, params: &MemcapacitorParams) -> f64 {
        self.internal_charge / params.c2() + self.plate_charge / params.c0()
    }
}

/// Precomputed Simmons tunneling model for one barrier.
///
/// For `eV <= phi0` the intermediate-voltage expression with barrier width `s`
/// and mean barrier height `phi0 - eV/2` is used. Above that the barrier at
/// the Fermi level is triangular: effective width `s phi0 / eV` and mean
/// height `phi0 / 2`. Both regimes are instances of the same generalized
/// formula and join continuously at `eV = phi0`.
#[derive(Debug, Clone, Copy)]
pub struct SimmonsJunction {
    phi0: f64,
    thickness: f64,
    /// 4 pi sqrt(2 m) / h, per metre of barrier width.
    exponent_per_m: f64,
    area: f64,
}

impl SimmonsJunction {
    pub fn new(barrier: &BarrierParams, area_um2: f64) -> Self {
        let mass = barrier.eff_mass_ratio * ELECTRON_MASS;
        Self {
            phi0: barrier.height_ev * ELEMENTARY_CHARGE,
            thickness: barrier.thickness_nm * NM,
            exponent_per_m: 4.0 * std::f64::consts::PI * (2.0 * mass).sqrt() / PLANCK,
            area: area_um2 * UM2,
        }
    }

    /// Tunneling current [A] at middle-layer voltage `v` [V]; odd in `v`.
    pub fn current(&self, v: f64) -> f64 {
        self.current_and_conductance(v).0
    }

    /// Current [A] and differential conductance dI/dV [S].
    pub fn current_and_conductance(&self, v: f64) -> (f64, f64) {
        let sign = if v < 0.0 { -1.0 } else { 1.0 };
        let (j, dj) = self.density_positive(v.abs());
        (sign * j * self.area, dj * self.area)
    }

    /// Current density and its derivative for v >= 0.
    fn density_positive(&self, v: f64) -> (f64, f64) {
        let e = ELEMENTARY_CHARGE;
        let ev = e * v;
        let two_pi_h = 2.0 * std::f64::consts::PI * PLANCK;
        if ev <= self.phi0 {
            // Rectangular barrier, mean height phi0 - eV/2 over the full width.
            let big_a = self.exponent_per_m * self.thickness;
            let j0 = e / (two_pi_h * self.thickness * self.thickness);
            let a = self.phi0 - 0.5 * ev;
            let b = self.phi0 + 0.5 * ev;
            let (sa, sb) = (a.sqrt(), b.sqrt());
            let fa = a * (-big_a * sa).exp();
            // F(a) - F(b) without cancellation for small bias.
            let log_ratio = (ev / a).ln_1p() - big_a * ev / (sa + sb);
            let j = -j0 * fa * log_ratio.exp_m1();
            let dfa = (-big_a * sa).exp() * (1.0 - 0.5 * big_a * sa);
            let dfb = (-big_a * sb).exp() * (1.0 - 0.5 * big_a * sb);
            let dj = -0.5 * e * j0 * (dfa + dfb);
            (j, dj)
        } else {
            // Triangular barrier at the Fermi level.
            let width = self.thickness * self.phi0 / ev;
            let big_a = self.exponent_per_m * width;
            let j0 = e / (two_pi_h * width * width);
            let a = 0.5 * self.phi0;
            let b = a + ev;
            let (sa, sb) = (a.sqrt(), b.sqrt());
            let ea = (-big_a * sa).exp();
            let eb = (-big_a * sb).exp();
            let j = j0 * (a * ea - b * eb);
            // d(big_a)/dV = -big_a / v, d(j0)/dV = 2 j0 / v.
            let dj = 2.0 * j / v
                + j0 * (a * ea * big_a * sa / v - e * eb - b * eb * (big_a * sb / v - 0.5 * big_a * e / sb));
            (j, dj)
        }
    }
}

/// Tunneling current through `barrier` [A] at middle-layer voltage `v_mid`.
///
/// Validated entry point; the simulator uses [`SimmonsJunction`] directly.
/// The model is meant for barriers of roughly 3 to 12 nm.
pub fn simmons_current(v_mid: f64, barrier: &BarrierParams, area_um2: f64) -> Result<f64, DeviceError> {
    check_finite("v_mid", v_mid)?;
    barrier.validate()?;
    check_positive("area_um2", area_um2)?;
    Ok(SimmonsJunction::new(barrier, area_um2).current(v_mid))
}

/// Tunnel current I(Q + q) for the given state [A].
pub fn internal_current(state: &MemcapacitorState, params: &MemcapacitorParams) -> Result<f64, DeviceError> {
    check_finite("internal_charge", state.internal_charge)?;
    check_finite("plate_charge", state.plate_charge)?;
    params.validate()?;
    Ok(params.junction().current(state.middle_voltage(params)))
}

/// The plate charge q = C0 (V_C - Q/C2) that satisfies the voltage relation.
pub fn plate_charge(v_c: f64, internal_charge: f64, params: &MemcapacitorParams) -> f64 {
    params.c0() * (v_c - internal_charge / params.c2())
}

/// dQ/dt [A] at applied voltage `v_c`.
///
/// `state` must carry the plate charge that matches `v_c`.
pub fn state_derivative(
    v_c: f64,
    state: &MemcapacitorState,
    params: &MemcapacitorParams,
) -> Result<f64, DeviceError> {
    debug_assert!(
        (state.applied_voltage(params) - v_c).abs() <= 1e-9 * v_c.abs().max(1.0),
        "plate charge inconsistent with V_C"
    );
    Ok(-internal_current(state, params)?)
}

/// C_d = q / V_C [F].
pub fn dynamic_capacitance(state: &MemcapacitorState, v_c: f64) -> Result<f64, DeviceError> {
    check_finite("v_c", v_c)?;
    if v_c == 0.0 {
        return if state.plate_charge == 0.0 {
            Err(DeviceError::UndefinedCapacitance)
        } else {
            Err(DeviceError::DivergentCapacitance {
                plate_charge: state.plate_charge,
            })
        };
    }
    Ok(state.plate_charge / v_c)
}

/// IVD trajectory in storage mode (V_C = 0).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayCurve {
    pub times_s: Vec<f64>,
    pub ivd: Vec<f64>,
}

/// Log-spaced sample times: `n_samples` points spanning 14 decades up to `t_end`.
pub fn log_time_grid(t_end: f64, n_samples: usize) -> Vec<f64> {
    const DECADES: f64 = 14.0;
    match n_samples {
        0 => Vec::new(),
        1 => vec![t_end],
        n => {
            let start = t_end.log10() - DECADES;
            (0..n)
                .map(|i| 10f64.powf(start + DECADES * i as f64 / (n - 1) as f64))
                .collect()
        }
    }
}

/// Storage-mode decay of the IVD starting from `ivd0`, sampled on a
/// logarithmic grid of `n_samples` points over 14 decades ending at `t_end`.
pub fn storage_decay(
    ivd0: f64,
    params: &MemcapacitorParams,
    t_end: f64,
    n_samples: usize,
) -> Result<DecayCurve, DeviceError> {
    check_positive("t_end", t_end)?;
    storage_decay_at(ivd0, params, &log_time_grid(t_end, n_samples))
}

/// Storage-mode decay sampled at arbitrary increasing `times` [s].
///
/// At V_C = 0 the middle-layer voltage is (1 - C0/C2) IVD, so
/// d(IVD)/dt = -I((1 - C0/C2) IVD) / C2. The ODE is integrated for ln|IVD|,
/// which keeps the relative error uniform while the IVD spans many decades.
pub fn storage_decay_at(ivd0: f64, params: &MemcapacitorParams, times: &[f64]) -> Result<DecayCurve, DeviceError> {
    check_finite("ivd0", ivd0)?;
    params.validate()?;
    if times.iter().any(|t| !t.is_finite() || *t < 0.0) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(DeviceError::InvalidParameter {
            name: "times",
            value: f64::NAN,
            reason: "sample times must be finite, non-negative and increasing",
        });
    }
    if ivd0 == 0.0 {
        return Ok(DecayCurve {
            times_s: times.to_vec(),
            ivd: vec![0.0; times.len()],
        });
    }
    let junction = params.junction();
    let alpha = 1.0 - params.coupling_ratio();
    let c2 = params.c2();
    let sign = ivd0.signum();
    // d ln|v| / dt = -I(alpha |v|) / (C2 |v|)
    let rate = |y: f64| {
        let v = y.exp();
        -junction.current(alpha * v) / (c2 * v)
    };
    let logs = dopri5_log_decay(rate, ivd0.abs().ln(), times, 1e-12)
        .map_err(|DecayIntegrationFailure { last_time }| DeviceError::DecayIntegration { last_time })?;
    Ok(DecayCurve {
        times_s: times.to_vec(),
        ivd: logs.into_iter().map(|y| sign * y.exp()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell() -> MemcapacitorParams {
        MemcapacitorParams::paper_cell()
    }

    #[test]
    fn capacitances_match_layer_stack() {
        let p = cell();
        let c2 = VACUUM_PERMITTIVITY * 3.9 * 0.25e-12 / 8e-9;
        assert!((p.c2() - c2).abs() < 1e-12 * c2);
        let inv = 1.0 / p.c1() + 1.0 / p.c2() + 1.0 / p.c3();
        assert!((1.0 / p.c0() - inv).abs() < 1e-12 * inv);
        assert!(p.c0() < p.c2());
    }

    #[test]
    fn zero_bias_gives_zero_current() {
        let b = cell().middle_layer;
        assert_eq!(simmons_current(0.0, &b, 0.25).unwrap(), 0.0);
    }

    #[test]
    fn conductance_matches_finite_difference() {
        let j = cell().junction();
        for &v in &[1e-4_f64, 0.05, 0.15, 0.199, 0.201, 0.3, 0.7, 1.2, -0.4] {
            let h = 1e-6 * v.abs().max(1e-3);
            let fd = (j.current(v + h) - j.current(v - h)) / (2.0 * h);
            let (_, g) = j.current_and_conductance(v);
            assert!((g - fd).abs() <= 1e-5 * fd.abs(), "v={v} g={g} fd={fd}");
        }
    }

    #[test]
    fn small_bias_current_is_linear() {
        let j = cell().junction();
        let (_, g0) = j.current_and_conductance(1e-12);
        let i = j.current(1e-15);
        assert!((i / 1e-15 - g0).abs() < 1e-6 * g0);
    }

    #[test]
    fn regimes_join_continuously() {
        let j = cell().junction();
        let v0 = 0.2;
        let below = j.current(v0 * (1.0 - 1e-12));
        let above = j.current(v0 * (1.0 + 1e-12));
        assert!((below - above).abs() < 1e-9 * below);
    }

    #[test]
    fn rejects_bad_barrier() {
        let mut b = cell().middle_layer;
        b.thickness_nm = -1.0;
        assert!(matches!(
            simmons_current(0.1, &b, 0.25),
            Err(DeviceError::InvalidParameter { name: "thickness_nm", .. })
        ));
        assert!(matches!(
            simmons_current(f64::NAN, &cell().middle_layer, 0.25),
            Err(DeviceError::NonFinite(_))
        ));
    }

    #[test]
    fn plate_charge_examples() {
        let p = cell();
        assert_eq!(plate_charge(0.0, 0.0, &p), 0.0);
        let q_int = 1e-15;
        let q = plate_charge(0.0, q_int, &p);
        assert!((q + p.c0() * q_int / p.c2()).abs() < 1e-30);
        let sum = q_int + q;
        assert!((sum - (1.0 - p.coupling_ratio()) * q_int).abs() < 1e-28);
        // Direct substitution with a 5 fF series capacitance.
        let mut big = p;
        big.area_um2 = 0.25 * 5e-15 / p.c0();
        assert!((plate_charge(1.0, 0.0, &big) - 5e-15).abs() < 1e-27);
    }

    #[test]
    fn voltage_relation_round_trips() {
        let p = cell();
        for &(vc, ivd) in &[(0.0, 1.0), (1.0, -2.0), (-0.7, 0.3), (1.5, 4.0)] {
            let s = MemcapacitorState::from_ivd(ivd, vc, &p);
            assert!((s.applied_voltage(&p) - vc).abs() < 1e-14);
        }
    }

    #[test]
    fn equilibrium_is_fixed_point() {
        let p = cell();
        let s = MemcapacitorState::default();
        assert_eq!(state_derivative(0.0, &s, &p).unwrap(), 0.0);
        let s = MemcapacitorState::from_ivd(1.0, 0.0, &p);
        let d = state_derivative(0.0, &s, &p).unwrap();
        assert!(d < 0.0);
        assert_eq!(d, -internal_current(&s, &p).unwrap());
    }

    #[test]
    fn internal_current_sign_follows_total_charge() {
        let p = cell();
        for &(vc, ivd) in &[(1.0, 0.0), (-1.0, 0.0), (0.0, 2.0), (0.0, -2.0), (1.0, 20.0)] {
            let s = MemcapacitorState::from_ivd(ivd, vc, &p);
            let i = internal_current(&s, &p).unwrap();
            let total = s.internal_charge + s.plate_charge;
            assert_eq!(i.signum(), total.signum());
        }
    }

    #[test]
    fn dynamic_capacitance_cases() {
        let p = cell();
        let s = MemcapacitorState::from_ivd(0.0, 0.3, &p);
        assert!((dynamic_capacitance(&s, 0.3).unwrap() - p.c0()).abs() < 1e-12 * p.c0());
        let s = MemcapacitorState::from_ivd(1.0, 0.0, &p);
        assert!(matches!(
            dynamic_capacitance(&s, 0.0),
            Err(DeviceError::DivergentCapacitance { .. })
        ));
        assert_eq!(
            dynamic_capacitance(&MemcapacitorState::default(), 0.0),
            Err(DeviceError::UndefinedCapacitance)
        );
    }

    #[test]
    fn dynamic_capacitance_changes_sign_across_q_sweep() {
        // q = C0 (V_C - Q/C2) changes sign at Q = C2 V_C, and C_d = q / V_C
        // passes through zero there; |C_d| grows without bound as V_C -> 0.
        let p = cell();
        let vc = 0.1;
        let values: Vec<f64> = (-20..=20)
            .map(|k| {
                let ivd = 0.02 * k as f64;
                let s = MemcapacitorState::from_ivd(ivd, vc, &p);
                dynamic_capacitance(&s, vc).unwrap()
            })
            .collect();
        assert!(values[0] > 0.0);
        assert!(*values.last().unwrap() < 0.0);
        assert!(values.windows(2).all(|w| w[1] < w[0]));
        let s = MemcapacitorState::from_ivd(0.5, 0.0, &p);
        let tiny = MemcapacitorState {
            plate_charge: s.plate_charge,
            ..s
        };
        assert!(dynamic_capacitance(&tiny, 1e-12).unwrap().abs() > 1e-6);
    }

    #[test]
    fn zero_ivd_does_not_decay() {
        let c = storage_decay(0.0, &cell(), 1e6, 141).unwrap();
        assert!(c.ivd.iter().all(|&v| v == 0.0));
        assert_eq!(c.times_s.len(), 141);
    }

    #[test]
    fn decay_is_monotone_and_odd() {
        let p = cell().with_middle(3.9, 10.0);
        let up = storage_decay(2.0, &p, 1e6, 57).unwrap();
        let down = storage_decay(-2.0, &p, 1e6, 57).unwrap();
        assert!(up.ivd.windows(2).all(|w| w[1] <= w[0]));
        for (a, b) in up.ivd.iter().zip(&down.ivd) {
            assert_eq!(*a, -*b);
        }
    }

    #[test]
    fn log_grid_spans_fourteen_decades() {
        let g = log_time_grid(1e6, 141);
        assert!((g[0] - 1e-8).abs() < 1e-20);
        assert!((g[140] - 1e6).abs() < 1e-6);
        assert!((g[10] / g[0] - 10.0).abs() < 1e-9);
    }
}
