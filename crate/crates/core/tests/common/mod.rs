//! Reference implementations used as test oracles. They are written from the
//! textbook formulas and share no code with the library.
#![allow(dead_code)]

pub const Q_E: f64 = 1.602_176_634e-19;
pub const H: f64 = 6.626_070_15e-34;
pub const M_E: f64 = 9.109_383_701_5e-31;
pub const EPS0: f64 = 8.854_187_812_8e-12;

/// Value printed by a standalone script that evaluated the rectangular-barrier
/// tunneling formula for phi0 = 0.2 eV, s = 6 nm, m = m_e, A = 0.25 um^2 at 0.5 V.
pub const FROZEN_CURRENT_6NM_0V5: f64 = 1.122_567_561_485_061_8e-5;

/// Tunneling current through a rectangular barrier [A].
///
/// J = J0 [phi_b exp(-A sqrt(phi_b)) - (phi_b + eV) exp(-A sqrt(phi_b + eV))]
/// with J0 = e / (2 pi h ds^2) and A = 4 pi ds sqrt(2m) / h. For eV < phi0 the
/// barrier keeps its full width and phi_b = phi0 - eV/2; beyond that the
/// barrier is triangular, ds = s phi0 / eV and phi_b = phi0 / 2.
pub fn simmons_oracle(v: f64, height_ev: f64, thickness_nm: f64, mass_ratio: f64, area_um2: f64) -> f64 {
    if v == 0.0 {
        return 0.0;
    }
    if v < 0.0 {
        return -simmons_oracle(-v, height_ev, thickness_nm, mass_ratio, area_um2);
    }
    let phi0 = height_ev * Q_E;
    let s = thickness_nm * 1e-9;
    let ev = Q_E * v;
    let (ds, phi_b) = if ev < phi0 { (s, phi0 - ev / 2.0) } else { (s * phi0 / ev, phi0 / 2.0) };
    let a = 4.0 * std::f64::consts::PI * ds * (2.0 * mass_ratio * M_E).sqrt() / H;
    let j0 = Q_E / (2.0 * std::f64::consts::PI * H * ds * ds);
    let j = j0 * (phi_b * (-a * phi_b.sqrt()).exp() - (phi_b + ev) * (-a * (phi_b + ev).sqrt()).exp());
    j * area_um2 * 1e-12
}

pub fn c_layer(k: f64, d_nm: f64, area_um2: f64) -> f64 {
    EPS0 * k * area_um2 * 1e-12 / (d_nm * 1e-9)
}

/// Gauss-Legendre nodes and weights on [-1, 1] (Newton iteration on P_n).
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

/// Storage-mode decay from the separable ODE C2 dv/dt = -I(alpha v):
/// t(v) = integral from v to v0 of C2 / I(alpha w) dw, evaluated in s = ln w
/// on narrow Gauss-Legendre panels and inverted by bisection inside the
/// panel that brackets each sample time.
pub struct DecayOracle {
    pub c2: f64,
    pub alpha: f64,
    pub current: Box<dyn Fn(f64) -> f64>,
    rule: Vec<(f64, f64)>,
}

impl DecayOracle {
    pub fn for_stack(k: f64, d_nm: f64) -> Self {
        let area = 0.25;
        let c1 = c_layer(50.0, 6.0, area);
        let c2 = c_layer(k, d_nm, area);
        let c0 = 1.0 / (2.0 / c1 + 1.0 / c2);
        Self {
            c2,
            alpha: 1.0 - c0 / c2,
            current: Box::new(move |v| simmons_oracle(v, 0.2, d_nm, 1.0, area)),
            rule: gauss_legendre(20),
        }
    }

    fn integrand(&self, s: f64) -> f64 {
        let w = s.exp();
        self.c2 * w / (self.current)(self.alpha * w)
    }

    fn integral(&self, a: f64, b: f64) -> f64 {
        let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
        r * self.rule.iter().map(|(x, w)| w * self.integrand(c + r * x)).sum::<f64>()
    }

    /// IVD at the sorted `times` starting from `ivd0 > 0`.
    pub fn curve(&self, ivd0: f64, times: &[f64]) -> Vec<f64> {
        const PANEL: f64 = 0.05;
        let kink = (0.2 / self.alpha).ln();
        let mut out = Vec::with_capacity(times.len());
        let mut top = ivd0.ln();
        let mut elapsed = 0.0;
        let floor = top - 700.0;
        let mut j = 0;
        while j < times.len() && top > floor {
            let mut bottom = top - PANEL;
            if kink < top && kink > bottom {
                bottom = kink;
            }
            let span = self.integral(bottom, top);
            while j < times.len() && times[j] <= elapsed + span {
                let target = times[j] - elapsed;
                let (mut lo, mut hi) = (bottom, top);
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    if self.integral(mid, top) > target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                out.push((0.5 * (lo + hi)).exp());
                j += 1;
            }
            elapsed += span;
            top = bottom;
        }
        out.resize(times.len(), 0.0);
        out
    }
}
