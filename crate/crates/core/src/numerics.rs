//! Small numerical kernels: an adaptive Dormand-Prince integrator for scalar
//! autonomous ODEs and a dense LU factorization with partial pivoting.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayIntegrationFailure {
    pub last_time: f64,
}

const MAX_STEPS: usize = 2_000_000;

/// Integrates `dy/dt = f(y)` from `y(0) = y0` and returns `y` at every entry
/// of the sorted `times`. `tol` is the absolute tolerance on `y`.
pub fn dopri5_log_decay<F>(f: F, y0: f64, times: &[f64], tol: f64) -> Result<Vec<f64>, DecayIntegrationFailure>
where
    F: Fn(f64) -> f64,
{
    // Butcher tableau (Dormand & Prince 5(4)).
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const E: [f64; 7] = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];

    let mut out = Vec::with_capacity(times.len());
    let mut t = 0.0;
    let mut y = y0;
    let mut k1 = f(y);
    let mut h = if k1 == 0.0 { 1e-15 } else { (0.01 * tol.sqrt() / k1.abs()).clamp(1e-18, 1e-9) };
    let mut steps = 0usize;

    for &target in times {
        while t < target {
            steps += 1;
            if steps > MAX_STEPS || !y.is_finite() {
                return Err(DecayIntegrationFailure { last_time: t });
            }
            let last = target - t <= h * (1.0 + 1e-12);
            let step = if last { target - t } else { h };
            let mut k = [0.0; 7];
            k[0] = k1;
            for s in 1..7 {
                let mut acc = y;
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += step * A[s][j] * kj;
                }
                k[s] = f(acc);
            }
            let mut y_new = y;
            for j in 0..6 {
                y_new += step * A[6][j] * k[j];
            }
            let mut err = 0.0;
            for j in 0..7 {
                err += E[j] * k[j];
            }
            let err = (step * err).abs() / (tol * (1.0 + y.abs().max(y_new.abs())));
            if err <= 1.0 || step < 1e-300 {
                t = if last { target } else { t + step };
                y = y_new;
                k1 = k[6];
                let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                // Keep the natural step size when the step was clipped to an output time.
                if !last || step >= h {
                    h = step * grow;
                }
            } else {
                h = step * (0.9 * err.powf(-0.2)).max(0.1);
            }
        }
        out.push(y);
    }
    Ok(out)
}

/// Dense row-major matrix with an in-place LU solve.
#[derive(Debug, Clone)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn clear(&mut self) {
        self.data.iter_mut().for_each(|v| *v = 0.0);
    }

    #[inline]
    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.n + c] += v;
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.n + c]
    }

    /// Solves `self x = b` in place, destroying the matrix. Returns `false`
    /// for a (numerically) singular matrix.
    ///
    /// Gaussian elimination with partial pivoting that tracks the last
    /// nonzero column of every row, so banded systems cost O(n b^2).
    pub fn solve_in_place(&mut self, b: &mut [f64]) -> bool {
        let n = self.n;
        let a = &mut self.data;
        let mut last: Vec<usize> = (0..n)
            .map(|r| (0..n).rev().find(|&c| a[r * n + c] != 0.0).unwrap_or(0))
            .collect();
        for col in 0..n {
            let mut piv = col;
            let mut best = a[col * n + col].abs();
            for r in col + 1..n {
                let v = a[r * n + col].abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return false;
            }
            if piv != col {
                let end = last[col].max(last[piv]);
                for c in col..=end {
                    a.swap(col * n + c, piv * n + c);
                }
                b.swap(col, piv);
                last.swap(col, piv);
            }
            let d = a[col * n + col];
            let end = last[col];
            for r in col + 1..n {
                let m = a[r * n + col];
                if m == 0.0 {
                    continue;
                }
                let m = m / d;
                a[r * n + col] = 0.0;
                for c in col + 1..=end {
                    a[r * n + c] -= m * a[col * n + c];
                }
                last[r] = last[r].max(end);
                b[r] -= m * b[col];
            }
        }
        for col in (0..n).rev() {
            let mut acc = b[col];
            for c in col + 1..=last[col] {
                acc -= a[col * n + c] * b[c];
            }
            b[col] = acc / a[col * n + col];
        }
        true
    }
}
