//! Dormand–Prince 5(4) stepper for small autonomous systems.
//!
//! Callers drive the loop themselves so they can project the state after each
//! accepted step and locate events by re-stepping from the previous state.

// Butcher tableau
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    pub h_min: f64,
}

impl Tolerance {
    pub fn new(tol: f64) -> Self {
        Tolerance { rtol: tol, atol: tol, h_max: f64::INFINITY, h_min: 1e-14 }
    }

    pub fn with_h_max(mut self, h_max: f64) -> Self {
        self.h_max = h_max;
        self
    }
}

#[inline]
fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..N {
            out[i] += h * c * k[i];
        }
    }
    out
}

/// One Dormand–Prince step of size `h`. Returns the 5th-order solution and the
/// scaled error norm (accept when ≤ 1).
pub fn dopri_step<const N: usize, F>(f: &F, y: &[f64; N], h: f64, tol: &Tolerance) -> ([f64; N], f64)
where
    F: Fn(&[f64; N]) -> [f64; N],
{
    let k1 = f(y);
    let k2 = f(&axpy(y, h, &[(A21, &k1)]));
    let k3 = f(&axpy(y, h, &[(A31, &k1), (A32, &k2)]));
    let k4 = f(&axpy(y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
    let k5 = f(&axpy(y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
    let k6 = f(&axpy(y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
    let y5 = axpy(y, h, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
    let k7 = f(&y5);
    let mut err = 0.0f64;
    for i in 0..N {
        let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        let sc = tol.atol + tol.rtol * y[i].abs().max(y5[i].abs());
        err = err.max((e / sc).abs());
    }
    (y5, err)
}

/// Adaptive driver state: holds the next trial step size.
#[derive(Debug, Clone)]
pub struct Adaptive {
    pub tol: Tolerance,
    pub h: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepUnderflow;

impl Adaptive {
    pub fn new(tol: Tolerance, h0: f64) -> Self {
        Adaptive { tol, h: h0.min(tol.h_max) }
    }

    /// Takes one accepted step of at most `h_cap`. Returns `(h_taken, y_new)`.
    pub fn advance<const N: usize, F>(&mut self, f: &F, y: &[f64; N], h_cap: f64) -> Result<(f64, [f64; N]), StepUnderflow>
    where
        F: Fn(&[f64; N]) -> [f64; N],
    {
        loop {
            let h = self.h.min(h_cap).min(self.tol.h_max);
            if h < self.tol.h_min {
                return Err(StepUnderflow);
            }
            let (y5, err) = dopri_step(f, y, h, &self.tol);
            let finite = y5.iter().all(|v| v.is_finite());
            if finite && err <= 1.0 {
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                // keep a capped step from shrinking the controller's estimate
                if h == self.h.min(self.tol.h_max) {
                    self.h = h * fac;
                } else {
                    self.h = self.h.max(h * fac);
                }
                return Ok((h, y5));
            }
            let fac = if finite { (0.9 * err.powf(-0.2)).clamp(0.1, 0.9) } else { 0.25 };
            self.h = h * fac;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotation_returns_after_full_period() {
        let f = |y: &[f64; 2]| [-y[1], y[0]];
        let mut ad = Adaptive::new(Tolerance::new(1e-12), 0.01);
        let mut y = [1.0, 0.0];
        let mut t = 0.0;
        let tau = std::f64::consts::TAU;
        while t < tau {
            let (h, yn) = ad.advance(&f, &y, tau - t).unwrap();
            t += h;
            y = yn;
        }
        assert!((y[0] - 1.0).abs() < 1e-9 && y[1].abs() < 1e-9);
    }

    #[test]
    fn exponential_growth_order() {
        let f = |y: &[f64; 1]| [y[0]];
        let tol = Tolerance::new(1.0);
        let e1 = (dopri_step(&f, &[1.0], 0.1, &tol).0[0] - 0.1f64.exp()).abs();
        let e2 = (dopri_step(&f, &[1.0], 0.05, &tol).0[0] - 0.05f64.exp()).abs();
        // local error O(h^6)
        assert!(e1 / e2 > 40.0);
    }
}
