//! Planar Hamiltonian systems `H: ℝ² → ℝ` with a state-dependent noise matrix `σ`.
//!
//! The Hamiltonian is a polynomial, so gradients, Hessians and the third
//! derivatives needed by the saddle chart are exact symbolic derivatives.
//! Finite differences only appear in tests.

mod assumptions;
mod config;
mod critical;
mod registry;

pub use assumptions::{check_assumptions, AssumptionCheck, AssumptionReport};
pub use config::{HamiltonianSpec, SigmaSpec, SystemConfig, Term};
pub use critical::{find_critical_points, positive_drift_margin, CriticalKind, CriticalPoint};
pub use registry::{BuiltinHamiltonian, SystemRegistry};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poly::Poly2;

pub type Point = [f64; 2];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("unknown built-in Hamiltonian `{0}`")]
    UnknownBuiltin(String),
    #[error("malformed sigma: {0}")]
    BadSigma(String),
    #[error("degenerate critical point at ({x:.6}, {y:.6}): |det Hess| = {det:.3e}")]
    DegenerateCritical { x: f64, y: f64, det: f64 },
    #[error("Newton failed to converge from every seed of a sign-change cell near ({x:.4}, {y:.4})")]
    NonConvergence { x: f64, y: f64 },
    #[error("expected a minimum, got a {0:?}")]
    BadKind(CriticalKind),
    #[error("invalid working box {0:?}")]
    BadBox([f64; 4]),
    #[error("a polynomial Hamiltonian needs an explicit box")]
    MissingBox,
}

/// Axis-aligned working box `[xmin, xmax] × [ymin, ymax]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl Rect {
    pub fn new(xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> Self {
        Rect { xmin, xmax, ymin, ymax }
    }

    pub fn from_array(b: [f64; 4]) -> Result<Self, FieldError> {
        if !(b.iter().all(|v| v.is_finite()) && b[0] < b[1] && b[2] < b[3]) {
            return Err(FieldError::BadBox(b));
        }
        Ok(Rect::new(b[0], b[1], b[2], b[3]))
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.xmin, self.xmax, self.ymin, self.ymax]
    }

    pub fn contains(&self, p: Point) -> bool {
        p[0] >= self.xmin && p[0] <= self.xmax && p[1] >= self.ymin && p[1] <= self.ymax
    }

    pub fn width(&self) -> f64 {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> f64 {
        self.ymax - self.ymin
    }

    pub fn diameter(&self) -> f64 {
        self.width().hypot(self.height())
    }
}

/// Noise matrix `σ(x)`, a 2×l matrix field stored column by column.
#[derive(Debug, Clone, PartialEq)]
pub enum Sigma {
    Identity(usize),
    Constant(Vec<[f64; 2]>),
    Poly(Vec<[Poly2; 2]>),
}

impl Sigma {
    /// Builds from row-major rows (2 rows of `l` entries).
    pub fn constant_rows(rows: &[Vec<f64>]) -> Result<Self, FieldError> {
        if rows.len() != 2 || rows[0].len() != rows[1].len() || rows[0].is_empty() {
            return Err(FieldError::BadSigma("constant sigma needs 2 rows of equal non-zero length".into()));
        }
        Ok(Sigma::Constant(
            (0..rows[0].len()).map(|k| [rows[0][k], rows[1][k]]).collect(),
        ))
    }

    pub fn poly_rows(rows: Vec<Vec<Poly2>>) -> Result<Self, FieldError> {
        if rows.len() != 2 || rows[0].len() != rows[1].len() || rows[0].is_empty() {
            return Err(FieldError::BadSigma("polynomial sigma needs 2 rows of equal non-zero length".into()));
        }
        let mut it1 = rows[1].clone().into_iter();
        Ok(Sigma::Poly(
            rows[0].clone().into_iter().map(|a| [a, it1.next().expect("equal rows")]).collect(),
        ))
    }

    pub fn zero() -> Self {
        Sigma::Constant(vec![[0.0, 0.0], [0.0, 0.0]])
    }

    /// Number of driving Wiener components `l`.
    pub fn cols(&self) -> usize {
        match self {
            Sigma::Identity(l) => *l,
            Sigma::Constant(c) => c.len(),
            Sigma::Poly(c) => c.len(),
        }
    }

    #[inline]
    pub fn column(&self, x: Point, k: usize) -> [f64; 2] {
        match self {
            Sigma::Identity(_) => match k {
                0 => [1.0, 0.0],
                1 => [0.0, 1.0],
                _ => [0.0, 0.0],
            },
            Sigma::Constant(c) => c[k],
            Sigma::Poly(c) => [c[k][0].eval(x[0], x[1]), c[k][1].eval(x[0], x[1])],
        }
    }

    /// `σ(x) · dw`.
    #[inline]
    pub fn apply(&self, x: Point, dw: &[f64]) -> [f64; 2] {
        match self {
            Sigma::Identity(l) => {
                let mut out = [0.0; 2];
                for (k, o) in out.iter_mut().enumerate().take((*l).min(2)) {
                    *o = dw[k];
                }
                out
            }
            _ => {
                let mut out = [0.0; 2];
                for (k, w) in dw.iter().enumerate().take(self.cols()) {
                    let c = self.column(x, k);
                    out[0] += c[0] * w;
                    out[1] += c[1] * w;
                }
                out
            }
        }
    }

    /// Diffusion matrix `a = σσ*` as `[a11, a12, a22]`.
    #[inline]
    pub fn diffusion(&self, x: Point) -> [f64; 3] {
        match self {
            Sigma::Identity(l) => {
                let d1 = if *l >= 1 { 1.0 } else { 0.0 };
                let d2 = if *l >= 2 { 1.0 } else { 0.0 };
                [d1, 0.0, d2]
            }
            _ => {
                let mut a = [0.0; 3];
                for k in 0..self.cols() {
                    let c = self.column(x, k);
                    a[0] += c[0] * c[0];
                    a[1] += c[0] * c[1];
                    a[2] += c[1] * c[1];
                }
                a
            }
        }
    }
}

/// Everything `evaluate` reports at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FieldSample {
    pub h: f64,
    pub grad: [f64; 2],
    /// `[Hxx, Hxy, Hyy]`
    pub hess: [f64; 3],
    /// `A H = ½ Σ a_ij ∂_ij H`
    pub ah: f64,
    /// `|∇H* σ|²`
    pub g2: f64,
}

/// A Hamiltonian together with its noise matrix and working box.
///
/// Immutable after construction; all evaluation is pure, so one instance can
/// be shared by any number of worker threads.
#[derive(Debug, Clone)]
pub struct HamiltonianSystem {
    name: String,
    h: Poly2,
    hx: Poly2,
    hy: Poly2,
    hxx: Poly2,
    hxy: Poly2,
    hyy: Poly2,
    // third derivatives, used by the saddle chart Jacobian
    hxxx: Poly2,
    hxxy: Poly2,
    hxyy: Poly2,
    hyyy: Poly2,
    sigma: Sigma,
    bbox: Rect,
}

impl HamiltonianSystem {
    pub fn new(name: impl Into<String>, h: Poly2, sigma: Sigma, bbox: Rect) -> Self {
        let hx = h.dx();
        let hy = h.dy();
        let hxx = hx.dx();
        let hxy = hx.dy();
        let hyy = hy.dy();
        HamiltonianSystem {
            name: name.into(),
            hxxx: hxx.dx(),
            hxxy: hxx.dy(),
            hxyy: hxy.dy(),
            hyyy: hyy.dy(),
            h,
            hx,
            hy,
            hxx,
            hxy,
            hyy,
            sigma,
            bbox,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn polynomial(&self) -> &Poly2 {
        &self.h
    }

    pub fn sigma(&self) -> &Sigma {
        &self.sigma
    }

    pub fn bbox(&self) -> Rect {
        self.bbox
    }

    /// Same Hamiltonian with a different noise matrix.
    pub fn with_sigma(&self, sigma: Sigma) -> Self {
        let mut s = self.clone();
        s.sigma = sigma;
        s
    }

    pub fn with_box(&self, bbox: Rect) -> Self {
        let mut s = self.clone();
        s.bbox = bbox;
        s
    }

    #[inline]
    pub fn h(&self, x: Point) -> f64 {
        self.h.eval(x[0], x[1])
    }

    #[inline]
    pub fn grad(&self, x: Point) -> [f64; 2] {
        [self.hx.eval(x[0], x[1]), self.hy.eval(x[0], x[1])]
    }

    /// `[Hxx, Hxy, Hyy]`
    #[inline]
    pub fn hess(&self, x: Point) -> [f64; 3] {
        [
            self.hxx.eval(x[0], x[1]),
            self.hxy.eval(x[0], x[1]),
            self.hyy.eval(x[0], x[1]),
        ]
    }

    /// `[Hxxx, Hxxy, Hxyy, Hyyy]`
    pub fn third(&self, x: Point) -> [f64; 4] {
        [
            self.hxxx.eval(x[0], x[1]),
            self.hxxy.eval(x[0], x[1]),
            self.hxyy.eval(x[0], x[1]),
            self.hyyy.eval(x[0], x[1]),
        ]
    }

    /// Hamiltonian vector field `∇⊥H = (−∂H/∂y, ∂H/∂x)`.
    #[inline]
    pub fn skew_grad(&self, x: Point) -> [f64; 2] {
        let g = self.grad(x);
        [-g[1], g[0]]
    }

    #[inline]
    pub fn ah(&self, x: Point) -> f64 {
        let a = self.sigma.diffusion(x);
        let hs = self.hess(x);
        0.5 * (a[0] * hs[0] + 2.0 * a[1] * hs[1] + a[2] * hs[2])
    }

    /// `|∇H(x)* σ(x)|² = ∇Hᵀ a ∇H`.
    #[inline]
    pub fn g2_with(&self, x: Point, g: [f64; 2]) -> f64 {
        let a = self.sigma.diffusion(x);
        a[0] * g[0] * g[0] + 2.0 * a[1] * g[0] * g[1] + a[2] * g[1] * g[1]
    }

    pub fn evaluate(&self, x: Point) -> FieldSample {
        let g = self.grad(x);
        FieldSample {
            h: self.h(x),
            grad: g,
            hess: self.hess(x),
            ah: self.ah(x),
            g2: self.g2_with(x, g),
        }
    }
}

/// Eigenvalues of the symmetric 2×2 matrix `[[a, b], [b, c]]`, ascending.
pub fn sym_eigenvalues(a: f64, b: f64, c: f64) -> [f64; 2] {
    let m = 0.5 * (a + c);
    let r = (0.5 * (a - c)).hypot(b);
    [m - r, m + r]
}

/// Unit eigenvector for eigenvalue `lambda` of `[[a, b], [b, c]]`.
pub fn sym_eigenvector(a: f64, b: f64, c: f64, lambda: f64) -> [f64; 2] {
    let v1 = [b, lambda - a];
    let v2 = [lambda - c, b];
    let n1 = v1[0].hypot(v1[1]);
    let n2 = v2[0].hypot(v2[1]);
    if n1.max(n2) < 1e-300 {
        return [1.0, 0.0];
    }
    if n1 >= n2 {
        [v1[0] / n1, v1[1] / n1]
    } else {
        [v2[0] / n2, v2[1] / n2]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(sys: &HamiltonianSystem, x: Point) {
        let step = 1e-4;
        let g = sys.grad(x);
        let hs = sys.hess(x);
        let dhx = (sys.h([x[0] + step, x[1]]) - sys.h([x[0] - step, x[1]])) / (2.0 * step);
        let dhy = (sys.h([x[0], x[1] + step]) - sys.h([x[0], x[1] - step])) / (2.0 * step);
        let scale = 1.0 + g[0].abs().max(g[1].abs());
        assert!((dhx - g[0]).abs() / scale < 1e-6);
        assert!((dhy - g[1]).abs() / scale < 1e-6);
        let gxp = sys.grad([x[0] + step, x[1]]);
        let gxm = sys.grad([x[0] - step, x[1]]);
        let gyp = sys.grad([x[0], x[1] + step]);
        let gym = sys.grad([x[0], x[1] - step]);
        let hscale = 1.0 + hs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(((gxp[0] - gxm[0]) / (2.0 * step) - hs[0]).abs() / hscale < 1e-5);
        assert!(((gxp[1] - gxm[1]) / (2.0 * step) - hs[1]).abs() / hscale < 1e-5);
        assert!(((gyp[0] - gym[0]) / (2.0 * step) - hs[1]).abs() / hscale < 1e-5);
        assert!(((gyp[1] - gym[1]) / (2.0 * step) - hs[2]).abs() / hscale < 1e-5);
    }

    #[test]
    fn harmonic_evaluate_matches_hand_contraction() {
        let sys = SystemRegistry::default().build("harmonic").unwrap();
        let s = sys.evaluate([1.0, 0.0]);
        assert_eq!(s.h, 0.5);
        assert_eq!(s.grad, [1.0, 0.0]);
        assert_eq!(s.ah, 1.0);
        assert_eq!(s.g2, 1.0);
    }

    #[test]
    fn double_well_at_saddle() {
        let sys = SystemRegistry::default().build("doublewell").unwrap();
        let s = sys.evaluate([0.0, 0.0]);
        assert_eq!(s.h, 0.25);
        assert_eq!(s.grad, [0.0, 0.0]);
        assert_eq!(s.g2, 0.0);
        // ½(Hxx + Hyy) = ½(−1 + 1)
        assert_eq!(s.ah, 0.0);
    }

    #[test]
    fn derivatives_match_finite_differences_on_grid() {
        let reg = SystemRegistry::default();
        for name in ["harmonic", "doublewell", "canonical_saddle", "four_saddles"] {
            let sys = reg.build(name).unwrap();
            for i in 0..9 {
                for j in 0..9 {
                    fd_check(&sys, [-1.6 + 0.4 * i as f64, -1.6 + 0.4 * j as f64]);
                }
            }
        }
    }

    #[test]
    fn ah_is_half_trace_for_identity_sigma() {
        let sys = SystemRegistry::default().build("doublewell").unwrap();
        for &x in &[[0.3, -0.7], [1.2, 0.4], [-0.9, 1.1]] {
            let hs = sys.hess(x);
            assert_eq!(sys.ah(x), 0.5 * (hs[0] + hs[2]));
        }
    }

    #[test]
    fn general_sigma_contractions() {
        let sys = SystemRegistry::default()
            .build("harmonic")
            .unwrap()
            .with_sigma(Sigma::constant_rows(&[vec![1.0, 0.5, 0.0], vec![0.0, 2.0, 1.0]]).unwrap());
        let x = [0.7, -0.4];
        let g = sys.grad(x);
        // explicit |gᵀσ|²
        let cols = [[1.0, 0.0], [0.5, 2.0], [0.0, 1.0]];
        let direct: f64 = cols.iter().map(|c| (g[0] * c[0] + g[1] * c[1]).powi(2)).sum();
        assert!((sys.evaluate(x).g2 - direct).abs() < 1e-14);
        // a = σσ* = [[1.25, 1.0], [1.0, 5.0]], Hess = I
        assert!((sys.ah(x) - 0.5 * (1.25 + 5.0)).abs() < 1e-14);
    }

    #[test]
    fn eigen_helpers() {
        let e = sym_eigenvalues(2.0, 0.0, -1.0);
        assert_eq!(e, [-1.0, 2.0]);
        let v = sym_eigenvector(2.0, 1.0, 2.0, 3.0);
        assert!((v[0].abs() - v[1].abs()).abs() < 1e-15);
    }
}
