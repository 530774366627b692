//! Morse–Palais chart around a nondegenerate saddle and the deterministic
//! transit time through it.
//!
//! In the Hessian eigenframe `ξ`, Taylor's theorem with integral remainder
//! gives `H − H(s) = ξᵀ Q(ξ) ξ` with `Q(ξ) = ∫₀¹ (1−t) Hess(tξ) dt`. Completing
//! the square in that form yields the chart coordinates
//! `μ = √a (ξ₁ + (b/a) ξ₂)`, `ν = √(b²/a − c) ξ₂`, for which `H − H(s) = μ² − ν²`
//! holds identically. The inverse `ψ` is evaluated by Newton iteration.

use serde::Serialize;

use super::SimError;
use crate::field::{sym_eigenvalues, sym_eigenvector, CriticalKind, CriticalPoint, HamiltonianSystem, Point};
use crate::ode::{dopri_step, Adaptive, Tolerance};
use crate::quad::{gl8_composite, gl8_unit};

/// Chart validity tolerance on `|H∘ψ − H(s) − (μ² − ν²)|`.
pub const CHART_RESIDUAL_TOL: f64 = 1e-8;
const VALIDATION_GRID: usize = 64;
const MAX_SHRINKS: usize = 3;

/// `Q(ξ)` and its first derivatives.
struct Form {
    a: f64,
    b: f64,
    c: f64,
    da: [f64; 2],
    db: [f64; 2],
    dc: [f64; 2],
}

#[derive(Debug, Clone)]
pub struct SaddleChart {
    sys: HamiltonianSystem,
    pub center: Point,
    pub h0: f64,
    /// Orthonormal eigenframe: `frame[0]` along the positive curvature.
    pub frame: [[f64; 2]; 2],
    /// Half-height of `U`; `U₀ = [−4l, 4l] × [−2l, 2l]`, `U = [−2l, 2l] × [−l, l]`.
    pub l: f64,
    /// Set when `ν` was negated so that `det J_ψ > 0`.
    pub flipped: bool,
    /// Common bound on `‖ψ‖, ‖ψ⁻¹‖, ‖J_ψ‖, ‖J_ψ⁻¹‖, |det J_ψ|, |∇ det J_ψ|` over `U₀`.
    pub m_bar: f64,
    /// Largest validity residual seen on the validation grid.
    pub max_residual: f64,
    /// Values of `l` tried before this one succeeded.
    pub shrinks: usize,
}

fn tri(th: &[f64; 4], u: [f64; 2], v: [f64; 2], w: [f64; 2]) -> f64 {
    let mut s = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                s += th[i + j + k] * u[i] * v[j] * w[k];
            }
        }
    }
    s
}

fn quad_form(h: &[f64; 3], u: [f64; 2], v: [f64; 2]) -> f64 {
    h[0] * u[0] * v[0] + h[1] * (u[0] * v[1] + u[1] * v[0]) + h[2] * u[1] * v[1]
}

fn op_norm(m: [[f64; 2]; 2]) -> f64 {
    let a = m[0][0] * m[0][0] + m[1][0] * m[1][0];
    let b = m[0][0] * m[0][1] + m[1][0] * m[1][1];
    let c = m[0][1] * m[0][1] + m[1][1] * m[1][1];
    sym_eigenvalues(a, b, c)[1].max(0.0).sqrt()
}

fn canonical_sign(v: [f64; 2]) -> [f64; 2] {
    let lead = if v[0].abs() >= v[1].abs() { v[0] } else { v[1] };
    if lead < 0.0 {
        [-v[0], -v[1]]
    } else {
        v
    }
}

impl SaddleChart {
    fn form(&self, xi: [f64; 2]) -> Form {
        let [e1, e2] = self.frame;
        let mut f = Form { a: 0.0, b: 0.0, c: 0.0, da: [0.0; 2], db: [0.0; 2], dc: [0.0; 2] };
        for (t, w) in gl8_unit() {
            let x = [
                self.center[0] + t * (e1[0] * xi[0] + e2[0] * xi[1]),
                self.center[1] + t * (e1[1] * xi[0] + e2[1] * xi[1]),
            ];
            let hs = self.sys.hess(x);
            let th = self.sys.third(x);
            let wq = w * (1.0 - t);
            f.a += wq * quad_form(&hs, e1, e1);
            f.b += wq * quad_form(&hs, e1, e2);
            f.c += wq * quad_form(&hs, e2, e2);
            for (k, ek) in [e1, e2].into_iter().enumerate() {
                f.da[k] += wq * t * tri(&th, e1, e1, ek);
                f.db[k] += wq * t * tri(&th, e1, e2, ek);
                f.dc[k] += wq * t * tri(&th, e2, e2, ek);
            }
        }
        f
    }

    /// `ξ ↦ (μ, ν)` with its Jacobian; `None` where the square completion breaks down.
    fn phi(&self, xi: [f64; 2]) -> Option<([f64; 2], [[f64; 2]; 2])> {
        let f = self.form(xi);
        if f.a <= 0.0 {
            return None;
        }
        let d = f.b * f.b / f.a - f.c;
        if d <= 0.0 {
            return None;
        }
        let s = if self.flipped { -1.0 } else { 1.0 };
        let sa = f.a.sqrt();
        let sd = d.sqrt();
        let w = [sa * xi[0] + f.b / sa * xi[1], s * sd * xi[1]];
        let mut j = [[0.0; 2]; 2];
        for k in 0..2 {
            let dsa = f.da[k] / (2.0 * sa);
            let dbsa = f.db[k] / sa - f.b * f.da[k] / (2.0 * f.a * sa);
            let dd = 2.0 * f.b * f.db[k] / f.a - f.b * f.b * f.da[k] / (f.a * f.a) - f.dc[k];
            let dsd = dd / (2.0 * sd);
            j[0][k] = dsa * xi[0] + dbsa * xi[1] + if k == 0 { sa } else { f.b / sa };
            j[1][k] = s * (dsd * xi[1] + if k == 1 { sd } else { 0.0 });
        }
        Some((w, j))
    }

    fn newton(&self, w: [f64; 2], mut xi: [f64; 2]) -> Option<[f64; 2]> {
        let scale = 1.0 + w[0].abs() + w[1].abs();
        for _ in 0..60 {
            let (v, j) = self.phi(xi)?;
            let r = [v[0] - w[0], v[1] - w[1]];
            if r[0].abs().max(r[1].abs()) <= 1e-15 * scale {
                return Some(xi);
            }
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            if det.abs() < 1e-300 {
                return None;
            }
            xi[0] -= (j[1][1] * r[0] - j[0][1] * r[1]) / det;
            xi[1] -= (j[0][0] * r[1] - j[1][0] * r[0]) / det;
        }
        let (v, _) = self.phi(xi)?;
        ((v[0] - w[0]).abs().max((v[1] - w[1]).abs()) <= 1e-12 * scale).then_some(xi)
    }

    /// Frame coordinates of `ψ(μ, ν)`.
    fn inverse(&self, w: [f64; 2]) -> Option<[f64; 2]> {
        let f0 = self.form([0.0, 0.0]);
        let sa = f0.a.sqrt();
        let sd = (f0.b * f0.b / f0.a - f0.c).sqrt();
        let s = if self.flipped { -1.0 } else { 1.0 };
        let linear = |w: [f64; 2]| {
            let x2 = w[1] / (s * sd);
            [(w[0] - f0.b / sa * x2) / sa, x2]
        };
        if let Some(xi) = self.newton(w, linear(w)) {
            return Some(xi);
        }
        // continuation along the ray from the origin
        let mut xi = [0.0, 0.0];
        for k in 1..=16 {
            let t = k as f64 / 16.0;
            xi = self.newton([t * w[0], t * w[1]], xi)?;
        }
        Some(xi)
    }

    /// `ψ(μ, ν)` in the plane.
    pub fn to_world(&self, w: [f64; 2]) -> Option<Point> {
        let xi = self.inverse(w)?;
        let [e1, e2] = self.frame;
        Some([
            self.center[0] + e1[0] * xi[0] + e2[0] * xi[1],
            self.center[1] + e1[1] * xi[0] + e2[1] * xi[1],
        ])
    }

    /// `ψ⁻¹(x)`.
    pub fn from_world(&self, x: Point) -> Option<[f64; 2]> {
        let d = [x[0] - self.center[0], x[1] - self.center[1]];
        let [e1, e2] = self.frame;
        let xi = [e1[0] * d[0] + e1[1] * d[1], e2[0] * d[0] + e2[1] * d[1]];
        self.phi(xi).map(|p| p.0)
    }

    fn frame_det(&self) -> f64 {
        let [e1, e2] = self.frame;
        e1[0] * e2[1] - e1[1] * e2[0]
    }

    /// `J_ψ(μ, ν)` in plane coordinates.
    pub fn jacobian(&self, w: [f64; 2]) -> Option<[[f64; 2]; 2]> {
        let xi = self.inverse(w)?;
        let (_, j) = self.phi(xi)?;
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        // dξ/dw = J⁻¹, then rotate into the plane
        let inv = [[j[1][1] / det, -j[0][1] / det], [-j[1][0] / det, j[0][0] / det]];
        let [e1, e2] = self.frame;
        let mut out = [[0.0; 2]; 2];
        for r in 0..2 {
            for c in 0..2 {
                out[r][c] = e1[r] * inv[0][c] + e2[r] * inv[1][c];
            }
        }
        Some(out)
    }

    pub fn det_jacobian(&self, w: [f64; 2]) -> Option<f64> {
        let xi = self.inverse(w)?;
        let (_, j) = self.phi(xi)?;
        Some(self.frame_det() / (j[0][0] * j[1][1] - j[0][1] * j[1][0]))
    }

    /// `H(ψ(μ, ν)) − H(s) − (μ² − ν²)`.
    pub fn residual(&self, w: [f64; 2]) -> Option<f64> {
        let x = self.to_world(w)?;
        Some(self.sys.h(x) - self.h0 - (w[0] * w[0] - w[1] * w[1]))
    }

    pub fn in_u(&self, w: [f64; 2]) -> bool {
        w[0].abs() <= 2.0 * self.l && w[1].abs() <= self.l
    }

    /// Checks the chart over a grid on `U₀` and computes `M̄`.
    fn validate(&mut self) -> Result<(), String> {
        let n = VALIDATION_GRID;
        let l = self.l;
        let fd = 1e-5 * l;
        let mut m_bar = 0.0f64;
        let mut max_res = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let w = [-4.0 * l + 8.0 * l * i as f64 / (n - 1) as f64, -2.0 * l + 4.0 * l * j as f64 / (n - 1) as f64];
                let x = self.to_world(w).ok_or_else(|| format!("no preimage at ({:.4}, {:.4})", w[0], w[1]))?;
                if !self.sys.bbox().contains(x) {
                    return Err("chart leaves the working box".into());
                }
                let res = (self.sys.h(x) - self.h0 - (w[0] * w[0] - w[1] * w[1])).abs();
                if !(res <= CHART_RESIDUAL_TOL) {
                    return Err(format!("residual {res:.3e} at ({:.4}, {:.4})", w[0], w[1]));
                }
                max_res = max_res.max(res);
                let jac = self.jacobian(w).ok_or("singular jacobian")?;
                let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
                if !(det > 0.0) {
                    return Err(format!("det J = {det:.3e} at ({:.4}, {:.4})", w[0], w[1]));
                }
                let inv = [[jac[1][1] / det, -jac[0][1] / det], [-jac[1][0] / det, jac[0][0] / det]];
                let ddet = |dw: [f64; 2]| -> Result<f64, String> {
                    let p = self.det_jacobian([w[0] + dw[0], w[1] + dw[1]]).ok_or("det gradient")?;
                    let m = self.det_jacobian([w[0] - dw[0], w[1] - dw[1]]).ok_or("det gradient")?;
                    Ok((p - m) / (2.0 * fd))
                };
                let grad_det = ddet([fd, 0.0])?.hypot(ddet([0.0, fd])?);
                let dx = (x[0] - self.center[0]).hypot(x[1] - self.center[1]);
                for v in [dx, w[0].hypot(w[1]), op_norm(jac), op_norm(inv), det, grad_det] {
                    m_bar = m_bar.max(v);
                }
            }
        }
        self.m_bar = m_bar;
        self.max_residual = max_res;
        Ok(())
    }

    /// `G(μ, ν) = μ² − ν²`.
    pub fn g(w: [f64; 2]) -> f64 {
        w[0] * w[0] - w[1] * w[1]
    }

    fn check_transit_domain(&self, w: [f64; 2]) -> Result<f64, SimError> {
        let g = Self::g(w);
        if !(w[0] > 0.0 && self.in_u(w) && g > 0.0 && g < 3.0 * self.l * self.l) {
            return Err(SimError::OutsideChart { mu: w[0], nu: w[1] });
        }
        Ok(g)
    }

    /// Deterministic time to leave `U` through its upper side, by quadrature
    /// of `½ ∫_ν^l det J_ψ(√(y² + G), y) / √(y² + G) dy` after `y = √G sinh u`.
    pub fn transit_time(&self, w: [f64; 2]) -> Result<f64, SimError> {
        let g = self.check_transit_domain(w)?;
        let sg = g.sqrt();
        let u0 = (w[1] / sg).asinh();
        let u1 = (self.l / sg).asinh();
        let mut failed = false;
        let v = gl8_composite(u0, u1, 0.05, |u| match self.det_jacobian([sg * u.cosh(), sg * u.sinh()]) {
            Some(d) => d,
            None => {
                failed = true;
                0.0
            }
        });
        if failed {
            return Err(SimError::OutsideChart { mu: w[0], nu: w[1] });
        }
        Ok(0.5 * v)
    }

    /// Exit time of the flow `ẋ = ∇⊥H` from `ψ(μ, ν)` through `ν = l`, by
    /// direct integration with the crossing located by bisection.
    pub fn exit_time_by_flow(&self, w: [f64; 2], tol: f64) -> Result<f64, SimError> {
        self.check_transit_domain(w)?;
        let x0 = self.to_world(w).ok_or(SimError::OutsideChart { mu: w[0], nu: w[1] })?;
        let f = |y: &[f64; 2]| self.sys.skew_grad(*y);
        let gap = |x: &[f64; 2]| self.from_world(*x).map(|c| c[1] - self.l);
        let tol_s = Tolerance::new(tol).with_h_max(0.05 * self.l);
        let mut ad = Adaptive::new(tol_s, 1e-3 * self.l);
        let mut y = x0;
        let mut t = 0.0;
        while t < 1e4 {
            let (h, y1) = ad.advance(&f, &y, f64::INFINITY).map_err(|_| SimError::StepUnderflow { t })?;
            let g1 = gap(&y1).ok_or(SimError::OutsideChart { mu: w[0], nu: w[1] })?;
            if g1 >= 0.0 {
                let (mut lo, mut hi) = (0.0, h);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if hi - lo <= 1e-15 * (1.0 + t) {
                        break;
                    }
                    let ym = dopri_step(&f, &y, mid, &tol_s).0;
                    match gap(&ym) {
                        Some(gm) if gm < 0.0 => lo = mid,
                        _ => hi = mid,
                    }
                }
                return Ok(t + 0.5 * (lo + hi));
            }
            y = y1;
            t += h;
        }
        Err(SimError::OutsideChart { mu: w[0], nu: w[1] })
    }

    /// Right-hand side of the logarithmic transit bound.
    pub fn log_bound(&self, w: [f64; 2]) -> f64 {
        let g = Self::g(w);
        let l = self.l;
        self.m_bar * ((l + (l * l + g).sqrt()).ln() - 0.5 * g.ln())
    }
}

/// Builds the chart of half-height `l`, halving `l` up to three times when the
/// validity check fails.
pub fn build_saddle_chart(sys: &HamiltonianSystem, saddle: &CriticalPoint, l: f64) -> Result<SaddleChart, SimError> {
    if saddle.kind != CriticalKind::Saddle {
        return Err(SimError::ChartFail { l, reason: format!("{:?} is not a saddle", saddle.kind) });
    }
    if !(l > 0.0 && l < 1.0) {
        return Err(SimError::ChartFail { l, reason: "l must lie in (0, 1)".into() });
    }
    let s = saddle.location;
    let [hxx, hxy, hyy] = sys.hess(s);
    let [lm, lp] = sym_eigenvalues(hxx, hxy, hyy);
    if !(lm < 0.0 && lp > 0.0) {
        return Err(SimError::ChartFail { l, reason: "hessian is not indefinite".into() });
    }
    let e1 = canonical_sign(sym_eigenvector(hxx, hxy, hyy, lp));
    let e2 = canonical_sign(sym_eigenvector(hxx, hxy, hyy, lm));
    let mut chart = SaddleChart {
        sys: sys.clone(),
        center: s,
        h0: sys.h(s),
        frame: [e1, e2],
        l,
        flipped: false,
        m_bar: 0.0,
        max_residual: 0.0,
        shrinks: 0,
    };
    chart.flipped = chart.frame_det() < 0.0;
    let mut last = String::new();
    for k in 0..=MAX_SHRINKS {
        chart.l = l / f64::powi(2.0, k as i32);
        chart.shrinks = k;
        match chart.validate() {
            Ok(()) => return Ok(chart),
            Err(e) => last = e,
        }
    }
    Err(SimError::ChartFail { l: chart.l, reason: last })
}

#[derive(Debug, Clone, Serialize)]
pub struct TransitSample {
    pub mu: f64,
    pub nu: f64,
    /// `H(ψ(μ, ν)) − H(s)`
    pub h: f64,
    pub t: f64,
    pub dt_dmu: f64,
    pub dt_dnu: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TransitDerivativeReport {
    pub samples: Vec<TransitSample>,
    /// Smallest `C` with `|∂T/∂μ|, |∂T/∂ν| ≤ C / H` at every usable sample.
    pub c_min: f64,
    /// Samples skipped because a difference stencil left the admissible set.
    pub skipped: usize,
}

/// Central-difference derivatives of the transit time at each sample.
pub fn transit_derivative_bounds(chart: &SaddleChart, samples: &[[f64; 2]]) -> TransitDerivativeReport {
    let mut out = Vec::new();
    let mut skipped = 0;
    let mut c_min = 0.0f64;
    for &w in samples {
        let g = SaddleChart::g(w);
        let eta = (1e-4 * g / (w[0].abs() + w[1].abs())).min(1e-3 * chart.l);
        let diff = |dw: [f64; 2]| -> Result<f64, SimError> {
            let p = chart.transit_time([w[0] + dw[0], w[1] + dw[1]])?;
            let m = chart.transit_time([w[0] - dw[0], w[1] - dw[1]])?;
            Ok((p - m) / (2.0 * eta))
        };
        match (chart.transit_time(w), diff([eta, 0.0]), diff([0.0, eta])) {
            (Ok(t), Ok(dm), Ok(dn)) => {
                c_min = c_min.max(dm.abs().max(dn.abs()) * g);
                out.push(TransitSample { mu: w[0], nu: w[1], h: g, t, dt_dmu: dm, dt_dnu: dn });
            }
            _ => skipped += 1,
        }
    }
    TransitDerivativeReport { samples: out, c_min, skipped }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Rect, Sigma, SystemRegistry};
    use crate::poly::Poly2;

    fn saddle_at_origin(h: Poly2) -> (HamiltonianSystem, CriticalPoint) {
        let sys = HamiltonianSystem::new("quad", h, Sigma::Identity(2), Rect::new(-5.0, 5.0, -5.0, 5.0));
        let cp = CriticalPoint { location: [0.0, 0.0], h_value: 0.0, kind: CriticalKind::Saddle, hess_eigenvalues: [-2.0, 2.0] };
        (sys, cp)
    }

    #[test]
    fn identity_chart() {
        let (sys, cp) = saddle_at_origin(Poly2::new([(2, 0, 1.0), (0, 2, -1.0)]));
        let ch = build_saddle_chart(&sys, &cp, 0.5).unwrap();
        assert!(!ch.flipped);
        let x = ch.to_world([0.3, -0.2]).unwrap();
        assert!((x[0] - 0.3).abs() < 1e-14 && (x[1] + 0.2).abs() < 1e-14);
        assert!((ch.det_jacobian([0.7, 0.4]).unwrap() - 1.0).abs() < 1e-14);
        let t = ch.transit_time([0.1, 0.0]).unwrap();
        assert!((t - 0.5 * 5f64.asinh()).abs() < 1e-10, "{t}");
    }

    #[test]
    fn linear_rescaling() {
        let (sys, cp) = saddle_at_origin(Poly2::new([(2, 0, 2.0), (0, 2, -1.0)]));
        let ch = build_saddle_chart(&sys, &cp, 0.3).unwrap();
        let x = ch.to_world([0.4, 0.1]).unwrap();
        assert!((x[0] - 0.4 / 2f64.sqrt()).abs() < 1e-14 && (x[1] - 0.1).abs() < 1e-14);
        assert!((ch.det_jacobian([0.2, -0.3]).unwrap() - 0.5f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn doublewell_chart_is_valid_and_flipped() {
        let sys = SystemRegistry::default().build("doublewell").unwrap();
        let cp = CriticalPoint { location: [0.0, 0.0], h_value: 0.25, kind: CriticalKind::Saddle, hess_eigenvalues: [-1.0, 1.0] };
        let ch = build_saddle_chart(&sys, &cp, 0.2).unwrap();
        assert!(ch.flipped);
        assert!(ch.max_residual <= CHART_RESIDUAL_TOL);
        // ν reaches the wells at |ν| = ½, so l = 0.3 needs one shrink
        let ch = build_saddle_chart(&sys, &cp, 0.3).unwrap();
        assert_eq!(ch.shrinks, 1);
    }

    #[test]
    fn transit_matches_flow_on_doublewell() {
        let sys = SystemRegistry::default().build("doublewell").unwrap();
        let cp = CriticalPoint { location: [0.0, 0.0], h_value: 0.25, kind: CriticalKind::Saddle, hess_eigenvalues: [-1.0, 1.0] };
        let ch = build_saddle_chart(&sys, &cp, 0.2).unwrap();
        for w in [[0.1, 0.0], [0.3, -0.15], [0.05, 0.04], [0.35, 0.19]] {
            let tq = ch.transit_time(w).unwrap();
            let tf = ch.exit_time_by_flow(w, 1e-12).unwrap();
            assert!(((tq - tf) / tf).abs() < 1e-6, "{w:?}: {tq} vs {tf}");
        }
    }

    #[test]
    fn outside_chart_is_rejected() {
        let (sys, cp) = saddle_at_origin(Poly2::new([(2, 0, 1.0), (0, 2, -1.0)]));
        let ch = build_saddle_chart(&sys, &cp, 0.5).unwrap();
        assert!(matches!(ch.transit_time([0.1, 0.2]), Err(SimError::OutsideChart { .. })));
        assert!(matches!(ch.transit_time([-0.3, 0.0]), Err(SimError::OutsideChart { .. })));
    }
}
