use serde::Serialize;

use super::CoeffError;
use crate::field::{sym_eigenvalues, sym_eigenvector, CriticalKind, HamiltonianSystem, Point};
use crate::ode::{dopri_step, Adaptive, Tolerance};
use crate::reeb::{project, ReebGraph};

const STEP_BUDGET: usize = 400_000;
const GRAD_FLOOR: f64 = 1e-9;

/// Closed level curve sampled by the tracer, with cumulative arc length.
/// The last point repeats the first.
#[derive(Debug, Clone, Serialize)]
pub struct Polyline {
    pub h: f64,
    pub points: Vec<Point>,
    pub arc: Vec<f64>,
}

impl Polyline {
    pub fn perimeter(&self) -> f64 {
        *self.arc.last().unwrap()
    }

    pub fn max_residual(&self, sys: &HamiltonianSystem) -> f64 {
        self.points.iter().map(|&p| (sys.h(p) - self.h).abs()).fold(0.0, f64::max)
    }

    /// Even–odd point-in-polygon test.
    pub fn encloses(&self, p: Point) -> bool {
        let mut inside = false;
        for w in self.points.windows(2) {
            let (a, b) = (w[0], w[1]);
            if (a[1] > p[1]) != (b[1] > p[1]) {
                let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
                if p[0] < x {
                    inside = !inside;
                }
            }
        }
        inside
    }
}

/// Newton steps along `∇H` back onto `{H = h}`.
pub(crate) fn onto_level(sys: &HamiltonianSystem, mut y: Point, h: f64) -> Point {
    for _ in 0..40 {
        let g = sys.grad(y);
        let n2 = g[0] * g[0] + g[1] * g[1];
        if n2 == 0.0 {
            break;
        }
        let r = sys.h(y) - h;
        y = [y[0] - r * g[0] / n2, y[1] - r * g[1] / n2];
        if r.abs() <= 1e-15 * (1.0 + h.abs()) {
            break;
        }
    }
    y
}

fn unit_tangent(sys: &HamiltonianSystem, y: &Point) -> Point {
    let g = sys.grad(*y);
    let n = g[0].hypot(g[1]);
    if n == 0.0 {
        [0.0, 0.0]
    } else {
        [-g[1] / n, g[0] / n]
    }
}

/// Climbs (or descends, `sign = -1`) the normalized gradient from `start`
/// until `H` passes `h`, then lands on the level with Newton.
fn climb_to(sys: &HamiltonianSystem, start: Point, h: f64, sign: f64, scale: f64) -> Option<Point> {
    let f = |y: &Point| {
        let g = sys.grad(*y);
        let n = g[0].hypot(g[1]);
        if n == 0.0 {
            [0.0, 0.0]
        } else {
            [sign * g[0] / n, sign * g[1] / n]
        }
    };
    let mut ad = Adaptive::new(Tolerance::new(1e-9).with_h_max(0.01 * scale), 1e-4 * scale);
    let mut y = start;
    for _ in 0..STEP_BUDGET / 10 {
        if sign * (sys.h(y) - h) >= 0.0 {
            let p = onto_level(sys, y, h);
            return ((sys.h(p) - h).abs() <= 1e-12 * (1.0 + h.abs())).then_some(p);
        }
        // cap the step near the target with a first-order estimate
        let g = sys.grad(y);
        let gap = (h - sys.h(y)).abs() / g[0].hypot(g[1]).max(1e-300);
        let cap = (1.5 * gap).max(1e-12 * scale);
        let (_, yn) = ad.advance(&f, &y, cap).ok()?;
        y = yn;
    }
    None
}

/// A point of the component `C_edge(h)`.
///
/// Starting points are offsets from an endpoint vertex: any direction off a
/// minimum (climbing) or a maximum (descending) stays on the vertex's edge;
/// off a saddle both unstable sides are tried and the landing point is
/// checked with the projection.
pub fn seed_point(sys: &HamiltonianSystem, graph: &ReebGraph, edge: usize, h: f64) -> Result<Point, CoeffError> {
    let ed = graph.edge(edge);
    let scale = graph.bbox.diameter();
    let mut tries: Vec<(Point, f64, Option<CriticalKind>)> = Vec::new();
    for (v, sign) in [(Some(ed.v_lo), 1.0), (ed.v_hi, -1.0)] {
        let Some(v) = v else { continue };
        let c = graph.vertex(v).critical;
        let [a, b, cc] = sys.hess(c.location);
        let ev = sym_eigenvalues(a, b, cc);
        let gap = (h - c.h_value).abs();
        match c.kind {
            CriticalKind::Minimum | CriticalKind::Maximum => {
                let lam = ev[0].abs().max(ev[1].abs());
                let e = sym_eigenvector(a, b, cc, ev[1]);
                let r = (0.5 * gap / lam).sqrt().min(1e-3 * scale);
                tries.push(([c.location[0] + r * e[0], c.location[1] + r * e[1]], sign, None));
            }
            CriticalKind::Saddle => {
                // leave along the direction in which H moves towards h
                let lam = if sign > 0.0 { ev[1] } else { ev[0] };
                let e = sym_eigenvector(a, b, cc, lam);
                let r = (0.25 * gap / lam.abs()).sqrt().min(1e-3 * scale);
                for s in [1.0, -1.0] {
                    tries.push(([c.location[0] + s * r * e[0], c.location[1] + s * r * e[1]], sign, Some(CriticalKind::Saddle)));
                }
            }
        }
    }
    for (start, sign, from_saddle) in tries {
        let Some(p) = climb_to(sys, start, h, sign, scale) else { continue };
        if from_saddle.is_none() {
            return Ok(p);
        }
        match project(sys, graph, p) {
            Ok(gp) if gp.edge == edge => return Ok(p),
            _ => continue,
        }
    }
    Err(CoeffError::NoSeed { edge, h })
}

/// Traces `C_edge(h)` with the unit tangent field `∇⊥H/|∇H|`, projecting onto
/// the level after every accepted step. The loop is closed on the first
/// crossing of the normal line through the seed, in the direction of motion,
/// after an arc length of at least `10·tol`; the closing step is solved for so
/// the last point sits on that line.
pub fn trace_level_curve(
    sys: &HamiltonianSystem,
    graph: &ReebGraph,
    edge: usize,
    h: f64,
    tol: f64,
) -> Result<Polyline, CoeffError> {
    let (lo, hi) = graph.span(edge);
    let ed = graph.edge(edge);
    let lo_guard = h - lo < tol;
    let hi_guard = !ed.is_unbounded() && hi - h < tol;
    if lo_guard || hi_guard || h > hi && !ed.is_unbounded() {
        return Err(CoeffError::GuardBand { edge, h });
    }
    let seed = seed_point(sys, graph, edge, h)?;
    trace_from(sys, seed, h, tol, graph.bbox.diameter())
}

pub fn trace_from(sys: &HamiltonianSystem, seed: Point, h: f64, tol: f64, scale: f64) -> Result<Polyline, CoeffError> {
    let f = |y: &Point| unit_tangent(sys, y);
    let t0 = f(&seed);
    if t0 == [0.0, 0.0] {
        return Err(CoeffError::DegenerateCurve { x: seed[0], y: seed[1] });
    }
    let section = |y: &Point| (y[0] - seed[0]) * t0[0] + (y[1] - seed[1]) * t0[1];
    let tolr = Tolerance { rtol: tol, atol: tol, h_max: 0.01 * scale, h_min: 1e-14 * scale };
    let mut ad = Adaptive::new(tolr, 1e-3 * scale);
    let mut pts = vec![seed];
    let mut arc = vec![0.0];
    let mut y = seed;
    let mut s = 0.0;
    let mut first_step = 0.0f64;
    for _ in 0..STEP_BUDGET {
        let (dh, yn) = ad.advance(&f, &y, f64::INFINITY).map_err(|_| CoeffError::NoClosure { h })?;
        let yn = onto_level(sys, yn, h);
        if first_step == 0.0 {
            first_step = dh;
        }
        let near = 4.0 * first_step.max(dh);
        let dist = (yn[0] - seed[0]).hypot(yn[1] - seed[1]);
        if s + dh >= (10.0 * tol).max(2.0 * near) && section(&y) < 0.0 && section(&yn) >= 0.0 && dist < near {
            // solve for the step that lands on the section
            let (mut a, mut b) = (0.0, dh);
            let (mut fa, mut fb) = (section(&y), section(&yn));
            let mut root = dh;
            for _ in 0..60 {
                let m = if fb != fa { b - fb * (b - a) / (fb - fa) } else { 0.5 * (a + b) };
                let m = if m <= a || m >= b { 0.5 * (a + b) } else { m };
                let ym = onto_level(sys, dopri_step(&f, &y, m, &tolr).0, h);
                let fm = section(&ym);
                root = m;
                if fm.abs() <= 1e-15 * scale || (b - a) <= 1e-15 * scale {
                    break;
                }
                if fm < 0.0 {
                    a = m;
                    fa = fm;
                } else {
                    b = m;
                    fb = fm;
                }
            }
            let yend = onto_level(sys, dopri_step(&f, &y, root, &tolr).0, h);
            let gap = (yend[0] - seed[0]).hypot(yend[1] - seed[1]);
            if gap > (1e3 * tol).max(1e-9 * scale) {
                return Err(CoeffError::NoClosure { h });
            }
            pts.push(seed);
            arc.push(s + root);
            return Ok(Polyline { h, points: pts, arc });
        }
        s += dh;
        y = yn;
        pts.push(y);
        arc.push(s);
    }
    Err(CoeffError::NoClosure { h })
}

const GL_X: [f64; 5] = [-0.906179845938664, -0.5384693101056831, 0.0, 0.5384693101056831, 0.906179845938664];
const GL_W: [f64; 5] = [0.23692688505618908, 0.47862867049936647, 0.5688888888888889, 0.47862867049936647, 0.23692688505618908];

/// `T = ∮ dl/|∇H|` and `B² = (1/T) ∮ |∇H*σ|²/|∇H| dl` over a traced loop.
///
/// Each polyline segment is rebuilt as the cubic Hermite arc through its end
/// points with the exact unit tangents there, pulled back onto the level, and
/// integrated with 5-point Gauss–Legendre in arc length.
pub fn compute_coeffs(sys: &HamiltonianSystem, line: &Polyline) -> Result<super::Coeffs, CoeffError> {
    let mut t = 0.0;
    let mut q = 0.0;
    for k in 0..line.points.len() - 1 {
        let (p0, p1) = (line.points[k], line.points[k + 1]);
        let ds = line.arc[k + 1] - line.arc[k];
        let (m0, m1) = (unit_tangent(sys, &p0), unit_tangent(sys, &p1));
        for (xg, wg) in GL_X.iter().zip(GL_W) {
            let u = 0.5 * (xg + 1.0);
            let h00 = (1.0 + 2.0 * u) * (1.0 - u) * (1.0 - u);
            let h10 = u * (1.0 - u) * (1.0 - u);
            let h01 = u * u * (3.0 - 2.0 * u);
            let h11 = u * u * (u - 1.0);
            let mut y = [0.0; 2];
            for i in 0..2 {
                y[i] = h00 * p0[i] + h10 * ds * m0[i] + h01 * p1[i] + h11 * ds * m1[i];
            }
            let y = onto_level(sys, y, line.h);
            let g = sys.grad(y);
            let n = g[0].hypot(g[1]);
            if n < GRAD_FLOOR {
                return Err(CoeffError::DegenerateCurve { x: y[0], y: y[1] });
            }
            let w = 0.5 * wg * ds / n;
            t += w;
            q += w * sys.g2_with(y, g);
        }
    }
    Ok(super::Coeffs { t, b2: if t > 0.0 { q / t } else { 0.0 } })
}

/// Independent oracle: integrates `ẋ = ∇⊥H` in time for one period together
/// with `∫|∇H*σ|² dt`. The period is located on the normal line through `x0`.
pub fn coeffs_by_flow(sys: &HamiltonianSystem, x0: Point, tol: f64) -> Result<super::Coeffs, CoeffError> {
    let f = |z: &[f64; 3]| {
        let p = [z[0], z[1]];
        let g = sys.grad(p);
        [-g[1], g[0], sys.g2_with(p, g)]
    };
    let v0 = sys.skew_grad(x0);
    let nv = v0[0].hypot(v0[1]);
    if nv < GRAD_FLOOR {
        return Err(CoeffError::DegenerateCurve { x: x0[0], y: x0[1] });
    }
    let t0 = [v0[0] / nv, v0[1] / nv];
    let section = |z: &[f64; 3]| (z[0] - x0[0]) * t0[0] + (z[1] - x0[1]) * t0[1];
    let tolr = Tolerance::new(tol);
    let mut ad = Adaptive::new(tolr, 1e-3);
    let mut z = [x0[0], x0[1], 0.0];
    let mut t = 0.0;
    let mut travelled = 0.0;
    let mut first = 0.0f64;
    for _ in 0..STEP_BUDGET {
        let (dt, zn) = ad.advance(&f, &z, f64::INFINITY).map_err(|_| CoeffError::NoClosure { h: sys.h(x0) })?;
        let step = (zn[0] - z[0]).hypot(zn[1] - z[1]);
        if first == 0.0 {
            first = step;
        }
        let near = 4.0 * first.max(step);
        let dist = (zn[0] - x0[0]).hypot(zn[1] - x0[1]);
        if travelled > 2.0 * near && section(&z) < 0.0 && section(&zn) >= 0.0 && dist < near {
            let (mut a, mut b) = (0.0, dt);
            let mut root = dt;
            for _ in 0..80 {
                let m = 0.5 * (a + b);
                let fm = section(&dopri_step(&f, &z, m, &tolr).0);
                root = m;
                if fm < 0.0 {
                    a = m;
                } else {
                    b = m;
                }
                if b - a < 1e-16 * (1.0 + t) {
                    break;
                }
            }
            let zend = dopri_step(&f, &z, root, &tolr).0;
            let period = t + root;
            return Ok(super::Coeffs { t: period, b2: zend[2] / period });
        }
        travelled += step;
        t += dt;
        z = zn;
    }
    Err(CoeffError::NoClosure { h: sys.h(x0) })
}
