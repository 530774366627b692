use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{sym_eigenvalues, FieldError, HamiltonianSystem, Point, Rect};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord, schemars::JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum CriticalKind {
    Minimum,
    Maximum,
    Saddle,
}

impl CriticalKind {
    pub fn is_extremum(self) -> bool {
        !matches!(self, CriticalKind::Saddle)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
pub struct CriticalPoint {
    pub location: Point,
    pub h_value: f64,
    pub kind: CriticalKind,
    /// Ascending Hessian eigenvalues.
    pub hess_eigenvalues: [f64; 2],
}

const DEDUP_RADIUS: f64 = 1e-6;
const DET_FLOOR: f64 = 1e-8;

fn newton(sys: &HamiltonianSystem, seed: Point, fence: &Rect) -> Option<Point> {
    let mut x = seed;
    for _ in 0..80 {
        let g = sys.grad(x);
        let [a, b, c] = sys.hess(x);
        let det = a * c - b * b;
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let dx = (c * g[0] - b * g[1]) / det;
        let dy = (a * g[1] - b * g[0]) / det;
        x = [x[0] - dx, x[1] - dy];
        if !fence.contains(x) {
            return None;
        }
        if dx.hypot(dy) < 1e-15 * (1.0 + x[0].hypot(x[1])) {
            break;
        }
    }
    let g = sys.grad(x);
    let [a, b, c] = sys.hess(x);
    let hnorm = a.abs().max(b.abs()).max(c.abs()).max(1.0);
    (g[0].hypot(g[1]) < 1e-10 * hnorm).then_some(x)
}

fn sign_change(v: [f64; 4]) -> bool {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    lo <= 0.0 && hi >= 0.0
}

fn classify(sys: &HamiltonianSystem, x: Point) -> Result<CriticalPoint, FieldError> {
    let [a, b, c] = sys.hess(x);
    let det = a * c - b * b;
    if det.abs() < DET_FLOOR {
        return Err(FieldError::DegenerateCritical { x: x[0], y: x[1], det: det.abs() });
    }
    let ev = sym_eigenvalues(a, b, c);
    let kind = if ev[0] > 0.0 {
        CriticalKind::Minimum
    } else if ev[1] < 0.0 {
        CriticalKind::Maximum
    } else {
        CriticalKind::Saddle
    };
    Ok(CriticalPoint { location: x, h_value: sys.h(x), kind, hess_eigenvalues: ev })
}

/// Locates every critical point inside `bbox`.
///
/// Seeds Newton's method from each grid cell where both gradient components
/// change sign, deduplicates roots within 1e-6 and classifies them by the
/// Hessian spectrum. The result is sorted by energy, then position.
pub fn find_critical_points(
    sys: &HamiltonianSystem,
    bbox: Rect,
    grid_n: usize,
) -> Result<Vec<CriticalPoint>, FieldError> {
    let n = grid_n.max(32);
    let hx = bbox.width() / n as f64;
    let hy = bbox.height() / n as f64;
    let node = |i: usize, j: usize| [bbox.xmin + i as f64 * hx, bbox.ymin + j as f64 * hy];
    let grads: Vec<[f64; 2]> = (0..=n)
        .into_par_iter()
        .flat_map_iter(|j| (0..=n).map(move |i| (i, j)))
        .map(|(i, j)| sys.grad(node(i, j)))
        .collect();
    let at = |i: usize, j: usize| grads[j * (n + 1) + i];
    let gscale = grads
        .iter()
        .map(|g| g[0].hypot(g[1]))
        .fold(0.0f64, f64::max)
        .max(1e-300);

    let fence = Rect::new(
        bbox.xmin - 0.05 * bbox.width(),
        bbox.xmax + 0.05 * bbox.width(),
        bbox.ymin - 0.05 * bbox.height(),
        bbox.ymax + 0.05 * bbox.height(),
    );

    let cells: Vec<(usize, usize)> = (0..n)
        .flat_map(|j| (0..n).map(move |i| (i, j)))
        .filter(|&(i, j)| {
            let c = [at(i, j), at(i + 1, j), at(i, j + 1), at(i + 1, j + 1)];
            sign_change([c[0][0], c[1][0], c[2][0], c[3][0]])
                && sign_change([c[0][1], c[1][1], c[2][1], c[3][1]])
        })
        .collect();

    let found: Vec<Result<Vec<Point>, FieldError>> = cells
        .par_iter()
        .map(|&(i, j)| {
            let p0 = node(i, j);
            let seeds = [
                [p0[0] + 0.5 * hx, p0[1] + 0.5 * hy],
                p0,
                [p0[0] + hx, p0[1]],
                [p0[0], p0[1] + hy],
                [p0[0] + hx, p0[1] + hy],
            ];
            let roots: Vec<Point> = seeds.iter().filter_map(|&s| newton(sys, s, &fence)).collect();
            if roots.is_empty() {
                // only a failure if the cell really looks like it hosts a zero
                let mut gmin = f64::INFINITY;
                for a in 0..=4 {
                    for b in 0..=4 {
                        let g = sys.grad([p0[0] + hx * a as f64 / 4.0, p0[1] + hy * b as f64 / 4.0]);
                        gmin = gmin.min(g[0].hypot(g[1]));
                    }
                }
                if gmin < 1e-6 * gscale {
                    return Err(FieldError::NonConvergence { x: seeds[0][0], y: seeds[0][1] });
                }
            }
            Ok(roots)
        })
        .collect();

    let mut roots: Vec<Point> = Vec::new();
    for r in found {
        for p in r? {
            if !bbox.contains(p) {
                continue;
            }
            if roots.iter().all(|q| (q[0] - p[0]).hypot(q[1] - p[1]) > DEDUP_RADIUS) {
                roots.push(p);
            }
        }
    }
    let mut out = roots
        .into_iter()
        .map(|p| classify(sys, p))
        .collect::<Result<Vec<_>, _>>()?;
    out.sort_by(|a, b| {
        a.h_value
            .total_cmp(&b.h_value)
            .then(a.location[0].total_cmp(&b.location[0]))
            .then(a.location[1].total_cmp(&b.location[1]))
    });
    Ok(out)
}

/// Minimum of `4(H − H_min)·AH − |∇H*σ|²` over a polar sample of the punctured
/// ball of the given radius around a minimum. A positive value certifies the
/// positive-drift inequality for `√H` near the extremum.
pub fn positive_drift_margin(
    sys: &HamiltonianSystem,
    minimum: &CriticalPoint,
    radius: f64,
) -> Result<f64, FieldError> {
    if minimum.kind != CriticalKind::Minimum {
        return Err(FieldError::BadKind(minimum.kind));
    }
    const NR: usize = 100;
    const NT: usize = 100;
    let c = minimum.location;
    let margin = (1..=NR)
        .into_par_iter()
        .map(|k| {
            let r = radius * k as f64 / NR as f64;
            (0..NT)
                .map(|m| {
                    let th = std::f64::consts::TAU * m as f64 / NT as f64;
                    let x = [c[0] + r * th.cos(), c[1] + r * th.sin()];
                    let s = sys.evaluate(x);
                    4.0 * (s.h - minimum.h_value) * s.ah - s.g2
                })
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| f64::INFINITY, f64::min);
    Ok(margin)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::SystemRegistry;

    fn sys(name: &str) -> HamiltonianSystem {
        SystemRegistry::default().build(name).unwrap()
    }

    #[test]
    fn harmonic_has_single_minimum() {
        let s = sys("harmonic");
        let cps = find_critical_points(&s, s.bbox(), 64).unwrap();
        assert_eq!(cps.len(), 1);
        assert_eq!(cps[0].kind, CriticalKind::Minimum);
        assert!(cps[0].location[0].abs() < 1e-12 && cps[0].location[1].abs() < 1e-12);
        assert_eq!(cps[0].h_value, 0.0);
    }

    #[test]
    fn double_well_points() {
        let s = sys("doublewell");
        let cps = find_critical_points(&s, s.bbox(), 64).unwrap();
        assert_eq!(cps.len(), 3);
        assert_eq!(cps[0].kind, CriticalKind::Minimum);
        assert_eq!(cps[1].kind, CriticalKind::Minimum);
        assert_eq!(cps[2].kind, CriticalKind::Saddle);
        assert!((cps[0].location[0] + 1.0).abs() < 1e-12);
        assert!((cps[1].location[0] - 1.0).abs() < 1e-12);
        assert!(cps[0].h_value.abs() < 1e-15);
        assert!((cps[2].h_value - 0.25).abs() < 1e-15);
        for c in &cps {
            let g = s.grad(c.location);
            assert!(g[0].hypot(g[1]) < 1e-10);
        }
    }

    #[test]
    fn canonical_saddle_on_unit_box() {
        let s = sys("canonical_saddle");
        let cps = find_critical_points(&s, Rect::new(-1.0, 1.0, -1.0, 1.0), 32).unwrap();
        assert_eq!(cps.len(), 1);
        assert_eq!(cps[0].kind, CriticalKind::Saddle);
        assert_eq!(cps[0].h_value, 0.0);
    }

    #[test]
    fn seed_count_does_not_change_the_answer() {
        for name in ["doublewell", "four_saddles"] {
            let s = sys(name);
            let a = find_critical_points(&s, s.bbox(), 64).unwrap();
            let b = find_critical_points(&s, s.bbox(), 128).unwrap();
            assert_eq!(a.len(), b.len());
            for (p, q) in a.iter().zip(&b) {
                assert_eq!(p.kind, q.kind);
                assert!((p.location[0] - q.location[0]).abs() < 1e-8);
                assert!((p.location[1] - q.location[1]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn circle_of_minima_is_degenerate() {
        let s = sys("mexican_hat");
        let err = find_critical_points(&s, s.bbox(), 64).unwrap_err();
        assert!(matches!(err, FieldError::DegenerateCritical { .. }));
    }

    #[test]
    fn drift_margin_harmonic_closed_form() {
        let s = sys("harmonic");
        let cps = find_critical_points(&s, s.bbox(), 64).unwrap();
        let m = positive_drift_margin(&s, &cps[0], 0.5).unwrap();
        // integrand is 2H = r², smallest sampled radius is 0.5/100
        let r1: f64 = 0.005;
        assert!((m - r1 * r1).abs() < 1e-15);
    }

    #[test]
    fn drift_margin_double_well_minima_positive() {
        let s = sys("doublewell");
        let cps = find_critical_points(&s, s.bbox(), 64).unwrap();
        for c in cps.iter().filter(|c| c.kind == CriticalKind::Minimum) {
            assert!(positive_drift_margin(&s, c, 0.2).unwrap() > 0.0);
        }
        let saddle = cps.iter().find(|c| c.kind == CriticalKind::Saddle).unwrap();
        assert!(matches!(
            positive_drift_margin(&s, saddle, 0.2),
            Err(FieldError::BadKind(CriticalKind::Saddle))
        ));
    }
}
