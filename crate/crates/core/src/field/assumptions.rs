use serde::Serialize;

use super::{find_critical_points, sym_eigenvalues, CriticalKind, HamiltonianSystem, Rect};
use crate::grid::{NodeGrid, EXCLUDED};

#[derive(Debug, Clone, Serialize, schemars::JsonSchema)]
pub struct AssumptionCheck {
    pub id: u8,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Advisory report: systems that fail a check are still usable.
#[derive(Debug, Clone, Serialize, schemars::JsonSchema)]
pub struct AssumptionReport {
    pub checks: Vec<AssumptionCheck>,
    /// Empirical growth constants on the sampling ring: `min H/|x|²`,
    /// `min |∇H|/|x|`, `min ΔH`.
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub max_hessian_norm: f64,
    pub sigma_eig_min: f64,
    pub sigma_eig_max: f64,
}

impl AssumptionReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, id: u8) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.id == id)
    }
}

const RING_SAMPLES: usize = 720;
const BOX_SAMPLES: usize = 96;

pub fn check_assumptions(sys: &HamiltonianSystem, bbox: Rect, ring_radius: f64) -> AssumptionReport {
    let mut checks = Vec::new();

    // 1. bounded second derivatives (on the box)
    let mut hmax = 0.0f64;
    let mut sig_lo = f64::INFINITY;
    let mut sig_hi = 0.0f64;
    for j in 0..=BOX_SAMPLES {
        for i in 0..=BOX_SAMPLES {
            let x = [
                bbox.xmin + bbox.width() * i as f64 / BOX_SAMPLES as f64,
                bbox.ymin + bbox.height() * j as f64 / BOX_SAMPLES as f64,
            ];
            let [a, b, c] = sys.hess(x);
            let ev = sym_eigenvalues(a, b, c);
            hmax = hmax.max(ev[0].abs().max(ev[1].abs()));
            let [s11, s12, s22] = sys.sigma().diffusion(x);
            let se = sym_eigenvalues(s11, s12, s22);
            sig_lo = sig_lo.min(se[0]);
            sig_hi = sig_hi.max(se[1]);
        }
    }
    checks.push(AssumptionCheck {
        id: 1,
        name: "bounded second derivatives on the working box".into(),
        passed: hmax.is_finite(),
        detail: format!("max |Hessian eigenvalue| = {hmax:.6e}"),
    });

    // 2. growth on the ring
    let (mut a1, mut a2, mut a3) = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    for k in 0..RING_SAMPLES {
        let th = std::f64::consts::TAU * k as f64 / RING_SAMPLES as f64;
        let x = [ring_radius * th.cos(), ring_radius * th.sin()];
        let s = sys.evaluate(x);
        a1 = a1.min(s.h / (ring_radius * ring_radius));
        a2 = a2.min(s.grad[0].hypot(s.grad[1]) / ring_radius);
        a3 = a3.min(s.hess[0] + s.hess[2]);
    }
    checks.push(AssumptionCheck {
        id: 2,
        name: "growth H ≥ A1|x|², |∇H| ≥ A2|x|, ΔH ≥ A3 on the ring".into(),
        passed: a1 > 0.0 && a2 > 0.0 && a3 > 0.0,
        detail: format!("ring radius {ring_radius}: A1 = {a1:.6e}, A2 = {a2:.6e}, A3 = {a3:.6e}"),
    });

    // 3. finitely many nondegenerate critical points
    let cps = find_critical_points(sys, bbox, 128);
    checks.push(AssumptionCheck {
        id: 3,
        name: "finitely many nondegenerate critical points".into(),
        passed: cps.is_ok(),
        detail: match &cps {
            Ok(c) => format!("{} critical points", c.len()),
            Err(e) => e.to_string(),
        },
    });

    // 4. one critical point per critical level component
    let a4 = match &cps {
        Ok(c) => separatrix_census(sys, bbox, c),
        Err(_) => Err("critical points unavailable".to_string()),
    };
    checks.push(AssumptionCheck {
        id: 4,
        name: "each critical level component holds one critical point".into(),
        passed: a4.is_ok(),
        detail: a4.unwrap_or_else(|e| e),
    });

    // 5. σσ* uniformly positive definite and bounded
    checks.push(AssumptionCheck {
        id: 5,
        name: "σσ* uniformly positive definite and bounded".into(),
        passed: sig_lo > 0.0 && sig_hi.is_finite(),
        detail: format!("spectrum of σσ* on the box within [{sig_lo:.6e}, {sig_hi:.6e}]"),
    });

    AssumptionReport {
        checks,
        a1,
        a2,
        a3,
        max_hessian_norm: hmax,
        sigma_eig_min: sig_lo,
        sigma_eig_max: sig_hi,
    }
}

/// For every saddle level, labels the band `|H − h_s| < δ` and fails if one
/// band component contains two critical points of that level.
fn separatrix_census(
    sys: &HamiltonianSystem,
    bbox: Rect,
    cps: &[super::CriticalPoint],
) -> Result<String, String> {
    let grid = NodeGrid::sample(sys, bbox, 256);
    let cell = grid.dx.max(grid.dy);
    let grads: Vec<f64> = (0..grid.len())
        .map(|k| {
            let g = sys.grad(grid.point(k));
            g[0].hypot(g[1])
        })
        .collect();
    let mut probed = 0;
    for s in cps.iter().filter(|c| c.kind == CriticalKind::Saddle) {
        let level = s.h_value;
        // band thick enough to stay 4-connected along the separatrix arms
        let gmax = (0..grid.len())
            .filter(|&k| (grid.values[k] - level).abs() <= 2.0 * cell * grads[k])
            .map(|k| grads[k])
            .fold(0.0f64, f64::max);
        let delta = (2.5 * cell * gmax).max(1e-3);
        let same_level = 1e-9 * (1.0 + level.abs());
        let classes: Vec<u32> = grid
            .values
            .iter()
            .map(|&v| if (v - level).abs() < delta { 0 } else { EXCLUDED })
            .collect();
        let (labels, _) = grid.components(&classes);
        let mut owners: Vec<(u32, usize)> = Vec::new();
        for (idx, c) in cps.iter().enumerate() {
            if (c.h_value - level).abs() > same_level {
                continue;
            }
            let lab = labels[grid.nearest(c.location)];
            if lab == EXCLUDED {
                continue;
            }
            if let Some((_, other)) = owners.iter().find(|(l, _)| *l == lab) {
                let o = &cps[*other];
                return Err(format!(
                    "critical points ({:.4}, {:.4}) and ({:.4}, {:.4}) share the level-{:.6} component",
                    o.location[0], o.location[1], c.location[0], c.location[1], level
                ));
            }
            owners.push((lab, idx));
        }
        probed += 1;
    }
    Ok(format!("{probed} saddle levels probed"))
}
