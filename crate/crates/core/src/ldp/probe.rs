use rayon::prelude::*;
use serde::Serialize;

use super::LdpError;
use crate::field::{CriticalKind, HamiltonianSystem};
use crate::reeb::{ReebGraph, VertexRole};
use crate::sde::rng::{derive_key, domain_tag};
use crate::sde::{EmStepper, SimulationConfig};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EscapeLevel {
    pub k: f64,
    /// `k·ε^β`
    pub threshold: f64,
    pub hits: u64,
    pub p_hat: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EscapeProbeReport {
    pub vertex: usize,
    pub epsilon: f64,
    pub beta: f64,
    pub horizon: f64,
    pub samples: u64,
    pub levels: Vec<EscapeLevel>,
    /// Smallest tested `k` with `P̂(τ₁ < T) ≥ ½`.
    pub smallest_k_half: Option<f64>,
    /// `P̂` never rises with `k` by more than two standard errors.
    pub monotone: bool,
}

/// Estimates `P(τ₁ < T)` for `τ₁` the first time `|H − H_v|` reaches `k·ε^β`,
/// starting at the critical point of exterior vertex `vertex`.
///
/// `cfg.x0` is replaced by the critical point and `cfg.trajectory` by the
/// sample index.
pub fn escape_extremum_probe(
    sys: &HamiltonianSystem,
    graph: &ReebGraph,
    cfg: &SimulationConfig,
    vertex: usize,
    k_grid: &[f64],
    samples: u64,
) -> Result<EscapeProbeReport, LdpError> {
    let v = graph
        .vertices
        .get(vertex)
        .ok_or_else(|| LdpError::InvalidInput(format!("vertex {vertex} does not exist")))?;
    if v.role != VertexRole::Exterior {
        return Err(LdpError::InvalidInput(format!("vertex {vertex} is not an extremum")));
    }
    if k_grid.is_empty() || k_grid.iter().any(|&k| !(k > 0.0)) || samples == 0 {
        return Err(LdpError::InvalidInput("k grid must be positive and samples non-zero".into()));
    }
    let sign = if v.critical.kind == CriticalKind::Maximum { -1.0 } else { 1.0 };
    let hv = v.critical.h_value;
    let eb = cfg.epsilon.powf(cfg.beta);
    let top = k_grid.iter().copied().fold(0.0, f64::max) * eb;
    let base = SimulationConfig {
        x0: v.critical.location,
        seed: derive_key(cfg.seed, domain_tag("ldp/escape"), vertex as u64),
        ..cfg.clone()
    };
    base.validate()?;
    let (_, steps) = base.effective_step();
    let bbox = sys.bbox();

    let maxima: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|j| {
            let c = SimulationConfig { trajectory: j, ..base.clone() };
            let mut stepper = EmStepper::rescaled(sys, &c);
            let mut x = c.x0;
            let mut m = 0.0f64;
            for _ in 0..steps {
                x = stepper.step(x).x;
                if !bbox.contains(x) {
                    return f64::INFINITY;
                }
                m = m.max(sign * (sys.h(x) - hv));
                if m >= top {
                    break;
                }
            }
            m
        })
        .collect();

    let n = samples as f64;
    let levels: Vec<EscapeLevel> = k_grid
        .iter()
        .map(|&k| {
            let threshold = k * eb;
            let hits = maxima.iter().filter(|&&m| m >= threshold).count() as u64;
            let p = hits as f64 / n;
            EscapeLevel { k, threshold, hits, p_hat: p, std_error: (p * (1.0 - p) / n).sqrt() }
        })
        .collect();
    let mut order: Vec<&EscapeLevel> = levels.iter().collect();
    order.sort_by(|a, b| a.k.total_cmp(&b.k));
    let smallest_k_half = order.iter().find(|l| l.p_hat >= 0.5).map(|l| l.k);
    let monotone = order
        .windows(2)
        .all(|w| w[1].p_hat <= w[0].p_hat + 2.0 * (w[0].std_error.powi(2) + w[1].std_error.powi(2)).sqrt());
    Ok(EscapeProbeReport {
        vertex,
        epsilon: cfg.epsilon,
        beta: cfg.beta,
        horizon: cfg.horizon,
        samples,
        levels,
        smallest_k_half,
        monotone,
    })
}
