use rayon::prelude::*;
use serde::Serialize;

use super::LdpError;
use crate::coeffs::CoeffTables;
use crate::field::HamiltonianSystem;
use crate::reeb::ReebGraph;
use crate::sde::{simulate, SimulationConfig, TrajectoryRecord};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QvReport {
    /// `Σ (ΔH)²` over every step.
    pub realized: f64,
    /// `ε^β ∫ B²(Y_s) ds` by left-point sums over the record.
    pub averaged: f64,
    /// `None` when both sides vanish.
    pub ratio: Option<f64>,
}

/// Realized quadratic variation of `H(X)` against its averaged prediction.
/// The record must carry a graph path; a record stride of 1 is advised.
pub fn quadratic_variation_check(
    record: &TrajectoryRecord,
    tables: &CoeffTables,
    epsilon: f64,
    beta: f64,
) -> Result<QvReport, LdpError> {
    let path = record
        .graph_path
        .as_ref()
        .ok_or_else(|| LdpError::InvalidInput("record has no graph path".into()))?;
    let mut integral = 0.0;
    for k in 0..path.len().saturating_sub(1) {
        let p = &path.points[k];
        integral += tables.b2(p.edge, p.h)? * (path.times[k + 1] - path.times[k]);
    }
    let realized = record.qv_series.last().copied().unwrap_or(0.0);
    let averaged = epsilon.powf(beta) * integral;
    let ratio = (averaged > 0.0).then(|| realized / averaged);
    Ok(QvReport { realized, averaged, ratio })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QvBatchReport {
    pub epsilon: f64,
    pub beta: f64,
    pub trajectories: u64,
    pub ratios: Vec<f64>,
    pub mean_ratio: f64,
    pub std_error: f64,
}

/// [`quadratic_variation_check`] over trajectories `0..n` of `cfg`'s seed.
pub fn quadratic_variation_batch(
    sys: &HamiltonianSystem,
    graph: &ReebGraph,
    tables: &CoeffTables,
    cfg: &SimulationConfig,
    n: u64,
) -> Result<QvBatchReport, LdpError> {
    if n < 2 {
        return Err(LdpError::InvalidInput("need at least two trajectories".into()));
    }
    let ratios: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|j| {
            let c = SimulationConfig { trajectory: j, record_stride: 1, ..cfg.clone() };
            let rec = simulate(sys, Some(graph), &c)?;
            let r = quadratic_variation_check(&rec, tables, cfg.epsilon, cfg.beta)?;
            r.ratio.ok_or_else(|| LdpError::InvalidInput(format!("trajectory {j} has no diffusion")))
        })
        .collect::<Result<_, _>>()?;
    let nf = n as f64;
    let mean = ratios.iter().sum::<f64>() / nf;
    let var = ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    Ok(QvBatchReport {
        epsilon: cfg.epsilon,
        beta: cfg.beta,
        trajectories: n,
        ratios,
        mean_ratio: mean,
        std_error: (var / nf).sqrt(),
    })
}
