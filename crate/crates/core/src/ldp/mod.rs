//! Monte Carlo checks of the large-deviation picture: tube probabilities
//! against `exp(−ε^{−β} S)`, escape from extrema, Brownian barrier events and
//! the averaged quadratic variation.

mod brownian;
mod probe;
mod qv;
mod tube;

pub use brownian::{brownian_saddle_oracle, normal_cdf, reflection_check, BrownianCase, BrownianOracleParams, BrownianOracleReport, OracleVerdict, ReflectionReport};
pub use probe::{escape_extremum_probe, EscapeLevel, EscapeProbeReport};
pub use qv::{quadratic_variation_batch, quadratic_variation_check, QvBatchReport, QvReport};
pub use tube::{estimate_tube, EpsilonEstimate, TubeEstimate, TubeExperiment, TubeVerdict, RATE_TOLERANCE};

use serde::Serialize;
use thiserror::Error;

use crate::action::ActionError;
use crate::coeffs::CoeffError;
use crate::reeb::ReebError;
use crate::sde::SimError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LdpError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Graph(#[from] ReebError),
    #[error(transparent)]
    Coeff(#[from] CoeffError),
    #[error(transparent)]
    Action(#[from] ActionError),
}

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval at 95% for `k` successes in `n` trials.
pub fn wilson(k: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Weighted least-squares line `y ≈ slope·x + intercept`.
#[derive(Debug, Clone, PartialEq, Serialize, schemars::JsonSchema)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    /// `y − fit` at each input point.
    pub residuals: Vec<f64>,
}

/// Fits `−ln p̂ ≈ S·ε^{−β} + c`, weighting each point by the delta-method
/// variance `(1 − p)/(N p)` of `−ln p̂`. Points without hits are dropped;
/// `None` unless at least three remain.
pub fn fit_rate(points: &[(f64, u64, u64)], beta: f64) -> Option<RateFit> {
    let rows: Vec<(f64, f64, f64)> = points
        .iter()
        .filter(|&&(_, k, _)| k > 0)
        .map(|&(eps, k, n)| {
            let nf = n as f64;
            let p = k as f64 / nf;
            // half a hit of slack keeps p̂ = 1 from getting infinite weight
            let var = (1.0 - p + 0.5 / nf) / (nf * p);
            (eps.powf(-beta), -p.ln(), 1.0 / var)
        })
        .collect();
    if rows.len() < 3 {
        return None;
    }
    weighted_line(&rows)
}

/// Weighted regression through `(x, y, w)` rows.
pub fn weighted_line(rows: &[(f64, f64, f64)]) -> Option<RateFit> {
    let sw: f64 = rows.iter().map(|r| r.2).sum();
    let xm = rows.iter().map(|r| r.2 * r.0).sum::<f64>() / sw;
    let ym = rows.iter().map(|r| r.2 * r.1).sum::<f64>() / sw;
    let sxx: f64 = rows.iter().map(|r| r.2 * (r.0 - xm).powi(2)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let sxy: f64 = rows.iter().map(|r| r.2 * (r.0 - xm) * (r.1 - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let residuals: Vec<f64> = rows.iter().map(|r| r.1 - slope * r.0 - intercept).collect();
    let dof = rows.len().saturating_sub(2).max(1) as f64;
    let chi2: f64 = rows.iter().zip(&residuals).map(|(r, e)| r.2 * e * e).sum();
    // scale by the reduced χ² only when the data are noisier than the weights say
    let scale = (chi2 / dof).max(1.0);
    Some(RateFit { slope, intercept, slope_se: (scale / sxx).sqrt(), residuals })
}
