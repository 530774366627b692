use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit_rate, wilson, LdpError, RateFit};
use crate::action::{tube_infimum, TubeMethod};
use crate::coeffs::CoeffTables;
use crate::field::{HamiltonianSystem, Point};
use crate::reeb::{graph_distance, path_distance, project, GraphPath, GraphPoint, ReebGraph, Tracker};
use crate::sde::rng::{derive_key, domain_tag};
use crate::sde::{simulate, EmStepper, SimulationConfig};

/// Accepted relative gap between the fitted rate and the tube infimum.
pub const RATE_TOLERANCE: f64 = 0.35;
/// One trajectory in this many is re-run through the recording simulator.
const SLOW_CHECK_EVERY: u64 = 100;

fn default_n_time() -> usize {
    200
}

fn default_n_h() -> usize {
    400
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TubeExperiment {
    pub reference: GraphPath,
    pub delta: f64,
    /// Strictly decreasing.
    pub epsilons: Vec<f64>,
    pub beta: f64,
    pub samples: u64,
    pub seed: u64,
    /// Start of every trajectory; must project onto the reference start.
    pub x0: Point,
    pub dt_fast: f64,
    #[serde(default = "default_n_time")]
    pub n_time: usize,
    #[serde(default = "default_n_h")]
    pub n_h: usize,
}

impl TubeExperiment {
    pub fn validate(&self) -> Result<(), LdpError> {
        let bad = |m: String| Err(LdpError::InvalidInput(m));
        if !(self.delta > 0.0) {
            return bad(format!("tube radius must be positive, got {}", self.delta));
        }
        if self.epsilons.is_empty() || self.epsilons.iter().any(|&e| !(e > 0.0)) {
            return bad("epsilon ladder must be non-empty and positive".into());
        }
        if self.epsilons.windows(2).any(|w| w[1] >= w[0]) {
            return bad("epsilon ladder must be strictly decreasing".into());
        }
        if self.samples < 1000 {
            return bad(format!("at least 1000 samples per epsilon are needed, got {}", self.samples));
        }
        if self.reference.len() < 2 || self.reference.times[0] != 0.0 {
            return bad("reference path must start at t = 0 and have two samples".into());
        }
        Ok(())
    }

    fn config(&self, eps_index: usize, t_min: f64) -> SimulationConfig {
        let seed = derive_key(self.seed, domain_tag("ldp/tube"), eps_index as u64);
        let mut cfg = SimulationConfig::new(
            self.epsilons[eps_index],
            self.beta,
            self.reference.horizon(),
            self.dt_fast,
            self.x0,
            seed,
        );
        cfg.t_min = Some(t_min);
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, schemars::JsonSchema)]
pub struct EpsilonEstimate {
    pub epsilon: f64,
    pub samples: u64,
    pub hits: u64,
    pub p_hat: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
    pub dt: f64,
    pub steps: u64,
    pub all_misses: bool,
    /// Trajectories recomputed through [`simulate`] and [`path_distance`].
    pub slow_checks: u64,
    pub slow_mismatches: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, schemars::JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum TubeVerdict {
    Pass,
    Fail,
    /// Fewer than three ladder points with hits.
    NoFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, schemars::JsonSchema)]
pub struct TubeEstimate {
    pub per_epsilon: Vec<EpsilonEstimate>,
    pub fit: Option<RateFit>,
    pub s_fit: Option<f64>,
    /// Infimum of the action over the closed tube.
    pub s_reference: f64,
    pub s_reference_method: TubeMethod,
    /// `|S_fit − S_ref| / S_ref`.
    pub relative_gap: Option<f64>,
    /// `p̂` strictly decreases along the ladder.
    pub monotone_decreasing: bool,
    pub verdict: TubeVerdict,
}

/// Runs one trajectory, stopping as soon as it leaves the tube.
fn streaming_hit(
    sys: &HamiltonianSystem,
    graph: &ReebGraph,
    cfg: &SimulationConfig,
    steps: u64,
    reference: &[GraphPoint],
    delta: f64,
) -> Result<bool, LdpError> {
    let bbox = sys.bbox();
    let mut stepper = EmStepper::rescaled(sys, cfg);
    let mut tracker = Tracker::default();
    let mut x = cfg.x0;
    let p = tracker.step(sys, graph, x, 0)?;
    if graph_distance(graph, &p, &reference[0]) >= delta {
        return Ok(false);
    }
    for k in 1..=steps as usize {
        x = stepper.step(x).x;
        if !bbox.contains(x) || sys.h(x) > graph.h_max {
            return Ok(false);
        }
        let p = tracker.step(sys, graph, x, k)?;
        if graph_distance(graph, &p, &reference[k]) >= delta {
            return Ok(false);
        }
    }
    Ok(true)
}

/// The same decision from a full record, the way a user would compute it.
fn recorded_hit(sys: &HamiltonianSystem, graph: &ReebGraph, cfg: &SimulationConfig, reference: &GraphPath, delta: f64) -> Result<bool, LdpError> {
    let rec = simulate(sys, Some(graph), cfg)?;
    if rec.exit.is_some() {
        return Ok(false);
    }
    let path = rec.graph_path.as_ref().expect("graph given");
    Ok(path_distance(graph, path, reference)? < delta)
}

/// Naive Monte Carlo estimate of `P(ρ_{0,T}(Y(X), φ) < δ)` along an ε ladder
/// and a weighted fit of `−ln p̂` against `ε^{−β}`.
///
/// Hit counts are integer sums over trajectories with counter-based streams,
/// so the result does not depend on the number of workers.
pub fn estimate_tube(
    sys: &HamiltonianSystem,
    graph: &ReebGraph,
    tables: &CoeffTables,
    exp: &TubeExperiment,
) -> Result<TubeEstimate, LdpError> {
    exp.validate()?;
    let start = project(sys, graph, exp.x0)?;
    let gap = graph_distance(graph, &start, &exp.reference.points[0]);
    if gap > 1e-6 * start.h.abs().max(1.0) {
        return Err(LdpError::InvalidInput(format!("reference starts {gap} away from the projection of x0")));
    }
    let t_min = tables.t_min();
    let mut per_epsilon = Vec::with_capacity(exp.epsilons.len());
    for (i, &eps) in exp.epsilons.iter().enumerate() {
        let base = exp.config(i, t_min);
        base.validate()?;
        let (dt, steps) = base.effective_step();
        let times: Vec<f64> = (0..=steps).map(|k| k as f64 * dt).collect();
        let reference = exp.reference.resample(graph, &times).points;
        let cfg_for = |j: u64| SimulationConfig { trajectory: j, ..base.clone() };
        let hits = (0..exp.samples)
            .into_par_iter()
            .map(|j| streaming_hit(sys, graph, &cfg_for(j), steps, &reference, exp.delta).map(u64::from))
            .try_reduce(|| 0, |a, b| Ok(a + b))?;
        let checks: Vec<u64> = (0..exp.samples).step_by(SLOW_CHECK_EVERY as usize).collect();
        let mismatches = checks
            .par_iter()
            .map(|&j| {
                let cfg = cfg_for(j);
                let fast = streaming_hit(sys, graph, &cfg, steps, &reference, exp.delta)?;
                let slow = recorded_hit(sys, graph, &cfg, &exp.reference, exp.delta)?;
                Ok(u64::from(fast != slow))
            })
            .try_reduce(|| 0, |a, b| Ok::<u64, LdpError>(a + b))?;
        let (lo, hi) = wilson(hits, exp.samples);
        per_epsilon.push(EpsilonEstimate {
            epsilon: eps,
            samples: exp.samples,
            hits,
            p_hat: hits as f64 / exp.samples as f64,
            wilson_lo: lo,
            wilson_hi: hi,
            dt,
            steps,
            all_misses: hits == 0,
            slow_checks: checks.len() as u64,
            slow_mismatches: mismatches,
        });
    }

    let pts: Vec<(f64, u64, u64)> = per_epsilon.iter().map(|e| (e.epsilon, e.hits, e.samples)).collect();
    let fit = fit_rate(&pts, exp.beta);
    let tube = tube_infimum(tables, graph, &exp.reference, exp.delta, exp.n_time, exp.n_h)?;
    let s_ref = tube.value;
    let monotone = per_epsilon.windows(2).all(|w| w[1].p_hat < w[0].p_hat);
    let s_fit = fit.as_ref().map(|f| f.slope);
    let relative_gap = s_fit.filter(|_| s_ref > 0.0).map(|s| (s - s_ref).abs() / s_ref);
    let verdict = match &fit {
        None => TubeVerdict::NoFit,
        Some(f) => {
            let ok = if s_ref > 1e-12 {
                relative_gap.is_some_and(|g| g <= RATE_TOLERANCE) && monotone
            } else {
                // zero-cost tube: the fit should be compatible with no decay
                f.slope.abs() <= 2.0 * f.slope_se
            };
            if ok {
                TubeVerdict::Pass
            } else {
                TubeVerdict::Fail
            }
        }
    };
    Ok(TubeEstimate {
        per_epsilon,
        fit,
        s_fit,
        s_reference: s_ref,
        s_reference_method: tube.method,
        relative_gap,
        monotone_decreasing: monotone,
        verdict,
    })
}
