//! Simulation of the rescaled small-noise dynamics, the deterministic flow and
//! deterministic saddle transit through a Morse–Palais chart.

mod chart;
pub mod rng;

pub use chart::{
    build_saddle_chart, transit_derivative_bounds, SaddleChart, TransitDerivativeReport, TransitSample, CHART_RESIDUAL_TOL,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{HamiltonianSystem, Point};
use crate::ode::{Adaptive, Tolerance};
use crate::reeb::{GraphPath, ReebError, ReebGraph, Tracker};
use rng::{derive_key, domain_tag, NormalStream};

/// Steps longer than this fraction of the rotation scale `ε^{1−β}` are refused.
pub const DT_ROTATION_LIMIT: f64 = 0.05;
/// Fraction of `ε^{1−β}·T_min` used by the step policy.
pub const DT_PERIOD_FRACTION: f64 = 0.02;
/// Euler–Maruyama inflates `H` by a relative `ε^{2β−2}·dt` per unit time on a
/// rotation; capping `dt` at this multiple of `ε^{2−β}` keeps that drift below
/// `1%·ε^β`, under the noise-driven drift.
pub const DT_BIAS_FRACTION: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("time step {dt} exceeds {limit} (rotations would be under-resolved)")]
    StepTooLarge { dt: f64, limit: f64 },
    #[error("trajectory left the working box at t = {t}")]
    BoxExit { t: f64 },
    #[error("adaptive step underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("saddle chart failed at l = {l}: {reason}")]
    ChartFail { l: f64, reason: String },
    #[error("({mu}, {nu}) is outside the transit domain of the chart")]
    OutsideChart { mu: f64, nu: f64 },
    #[error(transparent)]
    Graph(#[from] ReebError),
}

#[derive(Debug, Clone, Serialize, Deserialize, schemars::JsonSchema)]
pub struct SimulationConfig {
    pub epsilon: f64,
    pub beta: f64,
    /// Horizon in rescaled time.
    pub horizon: f64,
    /// Requested step in rescaled time; the step policy may shorten it.
    pub dt_fast: f64,
    pub x0: Point,
    pub seed: u64,
    /// Trajectory index within the seed's stream family.
    #[serde(default)]
    pub trajectory: u64,
    #[serde(default = "one")]
    pub record_stride: usize,
    /// Smallest tabulated period, when known; tightens the step policy.
    #[serde(default)]
    pub t_min: Option<f64>,
}

fn one() -> usize {
    1
}

impl SimulationConfig {
    pub fn new(epsilon: f64, beta: f64, horizon: f64, dt_fast: f64, x0: Point, seed: u64) -> Self {
        SimulationConfig { epsilon, beta, horizon, dt_fast, x0, seed, trajectory: 0, record_stride: 1, t_min: None }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(SimError::InvalidConfig(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(SimError::InvalidConfig(format!("beta must lie in (0, 1), got {}", self.beta)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(SimError::InvalidConfig(format!("horizon must be positive, got {}", self.horizon)));
        }
        if !(self.dt_fast > 0.0) {
            return Err(SimError::InvalidConfig(format!("dt must be positive, got {}", self.dt_fast)));
        }
        if self.record_stride == 0 {
            return Err(SimError::InvalidConfig("record stride must be at least 1".into()));
        }
        let limit = DT_ROTATION_LIMIT * self.epsilon.powf(1.0 - self.beta);
        if self.dt_fast > limit {
            return Err(SimError::StepTooLarge { dt: self.dt_fast, limit });
        }
        Ok(())
    }

    /// Step actually used: the policy minimum, shortened so that it divides
    /// the horizon. Returns `(dt, steps)`.
    pub fn effective_step(&self) -> (f64, u64) {
        let mut dt = self.dt_fast.min(DT_BIAS_FRACTION * self.epsilon.powf(2.0 - self.beta));
        if let Some(tm) = self.t_min {
            dt = dt.min(DT_PERIOD_FRACTION * self.epsilon.powf(1.0 - self.beta) * tm);
        }
        let n = (self.horizon / dt * (1.0 - 1e-12)).ceil().max(1.0) as u64;
        (self.horizon / n as f64, n)
    }

    pub fn stream_key(&self) -> u64 {
        derive_key(self.seed, domain_tag("sde"), self.trajectory)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum ExitReason {
    LeftBox,
    /// `H` rose above the truncation level of the unbounded edge.
    AboveTruncation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExitInfo {
    pub t: f64,
    pub reason: ExitReason,
}

/// Thinned record of one trajectory. Every series is sampled at `times`.
#[derive(Debug, Clone, Default)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub states: Vec<Point>,
    pub h_series: Vec<f64>,
    pub graph_path: Option<GraphPath>,
    /// Running `Σ (ΔH)²` over every step.
    pub qv_series: Vec<f64>,
    /// Running `ε^β ∫ AH(X_s) ds` (left-point sums).
    pub drift_series: Vec<f64>,
    /// Running `ε^{β/2} ∫ ∇H(X_s)* σ(X_s) dW_s` (left-point sums).
    pub martingale_series: Vec<f64>,
    pub dt: f64,
    pub steps: u64,
    pub exit: Option<ExitInfo>,
}

impl TrajectoryRecord {
    pub fn final_state(&self) -> Point {
        *self.states.last().expect("record has at least the initial state")
    }

    /// Largest `|H(X_t) − H(x₀) − drift − martingale|` over the record points.
    pub fn ito_residual(&self) -> f64 {
        let h0 = self.h_series[0];
        (0..self.times.len())
            .map(|k| (self.h_series[k] - h0 - self.drift_series[k] - self.martingale_series[k]).abs())
            .fold(0.0, f64::max)
    }

    fn push(&mut self, t: f64, x: Point, h: f64, acc: &Accum) {
        self.times.push(t);
        self.states.push(x);
        self.h_series.push(h);
        self.qv_series.push(acc.qv);
        self.drift_series.push(acc.drift);
        self.martingale_series.push(acc.mart);
    }
}

#[derive(Debug, Default, Clone, Copy)]
struct Accum {
    qv: f64,
    drift: f64,
    mart: f64,
}

/// Euler–Maruyama stepper for `dX = ω ∇⊥H dt + ς σ dW`.
///
/// Shared by [`simulate`] and streaming consumers that never materialize a
/// record.
pub struct EmStepper<'a> {
    sys: &'a HamiltonianSystem,
    drift_scale: f64,
    noise_scale: f64,
    sqrt_dt: f64,
    pub dt: f64,
    stream: NormalStream,
    z: Vec<f64>,
}

/// One Euler–Maruyama step with its Itô bookkeeping.
#[derive(Debug, Clone, Copy)]
pub struct EmStep {
    pub x: Point,
    /// `AH(X_k)·dt`
    pub ah_dt: f64,
    /// `∇H(X_k)* σ(X_k) ΔW_k`
    pub dmart: f64,
}

impl<'a> EmStepper<'a> {
    pub fn new(sys: &'a HamiltonianSystem, drift_scale: f64, noise_scale: f64, dt: f64, key: u64) -> Self {
        let dims = sys.sigma().cols();
        EmStepper {
            sys,
            drift_scale,
            noise_scale,
            sqrt_dt: dt.sqrt(),
            dt,
            stream: NormalStream::new(key, dims),
            z: vec![0.0; dims],
        }
    }

    /// Stepper for the rescaled dynamics of `cfg`.
    pub fn rescaled(sys: &'a HamiltonianSystem, cfg: &SimulationConfig) -> Self {
        let (dt, _) = cfg.effective_step();
        Self::new(sys, cfg.epsilon.powf(cfg.beta - 1.0), cfg.epsilon.powf(0.5 * cfg.beta), dt, cfg.stream_key())
    }

    #[inline]
    pub fn step(&mut self, x: Point) -> EmStep {
        self.stream.fill(&mut self.z);
        for v in self.z.iter_mut() {
            *v *= self.sqrt_dt;
        }
        let g = self.sys.grad(x);
        let sdw = self.sys.sigma().apply(x, &self.z);
        let a = self.drift_scale * self.dt;
        let b = self.noise_scale;
        EmStep {
            x: [x[0] - a * g[1] + b * sdw[0], x[1] + a * g[0] + b * sdw[1]],
            ah_dt: self.sys.ah(x) * self.dt,
            dmart: g[0] * sdw[0] + g[1] * sdw[1],
        }
    }
}

fn run_em(
    sys: &HamiltonianSystem,
    graph: Option<&ReebGraph>,
    stepper: &mut EmStepper,
    x0: Point,
    steps: u64,
    stride: usize,
    ito_drift: f64,
    ito_noise: f64,
) -> Result<TrajectoryRecord, SimError> {
    let bbox = sys.bbox();
    if !bbox.contains(x0) {
        return Err(SimError::BoxExit { t: 0.0 });
    }
    let dt = stepper.dt;
    let mut rec = TrajectoryRecord { dt, steps, ..Default::default() };
    let mut acc = Accum::default();
    let mut x = x0;
    let mut h = sys.h(x);
    rec.push(0.0, x, h, &acc);
    for k in 1..=steps {
        let st = stepper.step(x);
        let t = k as f64 * dt;
        if !bbox.contains(st.x) {
            rec.exit = Some(ExitInfo { t, reason: ExitReason::LeftBox });
            break;
        }
        let h1 = sys.h(st.x);
        if graph.is_some_and(|g| h1 > g.h_max) {
            rec.exit = Some(ExitInfo { t, reason: ExitReason::AboveTruncation });
            break;
        }
        acc.qv += (h1 - h) * (h1 - h);
        acc.drift += ito_drift * st.ah_dt;
        acc.mart += ito_noise * st.dmart;
        x = st.x;
        h = h1;
        if k % stride as u64 == 0 || k == steps {
            rec.push(t, x, h, &acc);
        }
    }
    if let Some(g) = graph {
        let mut tracker = Tracker::default();
        let mut pts = Vec::with_capacity(rec.states.len());
        for (k, &p) in rec.states.iter().enumerate() {
            pts.push(tracker.step(sys, g, p, k)?);
        }
        rec.graph_path = Some(GraphPath::new(rec.times.clone(), pts));
    }
    Ok(rec)
}

/// Euler–Maruyama simulation of the rescaled dynamics
/// `dX = ε^{β−1} ∇⊥H dt + ε^{β/2} σ dW` on `[0, horizon]`.
///
/// A trajectory leaving the box (or rising above `h_max` when a graph is
/// given) is recorded up to that point and stopped; see [`TrajectoryRecord::exit`].
pub fn simulate(sys: &HamiltonianSystem, graph: Option<&ReebGraph>, cfg: &SimulationConfig) -> Result<TrajectoryRecord, SimError> {
    cfg.validate()?;
    let (_, steps) = cfg.effective_step();
    let mut stepper = EmStepper::rescaled(sys, cfg);
    let eb = cfg.epsilon.powf(cfg.beta);
    run_em(sys, graph, &mut stepper, cfg.x0, steps, cfg.record_stride, eb, eb.sqrt())
}

/// Same trajectory in original time, `dX̃ = ∇⊥H dt + √ε σ dW̃` on
/// `[0, horizon·ε^{β−1}]`, driven by the increments `simulate` would use.
/// Record times are in original units.
pub fn simulate_original_time(sys: &HamiltonianSystem, cfg: &SimulationConfig) -> Result<TrajectoryRecord, SimError> {
    cfg.validate()?;
    let (dt, steps) = cfg.effective_step();
    let stretch = cfg.epsilon.powf(cfg.beta - 1.0);
    // same normals, scaled by √dt̃ instead of √dt
    let mut stepper = EmStepper::new(sys, 1.0, cfg.epsilon.sqrt(), dt * stretch, cfg.stream_key());
    run_em(sys, None, &mut stepper, cfg.x0, steps, cfg.record_stride, cfg.epsilon, cfg.epsilon.sqrt())
}

/// Adaptive Dormand–Prince orbit of `ẋ = ∇⊥H`, one record point per accepted step.
pub fn integrate_flow(sys: &HamiltonianSystem, x0: Point, horizon: f64, tol: f64) -> Result<TrajectoryRecord, SimError> {
    let bbox = sys.bbox();
    if !bbox.contains(x0) {
        return Err(SimError::BoxExit { t: 0.0 });
    }
    let f = |y: &[f64; 2]| sys.skew_grad(*y);
    let mut ad = Adaptive::new(Tolerance::new(tol).with_h_max(0.05 * bbox.diameter()), 1e-3);
    let mut rec = TrajectoryRecord::default();
    let acc = Accum::default();
    let mut x = x0;
    let mut t = 0.0;
    rec.push(0.0, x, sys.h(x), &acc);
    while t < horizon {
        let (h, y) = ad.advance(&f, &x, horizon - t).map_err(|_| SimError::StepUnderflow { t })?;
        t = if horizon - t - h <= 1e-15 * horizon { horizon } else { t + h };
        if !bbox.contains(y) {
            return Err(SimError::BoxExit { t });
        }
        x = y;
        rec.push(t, x, sys.h(x), &acc);
        rec.steps += 1;
    }
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Sigma, SystemRegistry};

    fn harmonic() -> HamiltonianSystem {
        SystemRegistry::default().build("harmonic").unwrap()
    }

    #[test]
    fn flow_returns_after_one_period() {
        let sys = harmonic();
        let r = integrate_flow(&sys, [1.0, 0.0], std::f64::consts::TAU, 1e-12).unwrap();
        let x = r.final_state();
        assert!((x[0] - 1.0).abs() < 1e-6 && x[1].abs() < 1e-6);
        assert_eq!(*r.times.last().unwrap(), std::f64::consts::TAU);
    }

    #[test]
    fn flow_at_critical_point_is_constant() {
        let sys = SystemRegistry::default().build("doublewell").unwrap();
        let r = integrate_flow(&sys, [1.0, 0.0], 5.0, 1e-12).unwrap();
        assert!(r.states.iter().all(|&s| s == [1.0, 0.0]));
    }

    #[test]
    fn flow_conserves_h_on_doublewell() {
        let sys = SystemRegistry::default().build("doublewell").unwrap();
        let r = integrate_flow(&sys, [0.9, 0.0], 8.0, 1e-12).unwrap();
        let h0 = r.h_series[0];
        let drift = r.h_series.iter().map(|h| (h - h0).abs()).fold(0.0, f64::max);
        assert!(drift <= 1e-9, "{drift}");
    }

    #[test]
    fn step_policy() {
        let mut c = SimulationConfig::new(0.04, 0.5, 1.0, 1e-3, [1.0, 0.0], 1);
        let (dt, n) = c.effective_step();
        assert!(dt <= 0.01 * 0.04f64.powf(1.5) && (dt * n as f64 - 1.0).abs() < 1e-12);
        c.dt_fast = 0.02;
        assert!(matches!(c.validate(), Err(SimError::StepTooLarge { .. })));
        c.dt_fast = 1e-3;
        c.beta = 1.0;
        assert!(matches!(c.validate(), Err(SimError::InvalidConfig(_))));
    }

    #[test]
    fn golden_final_state() {
        let sys = harmonic();
        let cfg = SimulationConfig::new(0.1, 0.5, 0.1, 1e-4, [1.0, 0.0], 20240601);
        let r = simulate(&sys, None, &cfg).unwrap();
        assert_eq!(r.steps, 1000);
        let x = r.final_state();
        assert_eq!([x[0].to_bits(), x[1].to_bits()], GOLDEN);
        let again = simulate(&sys, None, &cfg).unwrap();
        assert_eq!(again.final_state(), x);
    }

    const GOLDEN: [u64; 2] = [4607324870215228314, 4598966640307936582];

    #[test]
    fn zero_noise_follows_rescaled_flow() {
        let sys = harmonic().with_sigma(Sigma::zero());
        let (eps, beta) = (0.5f64, 0.5f64);
        let cfg = SimulationConfig::new(eps, beta, 0.1, 1e-6, [1.0, 0.5], 3);
        let em = simulate(&sys, None, &cfg).unwrap();
        let stretch = eps.powf(beta - 1.0);
        let ode = integrate_flow(&sys, [1.0, 0.5], 0.1 * stretch, 1e-12).unwrap();
        let a = em.final_state();
        let b = ode.final_state();
        assert!((a[0] - b[0]).abs().max((a[1] - b[1]).abs()) <= 1e-6);
    }

    #[test]
    fn rescaled_and_original_time_agree() {
        let sys = SystemRegistry::default().build("doublewell").unwrap();
        let mut cfg = SimulationConfig::new(0.1, 0.5, 0.5, 1e-4, [0.8, 0.1], 9);
        cfg.record_stride = 50;
        let a = simulate(&sys, None, &cfg).unwrap();
        let b = simulate_original_time(&sys, &cfg).unwrap();
        let stretch = 0.1f64.powf(-0.5);
        assert_eq!(a.states.len(), b.states.len());
        for k in 0..a.states.len() {
            assert!((a.times[k] * stretch - b.times[k]).abs() < 1e-12);
            for i in 0..2 {
                assert!((a.states[k][i] - b.states[k][i]).abs() < 1e-12);
            }
        }
    }
}
