//! Named numerical oracles behind one interface, so the command line and the
//! acceptance suite pick them by name.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::field::{positive_drift_margin, CriticalKind, CriticalPoint, FieldError, HamiltonianSystem, Point};
use crate::ldp::{
    brownian_saddle_oracle, escape_extremum_probe, reflection_check, BrownianCase, BrownianOracleParams, LdpError, OracleVerdict,
};
use crate::reeb::{ReebGraph, VertexRole};
use crate::sde::rng::{derive_key, domain_tag, NormalStream};
use crate::sde::{build_saddle_chart, transit_derivative_bounds, SimError, SimulationConfig};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("unknown oracle '{0}'")]
    Unknown(String),
    #[error("bad oracle parameters: {0}")]
    Params(String),
    #[error(transparent)]
    Ldp(#[from] LdpError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

pub struct OracleContext<'a> {
    pub sys: &'a HamiltonianSystem,
    pub graph: &'a ReebGraph,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, schemars::JsonSchema)]
pub struct OracleOutcome {
    pub oracle: &'static str,
    pub passed: bool,
    pub report: Value,
}

pub trait Oracle: Send + Sync {
    fn name(&self) -> &'static str;
    fn summary(&self) -> &'static str;
    /// `params` may be `null`, in which case every field takes its default.
    fn run(&self, ctx: &OracleContext, params: &Value) -> Result<OracleOutcome, OracleError>;
}

fn parse<P: DeserializeOwned>(params: &Value) -> Result<P, OracleError> {
    let v = if params.is_null() { Value::Object(Default::default()) } else { params.clone() };
    serde_json::from_value(v).map_err(|e| OracleError::Params(e.to_string()))
}

fn to_value<T: Serialize>(t: &T) -> Value {
    serde_json::to_value(t).expect("reports serialize")
}

#[derive(Clone)]
pub struct OracleRegistry {
    entries: BTreeMap<&'static str, Arc<dyn Oracle>>,
}

impl Default for OracleRegistry {
    fn default() -> Self {
        let mut r = OracleRegistry { entries: BTreeMap::new() };
        r.register(Arc::new(BrownianOracle));
        r.register(Arc::new(EscapeOracle));
        r.register(Arc::new(DriftOracle));
        r.register(Arc::new(TransitOracle));
        r
    }
}

impl OracleRegistry {
    pub fn register(&mut self, o: Arc<dyn Oracle>) {
        self.entries.insert(o.name(), o);
    }

    pub fn get(&self, name: &str) -> Option<&Arc<dyn Oracle>> {
        self.entries.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.entries.keys().copied()
    }

    pub fn run(&self, name: &str, ctx: &OracleContext, params: &Value) -> Result<OracleOutcome, OracleError> {
        self.get(name).ok_or_else(|| OracleError::Unknown(name.into()))?.run(ctx, params)
    }
}

// ---- brownian ----

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct BrownianParams {
    #[serde(default = "brownian_default_cases")]
    cases: Vec<BrownianCase>,
    #[serde(default = "half")]
    beta: f64,
    #[serde(default = "brownian_kappa")]
    kappa: f64,
    #[serde(default = "brownian_eps")]
    epsilon: f64,
    #[serde(default = "one")]
    horizon: f64,
    #[serde(default = "million")]
    paths: u64,
    #[serde(default = "one")]
    reflection_level: f64,
}

/// Case (i) as specified; (ii) and (iii) share its `d`, with `A = 2` for (iii).
pub fn brownian_default_cases() -> Vec<BrownianCase> {
    vec![BrownianCase::I { a: 0.4, d: 0.1 }, BrownianCase::Ii { d: 0.1 }, BrownianCase::Iii { d: 0.1, a_level: 2.0 }]
}

fn half() -> f64 {
    0.5
}
fn one() -> f64 {
    1.0
}
fn brownian_kappa() -> f64 {
    0.05
}
fn brownian_eps() -> f64 {
    0.05
}
fn million() -> u64 {
    1_000_000
}

/// Relative tolerance of the reflection-principle cross-check.
pub const REFLECTION_TOL: f64 = 1e-2;

struct BrownianOracle;

impl Oracle for BrownianOracle {
    fn name(&self) -> &'static str {
        "brownian"
    }
    fn summary(&self) -> &'static str {
        "Brownian barrier/endpoint events near a saddle against their lower bounds"
    }
    fn run(&self, ctx: &OracleContext, params: &Value) -> Result<OracleOutcome, OracleError> {
        let p: BrownianParams = parse(params)?;
        let mut reports = Vec::new();
        let mut passed = true;
        for case in &p.cases {
            let r = brownian_saddle_oracle(&BrownianOracleParams {
                case: *case,
                beta: p.beta,
                kappa: p.kappa,
                epsilon: p.epsilon,
                horizon: p.horizon,
                paths: p.paths,
                steps: 16,
                seed: ctx.seed,
            })?;
            passed &= r.verdict == OracleVerdict::Pass;
            reports.push(r);
        }
        let refl = reflection_check(p.reflection_level, p.horizon, p.paths, 16, ctx.seed)?;
        passed &= refl.relative_error <= REFLECTION_TOL;
        Ok(OracleOutcome {
            oracle: self.name(),
            passed,
            report: serde_json::json!({ "cases": to_value(&reports), "reflection": to_value(&refl) }),
        })
    }
}

// ---- escape ----

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct EscapeParams {
    #[serde(default = "brownian_eps")]
    epsilon: f64,
    #[serde(default = "half")]
    beta: f64,
    #[serde(default = "one")]
    horizon: f64,
    #[serde(default = "escape_dt")]
    dt_fast: f64,
    #[serde(default)]
    vertex: Option<usize>,
    #[serde(default = "escape_k")]
    k_grid: Vec<f64>,
    #[serde(default = "escape_samples")]
    samples: u64,
}

fn escape_dt() -> f64 {
    1e-3
}
fn escape_k() -> Vec<f64> {
    vec![0.01, 0.1, 1.0, 10.0, 1000.0]
}
fn escape_samples() -> u64 {
    10_000
}

struct EscapeOracle;

impl Oracle for EscapeOracle {
    fn name(&self) -> &'static str {
        "escape"
    }
    fn summary(&self) -> &'static str {
        "probability of reaching H = k·ε^β from an extremum before T"
    }
    fn run(&self, ctx: &OracleContext, params: &Value) -> Result<OracleOutcome, OracleError> {
        let p: EscapeParams = parse(params)?;
        let vertex = match p.vertex {
            Some(v) => v,
            None => ctx
                .graph
                .vertices
                .iter()
                .position(|v| v.role == VertexRole::Exterior)
                .ok_or_else(|| OracleError::Params("graph has no extremum".into()))?,
        };
        let cfg = SimulationConfig::new(p.epsilon, p.beta, p.horizon, p.dt_fast, [0.0, 0.0], ctx.seed);
        let r = escape_extremum_probe(ctx.sys, ctx.graph, &cfg, vertex, &p.k_grid, p.samples)?;
        Ok(OracleOutcome { oracle: self.name(), passed: r.smallest_k_half.is_some() && r.monotone, report: to_value(&r) })
    }
}

// ---- drift ----

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct DriftParams {
    #[serde(default = "drift_radius")]
    radius: f64,
}

fn drift_radius() -> f64 {
    0.2
}

#[derive(Debug, Clone, Serialize)]
struct DriftEntry {
    location: Point,
    h_value: f64,
    margin: f64,
}

struct DriftOracle;

impl Oracle for DriftOracle {
    fn name(&self) -> &'static str {
        "drift"
    }
    fn summary(&self) -> &'static str {
        "sampled minimum of 4(H − H_min)·AH − |∇H*σ|² around every minimum"
    }
    fn run(&self, ctx: &OracleContext, params: &Value) -> Result<OracleOutcome, OracleError> {
        let p: DriftParams = parse(params)?;
        let minima: Vec<&CriticalPoint> = ctx
            .graph
            .vertices
            .iter()
            .map(|v| &v.critical)
            .filter(|c| c.kind == CriticalKind::Minimum)
            .collect();
        let entries = minima
            .iter()
            .map(|c| {
                Ok(DriftEntry { location: c.location, h_value: c.h_value, margin: positive_drift_margin(ctx.sys, c, p.radius)? })
            })
            .collect::<Result<Vec<_>, OracleError>>()?;
        let passed = !entries.is_empty() && entries.iter().all(|e| e.margin > 0.0);
        Ok(OracleOutcome {
            oracle: self.name(),
            passed,
            report: serde_json::json!({ "radius": p.radius, "minima": to_value(&entries) }),
        })
    }
}

// ---- transit ----

/// Transit quadrature against flow exit times and the logarithmic bound at
/// random points of one saddle chart.
#[derive(Debug, Clone, Serialize)]
pub struct TransitCheckReport {
    pub saddle: Point,
    pub l: f64,
    pub shrinks: usize,
    pub flipped: bool,
    pub m_bar: f64,
    pub points: usize,
    /// Largest `|T_quad − T_flow| / T_flow`.
    pub max_flow_rel_error: f64,
    pub log_bound_violations: usize,
    /// Smallest `C` with `|∇T| ≤ C/G` over the points.
    pub derivative_c: f64,
    pub derivative_skipped: usize,
}

/// Uniform points of the transit domain `μ > 0, 0 < μ² − ν² < 3l²` inside `U`.
pub fn sample_transit_points(l: f64, n: usize, seed: u64) -> Vec<[f64; 2]> {
    let mut stream = NormalStream::new(derive_key(seed, domain_tag("oracle/transit"), 0), 1);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let mu = 2.0 * l * stream.uniform();
        let nu = l * (2.0 * stream.uniform() - 1.0);
        let g = mu * mu - nu * nu;
        if g > 0.0 && g < 3.0 * l * l {
            out.push([mu, nu]);
        }
    }
    out
}

pub fn transit_check(
    sys: &HamiltonianSystem,
    saddle: &CriticalPoint,
    l: f64,
    points: usize,
    flow_tol: f64,
    seed: u64,
) -> Result<TransitCheckReport, SimError> {
    let chart = build_saddle_chart(sys, saddle, l)?;
    let pts = sample_transit_points(chart.l, points, seed);
    let mut max_err = 0.0f64;
    let mut violations = 0;
    for &w in &pts {
        let t = chart.transit_time(w)?;
        let flow = chart.exit_time_by_flow(w, flow_tol)?;
        max_err = max_err.max((t - flow).abs() / flow);
        if t > chart.log_bound(w) {
            violations += 1;
        }
    }
    let d = transit_derivative_bounds(&chart, &pts);
    Ok(TransitCheckReport {
        saddle: saddle.location,
        l: chart.l,
        shrinks: chart.shrinks,
        flipped: chart.flipped,
        m_bar: chart.m_bar,
        points,
        max_flow_rel_error: max_err,
        log_bound_violations: violations,
        derivative_c: d.c_min,
        derivative_skipped: d.skipped,
    })
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransitParams {
    #[serde(default = "transit_l")]
    l: f64,
    #[serde(default = "transit_points")]
    points: usize,
    #[serde(default = "transit_tol")]
    flow_tol: f64,
}

fn transit_l() -> f64 {
    0.3
}
fn transit_points() -> usize {
    100
}
fn transit_tol() -> f64 {
    1e-12
}

/// Relative agreement required between quadrature and flow exit times.
pub const TRANSIT_FLOW_TOL: f64 = 1e-4;

struct TransitOracle;

impl Oracle for TransitOracle {
    fn name(&self) -> &'static str {
        "transit"
    }
    fn summary(&self) -> &'static str {
        "saddle transit times against flow exits and the logarithmic bound"
    }
    fn run(&self, ctx: &OracleContext, params: &Value) -> Result<OracleOutcome, OracleError> {
        let p: TransitParams = parse(params)?;
        let saddles: Vec<&CriticalPoint> = ctx
            .graph
            .vertices
            .iter()
            .map(|v| &v.critical)
            .filter(|c| c.kind == CriticalKind::Saddle)
            .collect();
        if saddles.is_empty() {
            return Err(OracleError::Params("system has no saddle".into()));
        }
        let reports = saddles
            .iter()
            .map(|s| transit_check(ctx.sys, s, p.l, p.points, p.flow_tol, ctx.seed))
            .collect::<Result<Vec<_>, _>>()?;
        let passed = reports.iter().all(|r| r.log_bound_violations == 0 && r.max_flow_rel_error <= TRANSIT_FLOW_TOL);
        Ok(OracleOutcome { oracle: self.name(), passed, report: to_value(&reports) })
    }
}
