use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::LdpError;
use crate::quad::gl8_composite;
use crate::sde::rng::{derive_key, domain_tag, NormalStream};

/// Standard normal distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// The three barrier/endpoint events for a Brownian motion near a saddle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "case", rename_all = "snake_case")]
pub enum BrownianCase {
    /// Needs `0 < d < a < ½`.
    I { a: f64, d: f64 },
    /// Needs `0 < d < (1/β − 1)/3 ∧ ½`.
    Ii { d: f64 },
    /// Needs `0 < d < (1/β − 1)/2`; `A = 0` gives a vacuous bound.
    Iii { d: f64, a_level: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BrownianOracleParams {
    #[serde(flatten)]
    pub case: BrownianCase,
    pub beta: f64,
    #[serde(default)]
    pub kappa: f64,
    pub epsilon: f64,
    pub horizon: f64,
    pub paths: u64,
    /// Bridge segments per path; barrier crossings inside a segment are
    /// sampled exactly, so this only sets where the barrier may change.
    #[serde(default = "default_steps")]
    pub steps: usize,
    pub seed: u64,
}

fn default_steps() -> usize {
    16
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleVerdict {
    Pass,
    Fail,
    /// The bound is at least 1 and says nothing.
    Vacuous,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BrownianOracleReport {
    pub params: BrownianOracleParams,
    pub bound: f64,
    /// Reflection-principle value of the event probability.
    pub exact: f64,
    pub mc: f64,
    pub mc_std_error: f64,
    pub hits: u64,
    pub verdict: OracleVerdict,
}

/// Event in the units of a standard Brownian motion `W`: stay below
/// `barrier` on each piece in turn and finish below `−endpoint`.
struct Event {
    /// `(duration, barrier)`
    pieces: Vec<(f64, f64)>,
    endpoint: f64,
}

fn event_of(p: &BrownianOracleParams) -> Result<(Event, f64), LdpError> {
    let bad = |m: &str| Err(LdpError::InvalidInput(m.into()));
    let (eps, beta, t) = (p.epsilon, p.beta, p.horizon);
    if !(eps > 0.0 && eps < 1.0) || !(beta > 0.0 && beta < 1.0) || !(t > 0.0) {
        return bad("need 0 < ε < 1, 0 < β < 1 and T > 0");
    }
    if p.paths == 0 || p.steps == 0 {
        return bad("paths and steps must be positive");
    }
    let s = eps.powf(0.5 * beta);
    let log = eps.ln().abs();
    match p.case {
        BrownianCase::I { a, d } => {
            if !(0.0 < d && d < a && a < 0.5) || !(p.kappa > 0.0) {
                return bad("case (i) needs 0 < d < a < 1/2 and κ > 0");
            }
            let ev = Event {
                pieces: vec![(t, 0.25 * a * beta * log * eps.powf(a * beta) / s)],
                endpoint: 4.0 * eps.powf((a - d) * beta) * (a - d) * beta * log / s,
            };
            Ok((ev, 2.0 * (-eps.powf(-(1.0 - 2.0 * (a - d)) * beta - p.kappa)).exp()))
        }
        BrownianCase::Ii { d } => {
            if !(0.0 < d && d < ((1.0 / beta - 1.0) / 3.0).min(0.5)) || !(p.kappa > 0.0) {
                return bad("case (ii) needs 0 < d < (1/β − 1)/3 ∧ 1/2 and κ > 0");
            }
            let t1 = eps.powf(d * beta);
            if t1 >= t {
                return bad("case (ii) needs ε^{dβ} < T");
            }
            let ev = Event {
                pieces: vec![(t1, eps.powf(0.5 * (1.0 + d) * beta) / s), (t - t1, -eps.powf(0.5 * (1.0 - d) * beta) / s)],
                endpoint: 2.0 * (1.0 - d) * beta * eps.powf(0.5 * (1.0 - d) * beta) * log / s,
            };
            Ok((ev, 2.0 * (-eps.powf(-2.0 * d * beta - p.kappa)).exp()))
        }
        BrownianCase::Iii { d, a_level } => {
            if !(0.0 < d && d < 0.5 * (1.0 / beta - 1.0)) || !(a_level >= 0.0) {
                return bad("case (iii) needs 0 < d < (1/β − 1)/2 and A ≥ 0");
            }
            let ev = Event {
                pieces: vec![(t, 0.25 * d * beta * log * eps.powf(d * beta) / s)],
                endpoint: a_level / s,
            };
            Ok((ev, 2.0 * (-a_level * a_level / t * eps.powf(-beta)).exp()))
        }
    }
}

/// `P(max_{[0,τ]} (x + W) < b, x + W_τ < z)` for `x < b`.
fn below_barrier(x: f64, b: f64, z: f64, tau: f64) -> f64 {
    let z = z.min(b);
    let r = tau.sqrt();
    (normal_cdf((z - x) / r) - normal_cdf((z - 2.0 * b + x) / r)).max(0.0)
}

fn exact_probability(ev: &Event) -> f64 {
    match ev.pieces.as_slice() {
        [(t, b)] => below_barrier(0.0, *b, -ev.endpoint, *t),
        [(t1, u), (t2, v)] => {
            // condition on W at the switch time; it must already sit below
            // the second barrier there
            let r = t1.sqrt();
            let phi = |x: f64| (-0.5 * x * x / t1).exp() / (r * (std::f64::consts::TAU).sqrt());
            let top = v.min(*u);
            gl8_composite(top - 14.0 * r, top, r / 40.0, |x| {
                let first = (phi(x) - phi(2.0 * u - x)).max(0.0);
                first * below_barrier(x, *v, -ev.endpoint, *t2)
            })
        }
        _ => unreachable!("events have one or two pieces"),
    }
}

/// One path with exact bridge maxima inside each segment; true when the
/// event holds.
fn sample_event(ev: &Event, steps: usize, total: f64, stream: &mut NormalStream) -> bool {
    let mut w = 0.0f64;
    let mut z = [0.0];
    for &(dur, barrier) in &ev.pieces {
        let n = ((steps as f64 * dur / total).round() as usize).max(1);
        let dt = dur / n as f64;
        for _ in 0..n {
            stream.fill(&mut z);
            let next = w + dt.sqrt() * z[0];
            let gap = next - w;
            let u = stream.uniform();
            let max = 0.5 * (w + next + (gap * gap - 2.0 * dt * u.ln()).sqrt());
            if max >= barrier {
                return false;
            }
            w = next;
        }
    }
    w < -ev.endpoint
}

fn count_hits(ev: &Event, paths: u64, steps: usize, seed: u64, domain: &str) -> u64 {
    let tag = domain_tag(domain);
    let total: f64 = ev.pieces.iter().map(|p| p.0).sum();
    (0..paths)
        .into_par_iter()
        .map(|j| {
            let mut stream = NormalStream::new(derive_key(seed, tag, j), 1);
            u64::from(sample_event(ev, steps, total, &mut stream))
        })
        .sum()
}

/// Estimates the event probability of the chosen case by Monte Carlo and by
/// the reflection principle, and compares with the lower bound.
pub fn brownian_saddle_oracle(params: &BrownianOracleParams) -> Result<BrownianOracleReport, LdpError> {
    let (ev, bound) = event_of(params)?;
    let hits = count_hits(&ev, params.paths, params.steps, params.seed, "ldp/brownian");
    let n = params.paths as f64;
    let mc = hits as f64 / n;
    let verdict = if bound >= 1.0 {
        OracleVerdict::Vacuous
    } else if mc >= bound {
        OracleVerdict::Pass
    } else {
        OracleVerdict::Fail
    };
    Ok(BrownianOracleReport {
        params: *params,
        bound,
        exact: exact_probability(&ev),
        mc,
        mc_std_error: (mc * (1.0 - mc) / n).sqrt(),
        hits,
        verdict,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReflectionReport {
    pub level: f64,
    pub horizon: f64,
    pub paths: u64,
    pub mc: f64,
    /// `2 P(W_T ≥ b)`
    pub exact: f64,
    pub relative_error: f64,
}

/// Monte Carlo `P(max_{[0,T]} W ≥ b)` against the reflection principle.
pub fn reflection_check(level: f64, horizon: f64, paths: u64, steps: usize, seed: u64) -> Result<ReflectionReport, LdpError> {
    if !(level > 0.0 && horizon > 0.0) || paths == 0 || steps == 0 {
        return Err(LdpError::InvalidInput("need b > 0, T > 0 and positive path and step counts".into()));
    }
    // the complement of "stay below b" with no endpoint constraint
    let ev = Event { pieces: vec![(horizon, level)], endpoint: f64::NEG_INFINITY };
    let below = count_hits(&ev, paths, steps, seed, "ldp/reflection");
    let mc = (paths - below) as f64 / paths as f64;
    let exact = 2.0 * (1.0 - normal_cdf(level / horizon.sqrt()));
    Ok(ReflectionReport { level, horizon, paths, mc, exact, relative_error: (mc - exact).abs() / exact })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(case: BrownianCase) -> BrownianOracleParams {
        BrownianOracleParams { case, beta: 0.5, kappa: 0.05, epsilon: 0.05, horizon: 1.0, paths: 20_000, steps: 16, seed: 7 }
    }

    #[test]
    fn normal_cdf_values() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((normal_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-14);
        assert!((normal_cdf(-5.0) / 2.866_515_718_791_939e-7 - 1.0).abs() < 1e-13);
    }

    #[test]
    fn case_one_bound_and_exact_value() {
        let (ev, bound) = event_of(&params(BrownianCase::I { a: 0.4, d: 0.1 })).unwrap();
        assert!((bound - 2.0 * (-(0.05f64).powf(-0.25)).exp()).abs() < 1e-15);
        let p = exact_probability(&ev);
        let direct = normal_cdf(-ev.endpoint) - normal_cdf(-(2.0 * ev.pieces[0].1 + ev.endpoint));
        assert!((p - direct).abs() < 1e-15);
    }

    #[test]
    fn two_piece_quadrature_matches_one_piece_limit() {
        // identical barriers on both pieces collapse to the one-piece formula
        let one = Event { pieces: vec![(1.0, 0.7)], endpoint: 0.4 };
        let two = Event { pieces: vec![(0.3, 0.7), (0.7, 0.7)], endpoint: 0.4 };
        let (a, b) = (exact_probability(&one), exact_probability(&two));
        assert!((a - b).abs() < 1e-9, "{a} {b}");
    }

    #[test]
    fn zero_level_in_case_three_is_vacuous() {
        let r = brownian_saddle_oracle(&params(BrownianCase::Iii { d: 0.1, a_level: 0.0 })).unwrap();
        assert_eq!(r.bound, 2.0);
        assert_eq!(r.verdict, OracleVerdict::Vacuous);
    }

    #[test]
    fn constraints_are_enforced() {
        assert!(brownian_saddle_oracle(&params(BrownianCase::I { a: 0.1, d: 0.4 })).is_err());
        assert!(brownian_saddle_oracle(&params(BrownianCase::Ii { d: 0.4 })).is_err());
        assert!(brownian_saddle_oracle(&params(BrownianCase::Iii { d: 0.6, a_level: 1.0 })).is_err());
    }

    #[test]
    fn monte_carlo_agrees_with_exact() {
        for case in [BrownianCase::I { a: 0.4, d: 0.1 }, BrownianCase::Iii { d: 0.1, a_level: 0.5 }] {
            let r = brownian_saddle_oracle(&params(case)).unwrap();
            assert!((r.mc - r.exact).abs() < 4.0 * r.mc_std_error.max(1e-4), "{r:?}");
        }
    }
}
