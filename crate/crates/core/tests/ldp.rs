mod common;

use reeb_ldp::action::shoot;
use reeb_ldp::field::{find_critical_points, positive_drift_margin, CriticalKind, SystemRegistry};
use reeb_ldp::ldp::{
    estimate_tube, fit_rate, quadratic_variation_check, reflection_check, wilson, TubeEstimate, TubeExperiment, TubeVerdict,
};
use reeb_ldp::reeb::{GraphPath, GraphPoint};
use reeb_ldp::sde::rng::NormalStream;
use reeb_ldp::sde::{simulate, SimulationConfig};
use std::sync::OnceLock;

fn harmonic() -> &'static common::Setup {
    static S: OnceLock<common::Setup> = OnceLock::new();
    S.get_or_init(|| common::setup("harmonic"))
}

fn minimizer() -> GraphPath {
    let s = harmonic();
    let y0 = GraphPoint::new(&s.graph, 0, 1.0);
    let y1 = GraphPoint::new(&s.graph, 0, 3.0);
    shoot(&s.tables, &s.graph, &y0, &y1, 1.0, 200).unwrap().path
}

fn experiment(reference: GraphPath, delta: f64, epsilons: Vec<f64>, samples: u64) -> TubeExperiment {
    TubeExperiment {
        reference,
        delta,
        epsilons,
        beta: 0.5,
        samples,
        seed: 2024,
        x0: [2f64.sqrt(), 0.0],
        dt_fast: 1e-3,
        n_time: 200,
        n_h: 400,
    }
}

fn run(exp: &TubeExperiment) -> TubeEstimate {
    let s = harmonic();
    estimate_tube(&s.sys, &s.graph, &s.tables, exp).unwrap()
}

#[test]
fn reflection_principle_cross_check() {
    let r = reflection_check(1.0, 1.0, 1_000_000, 16, 99).unwrap();
    assert!(r.relative_error <= 1e-2, "{r:?}");
}

#[test]
fn synthetic_rate_is_recovered() {
    // p(ε) = exp(−s₀ ε^{−β}) with 10% multiplicative noise; sample sizes are
    // set so that the binomial weights describe exactly that noise level
    let s0 = 0.5;
    let ladder: Vec<f64> = (0..10).map(|k| 0.2 * 0.01f64.powf(k as f64 / 9.0)).collect();
    let mut stream = NormalStream::new(314, 1);
    let mut z = [0.0];
    for _ in 0..50 {
        let pts: Vec<(f64, u64, u64)> = ladder
            .iter()
            .map(|&e| {
                stream.fill(&mut z);
                let p = (-s0 * e.powf(-0.5)).exp();
                let n = (100.0 * (1.0 - p) / p).round() as u64;
                (e, (n as f64 * p * (1.0 + 0.1 * z[0])).round() as u64, n)
            })
            .collect();
        let fit = fit_rate(&pts, 0.5).unwrap();
        assert!((fit.slope - s0).abs() <= 0.05 * s0, "{fit:?}");
    }
}

#[test]
fn doubling_samples_narrows_the_interval() {
    let reference = minimizer();
    let a = run(&experiment(reference.clone(), 1.0, vec![0.16], 2000));
    let b = run(&experiment(reference, 1.0, vec![0.16], 4000));
    let width = |e: &TubeEstimate| e.per_epsilon[0].wilson_hi - e.per_epsilon[0].wilson_lo;
    let ratio = width(&b) / width(&a);
    assert!((ratio - 0.5f64.sqrt()).abs() <= 0.2 * 0.5f64.sqrt(), "{ratio}");
    // wider runs extend the same streams, not fresh ones
    assert!(b.per_epsilon[0].hits >= a.per_epsilon[0].hits);
    let (lo, hi) = wilson(a.per_epsilon[0].hits, 2000);
    assert_eq!((lo, hi), (a.per_epsilon[0].wilson_lo, a.per_epsilon[0].wilson_hi));
}

#[test]
fn smaller_tube_never_gains_hits_and_slow_path_agrees() {
    let reference = minimizer();
    let wide = run(&experiment(reference.clone(), 1.0, vec![0.16, 0.09], 3000));
    let narrow = run(&experiment(reference, 0.5, vec![0.16, 0.09], 3000));
    for (w, n) in wide.per_epsilon.iter().zip(&narrow.per_epsilon) {
        assert!(n.hits <= w.hits, "{} > {}", n.hits, w.hits);
        assert!(w.slow_checks == 30 && w.slow_mismatches == 0 && n.slow_mismatches == 0);
        assert!(w.p_hat >= 0.0 && w.p_hat <= 1.0);
    }
}

#[test]
fn constant_tube_gets_easier_as_noise_shrinks() {
    let s = harmonic();
    let constant = GraphPath::on_edge(&s.graph, 0, 1.0, &[1.0; 201]);
    let est = run(&experiment(constant, 0.3, vec![0.16, 0.09, 0.04], 4000));
    assert_eq!(est.s_reference, 0.0);
    let p: Vec<f64> = est.per_epsilon.iter().map(|e| e.p_hat).collect();
    assert!(p[0] < p[1] && p[1] < p[2], "{p:?}");
}

#[test]
fn rate_direction_and_sign() {
    let s = harmonic();
    let hs: Vec<f64> = (0..=200).map(|k| 1.0 + 2.0 * (k as f64 / 200.0).powi(3)).collect();
    let other = GraphPath::on_edge(&s.graph, 0, 1.0, &hs);
    let ladder = vec![0.16, 0.09, 0.04];
    let min = run(&experiment(minimizer(), 0.8, ladder.clone(), 5000));
    let alt = run(&experiment(other, 0.8, ladder, 5000));
    let (fm, fa) = (min.fit.unwrap(), alt.fit.unwrap());
    for f in [&fm, &fa] {
        assert!(f.slope >= -2.0 * f.slope_se, "{f:?}");
    }
    let slack = 2.0 * fm.slope_se.hypot(fa.slope_se);
    assert!(fa.slope >= fm.slope - slack, "{} < {} - {slack}", fa.slope, fm.slope);
}

#[test]
fn ramp_tube_reports_no_fit_when_every_estimate_misses() {
    // δ = 0.3 around the minimizing ramp is far below naive-MC reach at this
    // budget; the estimator must say so rather than fit noise
    let est = run(&experiment(minimizer(), 0.3, vec![0.16, 0.09, 0.04], 1000));
    assert!(est.per_epsilon.iter().all(|e| e.all_misses));
    assert_eq!(est.verdict, TubeVerdict::NoFit);
    assert!((est.s_reference - (2.7f64.sqrt() - 1.0).powi(2)).abs() < 1e-6);
}

#[test]
fn quadratic_variation_ratio_is_near_one() {
    let s = harmonic();
    let cfg = SimulationConfig::new(0.02, 0.5, 1.0, 1e-3, [1.0, 0.0], 6);
    let rec = simulate(&s.sys, Some(&s.graph), &cfg).unwrap();
    let r = quadratic_variation_check(&rec, &s.tables, 0.02, 0.5).unwrap();
    assert!((r.ratio.unwrap() - 1.0).abs() < 0.1, "{r:?}");
}

#[test]
fn quadratic_variation_without_noise_is_zero_on_both_sides() {
    let s = harmonic();
    let quiet = s.sys.with_sigma(reeb_ldp::field::Sigma::zero());
    let cfg = SimulationConfig::new(0.02, 0.5, 0.1, 1e-3, [1.0, 0.0], 6);
    let rec = simulate(&quiet, Some(&s.graph), &cfg).unwrap();
    let tables = reeb_ldp::coeffs::CoeffTables::build(&quiet, &s.graph, 16, reeb_ldp::coeffs::DEFAULT_GUARD).unwrap();
    let r = quadratic_variation_check(&rec, &tables, 0.02, 0.5).unwrap();
    assert_eq!(r.averaged, 0.0);
    // only the Euler–Maruyama energy drift remains
    assert!(r.realized < 1e-10, "{r:?}");
    assert!(r.ratio.is_none());
}

#[test]
fn drift_margin_positive_at_doublewell_minima() {
    let sys = SystemRegistry::default().build("doublewell").unwrap();
    let cps = find_critical_points(&sys, sys.bbox(), 128).unwrap();
    let minima: Vec<_> = cps.iter().filter(|c| c.kind == CriticalKind::Minimum).collect();
    assert_eq!(minima.len(), 2);
    for m in minima {
        assert!(positive_drift_margin(&sys, m, 0.2).unwrap() > 0.0);
    }
}
