mod common;

use proptest::prelude::*;
use reeb_ldp::action::{
    departure_check, evaluate_action, lagrangian_profile, minimize_action, shoot, tube_infimum,
    zero_speed_at_exterior_vertex_check, DepartureStatus, TubeMethod, DEFAULT_B2_FLOOR,
};
use reeb_ldp::reeb::{GraphPath, GraphPoint};
use std::sync::OnceLock;

fn harmonic() -> &'static common::Setup {
    static S: OnceLock<common::Setup> = OnceLock::new();
    S.get_or_init(|| common::setup("harmonic"))
}

fn doublewell() -> &'static common::Setup {
    static S: OnceLock<common::Setup> = OnceLock::new();
    S.get_or_init(|| common::setup("doublewell"))
}

fn ramp(n: usize, h0: f64, h1: f64) -> GraphPath {
    let s = harmonic();
    let hs: Vec<f64> = (0..=n).map(|k| h0 + (h1 - h0) * k as f64 / n as f64).collect();
    GraphPath::on_edge(&s.graph, 0, 1.0, &hs)
}

#[test]
fn constant_path_costs_nothing() {
    let s = harmonic();
    let p = ramp(50, 1.3, 1.3);
    let a = evaluate_action(&s.tables, &s.graph, &p, DEFAULT_B2_FLOOR).unwrap();
    assert_eq!(a.value, 0.0);
}

#[test]
fn linear_ramp_matches_closed_form() {
    let s = harmonic();
    let exact = 0.25 * 2f64.ln();
    for n in [10, 1000] {
        let a = evaluate_action(&s.tables, &s.graph, &ramp(n, 1.0, 2.0), DEFAULT_B2_FLOOR).unwrap();
        assert!((a.value - exact).abs() < 1e-6, "{n}: {}", a.value);
        assert!((a.value - a.breakdown.iter().sum::<f64>()).abs() == 0.0);
    }
    // midpoint Riemann sum of ½ φ̇²/(2φ) on 10⁶ cells
    let m = 1_000_000;
    let riemann: f64 = (0..m).map(|k| 0.5 / (2.0 * (1.0 + (k as f64 + 0.5) / m as f64)) / m as f64).sum();
    assert!((riemann - exact).abs() < 1e-10);
}

#[test]
fn dwelling_at_the_saddle_costs_nothing() {
    let s = doublewell();
    let v = s.graph.vertices.iter().find(|v| v.edges.len() == 3).unwrap().id;
    let n = 100;
    let times: Vec<f64> = (0..=n).map(|k| k as f64 / n as f64).collect();
    // the same vertex carried by different incident edges inside and outside the dwell window
    let points = times
        .iter()
        .map(|&t| if (0.3..=0.7).contains(&t) { GraphPoint::at(&s.graph, v) } else { GraphPoint::new(&s.graph, 2, 0.25) })
        .collect();
    let path = GraphPath::new(times.clone(), points);
    let a = evaluate_action(&s.tables, &s.graph, &path, DEFAULT_B2_FLOOR).unwrap();
    assert_eq!(a.value, 0.0);
    assert!((a.vertex_dwell - 1.0).abs() < 1e-12);
}

#[test]
fn harmonic_minimizer_closed_form_and_dp() {
    let s = harmonic();
    let y0 = GraphPoint::new(&s.graph, 0, 1.0);
    let y1 = GraphPoint::new(&s.graph, 0, 2.0);
    let r = minimize_action(&s.tables, &s.graph, &y0, &y1, 1.0, 400, 400).unwrap();
    let exact = (2f64.sqrt() - 1.0).powi(2);
    assert!((r.action.value - exact).abs() < 1e-6, "{}", r.action.value);
    assert!(r.action.value < 0.25 * 2f64.ln());
    assert!(r.diagnostics.dp_relative_gap.unwrap() < 1e-3, "{:?}", r.diagnostics);
    let prof = lagrangian_profile(&s.tables, &r.path).unwrap();
    let mean = prof.iter().sum::<f64>() / prof.len() as f64;
    let sd = (prof.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / prof.len() as f64).sqrt();
    assert!(sd / mean < 1e-2);
    assert!((mean - r.energy).abs() / r.energy < 1e-3);
}

#[test]
fn minimizer_is_stable_under_refinement() {
    let s = harmonic();
    let y0 = GraphPoint::new(&s.graph, 0, 1.0);
    let y1 = GraphPoint::new(&s.graph, 0, 2.0);
    let a = minimize_action(&s.tables, &s.graph, &y0, &y1, 1.0, 100, 100).unwrap();
    let b = minimize_action(&s.tables, &s.graph, &y0, &y1, 1.0, 200, 200).unwrap();
    assert!((a.action.value - b.action.value).abs() / b.action.value < 1e-3);
    assert!((a.diagnostics.dp_value.unwrap() - b.diagnostics.dp_value.unwrap()).abs() / b.action.value < 1e-3);
}

#[test]
fn same_endpoints_give_zero() {
    let s = doublewell();
    let y = GraphPoint::new(&s.graph, 1, 0.2);
    let r = minimize_action(&s.tables, &s.graph, &y, &y, 3.0, 50, 50).unwrap();
    assert_eq!(r.action.value, 0.0);
    assert!(r.path.points.iter().all(|p| *p == y));
}

#[test]
fn doublewell_crossing_equals_best_time_split() {
    let s = doublewell();
    let g = &s.graph;
    let v = g.vertices.iter().find(|v| v.edges.len() == 3).unwrap().id;
    let wells: Vec<usize> = g.edges.iter().filter(|e| !e.is_unbounded()).map(|e| e.id).collect();
    let y0 = GraphPoint::new(g, wells[0], 0.1);
    let y1 = GraphPoint::new(g, wells[1], 0.1);
    let r = minimize_action(&s.tables, g, &y0, &y1, 2.0, 200, 200).unwrap();
    assert_eq!(r.diagnostics.route.len(), 2);
    assert_eq!(r.path.points[1].edge, wells[0]);
    assert_eq!(r.path.points[199].edge, wells[1]);
    let sv = GraphPoint::at(g, v);
    let mut best = f64::INFINITY;
    for k in 1..200 {
        let t1 = 2.0 * k as f64 / 200.0;
        let a = shoot(&s.tables, g, &y0, &GraphPoint::new(g, wells[0], sv.h), t1, 4).unwrap().action.value;
        let b = shoot(&s.tables, g, &GraphPoint::new(g, wells[1], sv.h), &y1, 2.0 - t1, 4).unwrap().action.value;
        best = best.min(a + b);
    }
    assert!((r.action.value - best).abs() / best <= 1e-2, "{} vs {best}", r.action.value);
    let dp = r.diagnostics.dp_value.unwrap();
    assert!((dp - r.action.value).abs() / r.action.value <= 1e-2, "{dp}");
    assert!(r.path.continuity_violation(g).is_none());
}

#[test]
fn departure_from_exterior_vertex() {
    let s = harmonic();
    let v0 = GraphPoint::new(&s.graph, 0, 0.0);
    let y1 = GraphPoint::new(&s.graph, 0, 1.0);
    let rep = zero_speed_at_exterior_vertex_check(&s.tables, &s.graph, &v0, &y1, 1.0, &[100, 1000, 10000]).unwrap();
    assert_eq!(rep.status, DepartureStatus::Satisfied);
    assert!(rep.quotients.windows(2).all(|w| w[1].1 < w[0].1));
    // a linear ramp leaves the minimum at unit speed
    let paths: Vec<GraphPath> = [100, 1000].iter().map(|&n| ramp(n, 0.0, 1.0)).collect();
    let rep = departure_check(&s.tables, &s.graph, &paths).unwrap();
    assert_eq!(rep.status, DepartureStatus::Violated);
    assert!(rep.actions.iter().all(|a| a.is_infinite()));
    // saddle start is out of scope
    let d = doublewell();
    let v = d.graph.vertices.iter().find(|v| v.edges.len() == 3).unwrap().id;
    let p = GraphPath::new(vec![0.0, 1.0], vec![GraphPoint::at(&d.graph, v); 2]);
    let rep = departure_check(&d.tables, &d.graph, &[p]).unwrap();
    assert!(matches!(rep.status, DepartureStatus::Skipped { .. }));
}

#[test]
fn tube_infimum_on_harmonic_ramp() {
    let s = harmonic();
    let y0 = GraphPoint::new(&s.graph, 0, 1.0);
    let y1 = GraphPoint::new(&s.graph, 0, 3.0);
    let reference = shoot(&s.tables, &s.graph, &y0, &y1, 1.0, 200).unwrap().path;
    let t = tube_infimum(&s.tables, &s.graph, &reference, 0.3, 200, 400).unwrap();
    let exact = (2.7f64.sqrt() - 1.0).powi(2);
    assert_eq!(t.method, TubeMethod::RelaxedShooting);
    assert!((t.value - exact).abs() < 1e-6, "{}", t.value);
    let dp = t.dp_value.unwrap();
    assert!(dp >= exact * (1.0 - 1e-9) && dp < exact * 1.05, "{dp}");
}

#[test]
fn action_is_additive_on_grid_splits() {
    let s = harmonic();
    let p = ramp(200, 0.5, 2.5);
    let whole = evaluate_action(&s.tables, &s.graph, &p, DEFAULT_B2_FLOOR).unwrap();
    let k = 77;
    let left = GraphPath::new(p.times[..=k].to_vec(), p.points[..=k].to_vec());
    let right = GraphPath::new(p.times[k..].to_vec(), p.points[k..].to_vec());
    let a = evaluate_action(&s.tables, &s.graph, &left, DEFAULT_B2_FLOOR).unwrap();
    let b = evaluate_action(&s.tables, &s.graph, &right, DEFAULT_B2_FLOOR).unwrap();
    assert_eq!([a.breakdown, b.breakdown].concat(), whole.breakdown);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn perturbed_paths_cost_at_least_the_minimum(amp in proptest::collection::vec(-0.3f64..0.3, 4)) {
        let s = harmonic();
        let y0 = GraphPoint::new(&s.graph, 0, 1.0);
        let y1 = GraphPoint::new(&s.graph, 0, 2.0);
        let n = 400;
        let r = shoot(&s.tables, &s.graph, &y0, &y1, 1.0, n).unwrap();
        let hs: Vec<f64> = r.path.points.iter().zip(&r.path.times).map(|(p, &t)| {
            let bump: f64 = amp.iter().enumerate().map(|(j, a)| a * ((j + 1) as f64 * std::f64::consts::PI * t).sin()).sum();
            (p.h + bump).max(0.05)
        }).collect();
        let q = GraphPath::on_edge(&s.graph, 0, 1.0, &hs);
        let a = evaluate_action(&s.tables, &s.graph, &q, DEFAULT_B2_FLOOR).unwrap();
        prop_assert!(a.value >= r.action.value - 1e-6);
        prop_assert!(a.value >= 0.0);
    }

    #[test]
    fn moving_paths_away_from_vertices_cost_something(h0 in 0.2f64..3.0, dh in 0.01f64..1.0) {
        let s = harmonic();
        let a = evaluate_action(&s.tables, &s.graph, &ramp(20, h0, h0 + dh), DEFAULT_B2_FLOOR).unwrap();
        prop_assert!(a.value > 0.0);
    }
}
