mod common;

use proptest::prelude::*;
use reeb_ldp::field::{find_critical_points, SystemRegistry};
use reeb_ldp::reeb::{build_reeb_graph, graph_distance, project, GraphPoint, VertexRole};
use std::sync::OnceLock;

fn harmonic() -> &'static common::Setup {
    static S: OnceLock<common::Setup> = OnceLock::new();
    S.get_or_init(|| common::setup("harmonic"))
}

fn doublewell() -> &'static common::Setup {
    static S: OnceLock<common::Setup> = OnceLock::new();
    S.get_or_init(|| common::setup("doublewell"))
}

#[test]
fn harmonic_coefficients_match_closed_forms() {
    let s = harmonic();
    let mut worst = 0.0f64;
    for k in 0..=390 {
        let h = 0.1 + 0.01 * k as f64;
        let c = s.tables.lookup(0, h).unwrap();
        worst = worst.max((c.t / std::f64::consts::TAU - 1.0).abs());
        worst = worst.max((c.b2 / (2.0 * h) - 1.0).abs());
    }
    assert!(worst <= 1e-5, "{worst}");
}

#[test]
fn doublewell_topology_is_resolution_independent() {
    let sys = SystemRegistry::default().build("doublewell").unwrap();
    let cps = find_critical_points(&sys, sys.bbox(), 128).unwrap();
    let mut shapes = Vec::new();
    for n in [256, 512] {
        let g = build_reeb_graph(&sys, &cps, sys.bbox(), n).unwrap();
        let ext = g.vertices.iter().filter(|v| v.role == VertexRole::Exterior).count();
        let int = g.vertices.iter().filter(|v| v.role == VertexRole::Interior).count();
        assert_eq!((ext, int, g.edges.len()), (2, 1, 3));
        let mut ranges: Vec<(f64, f64)> = g.edges.iter().map(|e| (e.h_lo, e.h_hi.min(g.h_max))).collect();
        ranges.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((ranges[0].0).abs() < 1e-9 && (ranges[0].1 - 0.25).abs() < 1e-9);
        assert!((ranges[1].0).abs() < 1e-9 && (ranges[1].1 - 0.25).abs() < 1e-9);
        assert!((ranges[2].0 - 0.25).abs() < 1e-9 && ranges[2].1 == g.h_max);
        shapes.push(g.export());
    }
    let strip = |e: &reeb_ldp::reeb::GraphExport| serde_json::to_string(&(&e.vertices, &e.edges)).unwrap();
    assert_eq!(strip(&shapes[0]), strip(&shapes[1]));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn projection_keeps_the_energy(x in -1.9f64..1.9, y in -1.9f64..1.9) {
        let s = doublewell();
        let h = s.sys.h([x, y]);
        prop_assume!(h < s.graph.h_max && (h - 0.25).abs() > 1e-6);
        let p = project(&s.sys, &s.graph, [x, y]).unwrap();
        prop_assert_eq!(p.h, h);
        prop_assert!(s.graph.covers(p.edge, h));
        // the well containing the point is the one on its side of the separatrix
        if h < 0.25 {
            let e = s.graph.edge(p.edge);
            let v = s.graph.vertex(e.v_lo);
            prop_assert!(v.critical.location[0] * x > 0.0);
        }
    }

    #[test]
    fn graph_distance_is_a_metric(
        a in (0usize..3, 0.0f64..1.0), b in (0usize..3, 0.0f64..1.0), c in (0usize..3, 0.0f64..1.0)
    ) {
        let s = doublewell();
        let pt = |(e, u): (usize, f64)| {
            let (lo, hi) = s.graph.span(e);
            let hi = hi.min(s.graph.h_max);
            GraphPoint::new(&s.graph, e, lo + u * (hi - lo))
        };
        let (p, q, r) = (pt(a), pt(b), pt(c));
        let d = |x: &GraphPoint, y: &GraphPoint| graph_distance(&s.graph, x, y);
        prop_assert!(d(&p, &p).abs() < 1e-15);
        prop_assert!((d(&p, &q) - d(&q, &p)).abs() < 1e-12);
        prop_assert!(d(&p, &r) <= d(&p, &q) + d(&q, &r) + 1e-12);
    }

    #[test]
    fn coefficients_stay_positive(h in 0.001f64..4.4) {
        let s = harmonic();
        let c = s.tables.lookup(0, h).unwrap();
        prop_assert!(c.t > 0.0 && c.b2 > 0.0);
    }
}
