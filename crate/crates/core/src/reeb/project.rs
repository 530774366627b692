use super::{GraphPath, GraphPoint, ReebError, ReebGraph};
use crate::field::{sym_eigenvalues, sym_eigenvector, CriticalKind, HamiltonianSystem, Point};
use crate::ode::{Adaptive, Tolerance};

/// Full projections are forced every this many trajectory steps.
pub const RESYNC_EVERY: usize = 64;

const MAX_GRADIENT_STEPS: usize = 20_000;

/// Projection `Y(x) = (edge, H(x))`.
///
/// When several edges cover `H(x)` the edge is found from the gradient line
/// through `x`: its image on Γ is a monotone path from the extremum reached by
/// descent to the extremum (or the open top end) reached by ascent, and that
/// path crosses level `H(x)` on exactly one edge. Nodes of the build grid are
/// consulted first and the gradient line is traced only when they disagree or
/// a saddle is close.
pub fn project(sys: &HamiltonianSystem, graph: &ReebGraph, x: Point) -> Result<GraphPoint, ReebError> {
    if !graph.bbox.contains(x) || !x[0].is_finite() || !x[1].is_finite() {
        return Err(ReebError::OutsideBox { x: x[0], y: x[1] });
    }
    let h = sys.h(x);
    let mut cands = graph.edges_covering(h);
    let first = cands.next();
    let Some(first) = first else {
        // below every edge: only possible by round-off at the global minimum
        let v = graph
            .vertices
            .iter()
            .min_by(|a, b| a.h().total_cmp(&b.h()))
            .map(|v| v.id)
            .unwrap();
        return Ok(GraphPoint { edge: graph.vertex(v).edges[0], h, at_vertex: None });
    };
    if cands.next().is_none() {
        return Ok(GraphPoint::new(graph, first, h));
    }
    let diam = graph.bbox.diameter();
    if let Some(v) = graph.vertices.iter().find(|v| {
        (v.critical.location[0] - x[0]).hypot(v.critical.location[1] - x[1]) < 1e-12 * diam
    }) {
        return Ok(GraphPoint { edge: v.edges[0], h, at_vertex: (h == v.h()).then_some(v.id) });
    }
    // on a separatrix: every covering edge meets at the same vertex
    let on_level: Vec<usize> = graph.edges_covering(h).collect();
    if let Some(v) = graph.vertices.iter().find(|v| v.h() == h && on_level.iter().all(|&e| graph.edge(e).has_vertex(v.id))) {
        return Ok(GraphPoint { edge: v.edges[0], h, at_vertex: Some(v.id) });
    }
    if let Some(e) = locate_on_grid(graph, x, h) {
        return Ok(GraphPoint::new(graph, e, h));
    }
    let e = trace_edge(sys, graph, x, h)?;
    Ok(GraphPoint::new(graph, e, h))
}

fn locate_on_grid(graph: &ReebGraph, x: Point, h: f64) -> Option<usize> {
    let loc = graph.locator.as_ref()?;
    let g = &loc.grid;
    let (i, j) = g.cell_of(x);
    // stay away from saddles, where lobes meet within a cell or two
    let reach = 3.0 * g.dx.hypot(g.dy);
    if graph.vertices.iter().any(|v| {
        v.critical.kind == CriticalKind::Saddle
            && (v.critical.location[0] - x[0]).hypot(v.critical.location[1] - x[1]) < reach
    }) {
        return None;
    }
    let levels = graph.critical_levels();
    let band = levels.partition_point(|&l| l < h);
    if band < levels.len() && levels[band] == h {
        return None;
    }
    let mut found = None;
    for (a, b) in [(i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)] {
        let k = g.idx(a, b);
        if loc.labels[k] == crate::grid::EXCLUDED || levels.partition_point(|&l| l < g.values[k]) != band {
            continue;
        }
        let e = loc.labels[k] as usize;
        match found {
            None => found = Some(e),
            Some(f) if f != e => return None,
            _ => {}
        }
    }
    found.filter(|&e| graph.covers(e, h))
}

/// End of a gradient line: an extremum vertex or the open top end.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Terminal {
    Vertex(usize),
    Top,
}

fn trace_edge(sys: &HamiltonianSystem, graph: &ReebGraph, x: Point, h: f64) -> Result<usize, ReebError> {
    let down = follow(sys, graph, x, -1.0)?;
    let up = follow(sys, graph, x, 1.0)?;
    let route = tree_route(graph, down, up);
    route
        .into_iter()
        .find(|&e| graph.covers(e, h))
        .ok_or(ReebError::LostGradientLine { x: x[0], y: x[1] })
}

/// Follows `sign·∇H/|∇H|` until an extremum of the matching kind (or, going up,
/// the region above every critical level) is reached. Lines running into a
/// saddle are nudged off along the outgoing eigendirection, on the side they
/// were already leaning towards.
fn follow(sys: &HamiltonianSystem, graph: &ReebGraph, x0: Point, sign: f64) -> Result<Terminal, ReebError> {
    let diam = graph.bbox.diameter();
    let stop_r = 1e-3 * diam;
    let saddle_r = 1e-6 * diam;
    let top_level = *graph.critical_levels().last().unwrap();
    let want = if sign < 0.0 { CriticalKind::Minimum } else { CriticalKind::Maximum };
    let field = |y: &[f64; 2]| {
        let g = sys.grad(*y);
        let n = g[0].hypot(g[1]);
        if n == 0.0 {
            [0.0, 0.0]
        } else {
            [sign * g[0] / n, sign * g[1] / n]
        }
    };
    let mut ad = Adaptive::new(Tolerance::new(1e-7).with_h_max(0.02 * diam), 1e-3 * diam);
    let mut y = x0;
    for _ in 0..MAX_GRADIENT_STEPS {
        if sign > 0.0 && sys.h(y) > top_level {
            return Ok(Terminal::Top);
        }
        for v in &graph.vertices {
            let d = (v.critical.location[0] - y[0]).hypot(v.critical.location[1] - y[1]);
            if v.critical.kind == want && d < stop_r {
                return Ok(Terminal::Vertex(v.id));
            }
        }
        let near_saddle = graph.vertices.iter().find(|v| {
            v.critical.kind == CriticalKind::Saddle
                && (v.critical.location[0] - y[0]).hypot(v.critical.location[1] - y[1]) < 10.0 * saddle_r
        });
        if let Some(s) = near_saddle {
            y = nudge(sys, s.critical.location, y, sign, 1e-4 * diam);
            ad.h = 1e-4 * diam;
            continue;
        }
        match ad.advance(&field, &y, f64::INFINITY) {
            Ok((_, yn)) => y = yn,
            Err(_) => {
                // stalled: usually on a saddle's stable line
                let s = graph
                    .vertices
                    .iter()
                    .filter(|v| v.critical.kind == CriticalKind::Saddle)
                    .min_by(|a, b| {
                        let da = (a.critical.location[0] - y[0]).hypot(a.critical.location[1] - y[1]);
                        let db = (b.critical.location[0] - y[0]).hypot(b.critical.location[1] - y[1]);
                        da.total_cmp(&db)
                    })
                    .ok_or(ReebError::LostGradientLine { x: x0[0], y: x0[1] })?;
                y = nudge(sys, s.critical.location, y, sign, 1e-4 * diam);
                ad.h = 1e-4 * diam;
            }
        }
        if !graph.bbox.contains(y) {
            return if sign > 0.0 { Ok(Terminal::Top) } else { Err(ReebError::LostGradientLine { x: x0[0], y: x0[1] }) };
        }
    }
    Err(ReebError::LostGradientLine { x: x0[0], y: x0[1] })
}

fn nudge(sys: &HamiltonianSystem, s: Point, y: Point, sign: f64, r: f64) -> Point {
    let [a, b, c] = sys.hess(s);
    let ev = sym_eigenvalues(a, b, c);
    // descending lines leave along the negative-curvature direction
    let lam = if sign < 0.0 { ev[0] } else { ev[1] };
    let e = sym_eigenvector(a, b, c, lam);
    let side = (y[0] - s[0]) * e[0] + (y[1] - s[1]) * e[1];
    let sgn = if side < 0.0 { -1.0 } else { 1.0 };
    [s[0] + sgn * r * e[0], s[1] + sgn * r * e[1]]
}

/// Edge sequence of the unique tree path between two terminals.
fn tree_route(graph: &ReebGraph, a: Terminal, b: Terminal) -> Vec<usize> {
    let top_node = graph.vertices.len();
    let node = |t: Terminal| match t {
        Terminal::Vertex(v) => v,
        Terminal::Top => top_node,
    };
    let (src, dst) = (node(a), node(b));
    let mut prev: Vec<Option<(usize, usize)>> = vec![None; top_node + 1];
    let mut seen = vec![false; top_node + 1];
    seen[src] = true;
    let mut queue = std::collections::VecDeque::from([src]);
    while let Some(v) = queue.pop_front() {
        let incident: Vec<usize> = if v == top_node {
            vec![graph.top_edge()]
        } else {
            graph.vertex(v).edges.clone()
        };
        for e in incident {
            let ed = graph.edge(e);
            let w = if ed.v_lo == v { ed.v_hi.unwrap_or(top_node) } else { ed.v_lo };
            if !seen[w] {
                seen[w] = true;
                prev[w] = Some((v, e));
                queue.push_back(w);
            }
        }
    }
    let mut route = Vec::new();
    let mut cur = dst;
    while let Some((p, e)) = prev[cur] {
        route.push(e);
        cur = p;
    }
    route.reverse();
    route
}

/// Projects a sampled trajectory, carrying the edge forward by continuity.
///
/// The edge is only reconsidered when `H` leaves the current edge's range,
/// in which case the successor must be incident to the vertex just crossed.
/// Every [`RESYNC_EVERY`] steps a full [`project`] call overrides the carried
/// edge; a resync onto an edge that is not adjacent is a continuity break.
pub fn project_trajectory(
    sys: &HamiltonianSystem,
    graph: &ReebGraph,
    times: &[f64],
    xs: &[Point],
) -> Result<GraphPath, ReebError> {
    let mut pts = Vec::with_capacity(xs.len());
    let mut tracker = Tracker::default();
    for (k, &x) in xs.iter().enumerate() {
        pts.push(tracker.step(sys, graph, x, k)?);
    }
    Ok(GraphPath::new(times.to_vec(), pts))
}

/// Incremental form of [`project_trajectory`] for streaming simulators.
#[derive(Debug, Clone, Default)]
pub struct Tracker {
    current: Option<GraphPoint>,
    count: usize,
}

impl Tracker {
    pub fn step(&mut self, sys: &HamiltonianSystem, graph: &ReebGraph, x: Point, step: usize) -> Result<GraphPoint, ReebError> {
        let k = self.count;
        self.count += 1;
        let Some(prev) = self.current else {
            let p = project(sys, graph, x)?;
            self.current = Some(p);
            return Ok(p);
        };
        if !graph.bbox.contains(x) {
            return Err(ReebError::OutsideBox { x: x[0], y: x[1] });
        }
        let h = sys.h(x);
        let carried = if graph.covers(prev.edge, h) {
            Some(prev.edge)
        } else {
            let ed = graph.edge(prev.edge);
            // vertex crossed on the way out of the current edge
            let v = if h < ed.h_lo { Some(ed.v_lo) } else { ed.v_hi };
            let next: Vec<usize> = match v {
                Some(v) => graph.vertex(v).edges.iter().copied().filter(|&e| graph.covers(e, h)).collect(),
                None => Vec::new(),
            };
            if next.len() == 1 {
                Some(next[0])
            } else {
                None
            }
        };
        let p = match carried {
            Some(e) if k % RESYNC_EVERY != 0 => GraphPoint::new(graph, e, h),
            _ => {
                let p = project(sys, graph, x)?;
                if p.edge != prev.edge && graph.common_vertex(p.edge, prev.edge).is_none() {
                    return Err(ReebError::ContinuityBreak { step, from: prev.edge, to: p.edge });
                }
                p
            }
        };
        self.current = Some(p);
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{find_critical_points, SystemRegistry};
    use crate::reeb::build_reeb_graph;

    fn setup() -> (HamiltonianSystem, ReebGraph) {
        let sys = SystemRegistry::default().build("doublewell").unwrap();
        let cps = find_critical_points(&sys, sys.bbox(), 128).unwrap();
        let g = build_reeb_graph(&sys, &cps, sys.bbox(), 256).unwrap();
        (sys, g)
    }

    #[test]
    fn double_well_examples() {
        let (sys, g) = setup();
        let p = project(&sys, &g, [1.0, 0.0]).unwrap();
        assert_eq!(p.at_vertex, Some(1));
        assert_eq!(p.h, 0.0);
        let p = project(&sys, &g, [0.9, 0.0]).unwrap();
        assert_eq!(p.edge, 1);
        assert_eq!(p.h, sys.h([0.9, 0.0]));
        assert!((p.h - 0.009025).abs() < 1e-15);
        let p = project(&sys, &g, [0.0, 2.0]).unwrap();
        assert_eq!(p.edge, 2);
        assert_eq!(p.h, 2.25);
        assert!(matches!(project(&sys, &g, [9.0, 0.0]), Err(ReebError::OutsideBox { .. })));
    }

    #[test]
    fn tracing_agrees_with_grid_lookup() {
        let (sys, g) = setup();
        for &x in &[[0.9, 0.1], [-0.7, -0.2], [0.05, 0.01], [-0.02, 0.03], [1.3, 0.0], [-0.3, 0.6]] {
            let h = sys.h(x);
            if g.edges_covering(h).count() < 2 {
                continue;
            }
            let traced = trace_edge(&sys, &g, x, h).unwrap();
            let expect = if x[0] < 0.0 { 0 } else { 1 };
            assert_eq!(traced, expect, "at {x:?}");
            assert_eq!(project(&sys, &g, x).unwrap().edge, expect);
        }
    }

    #[test]
    fn crossing_the_separatrix() {
        let (sys, g) = setup();
        let n = 400;
        let xs: Vec<Point> = (0..=n)
            .map(|k| {
                let s = k as f64 / n as f64;
                [0.5 * (1.0 - s), 1.2 * s]
            })
            .collect();
        let ts: Vec<f64> = (0..=n).map(|k| k as f64).collect();
        let path = project_trajectory(&sys, &g, &ts, &xs).unwrap();
        assert_eq!(path.points[0].edge, 1);
        assert_eq!(path.points.last().unwrap().edge, 2);
        let switches = path.points.windows(2).filter(|w| w[0].edge != w[1].edge).count();
        assert_eq!(switches, 1);
        assert!(path.continuity_violation(&g).is_none());
        for (k, p) in path.points.iter().enumerate() {
            assert_eq!(p.h, sys.h(xs[k]));
        }
    }
}
