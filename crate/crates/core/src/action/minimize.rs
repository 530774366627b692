//! Minimum-action paths. Along a monotone leg the Euler–Lagrange equation has
//! the first integral `E = ½ φ̇² / B²(φ)`, so in the B-arclength
//! `σ = ∫ dh/B` every minimizer runs at constant speed and
//! `S = D² / (2T)` with `D` the B-length of the route. A dynamic program over
//! a (time × graph lattice) with exact geodesic hop costs cross-checks this and
//! handles the tube-constrained problem.

use std::collections::VecDeque;

use serde::Serialize;

use super::integrals::{edge_integral, EdgeProfile, Weight};
use super::{evaluate_action, ActionError, ActionValue, DEFAULT_B2_FLOOR};
use crate::coeffs::{CoeffTables, EndBehaviour};
use crate::reeb::{graph_distance, path_distance, GraphPath, GraphPoint, ReebGraph};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, schemars::JsonSchema)]
pub struct Leg {
    pub edge: usize,
    pub from: f64,
    pub to: f64,
}

#[derive(Debug, Clone, Serialize, schemars::JsonSchema)]
pub struct MinActionDiagnostics {
    pub route: Vec<Leg>,
    /// B-length of each leg.
    pub leg_lengths: Vec<f64>,
    /// `∫ |dh| / B` along the route.
    pub b_length: f64,
    pub shooting_value: f64,
    pub dp_value: Option<f64>,
    /// `|dp − shooting| / shooting`.
    pub dp_relative_gap: Option<f64>,
    pub dp_nodes: Option<usize>,
}

#[derive(Debug, Clone, Serialize, schemars::JsonSchema)]
pub struct MinActionResult {
    pub path: GraphPath,
    pub action: ActionValue,
    /// Conserved `½ φ̇² / B²`.
    pub energy: f64,
    pub diagnostics: MinActionDiagnostics,
}

fn ends(graph: &ReebGraph, y: &GraphPoint) -> Vec<usize> {
    if let Some(v) = y.at_vertex {
        return vec![v];
    }
    let e = graph.edge(y.edge);
    [Some(e.v_lo), e.v_hi].into_iter().flatten().collect()
}

/// Edges walked from vertex `a` to vertex `b`, as `(edge, from, to)`.
fn vertex_path(graph: &ReebGraph, a: usize, b: usize) -> Vec<(usize, usize, usize)> {
    let n = graph.vertices.len();
    let mut prev: Vec<Option<(usize, usize)>> = vec![None; n];
    let mut seen = vec![false; n];
    let mut q = VecDeque::from([a]);
    seen[a] = true;
    while let Some(v) = q.pop_front() {
        if v == b {
            break;
        }
        for &e in &graph.vertex(v).edges {
            let ed = graph.edge(e);
            let Some(hi) = ed.v_hi else { continue };
            let w = if ed.v_lo == v { hi } else { ed.v_lo };
            if !seen[w] {
                seen[w] = true;
                prev[w] = Some((e, v));
                q.push_back(w);
            }
        }
    }
    let mut out = Vec::new();
    let mut v = b;
    while let Some((e, u)) = prev[v] {
        out.push((e, u, v));
        v = u;
    }
    out.reverse();
    out
}

/// The unique shortest route on the tree from `y0` to `y1`, as monotone legs.
pub fn tree_route(graph: &ReebGraph, y0: &GraphPoint, y1: &GraphPoint) -> Vec<Leg> {
    let mut best: Option<(f64, Vec<Leg>)> = None;
    let mut consider = |legs: Vec<Leg>| {
        let len: f64 = legs.iter().map(|l| (l.to - l.from).abs()).sum();
        if best.as_ref().is_none_or(|b| len < b.0) {
            best = Some((len, legs));
        }
    };
    if y0.edge == y1.edge {
        consider(vec![Leg { edge: y0.edge, from: y0.h, to: y1.h }]);
    }
    for a in ends(graph, y0) {
        for b in ends(graph, y1) {
            let la = graph.vertex(a).h();
            let lb = graph.vertex(b).h();
            let mut legs = vec![Leg { edge: y0.edge, from: y0.h, to: la }];
            for (e, u, v) in vertex_path(graph, a, b) {
                legs.push(Leg { edge: e, from: graph.vertex(u).h(), to: graph.vertex(v).h() });
            }
            legs.push(Leg { edge: y1.edge, from: lb, to: y1.h });
            consider(legs);
        }
    }
    let legs = best.map(|b| b.1).unwrap_or_default();
    legs.into_iter().filter(|l| l.from != l.to).collect()
}

fn leg_vertex(graph: &ReebGraph, leg: &Leg) -> usize {
    graph
        .vertex_at(leg.edge, leg.to)
        .or_else(|| graph.vertex_at(leg.edge, leg.from))
        .unwrap_or(graph.edge(leg.edge).v_lo)
}

fn leg_lengths(tables: &CoeffTables, graph: &ReebGraph, legs: &[Leg]) -> Result<Vec<f64>, ActionError> {
    legs.iter()
        .map(|l| {
            let d = edge_integral(tables, l.edge, Weight::InvB, l.from, l.to)?.abs();
            if d.is_finite() {
                Ok(d)
            } else {
                Err(ActionError::Unreachable { vertex: leg_vertex(graph, l) })
            }
        })
        .collect()
}

fn profiles(tables: &CoeffTables, graph: &ReebGraph) -> Result<Vec<EdgeProfile>, ActionError> {
    (0..graph.edges.len()).map(|e| EdgeProfile::new(tables, e)).collect()
}

/// Point at B-arclength `s` along `legs`.
fn point_along(tables: &CoeffTables, graph: &ReebGraph, prof: &[EdgeProfile], legs: &[Leg], lens: &[f64], s: f64) -> GraphPoint {
    let mut acc = 0.0;
    for (i, leg) in legs.iter().enumerate() {
        if s < acc + lens[i] || i + 1 == legs.len() {
            let r = (s - acc).clamp(0.0, lens[i]);
            if r >= lens[i] {
                return GraphPoint::new(graph, leg.edge, leg.to);
            }
            let p = &prof[leg.edge];
            let s0 = p.sigma(tables, leg.from);
            let target = if leg.to > leg.from { s0 + r } else { s0 - r };
            let h = p.h_at(tables, target);
            let (lo, hi) = if leg.to > leg.from { (leg.from, leg.to) } else { (leg.to, leg.from) };
            return GraphPoint::new(graph, leg.edge, h.clamp(lo, hi));
        }
        acc += lens[i];
    }
    unreachable!("legs are non-empty")
}

fn uniform_times(horizon: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|k| if k == n { horizon } else { horizon * k as f64 / n as f64 }).collect()
}

fn check_inputs(horizon: f64, n_time: usize) -> Result<(), ActionError> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(ActionError::InvalidInput(format!("horizon must be positive, got {horizon}")));
    }
    if n_time == 0 {
        return Err(ActionError::InvalidInput("n_time must be at least 1".into()));
    }
    Ok(())
}

/// Stage 1: first-integral solution along the tree route.
pub fn shoot(
    tables: &CoeffTables,
    graph: &ReebGraph,
    y0: &GraphPoint,
    y1: &GraphPoint,
    horizon: f64,
    n_time: usize,
) -> Result<MinActionResult, ActionError> {
    check_inputs(horizon, n_time)?;
    let legs = tree_route(graph, y0, y1);
    let lens = leg_lengths(tables, graph, &legs)?;
    let d: f64 = lens.iter().sum();
    let times = uniform_times(horizon, n_time);
    let energy = 0.5 * (d / horizon).powi(2);
    let points = if legs.is_empty() {
        vec![*y0; n_time + 1]
    } else {
        let prof = profiles(tables, graph)?;
        (0..=n_time)
            .map(|k| match k {
                0 => *y0,
                k if k == n_time => *y1,
                k => point_along(tables, graph, &prof, &legs, &lens, d * k as f64 / n_time as f64),
            })
            .collect()
    };
    let saddles = legs
        .iter()
        .filter(|l| graph.vertex_at(l.edge, l.to).is_some_and(|v| graph.vertex(v).edges.len() == 3))
        .count();
    let breakdown = times.windows(2).map(|w| energy * (w[1] - w[0])).collect();
    let action = ActionValue::from_breakdown(breakdown, 0.0, saddles);
    let shooting_value = 0.5 * d * d / horizon;
    Ok(MinActionResult {
        path: GraphPath::new(times, points),
        action,
        energy,
        diagnostics: MinActionDiagnostics {
            route: legs,
            leg_lengths: lens,
            b_length: d,
            shooting_value,
            dp_value: None,
            dp_relative_gap: None,
            dp_nodes: None,
        },
    })
}

/// Graph lattice for the dynamic program: nodes evenly spaced in B-arclength
/// on every edge, vertices shared, hops of up to `window` lattice steps.
struct Lattice {
    points: Vec<GraphPoint>,
    /// `(node, B-distance)`, self included, ascending by node.
    nbrs: Vec<Vec<(u32, f64)>>,
}

struct LatticeSpec<'a> {
    spacing: f64,
    window: usize,
    extra: &'a [GraphPoint],
    keep: &'a dyn Fn(&GraphPoint) -> bool,
}

fn build_lattice(tables: &CoeffTables, graph: &ReebGraph, prof: &[EdgeProfile], spec: &LatticeSpec) -> Lattice {
    let nv = graph.vertices.len();
    let mut points: Vec<GraphPoint> = Vec::new();
    let mut vnode: Vec<Option<usize>> = vec![None; nv];
    // per edge: (σ, node)
    let mut chains: Vec<Vec<(f64, usize)>> = vec![Vec::new(); graph.edges.len()];
    for (e, p) in prof.iter().enumerate() {
        let len = p.length();
        let m = (len / spec.spacing).ceil().max(1.0) as usize;
        let top = graph.edge(e).is_unbounded();
        let last = if top { m } else { m - 1 };
        for j in 1..=last {
            let s = len * j as f64 / m as f64;
            let pt = GraphPoint::new(graph, e, p.h_at(tables, s));
            if pt.at_vertex.is_none() && (spec.keep)(&pt) {
                chains[e].push((s, points.len()));
                points.push(pt);
            }
        }
    }
    for y in spec.extra {
        if let Some(v) = y.at_vertex {
            if vnode[v].is_none() {
                vnode[v] = Some(points.len());
                points.push(GraphPoint::at(graph, v));
            }
        } else {
            let s = prof[y.edge].sigma(tables, y.h);
            if !chains[y.edge].iter().any(|&(_, n)| points[n].h == y.h) {
                chains[y.edge].push((s, points.len()));
                points.push(*y);
            }
        }
    }
    for v in 0..nv {
        if vnode[v].is_none() && (spec.keep)(&GraphPoint::at(graph, v)) {
            vnode[v] = Some(points.len());
            points.push(GraphPoint::at(graph, v));
        }
    }
    let n = points.len();
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut link = |a: usize, b: usize, d: f64| {
        adj[a].push((b, d));
        adj[b].push((a, d));
    };
    for (e, chain) in chains.iter_mut().enumerate() {
        chain.sort_by(|a, b| a.0.total_cmp(&b.0));
        let ed = graph.edge(e);
        let len = prof[e].length();
        let mut seq: Vec<(f64, usize)> = Vec::new();
        if let Some(v) = vnode[ed.v_lo] {
            seq.push((0.0, v));
        }
        seq.extend(chain.iter().copied());
        if let Some(v) = ed.v_hi.and_then(|v| vnode[v]) {
            seq.push((len, v));
        }
        for w in seq.windows(2) {
            link(w[0].1, w[1].1, w[1].0 - w[0].0);
        }
    }
    let mut nbrs = Vec::with_capacity(n);
    for s in 0..n {
        let mut found: Vec<(u32, f64)> = vec![(s as u32, 0.0)];
        let mut frontier = vec![(s, usize::MAX, 0.0f64)];
        for _ in 0..spec.window {
            let mut next = Vec::new();
            for &(u, from, d) in &frontier {
                for &(w, dw) in &adj[u] {
                    if w != from {
                        found.push((w as u32, d + dw));
                        next.push((w, u, d + dw));
                    }
                }
            }
            frontier = next;
        }
        found.sort_by_key(|p| p.0);
        nbrs.push(found);
    }
    Lattice { points, nbrs }
}

/// Minimizes `Σ d²/(2Δt)` over lattice walks from `start`. `allowed(k, node)`
/// constrains the node occupied at time step `k`; `end` fixes the final node.
fn run_dp(
    lat: &Lattice,
    start: usize,
    n_time: usize,
    dt: f64,
    allowed: &dyn Fn(usize, usize) -> bool,
    end: Option<usize>,
) -> Option<(f64, Vec<usize>)> {
    let n = lat.points.len();
    let mut cost = vec![f64::INFINITY; n];
    cost[start] = 0.0;
    let mut parent: Vec<Vec<u32>> = Vec::with_capacity(n_time);
    let inv = 0.5 / dt;
    for k in 1..=n_time {
        let mut next = vec![f64::INFINITY; n];
        let mut par = vec![u32::MAX; n];
        for j in 0..n {
            if !allowed(k, j) {
                continue;
            }
            let mut best = f64::INFINITY;
            let mut arg = u32::MAX;
            for &(i, d) in &lat.nbrs[j] {
                let c = cost[i as usize] + d * d * inv;
                if c < best {
                    best = c;
                    arg = i;
                }
            }
            next[j] = best;
            par[j] = arg;
        }
        cost = next;
        parent.push(par);
    }
    let last = match end {
        Some(e) => e,
        None => (0..n).filter(|&j| cost[j].is_finite()).min_by(|&a, &b| cost[a].total_cmp(&cost[b]))?,
    };
    if !cost[last].is_finite() {
        return None;
    }
    let mut seq = vec![last];
    let mut j = last;
    for k in (0..n_time).rev() {
        j = parent[k][j] as usize;
        seq.push(j);
    }
    seq.reverse();
    Some((cost[last], seq))
}

fn node_of(lat: &Lattice, y: &GraphPoint) -> usize {
    lat.points
        .iter()
        .position(|p| match y.at_vertex {
            Some(v) => p.at_vertex == Some(v),
            None => p.edge == y.edge && p.h == y.h,
        })
        .expect("endpoint inserted into the lattice")
}

/// Lattice step for a route of B-length `d`: `n_h` nodes along it, but at
/// least eight per time step, since a walk that must mix hops of `k` and
/// `k + 1` nodes overpays by up to `1/(4k²)`.
fn lattice_spacing(d: f64, n_time: usize, n_h: usize) -> f64 {
    d / n_h.max(8 * n_time) as f64
}

fn window_for(hops_per_step: f64) -> usize {
    ((3.0 * hops_per_step).ceil() as usize + 2).min(64)
}

/// Two-stage minimization: the first-integral solution (returned) and the
/// lattice dynamic program (reported in the diagnostics).
pub fn minimize_action(
    tables: &CoeffTables,
    graph: &ReebGraph,
    y0: &GraphPoint,
    y1: &GraphPoint,
    horizon: f64,
    n_time: usize,
    n_h: usize,
) -> Result<MinActionResult, ActionError> {
    let mut res = shoot(tables, graph, y0, y1, horizon, n_time)?;
    let d = res.diagnostics.b_length;
    if d == 0.0 || n_h == 0 {
        return Ok(res);
    }
    let prof = profiles(tables, graph)?;
    let spacing = lattice_spacing(d, n_time, n_h);
    let radius = d * (1.0 + 1e-9) + spacing;
    let origin = *y0;
    let keep = |p: &GraphPoint| b_distance(tables, graph, &prof, &origin, p) <= radius;
    let extra = [*y0, *y1];
    let lat = build_lattice(
        tables,
        graph,
        &prof,
        &LatticeSpec { spacing, window: window_for((d / spacing) / n_time as f64), extra: &extra, keep: &keep },
    );
    let (s, e) = (node_of(&lat, y0), node_of(&lat, y1));
    let dt = horizon / n_time as f64;
    if let Some((v, _)) = run_dp(&lat, s, n_time, dt, &|_, _| true, Some(e)) {
        let sv = res.diagnostics.shooting_value;
        res.diagnostics.dp_value = Some(v);
        res.diagnostics.dp_relative_gap = Some(if sv > 0.0 { (v - sv).abs() / sv } else { v });
    }
    res.diagnostics.dp_nodes = Some(lat.points.len());
    Ok(res)
}

/// B-arclength distance on the tree.
fn b_distance(tables: &CoeffTables, graph: &ReebGraph, prof: &[EdgeProfile], a: &GraphPoint, b: &GraphPoint) -> f64 {
    let legs = tree_route(graph, a, b);
    legs.iter()
        .map(|l| (prof[l.edge].sigma(tables, l.to) - prof[l.edge].sigma(tables, l.from)).abs())
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, schemars::JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum TubeMethod {
    /// The relaxed-endpoint geodesic stays inside the tube, so it is optimal.
    RelaxedShooting,
    DynamicProgram,
}

#[derive(Debug, Clone, Serialize)]
pub struct TubeInfimum {
    pub value: f64,
    pub method: TubeMethod,
    /// `min D(y₀, z)²/(2T)` over endpoints `z` within `δ` of the reference end.
    pub relaxed_value: f64,
    pub relaxed_feasible: bool,
    pub dp_value: Option<f64>,
    pub path: GraphPath,
}

/// Point reached from `y` after walking graph distance `dist` along `legs`.
fn walk(graph: &ReebGraph, legs: &[Leg], dist: f64) -> Option<GraphPoint> {
    let mut left = dist;
    for l in legs {
        let len = (l.to - l.from).abs();
        if left <= len {
            let h = l.from + left * (l.to - l.from).signum();
            return Some(GraphPoint::new(graph, l.edge, h));
        }
        left -= len;
    }
    None
}

/// `inf S` over paths from the reference start that stay within graph
/// distance `δ` of the reference at every time (the closed tube).
pub fn tube_infimum(
    tables: &CoeffTables,
    graph: &ReebGraph,
    reference: &GraphPath,
    delta: f64,
    n_time: usize,
    n_h: usize,
) -> Result<TubeInfimum, ActionError> {
    if !(delta > 0.0) {
        return Err(ActionError::InvalidInput(format!("tube radius must be positive, got {delta}")));
    }
    if reference.len() < 2 {
        return Err(ActionError::InvalidInput("reference path needs at least two samples".into()));
    }
    let horizon = reference.horizon() - reference.times[0];
    check_inputs(horizon, n_time)?;
    let y0 = reference.points[0];
    let y1 = *reference.points.last().unwrap();
    // any admissible path ends within δ of y1; the closest such end to y0
    // lies δ along the route from y1 back toward y0
    let back = tree_route(graph, &y1, &y0);
    let z = walk(graph, &back, delta).unwrap_or(y0);
    let relaxed = shoot(tables, graph, &y0, &z, horizon, n_time.max(1000))?;
    let mut relaxed_path = relaxed.path.clone();
    let t0 = reference.times[0];
    for t in relaxed_path.times.iter_mut() {
        *t += t0;
    }
    let gap = path_distance(graph, &relaxed_path, reference)?;
    let feasible = gap <= delta * (1.0 + 1e-9);
    let relaxed_value = relaxed.diagnostics.shooting_value;

    let route = tree_route(graph, &y0, &y1);
    let d_ref: f64 = leg_lengths(tables, graph, &route)?.iter().sum();
    let mut dp_value = None;
    let mut dp_path = None;
    if d_ref > 0.0 && n_h > 0 {
        let prof = profiles(tables, graph)?;
        let times = uniform_times(horizon, n_time);
        let refs: Vec<GraphPoint> = times.iter().map(|&t| reference.value_at(graph, t0 + t)).collect();
        let stride = (n_time / 200).max(1);
        let probe: Vec<GraphPoint> = refs.iter().step_by(stride).copied().chain([y1]).collect();
        let keep = |p: &GraphPoint| probe.iter().any(|r| graph_distance(graph, p, r) <= 1.5 * delta);
        let spacing = lattice_spacing(d_ref, n_time, n_h);
        let extra = [y0];
        let lat = build_lattice(
            tables,
            graph,
            &prof,
            &LatticeSpec { spacing, window: window_for((d_ref / spacing) / n_time as f64), extra: &extra, keep: &keep },
        );
        let inside: Vec<Vec<bool>> = refs
            .iter()
            .map(|r| lat.points.iter().map(|p| graph_distance(graph, p, r) <= delta * (1.0 + 1e-12)).collect())
            .collect();
        let start = node_of(&lat, &y0);
        let dt = horizon / n_time as f64;
        if let Some((v, seq)) = run_dp(&lat, start, n_time, dt, &|k, j| inside[k][j], None) {
            dp_value = Some(v);
            let pts = seq.iter().map(|&j| lat.points[j]).collect();
            dp_path = Some(GraphPath::new(times.iter().map(|t| t + t0).collect(), pts));
        }
    }
    let (value, method, path) = if feasible {
        (relaxed_value, TubeMethod::RelaxedShooting, relaxed_path)
    } else {
        match (dp_value, dp_path) {
            (Some(v), Some(p)) => (v, TubeMethod::DynamicProgram, p),
            _ => return Err(ActionError::Unreachable { vertex: graph.edge(y0.edge).v_lo }),
        }
    };
    Ok(TubeInfimum { value, method, relaxed_value, relaxed_feasible: feasible, dp_value, path })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum DepartureStatus {
    /// The start is not an exterior vertex.
    Skipped { reason: String },
    /// Departure quotients shrink under refinement.
    Satisfied,
    /// Departure quotients do not shrink: the path leaves the vertex at
    /// nonzero speed.
    Violated,
}

#[derive(Debug, Clone, Serialize)]
pub struct ZeroSpeedReport {
    pub status: DepartureStatus,
    /// `(Δt, |φ(Δt) − φ(0)| / Δt)` for each refinement.
    pub quotients: Vec<(f64, f64)>,
    /// Slope of `log quotient` against `log Δt`.
    pub exponent: Option<f64>,
    /// Action of each refinement, possibly `+∞`.
    pub actions: Vec<f64>,
}

/// Checks the shape of the departure from an exterior vertex over a
/// refinement sequence of paths with a common start.
pub fn departure_check(tables: &CoeffTables, graph: &ReebGraph, paths: &[GraphPath]) -> Result<ZeroSpeedReport, ActionError> {
    let skipped = |reason: &str| ZeroSpeedReport {
        status: DepartureStatus::Skipped { reason: reason.into() },
        quotients: Vec::new(),
        exponent: None,
        actions: Vec::new(),
    };
    let Some(first) = paths.first() else {
        return Ok(skipped("no paths"));
    };
    let y0 = first.points[0];
    let exterior = y0.at_vertex.is_some_and(|v| graph.vertex(v).edges.len() == 1)
        && matches!(super::end_kind(tables, y0.edge, y0.h), Some(EndBehaviour::Extremum { .. }));
    if !exterior {
        return Ok(skipped("path does not start at an exterior vertex"));
    }
    let mut quotients = Vec::new();
    let mut actions = Vec::new();
    for p in paths {
        if p.len() < 2 {
            return Err(ActionError::InvalidInput("paths need at least two samples".into()));
        }
        let dt = p.times[1] - p.times[0];
        quotients.push((dt, graph_distance(graph, &p.points[0], &p.points[1]) / dt));
        actions.push(evaluate_action(tables, graph, p, DEFAULT_B2_FLOOR)?.value);
    }
    let pts: Vec<(f64, f64)> = quotients.iter().filter(|q| q.1 > 0.0).map(|q| (q.0.ln(), q.1.ln())).collect();
    let exponent = (pts.len() >= 2).then(|| crate::coeffs::linear_fit(&pts).1);
    let status = match exponent {
        Some(x) if x > 0.0 => DepartureStatus::Satisfied,
        Some(_) => DepartureStatus::Violated,
        None if quotients.iter().all(|q| q.1 == 0.0) => DepartureStatus::Satisfied,
        None => DepartureStatus::Violated,
    };
    Ok(ZeroSpeedReport { status, quotients, exponent, actions })
}

/// Minimizes from `y0` to `y1` at each time resolution and checks that the
/// minimizer leaves an exterior vertex with vanishing speed.
pub fn zero_speed_at_exterior_vertex_check(
    tables: &CoeffTables,
    graph: &ReebGraph,
    y0: &GraphPoint,
    y1: &GraphPoint,
    horizon: f64,
    refinements: &[usize],
) -> Result<ZeroSpeedReport, ActionError> {
    let paths = refinements
        .iter()
        .map(|&n| shoot(tables, graph, y0, y1, horizon, n).map(|r| r.path))
        .collect::<Result<Vec<_>, _>>()?;
    departure_check(tables, graph, &paths)
}
