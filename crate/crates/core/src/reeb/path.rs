use serde::{Deserialize, Serialize};

use super::{ReebError, ReebGraph};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
pub struct GraphPoint {
    pub edge: usize,
    pub h: f64,
    /// Set when `h` equals the level of one of the edge's endpoints.
    pub at_vertex: Option<usize>,
}

impl GraphPoint {
    pub fn new(graph: &ReebGraph, edge: usize, h: f64) -> Self {
        GraphPoint { edge, h, at_vertex: graph.vertex_at(edge, h) }
    }

    /// The graph point of a vertex, carried by its lowest-numbered edge.
    pub fn at(graph: &ReebGraph, vertex: usize) -> Self {
        let v = graph.vertex(vertex);
        GraphPoint { edge: v.edges[0], h: v.h(), at_vertex: Some(vertex) }
    }
}

/// A path on Γ sampled on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
pub struct GraphPath {
    pub times: Vec<f64>,
    pub points: Vec<GraphPoint>,
}

impl GraphPath {
    pub fn new(times: Vec<f64>, points: Vec<GraphPoint>) -> Self {
        assert_eq!(times.len(), points.len());
        GraphPath { times, points }
    }

    /// Uniform grid `t_m = m·T/M`, `m = 0..=M`, on a single edge.
    pub fn on_edge(graph: &ReebGraph, edge: usize, horizon: f64, hs: &[f64]) -> Self {
        let m = hs.len() - 1;
        let times = (0..=m).map(|k| horizon * k as f64 / m as f64).collect();
        let points = hs.iter().map(|&h| GraphPoint::new(graph, edge, h)).collect();
        GraphPath { times, points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    /// Checks graph continuity: neighbouring samples share an edge or meet at
    /// a common vertex whose level lies between their values. Returns the
    /// first offending index.
    pub fn continuity_violation(&self, graph: &ReebGraph) -> Option<usize> {
        self.points.windows(2).position(|w| !joined(graph, &w[0], &w[1]))
    }

    /// Position at time `t` by linear interpolation in `h`; between samples on
    /// different edges the path runs through their common vertex with time
    /// split in proportion to the two `|ΔH|` legs.
    pub fn value_at(&self, graph: &ReebGraph, t: f64) -> GraphPoint {
        let m = self.times.partition_point(|&s| s <= t);
        if m == 0 {
            return self.points[0];
        }
        if m >= self.times.len() {
            return *self.points.last().unwrap();
        }
        let (t0, t1) = (self.times[m - 1], self.times[m]);
        let (a, b) = (self.points[m - 1], self.points[m]);
        let s = if t1 > t0 { (t - t0) / (t1 - t0) } else { 1.0 };
        if a.edge == b.edge {
            return GraphPoint::new(graph, a.edge, a.h + s * (b.h - a.h));
        }
        match graph.common_vertex(a.edge, b.edge) {
            Some(v) => {
                let l = graph.vertex(v).h();
                let (da, db) = ((l - a.h).abs(), (b.h - l).abs());
                let tot = da + db;
                let f = if tot > 0.0 { da / tot } else { 0.5 };
                if s <= f {
                    let r = if f > 0.0 { s / f } else { 1.0 };
                    GraphPoint::new(graph, a.edge, a.h + r * (l - a.h))
                } else {
                    let r = (s - f) / (1.0 - f);
                    GraphPoint::new(graph, b.edge, l + r * (b.h - l))
                }
            }
            None => {
                if s < 0.5 {
                    a
                } else {
                    b
                }
            }
        }
    }

    /// Resamples onto another time grid.
    pub fn resample(&self, graph: &ReebGraph, times: &[f64]) -> GraphPath {
        GraphPath {
            times: times.to_vec(),
            points: times.iter().map(|&t| self.value_at(graph, t)).collect(),
        }
    }
}

fn joined(graph: &ReebGraph, a: &GraphPoint, b: &GraphPoint) -> bool {
    if a.edge == b.edge {
        return true;
    }
    match graph.common_vertex(a.edge, b.edge) {
        Some(v) => {
            let l = graph.vertex(v).h();
            let (lo, hi) = if a.h <= b.h { (a.h, b.h) } else { (b.h, a.h) };
            lo <= l && l <= hi
        }
        None => false,
    }
}

/// Length of the shortest path on Γ, each edge segment costing its `|ΔH|`.
pub fn graph_distance(graph: &ReebGraph, y1: &GraphPoint, y2: &GraphPoint) -> f64 {
    let mut best = if y1.edge == y2.edge { (y1.h - y2.h).abs() } else { f64::INFINITY };
    let e1 = graph.edge(y1.edge);
    let e2 = graph.edge(y2.edge);
    for a in [Some(e1.v_lo), e1.v_hi].into_iter().flatten() {
        let la = graph.vertex(a).h();
        for b in [Some(e2.v_lo), e2.v_hi].into_iter().flatten() {
            let lb = graph.vertex(b).h();
            let d = (y1.h - la).abs() + graph.vertex_distance(a, b) + (lb - y2.h).abs();
            best = best.min(d);
        }
    }
    best
}

/// `ρ_{0,T}`: sup over the common time grid of the graph distance. Grids with
/// equal horizons but different nodes are reconciled by resampling `p2`.
pub fn path_distance(graph: &ReebGraph, p1: &GraphPath, p2: &GraphPath) -> Result<f64, ReebError> {
    if p1.is_empty() || p2.is_empty() {
        return Err(ReebError::GridMismatch);
    }
    let (h1, h2) = (p1.horizon(), p2.horizon());
    if (h1 - h2).abs() > 1e-12 * h1.abs().max(1.0) || p1.times[0] != p2.times[0] {
        return Err(ReebError::GridMismatch);
    }
    let same = p1.times == p2.times;
    let owned;
    let q = if same {
        p2
    } else {
        owned = p2.resample(graph, &p1.times);
        &owned
    };
    Ok(p1
        .points
        .iter()
        .zip(&q.points)
        .map(|(a, b)| graph_distance(graph, a, b))
        .fold(0.0, f64::max))
}
