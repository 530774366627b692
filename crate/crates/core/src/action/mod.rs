//! The action functional `S(φ) = ½ ∫ φ̇² / B²(φ) dt` on Reeb-graph paths and
//! minimum-action paths between graph points.

mod integrals;
mod minimize;

pub use integrals::{edge_integral, EdgeProfile, Weight};
pub use minimize::{
    departure_check, minimize_action, shoot, tree_route, tube_infimum, zero_speed_at_exterior_vertex_check, DepartureStatus,
    Leg, MinActionDiagnostics, MinActionResult, TubeInfimum, TubeMethod, ZeroSpeedReport,
};

use serde::Serialize;
use thiserror::Error;

use crate::coeffs::{CoeffTables, EndBehaviour};
use crate::reeb::{GraphPath, GraphPoint, ReebError, ReebGraph};

/// Cells moving where the interpolated `B²` is at or below this are infinite.
pub const DEFAULT_B2_FLOOR: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ActionError {
    #[error("no coefficient table covers edge {0}")]
    UncoveredEdge(usize),
    #[error("H = {h} lies outside the span of edge {edge}")]
    OutOfSpan { edge: usize, h: f64 },
    #[error("samples {index} and {} are not joined on the graph", index + 1)]
    Discontinuous { index: usize },
    #[error("every route passes vertex {vertex} through a span with vanishing diffusion")]
    Unreachable { vertex: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Graph(#[from] ReebError),
}

#[derive(Debug, Clone, Serialize, schemars::JsonSchema)]
pub struct ActionValue {
    /// `+∞` when some cell moves through vanishing diffusion.
    pub value: f64,
    /// Cost of each grid cell; `value` is their sum.
    pub breakdown: Vec<f64>,
    /// Time spent sitting at a vertex level.
    pub vertex_dwell: f64,
    pub infinite_cells: usize,
    /// Cells whose segment passes through or touches a saddle level while
    /// moving. Many of these make the value depend on grid alignment.
    pub vertex_crossings: usize,
}

impl ActionValue {
    fn from_breakdown(breakdown: Vec<f64>, vertex_dwell: f64, vertex_crossings: usize) -> Self {
        let infinite_cells = breakdown.iter().filter(|c| c.is_infinite()).count();
        let value = breakdown.iter().sum();
        ActionValue { value, breakdown, vertex_dwell, infinite_cells, vertex_crossings }
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }
}

/// One monotone piece of a cell: `h` runs from `from` to `to` on `edge`.
#[derive(Debug, Clone, Copy)]
struct Piece {
    edge: usize,
    from: f64,
    to: f64,
}

fn cell_pieces(graph: &ReebGraph, k: usize, a: &GraphPoint, b: &GraphPoint) -> Result<(Piece, Option<Piece>), ActionError> {
    if a.edge == b.edge {
        return Ok((Piece { edge: a.edge, from: a.h, to: b.h }, None));
    }
    let v = graph.common_vertex(a.edge, b.edge).ok_or(ActionError::Discontinuous { index: k })?;
    let l = graph.vertex(v).h();
    Ok((Piece { edge: a.edge, from: a.h, to: l }, Some(Piece { edge: b.edge, from: l, to: b.h })))
}

fn at_vertex_level(graph: &ReebGraph, edge: usize, h: f64) -> bool {
    graph.vertex_at(edge, h).is_some()
}

/// Evaluates `S` on a sampled path with the piecewise-linear interpolant
/// between samples (crossing a vertex at the constant speed that
/// [`GraphPath::value_at`] uses).
///
/// A cell at rest costs nothing, at a vertex level included. A moving cell
/// costs `½ |Δh/Δt| ∫ dh/B²` over the `h` range it sweeps; this is infinite
/// when it leaves or reaches an extremum level at nonzero speed, and the
/// cell is also declared infinite when `B² ≤ b2_floor` at one of its ends away
/// from a vertex.
pub fn evaluate_action(tables: &CoeffTables, graph: &ReebGraph, path: &GraphPath, b2_floor: f64) -> Result<ActionValue, ActionError> {
    let n = path.len();
    let mut breakdown = Vec::with_capacity(n.saturating_sub(1));
    let mut dwell = 0.0;
    let mut crossings = 0;
    for k in 0..n.saturating_sub(1) {
        let (a, b) = (&path.points[k], &path.points[k + 1]);
        let dt = path.times[k + 1] - path.times[k];
        let (p1, p2) = cell_pieces(graph, k, a, b)?;
        let pieces: Vec<Piece> = std::iter::once(p1).chain(p2).collect();
        let travel: f64 = pieces.iter().map(|p| (p.to - p.from).abs()).sum();
        if travel == 0.0 {
            if at_vertex_level(graph, a.edge, a.h) {
                dwell += dt;
            }
            breakdown.push(0.0);
            continue;
        }
        if !(dt > 0.0) {
            breakdown.push(f64::INFINITY);
            continue;
        }
        let mut floor_hit = false;
        let mut touches_saddle = false;
        for p in &pieces {
            for h in [p.from, p.to] {
                match graph.vertex_at(p.edge, h) {
                    Some(v) => {
                        if graph.vertex(v).edges.len() == 3 {
                            touches_saddle = true;
                        }
                    }
                    None => {
                        let b2 = tables.b2(p.edge, h).map_err(|_| ActionError::UncoveredEdge(p.edge))?;
                        floor_hit |= b2 <= b2_floor;
                    }
                }
            }
        }
        if touches_saddle {
            crossings += 1;
        }
        if floor_hit {
            breakdown.push(f64::INFINITY);
            continue;
        }
        let speed = travel / dt;
        let mut sweep = 0.0;
        for p in &pieces {
            sweep += edge_integral(tables, p.edge, Weight::InvB2, p.from, p.to)?.abs();
        }
        breakdown.push(0.5 * speed * sweep);
    }
    Ok(ActionValue::from_breakdown(breakdown, dwell, crossings))
}

/// `½ (Δh/Δt)² / B²` at cell midpoints, skipping cells at rest or touching a
/// vertex level. Constant along first-integral solutions.
pub fn lagrangian_profile(tables: &CoeffTables, path: &GraphPath) -> Result<Vec<f64>, ActionError> {
    let mut out = Vec::new();
    for k in 0..path.len().saturating_sub(1) {
        let (a, b) = (&path.points[k], &path.points[k + 1]);
        if a.edge != b.edge || a.h == b.h || a.at_vertex.is_some() || b.at_vertex.is_some() {
            continue;
        }
        let dt = path.times[k + 1] - path.times[k];
        let b2 = tables.b2(a.edge, 0.5 * (a.h + b.h)).map_err(|_| ActionError::UncoveredEdge(a.edge))?;
        let v = (b.h - a.h) / dt;
        out.push(0.5 * v * v / b2);
    }
    Ok(out)
}

/// Kind of the vertex at the end of `edge` lying at level `h`, if any.
pub(crate) fn end_kind(tables: &CoeffTables, edge: usize, h: f64) -> Option<EndBehaviour> {
    let t = tables.get(edge).ok()?;
    if h == t.lo {
        Some(t.lo_end)
    } else if h == t.hi {
        Some(t.hi_end)
    } else {
        None
    }
}
