//! Reeb graph of a planar Morse Hamiltonian, the projection `Y: ℝ² → Γ`, the
//! graph metric `r` and the uniform path metric `ρ_{0,T}`.
//!
//! Points on the graph are coordinatized as `(edge id, H value)`. The graph is a
//! tree whose single unbounded edge sits above the highest critical level; it is
//! truncated at `h_max`, the smallest value of `H` on the working box boundary.

mod build;
mod path;
mod project;

pub use build::{build_reeb_graph, DEFAULT_GRID};
pub use path::{graph_distance, path_distance, GraphPath, GraphPoint};
pub use project::{project, project_trajectory, Tracker, RESYNC_EVERY};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{CriticalKind, CriticalPoint, Rect};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReebError {
    #[error("saddles at ({0:.6}, {1:.6}) and ({2:.6}, {3:.6}) share the level {4}")]
    EqualSaddleLevels(f64, f64, f64, f64, f64),
    #[error("ambiguous wiring: {0}")]
    AmbiguousWiring(String),
    #[error("no critical points inside the box")]
    NoCriticalPoints,
    #[error("point ({x}, {y}) lies outside the working box")]
    OutsideBox { x: f64, y: f64 },
    #[error("trajectory jumps between non-adjacent edges {from} and {to} at step {step}")]
    ContinuityBreak { step: usize, from: usize, to: usize },
    #[error("paths live on different time grids")]
    GridMismatch,
    #[error("gradient line from ({x}, {y}) did not reach an extremum")]
    LostGradientLine { x: f64, y: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum VertexRole {
    /// Saddle: three incident edges.
    Interior,
    /// Extremum: one incident edge.
    Exterior,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Vertex {
    pub id: usize,
    pub critical: CriticalPoint,
    pub role: VertexRole,
    pub edges: Vec<usize>,
}

impl Vertex {
    pub fn h(&self) -> f64 {
        self.critical.h_value
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Edge {
    pub id: usize,
    pub v_lo: usize,
    /// `None` for the unbounded top edge.
    pub v_hi: Option<usize>,
    pub h_lo: f64,
    /// `+∞` for the unbounded top edge.
    pub h_hi: f64,
}

impl Edge {
    pub fn is_unbounded(&self) -> bool {
        self.v_hi.is_none()
    }

    pub fn has_vertex(&self, v: usize) -> bool {
        self.v_lo == v || self.v_hi == Some(v)
    }
}

/// Per-node edge labels from the build grid, used to skip gradient-line
/// tracing when the surrounding nodes agree.
#[derive(Debug, Clone)]
pub(crate) struct Locator {
    pub grid: crate::grid::NodeGrid,
    pub labels: Vec<u32>,
}

#[derive(Debug, Clone)]
pub struct ReebGraph {
    pub vertices: Vec<Vertex>,
    pub edges: Vec<Edge>,
    /// Truncation level of the unbounded edge.
    pub h_max: f64,
    pub bbox: Rect,
    /// All-pairs vertex distances along the tree (sum of |ΔH| over edges).
    vdist: Vec<Vec<f64>>,
    /// Distinct critical levels, ascending.
    levels: Vec<f64>,
    pub(crate) locator: Option<Locator>,
}

impl ReebGraph {
    pub fn vertex(&self, v: usize) -> &Vertex {
        &self.vertices[v]
    }

    pub fn edge(&self, e: usize) -> &Edge {
        &self.edges[e]
    }

    pub fn top_edge(&self) -> usize {
        self.edges.iter().position(Edge::is_unbounded).expect("graph has an unbounded edge")
    }

    /// `[h_lo, h_hi]` with the unbounded edge truncated at `h_max`.
    pub fn span(&self, e: usize) -> (f64, f64) {
        let ed = &self.edges[e];
        (ed.h_lo, if ed.is_unbounded() { self.h_max } else { ed.h_hi })
    }

    /// Closed-range membership; the unbounded edge is open above.
    pub fn covers(&self, e: usize, h: f64) -> bool {
        let ed = &self.edges[e];
        h >= ed.h_lo && h <= ed.h_hi
    }

    pub fn edges_covering(&self, h: f64) -> impl Iterator<Item = usize> + '_ {
        (0..self.edges.len()).filter(move |&e| self.covers(e, h))
    }

    /// Endpoint vertex of `e` sitting exactly at level `h`, if any.
    pub fn vertex_at(&self, e: usize, h: f64) -> Option<usize> {
        let ed = &self.edges[e];
        if h == ed.h_lo {
            Some(ed.v_lo)
        } else if h == ed.h_hi {
            ed.v_hi
        } else {
            None
        }
    }

    /// Vertex shared by two distinct edges.
    pub fn common_vertex(&self, a: usize, b: usize) -> Option<usize> {
        let ea = &self.edges[a];
        let eb = &self.edges[b];
        [Some(ea.v_lo), ea.v_hi].into_iter().flatten().find(|&v| eb.has_vertex(v))
    }

    pub fn vertex_distance(&self, a: usize, b: usize) -> f64 {
        self.vdist[a][b]
    }

    pub fn critical_levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn export(&self) -> GraphExport {
        GraphExport {
            vertices: self
                .vertices
                .iter()
                .map(|v| ExportVertex {
                    id: v.id,
                    x: v.critical.location[0],
                    y: v.critical.location[1],
                    h: v.h(),
                    kind: v.critical.kind,
                    role: v.role,
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|e| ExportEdge {
                    id: e.id,
                    h_lo: e.h_lo,
                    h_hi: if e.is_unbounded() { self.h_max } else { e.h_hi },
                    v_lo: e.v_lo,
                    v_hi: e.v_hi,
                    unbounded: e.is_unbounded(),
                })
                .collect(),
            h_max: self.h_max,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, schemars::JsonSchema)]
pub struct ExportVertex {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    pub h: f64,
    #[schemars(with = "String")]
    pub kind: CriticalKind,
    #[schemars(with = "String")]
    pub role: VertexRole,
}

#[derive(Debug, Clone, Serialize, Deserialize, schemars::JsonSchema)]
pub struct ExportEdge {
    pub id: usize,
    pub h_lo: f64,
    /// Truncated at `h_max` for the unbounded edge.
    pub h_hi: f64,
    pub v_lo: usize,
    pub v_hi: Option<usize>,
    pub unbounded: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, schemars::JsonSchema)]
pub struct GraphExport {
    pub vertices: Vec<ExportVertex>,
    pub edges: Vec<ExportEdge>,
    pub h_max: f64,
}
