//! Rotation time `T_i(H)` and averaged diffusion `B_i²(H)` on the edges of the
//! Reeb graph: level-curve tracing, line-integral quadrature and per-edge
//! tables with monotone interpolation.

mod pchip;
mod trace;

pub use pchip::Pchip;
pub use trace::{compute_coeffs, coeffs_by_flow, seed_point, trace_from, trace_level_curve, Polyline};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::field::{CriticalKind, HamiltonianSystem};
use crate::reeb::ReebGraph;

pub const DEFAULT_GUARD: f64 = 1e-4;
pub const DEFAULT_TRACE_TOL: f64 = 1e-11;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoeffError {
    #[error("level {h} on edge {edge} lies inside the guard band of a vertex")]
    GuardBand { edge: usize, h: f64 },
    #[error("level curve at H = {h} did not close")]
    NoClosure { h: f64 },
    #[error("|∇H| vanishes on the curve near ({x}, {y})")]
    DegenerateCurve { x: f64, y: f64 },
    #[error("no starting point found on edge {edge} at H = {h}")]
    NoSeed { edge: usize, h: f64 },
    #[error("H = {h} is outside the span [{lo}, {hi}] of edge {edge}")]
    OutOfSpan { edge: usize, h: f64, lo: f64, hi: f64 },
    #[error("no table for edge {0}")]
    UncoveredEdge(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Coeffs {
    pub t: f64,
    pub b2: f64,
}

/// How `T` behaves at one end of an edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum EndBehaviour {
    /// Extremum vertex: `T` tends to `2π/√det Hess`.
    Extremum { t_limit: f64 },
    /// Saddle vertex: `T ≈ a + b·|log|h − h_s||`, fitted on the last decade.
    Saddle { a: f64, b: f64, r2: f64 },
    /// Truncation of the unbounded edge.
    Open,
}

#[derive(Debug, Clone, Serialize)]
pub struct EdgeCoefficientTable {
    pub edge_id: usize,
    /// Traced energies, strictly inside the edge span.
    pub h_grid: Vec<f64>,
    pub t_values: Vec<f64>,
    pub b2_values: Vec<f64>,
    pub lo: f64,
    pub hi: f64,
    pub lo_end: EndBehaviour,
    pub hi_end: EndBehaviour,
    /// Largest difference quotient of `T·B²` over the middle 80% of the span.
    pub lipschitz_tb2: f64,
    #[serde(skip)]
    t_interp: Pchip,
    #[serde(skip)]
    b2_interp: Pchip,
    lo_is_vertex: bool,
    hi_is_vertex: bool,
}

impl EdgeCoefficientTable {
    pub fn span(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }
}

/// Energies for one edge: a uniform layer plus geometric ladders (four points
/// per decade) from `guard` out to a quarter of the span at each vertex end.
fn energy_grid(lo: f64, hi: f64, n_interior: usize, guard: f64, lo_vertex: bool, hi_vertex: bool) -> Vec<f64> {
    let w = hi - lo;
    let mut hs: Vec<f64> = (1..=n_interior).map(|k| lo + w * k as f64 / (n_interior + 1) as f64).collect();
    if !hi_vertex {
        hs.push(hi);
    }
    let ratio = 10f64.powf(0.25);
    let mut d = guard;
    while d < 0.25 * w {
        if lo_vertex {
            hs.push(lo + d);
        }
        if hi_vertex {
            hs.push(hi - d);
        }
        d *= ratio;
    }
    hs.sort_by(f64::total_cmp);
    hs.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * w);
    hs
}

/// Traces and integrates `n_interior` uniform levels plus vertex ladders.
pub fn tabulate_edge(
    sys: &HamiltonianSystem,
    graph: &ReebGraph,
    edge_id: usize,
    n_interior: usize,
    guard: f64,
) -> Result<EdgeCoefficientTable, CoeffError> {
    let n_interior = n_interior.max(16);
    let ed = graph.edge(edge_id);
    let (lo, hi) = graph.span(edge_id);
    let hi_vertex = !ed.is_unbounded();
    let hs = energy_grid(lo, hi, n_interior, guard, true, hi_vertex);
    let tol = DEFAULT_TRACE_TOL;
    let vals: Vec<Coeffs> = hs
        .par_iter()
        .map(|&h| {
            let line = trace_level_curve(sys, graph, edge_id, h, guard.min(tol.max(1e-12)))?;
            compute_coeffs(sys, &line)
        })
        .collect::<Result<_, _>>()?;
    let t_values: Vec<f64> = vals.iter().map(|c| c.t).collect();
    let b2_values: Vec<f64> = vals.iter().map(|c| c.b2).collect();

    let end = |v: usize| {
        let c = graph.vertex(v).critical;
        match c.kind {
            CriticalKind::Saddle => {
                let (a, b, r2) = log_fit(&hs, &t_values, c.h_value, guard);
                EndBehaviour::Saddle { a, b, r2 }
            }
            _ => {
                let [p, q] = c.hess_eigenvalues;
                EndBehaviour::Extremum { t_limit: std::f64::consts::TAU / (p * q).sqrt() }
            }
        }
    };
    let lo_end = end(ed.v_lo);
    let hi_end = ed.v_hi.map_or(EndBehaviour::Open, end);

    // b2 vanishes linearly at an extremum; saddle ends are handled in lookup
    let is_saddle = |e: EndBehaviour| matches!(e, EndBehaviour::Saddle { .. });
    let mut bx = hs.clone();
    let mut by = b2_values.clone();
    if !is_saddle(lo_end) {
        bx.insert(0, lo);
        by.insert(0, 0.0);
    }
    if hi_vertex && !is_saddle(hi_end) {
        bx.push(hi);
        by.push(0.0);
    }
    let mut tx = hs.clone();
    let mut ty = t_values.clone();
    if let EndBehaviour::Extremum { t_limit } = lo_end {
        tx.insert(0, lo);
        ty.insert(0, t_limit);
    }
    if let EndBehaviour::Extremum { t_limit } = hi_end {
        tx.push(hi);
        ty.push(t_limit);
    }

    let (m_lo, m_hi) = (lo + 0.1 * (hi - lo), hi - 0.1 * (hi - lo));
    let mid: Vec<usize> = (0..hs.len()).filter(|&k| hs[k] >= m_lo && hs[k] <= m_hi).collect();
    let lipschitz_tb2 = mid
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            ((t_values[b] * b2_values[b] - t_values[a] * b2_values[a]) / (hs[b] - hs[a])).abs()
        })
        .fold(0.0, f64::max);

    Ok(EdgeCoefficientTable {
        edge_id,
        h_grid: hs,
        t_values,
        b2_values,
        lo,
        hi,
        lo_end,
        hi_end,
        lipschitz_tb2,
        t_interp: Pchip::new(tx, ty),
        b2_interp: Pchip::new(bx, by),
        lo_is_vertex: true,
        hi_is_vertex: hi_vertex,
    })
}

/// Least-squares fit of `T ≈ a + b·|log|h − h_s||` over the grid points within
/// ten guard widths of the saddle level. Returns `(a, b, R²)`.
fn log_fit(hs: &[f64], ts: &[f64], hsad: f64, guard: f64) -> (f64, f64, f64) {
    let pts: Vec<(f64, f64)> = hs
        .iter()
        .zip(ts)
        .filter(|(h, _)| {
            let d = (*h - hsad).abs();
            d > 0.0 && d <= 10.0 * guard * (1.0 + 1e-9)
        })
        .map(|(h, t)| ((*h - hsad).abs().ln().abs(), *t))
        .collect();
    linear_fit(&pts)
}

/// Ordinary least squares `y ≈ a + b x`; returns `(a, b, R²)`.
pub fn linear_fit(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    (a, b, r2)
}

/// Interpolated `{T, B²}` at `h`. At a vertex level `B² = 0` and `T` is the
/// extremum limit (or `+∞` at a saddle).
pub fn coeff_lookup(table: &EdgeCoefficientTable, h: f64) -> Result<Coeffs, CoeffError> {
    if !(h >= table.lo && h <= table.hi) {
        return Err(CoeffError::OutOfSpan { edge: table.edge_id, h, lo: table.lo, hi: table.hi });
    }
    let at_lo = table.lo_is_vertex && h == table.lo;
    let at_hi = table.hi_is_vertex && h == table.hi;
    let first = table.h_grid[0];
    let last = *table.h_grid.last().unwrap();
    let b2 = if at_lo || at_hi {
        0.0
    } else if h < first {
        saddle_b2(table.lo_end, table.lo, first, table.b2_values[0], h).unwrap_or_else(|| table.b2_interp.eval(h))
    } else if h > last {
        let n = table.h_grid.len() - 1;
        saddle_b2(table.hi_end, table.hi, last, table.b2_values[n], h).unwrap_or_else(|| table.b2_interp.eval(h))
    } else {
        table.b2_interp.eval(h)
    };
    let t = if h < first {
        end_t(table.lo_end, h, table.lo, &table.t_interp)
    } else if h > last {
        end_t(table.hi_end, h, table.hi, &table.t_interp)
    } else {
        table.t_interp.eval(h)
    };
    Ok(Coeffs { t, b2 })
}

/// Between a saddle level and the nearest traced energy the orbit integral
/// `T·B²` stays bounded while `T` diverges logarithmically, so `B²` is carried
/// as `B²(node)·T(node)/T(h)` with `T` from the end fit.
fn saddle_b2(end: EndBehaviour, level: f64, node: f64, b2_node: f64, h: f64) -> Option<f64> {
    let EndBehaviour::Saddle { a, b, .. } = end else {
        return None;
    };
    let fit = |x: f64| a + b * (x - level).abs().ln().abs();
    let (tn, th) = (fit(node), fit(h));
    (tn.is_finite() && th > 0.0 && tn > 0.0).then(|| b2_node * tn / th)
}

fn end_t(end: EndBehaviour, h: f64, level: f64, interp: &Pchip) -> f64 {
    match end {
        EndBehaviour::Saddle { a, b, .. } => {
            let d = (h - level).abs();
            if d == 0.0 {
                f64::INFINITY
            } else {
                a + b * d.ln().abs()
            }
        }
        _ => interp.eval(h),
    }
}

/// Tables for every edge of a graph.
#[derive(Debug, Clone, Serialize)]
pub struct CoeffTables {
    pub tables: Vec<EdgeCoefficientTable>,
}

impl CoeffTables {
    pub fn build(sys: &HamiltonianSystem, graph: &ReebGraph, n_interior: usize, guard: f64) -> Result<Self, CoeffError> {
        let tables = (0..graph.edges.len())
            .map(|e| tabulate_edge(sys, graph, e, n_interior, guard))
            .collect::<Result<_, _>>()?;
        Ok(CoeffTables { tables })
    }

    pub fn get(&self, edge: usize) -> Result<&EdgeCoefficientTable, CoeffError> {
        self.tables.iter().find(|t| t.edge_id == edge).ok_or(CoeffError::UncoveredEdge(edge))
    }

    pub fn lookup(&self, edge: usize, h: f64) -> Result<Coeffs, CoeffError> {
        coeff_lookup(self.get(edge)?, h)
    }

    pub fn b2(&self, edge: usize, h: f64) -> Result<f64, CoeffError> {
        Ok(self.lookup(edge, h)?.b2)
    }

    /// Smallest tabulated rotation time over all edges.
    pub fn t_min(&self) -> f64 {
        self.tables
            .iter()
            .flat_map(|t| t.t_values.iter().copied())
            .fold(f64::INFINITY, f64::min)
    }
}
