//! Line integrals of `1/B²` and `1/B` along one edge, with the vertex ends
//! treated by substitution: `B²` vanishes linearly at an extremum and like
//! `1/|log|h − h_s||` at a saddle.

use crate::coeffs::{coeff_lookup, CoeffTables, EdgeCoefficientTable, EndBehaviour};
use crate::quad::{gl8, gl8_composite};

use super::ActionError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weight {
    /// `1/B²`
    InvB2,
    /// `1/B`
    InvB,
}

impl Weight {
    #[inline]
    fn apply(self, b2: f64) -> f64 {
        if b2 <= 0.0 {
            return f64::INFINITY;
        }
        match self {
            Weight::InvB2 => 1.0 / b2,
            Weight::InvB => 1.0 / b2.sqrt(),
        }
    }
}

fn f(table: &EdgeCoefficientTable, w: Weight, h: f64) -> f64 {
    w.apply(coeff_lookup(table, h.clamp(table.lo, table.hi)).map_or(0.0, |c| c.b2))
}

/// `∫_p^q` over a piece that touches or approaches the vertex level `level`
/// (`p` is the end nearer the vertex, `q` the far end; either order).
fn end_piece(table: &EdgeCoefficientTable, w: Weight, end: EndBehaviour, level: f64, near: f64, far: f64) -> f64 {
    let span = far - level;
    if near == level {
        if w == Weight::InvB2 && matches!(end, EndBehaviour::Extremum { .. }) {
            return f64::INFINITY;
        }
        // h = level + span·u² removes the square-root singularity
        return gl8_composite(0.0, 1.0, 0.25, |u| {
            if u == 0.0 {
                return 0.0;
            }
            let v = f(table, w, level + span * u * u) * 2.0 * span.abs() * u;
            if v.is_finite() {
                v
            } else {
                0.0
            }
        });
    }
    // h = level + span·e^{−s} spreads the approach to the vertex evenly
    let s_max = (span / (near - level)).ln();
    gl8_composite(0.0, s_max, 0.5, |s| {
        let d = span * (-s).exp();
        f(table, w, level + d) * d.abs()
    })
}

/// `∫_a^b w(B²(h)) dh` on one edge, for `a ≤ b` inside its span.
pub fn edge_integral_sorted(table: &EdgeCoefficientTable, w: Weight, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let grid = &table.h_grid;
    let first = grid[0];
    let last = *grid.last().unwrap();
    let lo_vertex = !matches!(table.lo_end, EndBehaviour::Open);
    let hi_vertex = !matches!(table.hi_end, EndBehaviour::Open);
    let mut total = 0.0;
    let mut breaks = vec![a];
    let i0 = grid.partition_point(|&x| x <= a);
    let i1 = grid.partition_point(|&x| x < b);
    breaks.extend_from_slice(&grid[i0..i1]);
    breaks.push(b);
    for win in breaks.windows(2) {
        let (p, q) = (win[0], win[1]);
        if q <= p {
            continue;
        }
        let v = if lo_vertex && q <= first {
            end_piece(table, w, table.lo_end, table.lo, p, q)
        } else if hi_vertex && p >= last {
            end_piece(table, w, table.hi_end, table.hi, q, p)
        } else {
            let m = 0.5 * (p + q);
            gl8(p, m, |h| f(table, w, h)) + gl8(m, q, |h| f(table, w, h))
        };
        total += v;
    }
    total
}

/// Signed `∫_a^b w(B²(h)) dh` on edge `edge`.
pub fn edge_integral(tables: &CoeffTables, edge: usize, w: Weight, a: f64, b: f64) -> Result<f64, ActionError> {
    let table = tables.get(edge).map_err(|_| ActionError::UncoveredEdge(edge))?;
    let tol = 1e-12 * (1.0 + table.hi.abs().max(table.lo.abs()));
    for h in [a, b] {
        if h < table.lo - tol || h > table.hi + tol {
            return Err(ActionError::OutOfSpan { edge, h });
        }
    }
    let (a, b) = (a.clamp(table.lo, table.hi), b.clamp(table.lo, table.hi));
    Ok(if a <= b { edge_integral_sorted(table, w, a, b) } else { -edge_integral_sorted(table, w, b, a) })
}

/// Cumulative `σ(h) = ∫_{lo}^h dh/B` on one edge and its inverse.
#[derive(Debug, Clone)]
pub struct EdgeProfile {
    pub edge: usize,
    pub lo: f64,
    pub hi: f64,
    breaks: Vec<f64>,
    cum: Vec<f64>,
}

impl EdgeProfile {
    pub fn new(tables: &CoeffTables, edge: usize) -> Result<Self, ActionError> {
        let table = tables.get(edge).map_err(|_| ActionError::UncoveredEdge(edge))?;
        let mut breaks = vec![table.lo];
        breaks.extend(table.h_grid.iter().copied().filter(|&h| h > table.lo && h < table.hi));
        breaks.push(table.hi);
        let mut cum = vec![0.0];
        for w in breaks.windows(2) {
            let v = edge_integral_sorted(table, Weight::InvB, w[0], w[1]);
            cum.push(cum.last().unwrap() + v);
        }
        Ok(EdgeProfile { edge, lo: table.lo, hi: table.hi, breaks, cum })
    }

    /// Total B-length of the edge (truncated at `h_max` for the top edge).
    pub fn length(&self) -> f64 {
        *self.cum.last().unwrap()
    }

    pub fn sigma(&self, tables: &CoeffTables, h: f64) -> f64 {
        let table = tables.get(self.edge).expect("profile built from these tables");
        let h = h.clamp(self.lo, self.hi);
        let i = self.breaks.partition_point(|&x| x <= h).clamp(1, self.breaks.len() - 1) - 1;
        self.cum[i] + edge_integral_sorted(table, Weight::InvB, self.breaks[i], h)
    }

    /// `h` with `σ(h) = s`, by bisection inside the bracketing piece.
    pub fn h_at(&self, tables: &CoeffTables, s: f64) -> f64 {
        if s <= 0.0 {
            return self.lo;
        }
        if s >= self.length() {
            return self.hi;
        }
        let table = tables.get(self.edge).expect("profile built from these tables");
        let i = self.cum.partition_point(|&c| c <= s).clamp(1, self.cum.len() - 1) - 1;
        let (mut a, mut b) = (self.breaks[i], self.breaks[i + 1]);
        let target = s - self.cum[i];
        let base = self.breaks[i];
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            if edge_integral_sorted(table, Weight::InvB, base, m) < target {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }
}
