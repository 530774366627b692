//! Bivariate polynomials with exact symbolic differentiation.

use serde::{Deserialize, Serialize};

/// Sparse polynomial `Σ c · x^i · y^j` stored as `(i, j, c)` triples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Poly2 {
    terms: Vec<(u32, u32, f64)>,
}

impl Poly2 {
    pub fn new(terms: impl IntoIterator<Item = (u32, u32, f64)>) -> Self {
        let mut out: Vec<(u32, u32, f64)> = Vec::new();
        for (i, j, c) in terms {
            if c == 0.0 {
                continue;
            }
            match out.iter_mut().find(|t| t.0 == i && t.1 == j) {
                Some(t) => t.2 += c,
                None => out.push((i, j, c)),
            }
        }
        out.retain(|t| t.2 != 0.0);
        out.sort_by(|a, b| (a.0 + a.1, a.0).cmp(&(b.0 + b.1, b.0)));
        Poly2 { terms: out }
    }

    pub fn constant(c: f64) -> Self {
        Self::new([(0, 0, c)])
    }

    pub fn terms(&self) -> &[(u32, u32, f64)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|t| t.0 + t.1).max().unwrap_or(0)
    }

    #[inline]
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let mut acc = 0.0;
        for &(i, j, c) in &self.terms {
            acc += c * ipow(x, i) * ipow(y, j);
        }
        acc
    }

    pub fn dx(&self) -> Self {
        Self::new(
            self.terms
                .iter()
                .filter(|t| t.0 > 0)
                .map(|&(i, j, c)| (i - 1, j, c * i as f64)),
        )
    }

    pub fn dy(&self) -> Self {
        Self::new(
            self.terms
                .iter()
                .filter(|t| t.1 > 0)
                .map(|&(i, j, c)| (i, j - 1, c * j as f64)),
        )
    }
}

#[inline]
fn ipow(v: f64, n: u32) -> f64 {
    match n {
        0 => 1.0,
        1 => v,
        2 => v * v,
        3 => v * v * v,
        4 => {
            let s = v * v;
            s * s
        }
        _ => v.powi(n as i32),
    }
}
