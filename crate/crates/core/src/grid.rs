//! Uniform node grids over the working box: connected-component labelling of
//! node classes and a marching-squares level-set census.

use rayon::prelude::*;

use crate::field::{HamiltonianSystem, Point, Rect};

pub const EXCLUDED: u32 = u32::MAX;

/// `H` sampled on an `(n+1) × (n+1)` node lattice.
#[derive(Debug, Clone)]
pub struct NodeGrid {
    pub bbox: Rect,
    pub n: usize,
    pub dx: f64,
    pub dy: f64,
    pub values: Vec<f64>,
}

impl NodeGrid {
    pub fn sample(sys: &HamiltonianSystem, bbox: Rect, n: usize) -> Self {
        let dx = bbox.width() / n as f64;
        let dy = bbox.height() / n as f64;
        let values = (0..(n + 1) * (n + 1))
            .into_par_iter()
            .map(|k| {
                let (i, j) = (k % (n + 1), k / (n + 1));
                sys.h([bbox.xmin + i as f64 * dx, bbox.ymin + j as f64 * dy])
            })
            .collect();
        NodeGrid { bbox, n, dx, dy, values }
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * (self.n + 1) + i
    }

    #[inline]
    pub fn ij(&self, k: usize) -> (usize, usize) {
        (k % (self.n + 1), k / (self.n + 1))
    }

    pub fn point(&self, k: usize) -> Point {
        let (i, j) = self.ij(k);
        [self.bbox.xmin + i as f64 * self.dx, self.bbox.ymin + j as f64 * self.dy]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Node closest to `p` (clamped to the lattice).
    pub fn nearest(&self, p: Point) -> usize {
        let i = ((p[0] - self.bbox.xmin) / self.dx).round().clamp(0.0, self.n as f64) as usize;
        let j = ((p[1] - self.bbox.ymin) / self.dy).round().clamp(0.0, self.n as f64) as usize;
        self.idx(i, j)
    }

    pub fn on_boundary(&self, k: usize) -> bool {
        let (i, j) = self.ij(k);
        i == 0 || j == 0 || i == self.n || j == self.n
    }

    pub fn neighbours(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        let (i, j) = self.ij(k);
        let n = self.n;
        [
            (i > 0).then(|| self.idx(i - 1, j)),
            (i < n).then(|| self.idx(i + 1, j)),
            (j > 0).then(|| self.idx(i, j - 1)),
            (j < n).then(|| self.idx(i, j + 1)),
        ]
        .into_iter()
        .flatten()
    }

    /// Labels 4-connected components of nodes sharing the same class.
    /// Nodes of class [`EXCLUDED`] get label [`EXCLUDED`]. Returns the label per
    /// node and the number of components.
    pub fn components(&self, classes: &[u32]) -> (Vec<u32>, u32) {
        let mut labels = vec![EXCLUDED; classes.len()];
        let mut next = 0u32;
        let mut stack = Vec::new();
        for start in 0..classes.len() {
            if classes[start] == EXCLUDED || labels[start] != EXCLUDED {
                continue;
            }
            labels[start] = next;
            stack.push(start);
            while let Some(k) = stack.pop() {
                for m in self.neighbours(k) {
                    if labels[m] == EXCLUDED && classes[m] == classes[start] {
                        labels[m] = next;
                        stack.push(m);
                    }
                }
            }
            next += 1;
        }
        (labels, next)
    }
}

/// Union–find with path halving; the smaller index becomes the root.
pub(crate) struct Dsu(Vec<usize>);

impl Dsu {
    pub(crate) fn new(n: usize) -> Self {
        Dsu((0..n).collect())
    }
    pub(crate) fn find(&mut self, mut a: usize) -> usize {
        while self.0[a] != a {
            self.0[a] = self.0[self.0[a]];
            a = self.0[a];
        }
        a
    }
    pub(crate) fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

impl NodeGrid {
    /// Index of the lattice edge `(i,j)–(i+1,j)`.
    #[inline]
    pub fn h_edge(&self, i: usize, j: usize) -> usize {
        j * self.n + i
    }

    /// Index of the lattice edge `(i,j)–(i,j+1)`.
    #[inline]
    pub fn v_edge(&self, i: usize, j: usize) -> usize {
        self.n * (self.n + 1) + j * (self.n + 1) + i
    }

    pub fn edge_count(&self) -> usize {
        2 * self.n * (self.n + 1)
    }

    /// Cell `(i, j)` containing `p`, clamped to the lattice.
    pub fn cell_of(&self, p: Point) -> (usize, usize) {
        let last = (self.n - 1) as f64;
        let i = ((p[0] - self.bbox.xmin) / self.dx).floor().clamp(0.0, last) as usize;
        let j = ((p[1] - self.bbox.ymin) / self.dy).floor().clamp(0.0, last) as usize;
        (i, j)
    }

    /// Lattice edges of cell `(i, j)`: bottom, right, top, left.
    pub fn cell_edges(&self, i: usize, j: usize) -> [usize; 4] {
        [self.h_edge(i, j), self.v_edge(i + 1, j), self.h_edge(i, j + 1), self.v_edge(i, j)]
    }
}

/// Marching-squares components of `{H = level}`. Every lattice edge crossed by
/// the level set gets the id of its curve component; other edges get
/// [`EXCLUDED`]. Ambiguous saddle cells are resolved with the bilinear centre
/// value. Returns the labels and the component count.
pub fn level_edge_components(grid: &NodeGrid, level: f64) -> (Vec<u32>, u32) {
    let n = grid.n;
    let total = grid.edge_count();
    let mut dsu = Dsu::new(total);
    let mut used = vec![false; total];
    let above = |k: usize| grid.values[k] > level;
    for j in 0..n {
        for i in 0..n {
            let c = [
                above(grid.idx(i, j)),
                above(grid.idx(i + 1, j)),
                above(grid.idx(i + 1, j + 1)),
                above(grid.idx(i, j + 1)),
            ];
            let e = grid.cell_edges(i, j);
            let mut crossed = [0usize; 4];
            let mut nc = 0;
            for s in 0..4 {
                if c[s] != c[(s + 1) % 4] {
                    crossed[nc] = s;
                    nc += 1;
                    used[e[s]] = true;
                }
            }
            match nc {
                2 => dsu.union(e[crossed[0]], e[crossed[1]]),
                4 => {
                    let centre = 0.25
                        * (grid.values[grid.idx(i, j)]
                            + grid.values[grid.idx(i + 1, j)]
                            + grid.values[grid.idx(i + 1, j + 1)]
                            + grid.values[grid.idx(i, j + 1)]);
                    // connect around whichever diagonal pair agrees with the centre
                    if (centre > level) == c[0] {
                        dsu.union(e[1], e[0]);
                        dsu.union(e[3], e[2]);
                    } else {
                        dsu.union(e[0], e[3]);
                        dsu.union(e[2], e[1]);
                    }
                }
                _ => {}
            }
        }
    }
    let mut labels = vec![EXCLUDED; total];
    let mut remap = std::collections::HashMap::new();
    for k in 0..total {
        if used[k] {
            let r = dsu.find(k);
            let next = remap.len() as u32;
            labels[k] = *remap.entry(r).or_insert(next);
        }
    }
    let count = remap.len() as u32;
    (labels, count)
}

/// Number of connected components of `{H = level}` inside the grid (closed
/// loops and boundary-clipped arcs alike).
pub fn level_component_count(grid: &NodeGrid, level: f64) -> usize {
    level_edge_components(grid, level).1 as usize
}
