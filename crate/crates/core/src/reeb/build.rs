use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::{Edge, Locator, ReebError, ReebGraph, Vertex, VertexRole};
use crate::field::{CriticalKind, CriticalPoint, HamiltonianSystem, Rect};
use crate::grid::{level_edge_components, Dsu, NodeGrid, EXCLUDED};

pub const DEFAULT_GRID: usize = 512;

/// Cells around a saddle whose level crossings count as the separatrix.
const SADDLE_REACH: usize = 2;
/// Radius, in cells, of the node disk withheld around an isotropic saddle.
const EXCLUSION_CELLS: f64 = 1.5;

/// Builds the Reeb graph from the critical points of `sys` inside `bbox`.
///
/// Nodes of a `grid_n²` lattice are classed by the open interval between
/// consecutive critical levels that holds their `H` value, and each class is
/// split into 4-connected pieces. Two pieces touching across a level curve
/// belong to the same edge unless that curve is the critical component (the
/// separatrix through a saddle); such contacts become vertex incidences
/// instead. Extremum vertices attach to the piece around them.
pub fn build_reeb_graph(
    sys: &HamiltonianSystem,
    critical_points: &[CriticalPoint],
    bbox: Rect,
    grid_n: usize,
) -> Result<ReebGraph, ReebError> {
    let cps: Vec<CriticalPoint> = critical_points.iter().copied().filter(|c| bbox.contains(c.location)).collect();
    if cps.is_empty() {
        return Err(ReebError::NoCriticalPoints);
    }
    let scale = cps.iter().map(|c| c.h_value.abs()).fold(1.0f64, f64::max);
    let saddles: Vec<&CriticalPoint> = cps.iter().filter(|c| c.kind == CriticalKind::Saddle).collect();
    for (a, s) in saddles.iter().enumerate() {
        for t in &saddles[a + 1..] {
            if (s.h_value - t.h_value).abs() <= 1e-9 * scale {
                return Err(ReebError::EqualSaddleLevels(
                    s.location[0],
                    s.location[1],
                    t.location[0],
                    t.location[1],
                    s.h_value,
                ));
            }
        }
    }

    // vertices in deterministic order
    let mut cps = cps;
    cps.sort_by(|a, b| {
        a.h_value
            .total_cmp(&b.h_value)
            .then(a.location[0].total_cmp(&b.location[0]))
            .then(a.location[1].total_cmp(&b.location[1]))
    });
    let mut levels: Vec<f64> = cps.iter().map(|c| c.h_value).collect();
    levels.dedup();
    let level_of = |h: f64| levels.iter().position(|&l| l == h).unwrap();

    let grid = NodeGrid::sample(sys, bbox, grid_n.max(32));
    let n = grid.n;
    // interval index: number of critical levels strictly below the value
    let interval = |v: f64| levels.partition_point(|&l| l < v) as u32;
    let mut classes: Vec<u32> = grid.values.iter().map(|&v| interval(v)).collect();
    // Lower sectors of a saddle touch at the saddle itself; drop a small disk
    // around it so they cannot join through lattice nodes. Flat saddles have
    // thin sectors and need a wider disk.
    let cell = grid.dx.max(grid.dy);
    for c in cps.iter().filter(|c| c.kind == CriticalKind::Saddle) {
        let [lm, lp] = c.hess_eigenvalues;
        let aniso = (lp / -lm).max(-lm / lp).sqrt();
        let r = cell * (EXCLUSION_CELLS * aniso).min(20.0);
        for (k, cl) in classes.iter_mut().enumerate() {
            let p = grid.point(k);
            if (p[0] - c.location[0]).hypot(p[1] - c.location[1]) <= r {
                *cl = EXCLUDED;
            }
        }
    }
    let (pieces, npieces) = grid.components(&classes);
    let npieces = npieces as usize;

    // per level: crossing components, and which of them are critical (owned by a vertex)
    let mut crossing = Vec::with_capacity(levels.len());
    let mut critical: Vec<HashMap<u32, usize>> = vec![HashMap::new(); levels.len()];
    for &l in &levels {
        crossing.push(level_edge_components(&grid, l).0);
    }
    for (v, c) in cps.iter().enumerate() {
        if c.kind != CriticalKind::Saddle {
            continue;
        }
        let j = level_of(c.h_value);
        let (ci, cj) = grid.cell_of(c.location);
        let lo_i = ci.saturating_sub(SADDLE_REACH);
        let lo_j = cj.saturating_sub(SADDLE_REACH);
        let hi_i = (ci + SADDLE_REACH).min(n - 1);
        let hi_j = (cj + SADDLE_REACH).min(n - 1);
        let mut found = false;
        for jj in lo_j..=hi_j {
            for ii in lo_i..=hi_i {
                for e in grid.cell_edges(ii, jj) {
                    let comp = crossing[j][e];
                    if comp != EXCLUDED {
                        found = true;
                        if let Some(&other) = critical[j].get(&comp) {
                            if other != v {
                                return Err(ReebError::AmbiguousWiring(format!(
                                    "critical points {other} and {v} share a level-set component"
                                )));
                            }
                        }
                        critical[j].insert(comp, v);
                    }
                }
            }
        }
        if !found {
            return Err(ReebError::AmbiguousWiring(format!(
                "no level crossings resolved near the saddle at ({:.6}, {:.6}); refine the grid",
                c.location[0], c.location[1]
            )));
        }
    }

    // glue pieces across regular level curves; collect vertex incidences
    let mut dsu = Dsu::new(npieces);
    let mut incid: Vec<(usize, usize)> = Vec::new();
    let mut lattice_edge = |a: usize, b: usize, e: usize| {
        let (ka, kb) = (classes[a], classes[b]);
        if ka == kb || ka == EXCLUDED || kb == EXCLUDED {
            return;
        }
        let (lo, hi) = if ka < kb { (a, b) } else { (b, a) };
        let mut at_vertex = false;
        for j in classes[lo]..classes[hi] {
            let comp = crossing[j as usize][e];
            if let Some(&v) = critical[j as usize].get(&comp) {
                at_vertex = true;
                incid.push((pieces[lo] as usize, v));
                incid.push((pieces[hi] as usize, v));
            }
        }
        if !at_vertex {
            dsu.union(pieces[lo] as usize, pieces[hi] as usize);
        }
    };
    for j in 0..=n {
        for i in 0..=n {
            let a = grid.idx(i, j);
            if i < n {
                lattice_edge(a, grid.idx(i + 1, j), grid.h_edge(i, j));
            }
            if j < n {
                lattice_edge(a, grid.idx(i, j + 1), grid.v_edge(i, j));
            }
        }
    }
    for (v, c) in cps.iter().enumerate() {
        if c.kind.is_extremum() {
            let k = grid.nearest(c.location);
            if pieces[k] == EXCLUDED {
                return Err(ReebError::AmbiguousWiring(format!("extremum {v} sits inside a saddle's exclusion disk")));
            }
            incid.push((pieces[k] as usize, v));
        }
    }

    // classes of pieces are the edges
    let mut class_vertices: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for p in 0..npieces {
        class_vertices.entry(dsu.find(p)).or_default();
    }
    for &(p, v) in &incid {
        class_vertices.get_mut(&dsu.find(p)).unwrap().insert(v);
    }
    let mut boundary_classes = BTreeSet::new();
    for k in 0..grid.len() {
        if grid.on_boundary(k) && pieces[k] != EXCLUDED {
            boundary_classes.insert(dsu.find(pieces[k] as usize));
        }
    }

    let mut edges: Vec<(usize, Option<usize>, usize)> = Vec::new();
    let mut top = None;
    for (&class, vs) in &class_vertices {
        let vs: Vec<usize> = vs.iter().copied().collect();
        match vs.len() {
            2 => {
                let (a, b) = (vs[0], vs[1]);
                let (lo, hi) = if cps[a].h_value <= cps[b].h_value { (a, b) } else { (b, a) };
                if cps[lo].h_value == cps[hi].h_value {
                    return Err(ReebError::AmbiguousWiring(format!(
                        "edge joins vertices {lo} and {hi} at equal levels"
                    )));
                }
                edges.push((lo, Some(hi), class));
            }
            1 if boundary_classes.contains(&class) => {
                if top.is_some() {
                    return Err(ReebError::AmbiguousWiring(
                        "more than one open edge reaches the box boundary; enlarge the box".into(),
                    ));
                }
                top = Some(vs[0]);
                edges.push((vs[0], None, class));
            }
            k => {
                return Err(ReebError::AmbiguousWiring(format!(
                    "a band of level curves touches {k} critical levels; refine the grid"
                )));
            }
        }
    }
    if top.is_none() {
        return Err(ReebError::AmbiguousWiring("no unbounded edge found".into()));
    }
    if boundary_classes.len() > 1 {
        return Err(ReebError::AmbiguousWiring(
            "bounded level curves are clipped by the box; enlarge the box".into(),
        ));
    }
    edges.sort_by_key(|&(lo, hi, _)| (lo, hi.unwrap_or(usize::MAX)));

    let mut vertices: Vec<Vertex> = cps
        .iter()
        .enumerate()
        .map(|(id, c)| Vertex {
            id,
            critical: *c,
            role: if c.kind == CriticalKind::Saddle { VertexRole::Interior } else { VertexRole::Exterior },
            edges: Vec::new(),
        })
        .collect();
    let mut out_edges = Vec::with_capacity(edges.len());
    let mut class_to_edge = HashMap::new();
    for (id, &(lo, hi, class)) in edges.iter().enumerate() {
        vertices[lo].edges.push(id);
        if let Some(h) = hi {
            vertices[h].edges.push(id);
        }
        class_to_edge.insert(class, id as u32);
        out_edges.push(Edge {
            id,
            v_lo: lo,
            v_hi: hi,
            h_lo: cps[lo].h_value,
            h_hi: hi.map_or(f64::INFINITY, |h| cps[h].h_value),
        });
    }
    for v in &vertices {
        let want = if v.role == VertexRole::Interior { 3 } else { 1 };
        if v.edges.len() != want {
            return Err(ReebError::AmbiguousWiring(format!(
                "vertex {} ({:?}) has {} incident edges, expected {want}",
                v.id,
                v.critical.kind,
                v.edges.len()
            )));
        }
    }
    if out_edges.len() != vertices.len() {
        return Err(ReebError::AmbiguousWiring(format!(
            "{} edges for {} vertices",
            out_edges.len(),
            vertices.len()
        )));
    }

    let h_max = boundary_minimum(sys, bbox, 4 * n);
    let vdist = all_pairs(&vertices, &out_edges);
    if vdist.iter().flatten().any(|d| !d.is_finite()) {
        return Err(ReebError::AmbiguousWiring("graph is disconnected".into()));
    }
    let labels = pieces
        .iter()
        .map(|&p| if p == EXCLUDED { EXCLUDED } else { class_to_edge[&dsu.find(p as usize)] })
        .collect();

    Ok(ReebGraph {
        vertices,
        edges: out_edges,
        h_max,
        bbox,
        vdist,
        levels,
        locator: Some(Locator { grid, labels }),
    })
}

fn boundary_minimum(sys: &HamiltonianSystem, b: Rect, samples: usize) -> f64 {
    let mut m = f64::INFINITY;
    for k in 0..=samples {
        let s = k as f64 / samples as f64;
        let x = b.xmin + s * b.width();
        let y = b.ymin + s * b.height();
        for p in [[x, b.ymin], [x, b.ymax], [b.xmin, y], [b.xmax, y]] {
            m = m.min(sys.h(p));
        }
    }
    m
}

fn all_pairs(vertices: &[Vertex], edges: &[Edge]) -> Vec<Vec<f64>> {
    let nv = vertices.len();
    let mut d = vec![vec![f64::INFINITY; nv]; nv];
    for (s, row) in d.iter_mut().enumerate() {
        row[s] = 0.0;
        let mut stack = vec![s];
        while let Some(v) = stack.pop() {
            for &e in &vertices[v].edges {
                let ed = &edges[e];
                let Some(hi) = ed.v_hi else { continue };
                let w = if ed.v_lo == v { hi } else { ed.v_lo };
                if row[w].is_infinite() {
                    row[w] = row[v] + (ed.h_hi - ed.h_lo);
                    stack.push(w);
                }
            }
        }
    }
    d
}
