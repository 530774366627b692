#![allow(dead_code)]

use reeb_ldp::coeffs::{CoeffTables, DEFAULT_GUARD};
use reeb_ldp::field::{find_critical_points, HamiltonianSystem, SystemRegistry};
use reeb_ldp::reeb::{build_reeb_graph, ReebGraph};

pub struct Setup {
    pub sys: HamiltonianSystem,
    pub graph: ReebGraph,
    pub tables: CoeffTables,
}

pub fn setup(name: &str) -> Setup {
    let sys = SystemRegistry::default().build(name).unwrap();
    let cps = find_critical_points(&sys, sys.bbox(), 128).unwrap();
    let graph = build_reeb_graph(&sys, &cps, sys.bbox(), 256).unwrap();
    let tables = CoeffTables::build(&sys, &graph, 48, DEFAULT_GUARD).unwrap();
    Setup { sys, graph, tables }
}
