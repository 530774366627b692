use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use reeb_ldp::action::{evaluate_action, minimize_action, ActionValue, MinActionResult};
use reeb_ldp::coeffs::{seed_point, CoeffTables, DEFAULT_GUARD};
use reeb_ldp::field::{
    check_assumptions, find_critical_points, AssumptionReport, CriticalPoint, HamiltonianSystem, SystemConfig, SystemRegistry,
};
use reeb_ldp::ldp::{estimate_tube, TubeEstimate, TubeExperiment};
use reeb_ldp::oracle::{OracleContext, OracleOutcome, OracleRegistry};
use reeb_ldp::reeb::{build_reeb_graph, GraphExport, GraphPath, GraphPoint, ReebGraph, DEFAULT_GRID};
use reeb_ldp::sde::{simulate, SimulationConfig};
use schemars::{schema_for, JsonSchema};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::args::{req, ActionCommand, Cli, Command, GraphCommand, LdpCommand};
use crate::manifest::{write_file, Envelope, Manifest};
use crate::CliError;

/// Resolution settings, read from an optional `numerics` key of the config.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct Numerics {
    critical_grid: usize,
    reeb_grid: usize,
    coeff_levels: usize,
    coeff_guard: f64,
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics { critical_grid: 128, reeb_grid: DEFAULT_GRID, coeff_levels: 48, coeff_guard: DEFAULT_GUARD }
    }
}

struct Loaded {
    sys: HamiltonianSystem,
    numerics: Numerics,
    manifest: Manifest,
}

impl Loaded {
    fn critical_points(&self) -> Result<Vec<CriticalPoint>, CliError> {
        find_critical_points(&self.sys, self.sys.bbox(), self.numerics.critical_grid)
            .map_err(|e| CliError::module("critical points")(e.to_string()))
    }

    fn graph(&self) -> Result<ReebGraph, CliError> {
        let cps = self.critical_points()?;
        build_reeb_graph(&self.sys, &cps, self.sys.bbox(), self.numerics.reeb_grid)
            .map_err(|e| CliError::module("reeb graph")(e.to_string()))
    }

    fn tables(&self, graph: &ReebGraph) -> Result<CoeffTables, CliError> {
        CoeffTables::build(&self.sys, graph, self.numerics.coeff_levels, self.numerics.coeff_guard)
            .map_err(|e| CliError::module("coefficients")(e.to_string()))
    }
}

fn load(cli: &Cli, argv: &[String]) -> Result<Loaded, CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Config("--config is required".into()))?;
    let bytes = fs::read(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut doc: Value =
        serde_json::from_slice(&bytes).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let numerics = match doc.as_object_mut().and_then(|o| o.remove("numerics")) {
        Some(n) => serde_json::from_value(n).map_err(|e| CliError::Config(format!("numerics: {e}")))?,
        None => Numerics::default(),
    };
    let system: SystemConfig = serde_json::from_value(doc).map_err(|e| CliError::Config(e.to_string()))?;
    let sys = system.build(&SystemRegistry::default()).map_err(|e| CliError::Config(e.to_string()))?;
    Ok(Loaded { sys, numerics, manifest: Manifest::new(&bytes, argv, cli.seed) })
}

#[derive(Debug, Serialize, JsonSchema)]
struct AnalyzeReport {
    system: String,
    critical_points: Vec<CriticalPoint>,
    assumptions: AssumptionReport,
}

/// One row of `coeffs` output.
#[derive(Debug, Serialize, JsonSchema)]
#[allow(dead_code)]
struct CoeffRow {
    h: f64,
    t: f64,
    b2: f64,
}

/// One row of `simulate` output; `edge`/`graph_h` are empty off the graph.
#[derive(Debug, Serialize, JsonSchema)]
#[allow(dead_code)]
struct SimRow {
    t: f64,
    x: f64,
    y: f64,
    h: f64,
    edge: Option<usize>,
    qv: f64,
    drift: f64,
    martingale: f64,
}

/// One row of a path CSV.
#[derive(Debug, Serialize, JsonSchema)]
#[allow(dead_code)]
struct PathRow {
    t: f64,
    edge: usize,
    h: f64,
}

fn schema(cmd: &Command) -> Value {
    let s = match cmd {
        Command::Analyze(_) => schema_for!(Envelope<AnalyzeReport>),
        Command::Graph(_) => schema_for!(Envelope<GraphExport>),
        Command::Coeffs(_) => schema_for!(CoeffRow),
        Command::Simulate(_) => schema_for!(SimRow),
        Command::Action(ActionCommand::Eval { .. }) => schema_for!(Envelope<ActionValue>),
        Command::Action(ActionCommand::Minimize { .. }) => schema_for!(Envelope<MinActionResult>),
        Command::Ldp(_) => schema_for!(Envelope<TubeEstimate>),
        Command::Oracle(_) => schema_for!(Envelope<OracleOutcome>),
    };
    serde_json::to_value(s).expect("schema serializes")
}

/// Full-precision float: 17 significant digits.
fn f(x: f64) -> String {
    format!("{x:.16e}")
}

fn json<T: Serialize>(digest: &str, report: T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(&Envelope { manifest_digest: digest.to_string(), report }).expect("report serializes");
    v.push(b'\n');
    v
}

fn path_csv(digest: &str, path: &GraphPath) -> String {
    let mut s = format!("# manifest {digest}\nt,edge,h\n");
    for (t, p) in path.times.iter().zip(&path.points) {
        writeln!(s, "{},{},{}", f(*t), p.edge, f(p.h)).unwrap();
    }
    s
}

fn read_path(file: &Path, graph: &ReebGraph) -> Result<GraphPath, CliError> {
    let text = fs::read_to_string(file).map_err(|e| CliError::Config(format!("{}: {e}", file.display())))?;
    let bad = |line: usize, m: String| CliError::Config(format!("{}:{line}: {m}", file.display()));
    let (mut times, mut points) = (Vec::new(), Vec::new());
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('t') {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 3 {
            return Err(bad(k + 1, format!("expected `t,edge,h`, got `{line}`")));
        }
        let t: f64 = cols[0].parse().map_err(|e| bad(k + 1, format!("{e}")))?;
        let edge: usize = cols[1].parse().map_err(|e| bad(k + 1, format!("{e}")))?;
        let h: f64 = cols[2].parse().map_err(|e| bad(k + 1, format!("{e}")))?;
        if edge >= graph.edges.len() {
            return Err(bad(k + 1, format!("no edge {edge}")));
        }
        times.push(t);
        points.push(GraphPoint::new(graph, edge, h));
    }
    if times.len() < 2 {
        return Err(CliError::Config(format!("{}: a path needs at least two rows", file.display())));
    }
    Ok(GraphPath::new(times, points))
}

fn read_params(p: &Option<String>) -> Result<Value, CliError> {
    let Some(p) = p else { return Ok(Value::Null) };
    let text = match p.strip_prefix('@') {
        Some(file) => fs::read_to_string(file).map_err(|e| CliError::Config(format!("{file}: {e}")))?,
        None => p.clone(),
    };
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("--params: {e}")))
}

/// Output files produced by one command: `(default name, bytes)`.
type Outputs = Vec<(PathBuf, Vec<u8>)>;

fn execute(cli: &Cli, l: &Loaded) -> Result<Outputs, CliError> {
    let digest = l.manifest.digest();
    let out = match &cli.command {
        Command::Analyze(a) => {
            let critical_points = l.critical_points()?;
            let assumptions = check_assumptions(&l.sys, l.sys.bbox(), a.ring_radius);
            let r = AnalyzeReport { system: l.sys.name().to_string(), critical_points, assumptions };
            vec![("analyze.json".into(), json(&digest, r))]
        }
        Command::Graph(GraphCommand::Export) => vec![("graph.json".into(), json(&digest, l.graph()?.export()))],
        Command::Coeffs(c) => {
            let graph = l.graph()?;
            if req(&c.edge) >= graph.edges.len() {
                return Err(CliError::Config(format!("no edge {} (graph has {})", req(&c.edge), graph.edges.len())));
            }
            let tables = l.tables(&graph)?;
            let t = tables.get(req(&c.edge)).map_err(|e| CliError::module("coefficients")(e.to_string()))?;
            let mut s = format!("# manifest {digest}\nh,t,b2\n");
            for k in 0..t.h_grid.len() {
                writeln!(s, "{},{},{}", f(t.h_grid[k]), f(t.t_values[k]), f(t.b2_values[k])).unwrap();
            }
            vec![(format!("coeffs_edge{}.csv", req(&c.edge)).into(), s.into_bytes())]
        }
        Command::Simulate(a) => {
            let graph = l.graph()?;
            let mut cfg = SimulationConfig::new(req(&a.epsilon), a.beta, a.horizon, a.dt, req(&a.x0), cli.seed);
            cfg.trajectory = a.trajectory;
            cfg.record_stride = a.stride;
            let rec = simulate(&l.sys, Some(&graph), &cfg).map_err(|e| CliError::module("simulate")(e.to_string()))?;
            let mut s = format!("# manifest {digest}\nt,x,y,h,edge,qv,drift,martingale\n");
            for k in 0..rec.times.len() {
                let edge = rec.graph_path.as_ref().and_then(|p| p.points.get(k)).map(|p| p.edge.to_string()).unwrap_or_default();
                let [x, y] = rec.states[k];
                writeln!(
                    s,
                    "{},{},{},{},{edge},{},{},{}",
                    f(rec.times[k]),
                    f(x),
                    f(y),
                    f(rec.h_series[k]),
                    f(rec.qv_series[k]),
                    f(rec.drift_series[k]),
                    f(rec.martingale_series[k])
                )
                .unwrap();
            }
            if let Some(exit) = &rec.exit {
                eprintln!("warning: trajectory stopped early: {exit:?}");
            }
            vec![("trajectory.csv".into(), s.into_bytes())]
        }
        Command::Action(ActionCommand::Eval { path, b2_floor }) => {
            let graph = l.graph()?;
            let tables = l.tables(&graph)?;
            let p = read_path(&req(path), &graph)?;
            let v = evaluate_action(&tables, &graph, &p, *b2_floor).map_err(|e| CliError::module("action")(e.to_string()))?;
            vec![("action.json".into(), json(&digest, v))]
        }
        Command::Action(ActionCommand::Minimize { from, to, horizon, n_time, n_h, path_out }) => {
            let graph = l.graph()?;
            let tables = l.tables(&graph)?;
            let point = |(e, h): (usize, f64)| {
                if e >= graph.edges.len() {
                    return Err(CliError::Config(format!("no edge {e}")));
                }
                Ok(GraphPoint::new(&graph, e, h))
            };
            let (y0, y1) = (point(req(from))?, point(req(to))?);
            let r = minimize_action(&tables, &graph, &y0, &y1, *horizon, *n_time, *n_h)
                .map_err(|e| CliError::module("action")(e.to_string()))?;
            let mut out: Outputs = vec![("minimize.json".into(), json(&digest, &r))];
            if let Some(p) = path_out {
                out.push((p.clone(), path_csv(&digest, &r.path).into_bytes()));
            }
            out
        }
        Command::Ldp(LdpCommand::Verify(a)) => {
            let graph = l.graph()?;
            let tables = l.tables(&graph)?;
            let reference = read_path(&req(&a.path), &graph)?;
            let x0 = match a.x0 {
                Some(x) => x,
                None => {
                    let p0 = reference.points[0];
                    seed_point(&l.sys, &graph, p0.edge, p0.h).map_err(|e| CliError::module("start point")(e.to_string()))?
                }
            };
            let exp = TubeExperiment {
                reference,
                delta: req(&a.delta),
                epsilons: a.epsilons.clone(),
                beta: a.beta,
                samples: a.samples,
                seed: cli.seed,
                x0,
                dt_fast: a.dt,
                n_time: 200,
                n_h: 400,
            };
            exp.validate().map_err(|e| CliError::Config(e.to_string()))?;
            let r = estimate_tube(&l.sys, &graph, &tables, &exp).map_err(|e| CliError::module("ldp verify")(e.to_string()))?;
            vec![("ldp_verify.json".into(), json(&digest, r))]
        }
        Command::Oracle(o) => {
            let params = read_params(&o.params)?;
            let graph = l.graph()?;
            let ctx = OracleContext { sys: &l.sys, graph: &graph, seed: cli.seed };
            let r = OracleRegistry::default().run(&o.name, &ctx, &params).map_err(|e| match e {
                reeb_ldp::oracle::OracleError::Params(m) => CliError::Config(m),
                e => CliError::module("oracle")(e.to_string()),
            })?;
            if !r.passed {
                eprintln!("warning: oracle `{}` did not pass", r.oracle);
            }
            vec![(format!("oracle_{}.json", o.name).into(), json(&digest, r))]
        }
    };
    Ok(out)
}

pub fn run(cli: &Cli, argv: &[String]) -> Result<(), CliError> {
    if cli.schema {
        let mut text = serde_json::to_vec_pretty(&schema(&cli.command)).expect("schema serializes");
        text.push(b'\n');
        return to_stdout(&text);
    }
    let start = Instant::now();
    let loaded = load(cli, argv)?;
    let outputs = execute(cli, &loaded)?;
    match &cli.out {
        None => {
            // a side file such as --path-out is still written where asked
            for (k, (name, bytes)) in outputs.iter().enumerate() {
                if k == 0 {
                    to_stdout(bytes)?;
                } else {
                    write_file(name, bytes)?;
                }
            }
        }
        Some(dir) => {
            let mut written = Vec::new();
            for (name, bytes) in &outputs {
                let p = if name.is_absolute() { name.clone() } else { dir.join(name) };
                write_file(&p, bytes)?;
                written.push(p);
            }
            loaded.manifest.write(dir, written, start.elapsed().as_secs_f64())?;
        }
    }
    Ok(())
}

fn to_stdout(bytes: &[u8]) -> Result<(), CliError> {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    out.write_all(bytes).and_then(|_| out.flush()).map_err(|e| CliError::Io("<stdout>".into(), e))
}
