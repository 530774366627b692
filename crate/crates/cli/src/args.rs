use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use reeb_ldp::oracle::OracleRegistry;

/// Arguments marked required are optional only under `--schema`; [`req`]
/// unwraps them once the schema branch has been ruled out.
#[derive(Debug, Parser)]
#[command(name = "reeb-ldp", version, about = "Reeb graphs, averaged coefficients and large-deviation checks for planar Hamiltonian systems")]
pub struct Cli {
    /// System description (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true, env = "REEB_LDP_THREADS")]
    pub threads: Option<usize>,
    /// Base seed for every random stream.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Write outputs and `manifest.json` here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Print the JSON schema of this subcommand's output and exit.
    #[arg(long, global = true)]
    pub schema: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Critical points and the assumption report.
    Analyze(AnalyzeArgs),
    /// Reeb graph operations.
    #[command(subcommand)]
    Graph(GraphCommand),
    /// Tabulated rotation time and averaged diffusion on one edge (CSV).
    Coeffs(CoeffsArgs),
    /// One Euler–Maruyama trajectory of the rescaled equation (CSV).
    Simulate(SimulateArgs),
    /// Action functional on graph paths.
    #[command(subcommand)]
    Action(ActionCommand),
    /// Monte Carlo checks of tube probabilities.
    #[command(subcommand)]
    Ldp(LdpCommand),
    /// Run a named numerical oracle.
    Oracle(OracleArgs),
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Radius of the ring on which growth constants are sampled.
    #[arg(long, default_value_t = 10.0)]
    pub ring_radius: f64,
}

#[derive(Debug, Subcommand)]
pub enum GraphCommand {
    /// Vertices and edges as JSON.
    Export,
}

#[derive(Debug, Args)]
pub struct CoeffsArgs {
    #[arg(long, required_unless_present = "schema")]
    pub edge: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, required_unless_present = "schema")]
    pub epsilon: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    pub beta: f64,
    /// Horizon in rescaled time.
    #[arg(long, default_value_t = 1.0)]
    pub horizon: f64,
    /// Requested step; the step policy may shorten it.
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    /// Start point `x,y`.
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true, required_unless_present = "schema")]
    pub x0: Option<[f64; 2]>,
    #[arg(long, default_value_t = 0)]
    pub trajectory: u64,
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
}

#[derive(Debug, Subcommand)]
pub enum ActionCommand {
    /// Evaluate S on a path CSV (`t,edge,h`).
    Eval {
        #[arg(long, required_unless_present = "schema")]
        path: Option<PathBuf>,
        #[arg(long, default_value_t = reeb_ldp::action::DEFAULT_B2_FLOOR)]
        b2_floor: f64,
    },
    /// Minimize S between two graph points `edge:h`.
    Minimize {
        #[arg(long, value_parser = parse_graph_point, required_unless_present = "schema")]
        from: Option<(usize, f64)>,
        #[arg(long, value_parser = parse_graph_point, required_unless_present = "schema")]
        to: Option<(usize, f64)>,
        #[arg(long, default_value_t = 1.0)]
        horizon: f64,
        #[arg(long, default_value_t = 200)]
        n_time: usize,
        /// Energy nodes of the dynamic-programming cross-check; 0 skips it.
        #[arg(long, default_value_t = 400)]
        n_h: usize,
        /// Also write the minimizer as a path CSV.
        #[arg(long)]
        path_out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum LdpCommand {
    /// Estimate tube probabilities along an ε ladder and fit the rate.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Reference path CSV (`t,edge,h`).
    #[arg(long, required_unless_present = "schema")]
    pub path: Option<PathBuf>,
    #[arg(long, required_unless_present = "schema")]
    pub delta: Option<f64>,
    /// Strictly decreasing, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.16,0.09,0.04")]
    pub epsilons: Vec<f64>,
    #[arg(long, default_value_t = 0.5)]
    pub beta: f64,
    #[arg(long, default_value_t = 100_000)]
    pub samples: u64,
    /// Start point; defaults to a point on the level of the path start.
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    pub x0: Option<[f64; 2]>,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(value_parser = clap::builder::PossibleValuesParser::new(OracleRegistry::default().names().collect::<Vec<_>>()))]
    pub name: String,
    /// Parameters as inline JSON or `@file.json`.
    #[arg(long)]
    pub params: Option<String>,
}

fn parse_point(s: &str) -> Result<[f64; 2], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p}: {e}")))
        .collect::<Result<_, _>>()?;
    match v[..] {
        [x, y] => Ok([x, y]),
        _ => Err(format!("expected `x,y`, got `{s}`")),
    }
}

fn parse_graph_point(s: &str) -> Result<(usize, f64), String> {
    let (e, h) = s.split_once(':').ok_or_else(|| format!("expected `edge:h`, got `{s}`"))?;
    Ok((e.trim().parse().map_err(|e| format!("{e}"))?, h.trim().parse().map_err(|e| format!("{e}"))?))
}

pub fn req<T: Clone>(v: &Option<T>) -> T {
    v.clone().expect("clap enforces required arguments outside --schema")
}
