//! `cms`: command-line front end for graph-directed contractive Markov
//! systems.
//!
//! Every subcommand loads one system (`--system FILE` or `--builtin
//! NAME[:params]`), writes a JSON or CSV payload to `--out` or stdout, and a
//! run manifest to `<out>.manifest.json` (stderr when printing to stdout).
//! Payloads depend only on argv; timings live in the manifest.
//!
//! Exit codes: 0 success, 1 check failure or runtime error, 2 usage or
//! parse error.

mod commands;
mod manifest;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::commands::CliError;
use crate::manifest::RunManifest;

#[derive(Parser, Debug)]
#[command(name = "cms", version, about = "Simulate and check graph-directed contractive Markov systems")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// System description file (.cms).
    #[arg(long, global = true, value_name = "FILE")]
    pub system: Option<PathBuf>,
    /// Builtin system: example_r2, example_r1 or gmarkov:p11,p12,...
    #[arg(long, global = true, value_name = "NAME[:PARAMS]")]
    pub builtin: Option<String>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Path length, profile length or enumeration depth, depending on the command.
    #[arg(long, global = true)]
    pub n: Option<usize>,
    #[arg(long, global = true)]
    pub burnin: Option<usize>,
    /// Sample, pair or trajectory budget.
    #[arg(long, global = true)]
    pub budget: Option<u64>,
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Worker threads. Results do not depend on this.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Lipschitz constant of the probability functions, for systems loaded from a file.
    #[arg(long, global = true)]
    pub lipschitz: Option<f64>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Irreducibility, period and word counts of the graph.
    GraphCheck {
        /// Count admissible words up to this length.
        #[arg(long, default_value_t = 6)]
        depth: usize,
    },
    /// Sampled check of the probability axioms and the δ floor.
    Validate,
    /// Sampled contraction rate over same-vertex pairs.
    Rate,
    /// Modulus-of-continuity profile and Dini / square-summable classification.
    Moduli(ModuliArgs),
    /// One simulated trajectory.
    Simulate(StartArgs),
    /// Ergodic average of a test function along one path.
    Ergodic(ErgodicArgs),
    /// Lyapunov-style and integral entropy estimators.
    Entropy(EntropyArgs),
    /// Empirical invariant measure: integrals, cylinders, moment check.
    Measure(MeasureArgs),
    /// Exact cylinder probabilities, optionally against simulated frequencies.
    Cylinder(CylinderArgs),
    /// Convergence of the coding map, or the code of one backward word.
    Code(CodeArgs),
    /// Likelihood-ratio martingale checks for a pair of starting points.
    Martingale(MartingaleArgs),
}

#[derive(Args, Debug)]
pub struct StartArgs {
    /// Start point: coordinates `a,b,...`, `rep:V`, or for sequence systems
    /// a word of edge ids appended to the representative of its first source.
    #[arg(long)]
    pub x: Option<String>,
}

#[derive(Args, Debug)]
pub struct ModuliArgs {
    /// Exact closed-form profile φ(e^{-n}) = α/n with parameters `ALPHA,DELTA`.
    #[arg(long, value_name = "ALPHA,DELTA", conflicts_with = "f")]
    pub jo: Option<String>,
    /// Sample the modulus of this expression instead.
    #[arg(long)]
    pub f: Option<String>,
    #[arg(long, default_value_t = 1)]
    pub vertex: usize,
    /// Scale grid t_n = b·cⁿ.
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub c: Option<f64>,
    /// Tail increment below which a partial sum counts as converged.
    #[arg(long, default_value_t = 1e-5)]
    pub threshold: f64,
}

#[derive(Args, Debug)]
pub struct ErgodicArgs {
    #[arg(long)]
    pub x: Option<String>,
    /// Test function over x1..xd (for sequence systems: x1 = newest edge
    /// index, x2 = its target vertex).
    #[arg(long)]
    pub f: String,
}

#[derive(Args, Debug)]
pub struct EntropyArgs {
    #[arg(long)]
    pub x: Option<String>,
    #[arg(long, default_value_t = cms_core::estimators::DEFAULT_ENTROPY_TRAJECTORIES)]
    pub trajectories: u64,
}

#[derive(Args, Debug)]
pub struct MeasureArgs {
    #[arg(long)]
    pub x: Option<String>,
    #[arg(long)]
    pub f: Option<String>,
    /// Cylinder words (comma-separated edge ids); repeatable.
    #[arg(long)]
    pub word: Vec<String>,
}

#[derive(Args, Debug)]
pub struct CylinderArgs {
    #[arg(long)]
    pub x: Option<String>,
    /// One word; without it every admissible word up to `--depth` is listed.
    #[arg(long)]
    pub word: Option<String>,
    #[arg(long, default_value_t = 3)]
    pub depth: usize,
}

#[derive(Args, Debug)]
pub struct CodeArgs {
    /// Depth grid, comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub depths: Option<Vec<usize>>,
    #[arg(long, default_value_t = 1000)]
    pub words: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub threshold: f64,
    /// Code a single backward word (edge ids, oldest first).
    #[arg(long)]
    pub word: Option<String>,
}

#[derive(Args, Debug)]
pub struct MartingaleArgs {
    #[arg(long)]
    pub x: String,
    #[arg(long)]
    pub y: String,
    /// Horizon for the tail rows, the log-bound paths and the variance check.
    #[arg(long, default_value_t = 20)]
    pub i_max: usize,
    /// Random paths for the pointwise log-bound sweep.
    #[arg(long, default_value_t = 1000)]
    pub paths: u64,
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli, &argv) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: &Cli, argv: &[String]) -> Result<u8, CliError> {
    if let Some(jobs) = cli.common.jobs {
        if jobs == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Io(e.to_string()))?;
    }
    let mut manifest = RunManifest::start(argv, &cli.common);
    let timer = Instant::now();
    let report = commands::dispatch(&cli.command, &cli.common)?;
    manifest.finish(report.system.clone(), timer.elapsed().as_secs_f64(), report.ok);

    let payload = match cli.common.format {
        Format::Json => {
            let mut v = report.json;
            if let Some(name) = manifest.sidecar_name() {
                v["manifest"] = serde_json::Value::String(name);
            }
            let mut s = serde_json::to_string_pretty(&v).map_err(|e| CliError::Io(e.to_string()))?;
            s.push('\n');
            s
        }
        Format::Csv => report.csv,
    };
    match &cli.common.out {
        Some(path) => {
            std::fs::write(path, payload).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            manifest.write_sidecar(path)?;
        }
        None => {
            print!("{payload}");
            eprintln!("{}", manifest.to_json_line());
        }
    }
    Ok(if report.ok { 0 } else { 1 })
}
