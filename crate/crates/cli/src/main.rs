//! `bernergy` command-line tool: energy distances, permutation tests and numerical
//! certificates on point clouds read from CSV files. Every command prints one JSON
//! document.

mod commands;
mod error;
mod input;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use error::{exit, CliError};

#[derive(Debug, Parser)]
#[command(name = "bernergy", version, about = "Generalized energy distances on Euclidean, hyperbolic and spherical data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Energy distance between two point clouds.
    Dist(DistArgs),
    /// Seeded permutation two-sample test.
    Test(TestArgs),
    /// Numerical certificates on supplied or generated points.
    Verify(VerifyArgs),
    /// Tabulate a catalog function in closed form and through its integral representation.
    PsiEval(PsiEvalArgs),
}

#[derive(Debug, Args, Serialize)]
struct DataArgs {
    /// First point cloud (CSV).
    x: PathBuf,
    /// Second point cloud (CSV).
    y: PathBuf,
    /// Kernel: euclidean_squared[:shift], euclidean, hyperbolic or sphere_geodesic.
    #[arg(long, default_value = "euclidean_squared")]
    kernel: String,
    /// Catalog function, e.g. sqrt, log1p, pow:3.
    #[arg(long, default_value = "sqrt")]
    psi: String,
    /// Read the last column of each file as weights.
    #[arg(long)]
    weights: bool,
    /// Translate each Euclidean sample to mean zero first (experimental).
    #[arg(long)]
    center: bool,
    /// Write the JSON report here instead of standard output.
    #[arg(long)]
    #[serde(skip)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct DistArgs {
    #[command(flatten)]
    #[serde(flatten)]
    data: DataArgs,
    /// Relative tolerance of the moment-constraint check.
    #[arg(long, default_value_t = bernergy::energy::CONSTRAINT_TOL)]
    tol: f64,
}

#[derive(Debug, Args, Serialize)]
struct TestArgs {
    #[command(flatten)]
    #[serde(flatten)]
    data: DataArgs,
    /// Number of permutations.
    #[arg(long = "B", visible_alias = "permutations", default_value_t = 199)]
    #[serde(rename = "B")]
    permutations: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Check {
    Psd,
    Cpd,
    Schoenberg,
    Triangle,
    Sntype,
}

#[derive(Debug, Args, Serialize)]
struct VerifyArgs {
    #[arg(long, default_value = "euclidean_squared")]
    kernel: String,
    /// Checks to run, in order; may be repeated or comma separated.
    #[arg(long, value_enum, value_delimiter = ',', required = true)]
    check: Vec<Check>,
    /// Catalog function for cpd, triangle and sntype.
    #[arg(long)]
    psi: Option<String>,
    /// Points to check (CSV); random points are generated when absent.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Number of generated points.
    #[arg(long, default_value_t = 30)]
    n: usize,
    /// Dimension of generated points and probe measures.
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Schoenberg parameters r.
    #[arg(long = "r", value_delimiter = ',', default_values_t = [0.1, 1.0, 10.0])]
    r_grid: Vec<f64>,
    /// Random triples for the triangle check.
    #[arg(long, default_value_t = 100_000)]
    triples: usize,
    /// Random measures for the sntype probe.
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    /// Override the default tolerance of each check.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    #[serde(skip)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum BranchArg {
    Auto,
    Smooth,
    Full,
}

#[derive(Debug, Args, Serialize)]
struct PsiEvalArgs {
    #[arg(long)]
    psi: String,
    /// Evaluation points; defaults to 13 points from 1e-3 to 1e3.
    #[arg(long = "t", value_delimiter = ',', allow_negative_numbers = true)]
    t: Vec<f64>,
    /// Absolute quadrature tolerance.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Require the integral representation (an error for closed-form-only entries).
    #[arg(long)]
    representation: bool,
    #[arg(long, value_enum, default_value_t = BranchArg::Auto)]
    branch: BranchArg,
    #[arg(long)]
    #[serde(skip)]
    output: Option<PathBuf>,
}

/// Common envelope of every JSON document.
#[derive(Serialize)]
struct Envelope<'a> {
    version: &'static str,
    command: &'static str,
    config: Value,
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    result: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<&'a Value>,
}

fn configure_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("BERNERGY_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Usage(format!("BERNERGY_THREADS must be a positive integer, got `{v}`")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    Ok(())
}

fn emit(text: &str, output: Option<&PathBuf>) -> Result<(), CliError> {
    match output {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError::Io {
                    path: "<stdout>".into(),
                    message: e.to_string(),
                })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };

    let (name, config, seed, output) = match &cli.command {
        Command::Dist(a) => ("dist", json!(a), None, a.data.output.clone()),
        Command::Test(a) => ("test", json!(a), Some(a.seed), a.data.output.clone()),
        Command::Verify(a) => ("verify", json!(a), Some(a.seed), a.output.clone()),
        Command::PsiEval(a) => ("psi-eval", json!(a), None, a.output.clone()),
    };

    let outcome = configure_threads().and_then(|()| match &cli.command {
        Command::Dist(a) => commands::dist(a),
        Command::Test(a) => commands::test(a),
        Command::Verify(a) => commands::verify(a),
        Command::PsiEval(a) => commands::psi_eval(a),
    });

    let (result, error, code) = match outcome {
        Ok(v) => (Some(v), None, exit::OK),
        Err(e) => {
            eprintln!("bernergy {name}: {e}");
            (None, Some(e.to_json()), e.exit_code())
        }
    };
    let envelope = Envelope {
        version: env!("CARGO_PKG_VERSION"),
        command: name,
        config,
        seed,
        result,
        error: error.as_ref(),
    };
    let mut text = serde_json::to_string_pretty(&envelope).expect("report serializes");
    text.push('\n');
    // errors always go to standard output so a bad --output path is still reported
    let target = if code == exit::OK { output.as_ref() } else { None };
    if let Err(e) = emit(&text, target) {
        eprintln!("bernergy {name}: {e}");
        return ExitCode::from(e.exit_code() as u8);
    }
    ExitCode::from(code as u8)
}
