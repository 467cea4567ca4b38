//! `limclust`: spectrum estimation and cluster extraction for structure sequences.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use limclust::config::Config;
use limclust::Error;

/// Exit status for success.
const EXIT_OK: u8 = 0;
/// Exit status when a verification check failed.
const EXIT_FAILED: u8 = 1;
/// Exit status for input and configuration errors.
const EXIT_INPUT: u8 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "limclust",
    version,
    about = "Cluster analysis of sequences of measured relational structures",
    after_help = "Configuration: defaults, then the file named by LIMCLUST_CONFIG or --config \
                  (key = value lines), then --set and the dedicated flags.\n\
                  Defaults: tol=0.05 window=0.25 lambda_min=0.05 merge=0.02 d_schedule=1,2,4,8 \
                  dmax=32 epsilon=0.05 globular_radius=8 open_hout=0.1 residue=0.25 inversion_t=200 \
                  moments_w=40 grid=32768 samples=4096 seed=0 parallelism=1 output=out\n\
                  Exit codes: 0 success, 1 verification failures, 2 input or configuration errors."
)]
struct Cli {
    /// Key-value configuration file.
    #[arg(long, global = true, env = "LIMCLUST_CONFIG")]
    config: Option<PathBuf>,
    /// Override one configuration key, as key=value.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Worker threads; outputs do not depend on it.
    #[arg(long, global = true)]
    parallelism: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Report errors on stderr as one JSON object.
    #[arg(long, global = true)]
    json_errors: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a generated sequence as structure files plus a manifest.
    Generate(GenerateArgs),
    /// Evaluate formulas against a structure or each structure of a sequence.
    Pairing(PairingArgs),
    /// Estimate the ball-measure spectrum; writes spectrum.json and CDF curves.
    Spectrum(SequenceArgs),
    /// Extract globular clusters, residual and separator; writes clustering.json and marked structures.
    Cluster(ClusterArgs),
    /// Run the finite-scale checks and print pass/fail evidence.
    Verify(SequenceArgs),
    /// Summarize the JSON outputs found in a directory.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
struct GenerateArgs {
    /// Family name; `--list` shows them.
    #[arg(long, required_unless_present = "list")]
    family: Option<String>,
    /// Family parameters as a JSON object.
    #[arg(long, default_value = "{}")]
    params: String,
    /// First and last index.
    #[arg(long, num_args = 2, value_names = ["N0", "N1"], required_unless_present = "list")]
    range: Vec<usize>,
    /// List the available families.
    #[arg(long)]
    list: bool,
}

#[derive(Args, Debug)]
struct PairingArgs {
    /// A formula; repeatable.
    #[arg(long = "formula", required_unless_present = "formulas")]
    formula: Vec<String>,
    /// File with one formula per line.
    #[arg(long)]
    formulas: Option<PathBuf>,
    #[arg(long, conflicts_with = "manifest", required_unless_present = "manifest")]
    structure: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SequenceArgs {
    /// Sequence manifest (file list or generator description).
    #[arg(long)]
    manifest: PathBuf,
}

#[derive(Args, Debug)]
struct ClusterArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Comb a given cluster list instead: a JSON array of subset-sequence documents.
    #[arg(long)]
    comb: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Directory holding spectrum.json, clustering.json or verify.json.
    #[arg(long)]
    input: PathBuf,
}

fn config(cli: &Cli) -> limclust::Result<Config> {
    let mut cfg = match &cli.config {
        Some(path) => Config::from_file(path)?,
        None => Config::default(),
    };
    for item in &cli.overrides {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| Error::Input(format!("--set expects key=value, got '{item}'")))?;
        cfg.set(key.trim(), value)?;
    }
    if let Some(p) = cli.parallelism {
        cfg.set("parallelism", &p.to_string())?;
    }
    if let Some(out) = &cli.output {
        cfg.output = out.clone();
    }
    Ok(cfg)
}

fn report_error(err: &Error, json: bool) {
    if json {
        let doc = serde_json::json!({ "error": err.kind(), "message": err.to_string() });
        eprintln!("{doc}");
    } else {
        eprintln!("error: {err}");
    }
}

fn main() -> ExitCode {
    let json_errors = std::env::args().any(|a| a == "--json-errors");
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::from(EXIT_OK);
        }
        Err(e) => {
            if json_errors {
                let doc = serde_json::json!({ "error": "usage", "message": e.to_string().trim() });
                eprintln!("{doc}");
            } else {
                eprint!("{e}");
            }
            return ExitCode::from(EXIT_INPUT);
        }
    };
    let cfg = match config(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            report_error(&e, cli.json_errors);
            return ExitCode::from(EXIT_INPUT);
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cfg.parallelism).build() {
        Ok(pool) => pool,
        Err(e) => {
            report_error(&Error::Input(e.to_string()), cli.json_errors);
            return ExitCode::from(EXIT_INPUT);
        }
    };
    match pool.install(|| commands::run(&cli.command, &cfg)) {
        Ok(true) => ExitCode::from(EXIT_OK),
        Ok(false) => ExitCode::from(EXIT_FAILED),
        Err(e) => {
            report_error(&e, cli.json_errors);
            ExitCode::from(EXIT_INPUT)
        }
    }
}
