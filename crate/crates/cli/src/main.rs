use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use permakernel::combinatorics::{antisym_feature_dim, poly_feature_dim, sym_feature_dim};
use permakernel::experiments::run_experiment;
use permakernel::io::{write_report, ExperimentConfig};
use permakernel::par::configure_threads_from_env;
use permakernel::Exec;

#[derive(Parser)]
#[command(
    name = "permakernel",
    version,
    about = "Symmetric and antisymmetric kernel experiments"
)]
struct Cli {
    /// Run repetitions on a single thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Feature-space dimensions; `--d/--p` prints a single CSV row.
    Featdim {
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        p: Option<usize>,
        #[command(flatten)]
        io: IoArgs,
    },
    /// Evaluate a kernel on configured point pairs.
    KernelEval(IoArgs),
    /// RMSE against sample size for plain, antisymmetric and augmented KRR.
    RegressDemo(IoArgs),
    /// Empirical Mercer features on a grid.
    Mercer(IoArgs),
    /// Constrained collocation eigenvalues for particles in a box.
    SchrodingerBox(IoArgs),
    /// Kernel PCA on random connected graphs.
    GraphKpca(IoArgs),
    /// Boiling-point regression with the graph kernel.
    BoilingPoints(IoArgs),
}

#[derive(Args)]
struct IoArgs {
    /// JSON experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output` in the config).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read_config(path: Option<&Path>) -> anyhow::Result<serde_json::Value> {
    let Some(path) = path else {
        return Ok(serde_json::json!({}));
    };
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn run(name: &str, io: &IoArgs, exec: Exec, config_required: bool) -> anyhow::Result<()> {
    if config_required && io.config.is_none() {
        bail!("{name} requires --config <file>");
    }
    let value = read_config(io.config.as_deref())?;
    let common: ExperimentConfig =
        serde_json::from_value(value.clone()).context("experiment config")?;
    common.validate()?;
    if let Some(exp) = &common.experiment {
        if exp != name {
            bail!("config is for experiment '{exp}', not '{name}'");
        }
    }
    let report = run_experiment(name, &value, exec)?;
    let dir = io
        .out
        .clone()
        .or(common.output)
        .unwrap_or_else(|| PathBuf::from("."));
    for path in write_report(&dir, &report, common.format)? {
        println!("{}", path.display());
    }
    for (key, v) in &report.summary {
        eprintln!("{key} = {v}");
    }
    for note in &report.notes {
        eprintln!("note: {note}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads_from_env();
    let exec = if cli.sequential {
        Exec::Sequential
    } else {
        Exec::Parallel
    };
    let result = match &cli.command {
        Command::Featdim {
            d: Some(d),
            p: Some(p),
            ..
        } => {
            println!("d,p,n_phi,n_phi_a,n_phi_s");
            println!(
                "{d},{p},{},{},{}",
                poly_feature_dim(*d, *p),
                antisym_feature_dim(*d, *p),
                sym_feature_dim(*d, *p)
            );
            Ok(())
        }
        Command::Featdim {
            d: None,
            p: None,
            io,
        } => run("featdim", io, exec, false),
        Command::Featdim { .. } => Err(anyhow::anyhow!("--d and --p must be given together")),
        Command::KernelEval(io) => run("kernel-eval", io, exec, true),
        Command::RegressDemo(io) => run("regress-demo", io, exec, false),
        Command::Mercer(io) => run("mercer", io, exec, true),
        Command::SchrodingerBox(io) => run("schrodinger-box", io, exec, true),
        Command::GraphKpca(io) => run("graph-kpca", io, exec, false),
        Command::BoilingPoints(io) => run("boiling-points", io, exec, false),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
