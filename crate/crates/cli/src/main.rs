use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use ftqc_cli::plot::plot_files;
use ftqc_cli::{execute, load, Overrides, Study};

#[derive(Parser)]
#[command(name = "ftqc", version, about = "Finite-time quantized coordination experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured cells and write one trace per run.
    Run(StudyArgs),
    /// Compare the algorithms over a grid of quantization levels.
    SweepQuantization(StudyArgs),
    /// Tail error of FTQC-DGD as a function of the mini-batch size.
    SweepBatch(StudyArgs),
    /// Tracking a drifting problem: seed-mean traces and epoch spikes.
    Online(StudyArgs),
    /// Draw CSV series as an SVG line chart.
    Plot(PlotArgs),
}

#[derive(Args)]
struct StudyArgs {
    /// TOML experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Use seeds 0..N instead of the configured ones.
    #[arg(long)]
    seeds: Option<u64>,
    /// Worker threads (defaults to the number of CPUs).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct PlotArgs {
    /// CSV files; the first column is the x axis.
    #[arg(long, required = true, num_args = 1..)]
    input: Vec<PathBuf>,
    /// Columns to draw (default: `err`, or every column).
    #[arg(long)]
    column: Vec<String>,
    #[arg(long, default_value = "plot.svg")]
    out: PathBuf,
    /// Linear instead of logarithmic y axis.
    #[arg(long)]
    linear: bool,
    #[arg(long, default_value = "")]
    title: String,
}

fn run_study(study: Study, args: &StudyArgs) -> anyhow::Result<()> {
    let overrides = Overrides { seeds: args.seeds };
    let exp = load(study, &args.config, overrides).with_context(|| args.config.display().to_string())?;
    let files = execute(study, &exp, &args.out, args.jobs)?;
    for f in files {
        println!("{}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => run_study(Study::Run, a),
        Command::SweepQuantization(a) => run_study(Study::SweepQuantization, a),
        Command::SweepBatch(a) => run_study(Study::SweepBatch, a),
        Command::Online(a) => run_study(Study::Online, a),
        Command::Plot(a) => plot_files(&a.input, &a.column, &a.out, !a.linear, &a.title)
            .map(|()| println!("{}", a.out.display()))
            .map_err(Into::into),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
