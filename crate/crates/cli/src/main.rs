use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use mirrorbench::agents::{BackendSpec, RemoteEndpointConfig};
use mirrorbench::harness::{
    load_aggregate, render_csv, render_grid, replay, report, run_experiment, RunConfig,
};
use mirrorbench::world::Condition;

#[derive(Parser, Debug)]
#[command(name = "mirrorbench", version, about = "Mirror self-recognition benchmark runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run episodes and write traces and aggregates.
    Run(RunArgs),
    /// Recompute metrics from a trace file.
    Replay {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Build result tables from one or more result directories.
    Report {
        #[arg(long = "in", required = true, num_args = 1..)]
        inputs: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Grid)]
        format: Format,
        /// Also write report.csv and report.txt into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(clap::Args, Debug)]
struct RunArgs {
    /// Condition(s), e.g. `E1` or `E1,E5`.
    #[arg(long, value_delimiter = ',', required = true)]
    condition: Vec<Condition>,
    /// perfect_oracle, random_walker, blind_guesser, confabulator,
    /// mirror_starer, or remote.
    #[arg(long)]
    backend: String,
    #[arg(long, default_value_t = 0)]
    base_seed: u64,
    #[arg(long, default_value_t = 3)]
    seeds: u32,
    #[arg(long, default_value_t = 7)]
    runs: u32,
    #[arg(long, default_value_t = 100)]
    max_steps: u32,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    save_frames: bool,
    #[arg(long)]
    parallel: Option<usize>,
    /// Remote backend: chat-completions base URL.
    #[arg(long)]
    base_url: Option<String>,
    /// Remote backend: model identifier.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    max_in_flight: Option<usize>,
    #[arg(long)]
    max_retries: Option<u32>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum Format {
    Csv,
    Grid,
    Both,
}

fn backend_from(args: &RunArgs) -> Result<BackendSpec> {
    if args.backend == "remote" {
        let (Some(url), Some(model)) = (&args.base_url, &args.model) else {
            bail!("--backend remote needs --base-url and --model");
        };
        let mut cfg = RemoteEndpointConfig::new(url.clone(), model.clone());
        if let Some(t) = args.temperature {
            cfg.temperature = t;
        }
        if let Some(n) = args.max_in_flight {
            cfg.max_in_flight = n;
        }
        if let Some(n) = args.max_retries {
            cfg.max_retries = n;
        }
        return Ok(BackendSpec::Remote(cfg));
    }
    BackendSpec::parse_kind(&args.backend).with_context(|| format!("unknown backend {:?}", args.backend))
}

fn run(args: RunArgs) -> Result<ExitCode> {
    let backend = backend_from(&args)?;
    let mut cfg = RunConfig::new(args.condition.clone(), backend, &args.out);
    cfg.base_seed = args.base_seed;
    cfg.seeds_per_condition = args.seeds;
    cfg.runs_per_seed = args.runs;
    cfg.max_steps = args.max_steps;
    cfg.save_frames = args.save_frames;
    if let Some(p) = args.parallel {
        cfg.parallel = p;
    }
    let infra = run_experiment(&cfg)?;
    for c in &infra.conditions {
        println!(
            "{}: {}/{} episodes -> {}",
            c.condition,
            c.completed,
            c.attempted,
            c.traces_path.display()
        );
    }
    if infra.aborted_total() > 0 {
        eprintln!("{} episode(s) aborted; see infrastructure.json", infra.aborted_total());
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> Result<ExitCode> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();

    match Cli::parse().command {
        Command::Run(args) => run(args),
        Command::Replay { input } => {
            let agg = replay(&input)?;
            println!("{}", serde_json::to_string_pretty(&agg)?);
            // Compare against the aggregate stored next to the traces.
            let stored = input
                .file_name()
                .and_then(|n| n.to_str())
                .and_then(|n| n.strip_prefix("traces_"))
                .and_then(|n| n.strip_suffix(".jsonl"))
                .map(|c| input.with_file_name(format!("aggregate_{c}.json")));
            if let Some(path) = stored.filter(|p| p.exists()) {
                let file = load_aggregate(&path)?;
                if file.aggregate.as_ref() != Some(&agg) {
                    eprintln!("replayed metrics differ from {}", path.display());
                    return Ok(ExitCode::from(1));
                }
                eprintln!("matches {}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Report { inputs, format, out } => {
            let tables = report(&inputs)?;
            let csv = render_csv(&tables);
            let grid = render_grid(&tables);
            match format {
                Format::Csv => print!("{csv}"),
                Format::Grid => print!("{grid}"),
                Format::Both => print!("{csv}\n{grid}"),
            }
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir)?;
                std::fs::write(dir.join("report.csv"), &csv)?;
                std::fs::write(dir.join("report.txt"), &grid)?;
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
