use std::path::PathBuf;
use std::process::ExitCode;

use alignflow::cases::CASES;
use alignflow_cli::artifacts::{Manifest, Sink};
use alignflow_cli::commands;
use alignflow_cli::config::{self, Loaded, RunConfig};
use anyhow::{bail, Result};
use clap::{Args, CommandFactory, Parser, Subcommand};

const DEFAULT_OUT: &str = "alignflow-out";

#[derive(Parser)]
#[command(name = "alignflow", version, about = "Simulate unidirectional alignment flows and analyze their limits")]
#[command(arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for the interaction sums (results do not depend on it).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Seed of the sampled separation pairs; overrides `analysis.limit.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ConfigArg {
    /// Run config, TOML or (with a .json extension) JSON.
    #[arg(long)]
    config: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the flow and write the trajectory and diagnostics.
    Simulate(ConfigArg),
    /// Simulate, then extract the limit map and measure and check its bounds.
    Limit(ConfigArg),
    /// Limit analysis plus box-counting and local dimension estimates.
    Dimension(ConfigArg),
    /// Integrate a pair of runs and check the stability inequalities.
    Stability(ConfigArg),
    /// Run a named acceptance case end to end (or `all`).
    Reproduce {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(CASES.iter().copied().chain(["all"])))]
        case: String,
    },
}

enum Failure {
    Usage(String),
    Run(anyhow::Error),
}

fn load(arg: &ConfigArg, seed: Option<u64>) -> std::result::Result<RunConfig, Failure> {
    match config::load(&arg.config).map_err(|e| Failure::Usage(format!("{e:#}")))? {
        Loaded::Empty => Err(Failure::Usage(format!("{} is empty", arg.config.display()))),
        Loaded::Config(mut c) => {
            if let Some(s) = seed {
                c.analysis.limit.seed = s;
            }
            Ok(*c)
        }
    }
}

fn run(cli: &Cli) -> std::result::Result<bool, Failure> {
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(Failure::Usage("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Run(e.into()))?;
    }
    let (name, outcome) = match &cli.command {
        Command::Reproduce { case } => {
            if cli.seed.is_some() {
                return Err(Failure::Usage("--seed has no effect on reproduce; the cases fix their seeds".into()));
            }
            let manifest = Manifest::new("reproduce", 0, serde_json::json!({ "case": case }));
            let dir = cli.out.clone().unwrap_or_else(|| DEFAULT_OUT.into());
            let mut sink = Sink::create(&dir, &manifest).map_err(Failure::Run)?;
            ("reproduce", commands::reproduce(case, &mut sink).map_err(Failure::Run)?)
        }
        Command::Simulate(a) | Command::Limit(a) | Command::Dimension(a) | Command::Stability(a) => {
            let cfg = load(a, cli.seed)?;
            let name = match &cli.command {
                Command::Simulate(_) => "simulate",
                Command::Limit(_) => "limit",
                Command::Dimension(_) => "dimension",
                _ => "stability",
            };
            let resolved = serde_json::to_value(&cfg).map_err(|e| Failure::Run(e.into()))?;
            let manifest = Manifest::new(name, cfg.analysis.limit.seed, resolved);
            let dir = cli
                .out
                .clone()
                .or_else(|| cfg.output.dir.clone())
                .unwrap_or_else(|| DEFAULT_OUT.into());
            let go = || -> Result<commands::Outcome> {
                let mut sink = Sink::create(&dir, &manifest)?;
                match name {
                    "simulate" => commands::simulate(&cfg, &mut sink),
                    "limit" => commands::limit(&cfg, &mut sink),
                    "dimension" => commands::dimension(&cfg, &mut sink),
                    "stability" => commands::stability(&cfg, &mut sink),
                    _ => bail!("unknown command {name}"),
                }
            };
            (name, go().map_err(Failure::Run)?)
        }
    };
    for line in &outcome.lines {
        println!("{line}");
    }
    println!("{name}: {}", if outcome.passed { "all checks passed" } else { "checks FAILED" });
    Ok(outcome.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n");
            eprintln!("{}", Cli::command().render_usage());
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
