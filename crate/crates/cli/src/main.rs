use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use mdcpp_cli::config::{parse_strategy, RangeConfig, ScenarioConfig};
use mdcpp_cli::{batch, output, plotdata};

/// Multi-robot dynamic coverage path planning simulator.
#[derive(Parser)]
#[command(name = "mdcpp", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (TOML).
    #[arg(long)]
    scenario: PathBuf,
    /// Strategy: mdcpp, dynamic, or sweeping. Overrides the file value.
    #[arg(long)]
    strategy: Option<String>,
    /// RNG seed. Overrides the file value.
    #[arg(long)]
    seed: Option<u64>,
    /// Communication range in meters, or "unlimited". Overrides the file.
    #[arg(long)]
    comm_range: Option<String>,
    /// Output root directory.
    #[arg(long, default_value = "runs")]
    out: PathBuf,
}

#[derive(Args)]
struct BatchArgs {
    /// Scenario files; each runs against every strategy.
    #[arg(long, num_args = 1.., required = true)]
    scenarios: Vec<PathBuf>,
    /// Strategies to run (default: all three).
    #[arg(long, num_args = 1.., default_values = ["mdcpp", "dynamic", "sweeping"])]
    strategies: Vec<String>,
    /// Seeds per combination: seed_base, seed_base+1, ...
    #[arg(long, default_value_t = 1)]
    repeats: u64,
    /// First seed of the batch.
    #[arg(long, default_value_t = 1)]
    seed_base: u64,
    /// Output root directory.
    #[arg(long, default_value = "runs")]
    out: PathBuf,
}

#[derive(Args)]
struct PlotDataArgs {
    /// A finished run directory (or batch directory for summary-bars).
    #[arg(long)]
    run: PathBuf,
    /// Which data product to emit.
    #[arg(long, value_enum)]
    kind: plotdata::PlotKind,
    /// Where to write the plot files (default: <run>/plot).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Scenario file to check.
    #[arg(long)]
    scenario: PathBuf,
    /// Seed to assume when the file does not set one.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its logs.
    Run(RunArgs),
    /// Run a scenario x strategy x seed matrix and summarize it.
    Batch(BatchArgs),
    /// Reshape finished-run logs into plot-ready files.
    PlotData(PlotDataArgs),
    /// Check a scenario file and exit.
    Validate(ValidateArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run(args) => {
            let strategy = args.strategy.as_deref().map(parse_strategy).transpose()?;
            let range = args
                .comm_range
                .as_deref()
                .map(RangeConfig::parse)
                .transpose()?
                .map(|r| r.to_comm_range())
                .transpose()?;
            let (dir, record) =
                output::execute_run(&args.scenario, strategy, args.seed, range, &args.out)?;
            let r = &record.result;
            println!("run written to {}", dir.display());
            match r.completion_time {
                Some(t) => println!(
                    "completed in {t:.1} s simulated, total path {:.1} m, {} re-partitions",
                    r.total_path_length, r.partition_events
                ),
                None => println!("watchdog stopped the run before complete coverage"),
            }
            Ok(if r.completed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }
        Command::Batch(args) => {
            let strategies = args
                .strategies
                .iter()
                .map(|s| parse_strategy(s))
                .collect::<Result<Vec<_>, _>>()?;
            let summary = batch::run_batch(
                &args.scenarios,
                &strategies,
                args.repeats,
                args.seed_base,
                &args.out,
            )?;
            println!(
                "batch finished: {} runs, summary in {}",
                summary.rows.len(),
                args.out.join("batch_summary.txt").display()
            );
            for a in &summary.aggregates {
                println!(
                    "{} {}: mean time {:.1} s (std {:.1}), mean path {:.1} m over {} runs",
                    a.scenario,
                    a.strategy.name(),
                    a.mean_time,
                    a.std_time,
                    a.mean_path,
                    a.runs
                );
            }
            Ok(if summary.all_completed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }
        Command::PlotData(args) => {
            let out = args.out.unwrap_or_else(|| args.run.join("plot"));
            let files = plotdata::emit_plot_data(&args.run, args.kind, &out)?;
            for f in &files {
                println!("{}", f.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate(args) => {
            let config = ScenarioConfig::load(&args.scenario)?;
            config.to_scenario(args.seed, None, None)?;
            println!("{} is valid", args.scenario.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}
