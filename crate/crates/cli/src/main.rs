use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, ValueEnum};
use uptest::cli_io::{run, ManualInputSpec, RunOptions};
use uptest::explorer::budget::ACTIONS_PER_HOUR;
use uptest::explorer::{CampaignConfig, Strategy};
use uptest::scenario::Scenario;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StrategyArg {
    Atua,
    Random,
}

/// Tests the updated methods of a simulated app.
#[derive(Debug, Parser)]
#[command(name = "uptest", version)]
struct Args {
    /// Scenario file (JSON).
    scenario: PathBuf,
    /// 1 for short campaigns, 2 for long ones.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
    scale_factor: u8,
    /// Counted-action budget.
    #[arg(long, conflicts_with = "budget_hours")]
    budget_actions: Option<usize>,
    /// Budget in hours, converted with a fixed actions-per-hour rate.
    #[arg(long)]
    budget_hours: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = StrategyArg::Atua)]
    strategy: StrategyArg,
    /// Manual input definitions (JSON).
    #[arg(long)]
    manual_inputs: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Only compute the updated methods.
    #[arg(long)]
    diff_only: bool,
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> anyhow::Result<()> {
    let args = Args::parse();
    let scenario = Scenario::load(&args.scenario)
        .with_context(|| format!("loading scenario {}", args.scenario.display()))?;
    let budget = match (args.budget_actions, args.budget_hours) {
        (Some(n), _) => n,
        (None, Some(h)) => {
            if !(h.is_finite() && h >= 0.0) {
                bail!("--budget-hours must be a non-negative number");
            }
            (h * ACTIONS_PER_HOUR as f64).round() as usize
        }
        (None, None) => ACTIONS_PER_HOUR,
    };
    let manual_inputs = match &args.manual_inputs {
        Some(p) => ManualInputSpec::load(p)?,
        None => ManualInputSpec::default(),
    };
    let opts = RunOptions {
        campaign: CampaignConfig {
            scale_factor: args.scale_factor as usize,
            budget,
            seed: args.seed,
            manual_inputs,
            strategy: match args.strategy {
                StrategyArg::Atua => Strategy::Atua,
                StrategyArg::Random => Strategy::Random,
            },
        },
        out: args.out,
        diff_only: args.diff_only,
    };
    for path in run(&scenario, &opts)? {
        println!("{}", path.display());
    }
    Ok(())
}
