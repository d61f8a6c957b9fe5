use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use jamlab::commands::{run, Command, LoopSearchParams};
use jamlab::report::USAGE_EXIT_CODE;
use jamlab::scenario::{self, canned, parse_scenario, ScenarioSpec};
use jamlab_core::loops::MAX_TESTED_DEPTH;

#[derive(Parser)]
#[command(
    name = "jamlab",
    version,
    about = "Relativistic jamming and causal-loop experiments"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct Common {
    /// Scenario JSON file.
    #[arg(long, global = true, value_name = "PATH", conflicts_with = "canned")]
    scenario: Option<PathBuf>,
    /// Built-in scenario: fig1a, fig1d-selective or fig1e.
    #[arg(long, global = true, value_name = "NAME")]
    canned: Option<String>,
    /// Overrides the scenario seed; for loop-search, the search seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the trial count (per angle pair for chsh).
    #[arg(long, global = true)]
    trials: Option<u64>,
    /// Overrides the |z| threshold for flagging a signal.
    #[arg(long, global = true)]
    threshold: Option<f64>,
    /// Expected spatial dimension of the scenario; for loop-search, the only
    /// dimension searched.
    #[arg(long, global = true)]
    dimension: Option<usize>,
    /// Write the JSON report here instead of standard output.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check the binary condition J+(a) ∩ J+(b) ⊆ J+(j).
    Geometry,
    /// Sample trials with the jammer off and on and test for a signal.
    Simulate,
    /// Like simulate, with the geometric verdict alongside.
    Signal,
    /// Estimate the CHSH value at the scenario's four angle pairs.
    Chsh,
    /// Re-evaluate the scenario in a boosted frame.
    Boost {
        /// Frame velocity, one component per spatial dimension, |v| < 1.
        #[arg(
            long,
            required = true,
            value_delimiter = ',',
            allow_negative_numbers = true
        )]
        velocity: Vec<f64>,
    },
    /// Search random and adversarial relay configurations for a closed loop.
    LoopSearch {
        /// Largest relay depth searched; every depth from 0 up is covered.
        #[arg(long, default_value_t = MAX_TESTED_DEPTH)]
        depth: usize,
        /// Random configurations per (depth, dimension) cell.
        #[arg(long, default_value_t = LoopSearchParams::default().configurations_per_cell)]
        configs: usize,
        /// Adversarial hill-climbing runs per cell.
        #[arg(long, default_value_t = LoopSearchParams::default().adversarial_runs_per_cell)]
        adversarial: usize,
    },
    /// Print the resolved scenario, with every default filled in.
    Scenario,
}

fn load(common: &Common) -> Result<Option<ScenarioSpec>, String> {
    let mut spec = match (&common.scenario, &common.canned) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            parse_scenario(&text).map_err(|e| format!("{}: {e}", path.display()))?
        }
        (None, Some(name)) => canned(name).map_err(|e| e.to_string())?,
        (None, None) => return Ok(None),
    };
    if let Some(seed) = common.seed {
        spec.seed = seed;
    }
    if let Some(trials) = common.trials {
        spec.trials = trials;
    }
    if let Some(threshold) = common.threshold {
        spec.threshold = threshold;
    }
    if let Some(d) = common.dimension {
        if d != spec.dimension {
            return Err(format!(
                "--dimension {d} does not match the scenario's dimension {}",
                spec.dimension
            ));
        }
    }
    spec.validate().map_err(|e| e.to_string())?;
    Ok(Some(spec))
}

fn emit(text: &str, summary: &str, out: Option<&PathBuf>) -> Result<(), String> {
    match out {
        Some(path) => {
            std::fs::write(path, text)
                .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
            println!("{summary}");
        }
        None => {
            print!("{text}");
            if !summary.is_empty() {
                eprintln!("{summary}");
            }
        }
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<i32, String> {
    let common = &cli.common;
    let command = match cli.command {
        Cmd::Geometry => Command::Geometry,
        Cmd::Simulate => Command::Simulate,
        Cmd::Signal => Command::Signal,
        Cmd::Chsh => Command::Chsh,
        Cmd::Boost { velocity } => Command::Boost { velocity },
        Cmd::LoopSearch {
            depth,
            configs,
            adversarial,
        } => {
            if common.scenario.is_some() || common.canned.is_some() {
                return Err("loop-search does not take a scenario".into());
            }
            let defaults = LoopSearchParams::default();
            Command::LoopSearch(LoopSearchParams {
                seed: common.seed.unwrap_or(defaults.seed),
                max_depth: depth,
                dimensions: common.dimension.map_or(defaults.dimensions, |d| vec![d]),
                configurations_per_cell: configs,
                adversarial_runs_per_cell: adversarial,
            })
        }
        Cmd::Scenario => {
            let spec = load(common)?.ok_or("scenario needs --scenario or --canned")?;
            let mut text = scenario::to_json(&spec);
            text.push('\n');
            emit(&text, "", common.out.as_ref())?;
            return Ok(0);
        }
    };
    let spec = if command.needs_scenario() {
        load(common)?
    } else {
        None
    };
    let report = run(&command, spec.as_ref()).map_err(|e| e.to_string())?;
    emit(&report.to_json(), &report.summary(), common.out.as_ref())?;
    Ok(report.exit_code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { USAGE_EXIT_CODE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match execute(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(USAGE_EXIT_CODE as u8)
        }
    }
}
