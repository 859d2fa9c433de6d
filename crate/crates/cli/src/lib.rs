//! Batch driver: scenario loading, subcommands and output files.

pub mod outputs;
pub mod period;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use ehnet_core::engine::{self, SimError};
use ehnet_core::scenario::{parse_scenario, Mode, Scenario, ScenarioError};
use thiserror::Error;

#[derive(Debug, Parser)]
#[command(
    name = "ehnet",
    version,
    about = "Energy-harvesting network scheduling and simulation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a scenario and write trace, metrics and plot data.
    Run(RunArgs),
    /// Resultant-period analysis of the periodic sources, or a random sweep.
    AnalyzePeriod(AnalyzeArgs),
    /// TDMA schedulability of the scenario's tx tasks.
    CheckSched(CommonArgs),
    /// Independent replications with derived seeds.
    Replicate(ReplicateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the scenario mode.
    #[arg(long)]
    pub mode: Option<Mode>,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    #[arg(long, required_unless_present = "sweep")]
    pub scenario: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed of the sweep generator (or scenario seed override).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Analyze this many random configurations instead of a scenario.
    #[arg(long)]
    pub sweep: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct ReplicateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, default_value_t = 100)]
    pub replications: u64,
    /// Worker threads; all cores when absent.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("{0}")]
    Invalid(String),
    #[error("analysis not applicable: {0}")]
    NotApplicable(String),
    #[error("simulation failed: {0}")]
    Sim(#[from] SimError),
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Scenario(ScenarioError::Io { .. }) | CliError::Io { .. } => 3,
            CliError::Sim(SimError::Sink(_)) => 3,
            _ => 2,
        }
    }
}

/// Result of a command that completed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// Unschedulable task set, or a failed bound check.
    CheckFailed,
}

impl Outcome {
    pub fn exit_code(self) -> u8 {
        match self {
            Outcome::Success => 0,
            Outcome::CheckFailed => 1,
        }
    }
}

/// Reads and validates the scenario, applying command-line overrides.
pub fn load(path: &Path, seed: Option<u64>, mode: Option<Mode>) -> Result<Scenario, CliError> {
    let mut scenario = parse_scenario(path)?;
    if let Some(s) = seed {
        scenario.seed = s;
    }
    if let Some(m) = mode {
        scenario.mode = m;
        scenario.validate().map_err(ScenarioError::from)?;
    }
    Ok(scenario)
}

pub fn execute(cli: Cli, stdout: &mut dyn Write) -> Result<Outcome, CliError> {
    match cli.command {
        Command::Run(a) => cmd_run(&a.common, stdout),
        Command::AnalyzePeriod(a) => period::cmd_analyze_period(&a, stdout),
        Command::CheckSched(a) => cmd_check_sched(&a, stdout),
        Command::Replicate(a) => cmd_replicate(&a, stdout),
    }
}

pub fn cmd_run(args: &CommonArgs, stdout: &mut dyn Write) -> Result<Outcome, CliError> {
    let scenario = load(&args.scenario, args.seed, args.mode)?;
    let out = engine::run(&scenario)?;
    let files = outputs::run_files(&scenario, &out)?;
    let dir = args.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    outputs::write_files(&dir, &files)?;
    let m = out.metrics();
    say(
        stdout,
        &format!(
            "{} of {} tasks completed, {} missed; outputs in {}",
            m.tasks_completed,
            m.total_tasks,
            m.deadlines_missed,
            dir.display()
        ),
    )?;
    Ok(Outcome::Success)
}

pub fn cmd_check_sched(args: &CommonArgs, stdout: &mut dyn Write) -> Result<Outcome, CliError> {
    let scenario = load(&args.scenario, args.seed, args.mode)?;
    if scenario.superframe.is_none() {
        return Err(CliError::Invalid(
            "check-sched needs a superframe section in the scenario".into(),
        ));
    }
    let out = engine::run(&scenario)?;
    let sf = out.summary.superframe.as_ref().expect("superframe present");
    let report = outputs::sched_report(&scenario, sf);
    let text = outputs::pretty(&report);
    if let Some(dir) = &args.out {
        outputs::write_files(dir, &[("check_sched.json".into(), text.clone().into_bytes())])?;
    }
    say(stdout, &text)?;
    Ok(if sf.schedule.failed.is_empty() {
        Outcome::Success
    } else {
        Outcome::CheckFailed
    })
}

pub fn cmd_replicate(args: &ReplicateArgs, stdout: &mut dyn Write) -> Result<Outcome, CliError> {
    if args.replications == 0 {
        return Err(CliError::Invalid("--replications must be at least 1".into()));
    }
    let scenario = load(&args.common.scenario, args.common.seed, args.common.mode)?;
    let runs = match args.threads {
        Some(n) => engine::replicate_with_threads(&scenario, args.replications, scenario.seed, n)?,
        None => engine::replicate(&scenario, args.replications, scenario.seed)?,
    };
    let report = outputs::replicate_report(&scenario, &runs);
    let text = outputs::pretty(&report);
    if let Some(dir) = &args.common.out {
        let files = vec![
            ("replicate.json".to_string(), text.clone().into_bytes()),
            ("replications.csv".to_string(), outputs::replications_csv(&runs)?),
        ];
        outputs::write_files(dir, &files)?;
    }
    say(stdout, &text)?;
    Ok(Outcome::Success)
}

fn say(stdout: &mut dyn Write, text: &str) -> Result<(), CliError> {
    writeln!(stdout, "{text}").map_err(|source| CliError::Io {
        path: "<stdout>".into(),
        source,
    })
}
