//! The `homdp` command line: MDP file tooling, quotients, minimisation and metrics,
//! the `verify` suites, and training runs.
//!
//! Commands that produce files write them into one run directory under the output root
//! (flag `--output-root` or the `HOMDP_OUTPUT_ROOT` environment variable) together with a
//! `manifest.json`. `homdp rerun <manifest>` replays a recorded command.
//!
//! Exit codes: 0 success, 1 a check or numerical procedure failed, 2 bad input.

pub mod error;
pub mod finite;
pub mod manifest;
pub mod training;
pub mod verify;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use homdp_control::dhpg::{AgentConfig, Variant};

pub use error::{CliError, Result, EXIT_CHECK_FAILED, EXIT_INPUT, EXIT_OK};
use manifest::{RunDir, RunManifest, OUTPUT_ROOT_ENV};
use verify::Suite;

#[derive(Parser, Debug, Clone)]
#[command(name = "homdp", version, about = "MDP homomorphisms: quotients, metrics, verification and DHPG training")]
pub struct Cli {
    /// Directory under which run directories are created.
    #[arg(long, global = true, env = OUTPUT_ROOT_ENV, default_value = "homdp-runs")]
    pub output_root: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Validate or summarise an MDP file.
    #[command(subcommand)]
    Mdp(MdpCommand),
    /// Build the quotient of an MDP under a homomorphism.
    Quotient(QuotientArgs),
    /// Find the coarsest lax-bisimulation homomorphism of an MDP.
    Minimize(MinimizeArgs),
    /// Compute a bisimulation or lax bisimulation metric table.
    Metrics(MetricsArgs),
    /// Run a verification suite; exits 1 if any check fails.
    Verify(VerifyArgs),
    /// Train an agent on a continuous-control environment.
    Train(TrainArgs),
    /// Replay the command recorded in a run manifest.
    Rerun(RerunArgs),
}

#[derive(Subcommand, Debug, Clone)]
pub enum MdpCommand {
    /// Check schema and stochasticity; exits 2 with the offending row on failure.
    Validate { file: PathBuf },
    /// Print a JSON summary of the MDP.
    Show { file: PathBuf },
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct QuotientArgs {
    pub mdp: PathBuf,
    pub homomorphism: PathBuf,
    /// Absolute tolerance on rewards and block masses.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    /// Run directory; defaults to a name derived from the inputs under the output root.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct MinimizeArgs {
    pub mdp: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    pub tol: f64,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Bisim,
    Lax,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct MetricsArgs {
    pub mdp: PathBuf,
    #[arg(long, value_enum)]
    pub kind: MetricKind,
    /// Reward weight.
    #[arg(long, default_value_t = 1.0)]
    pub c_r: f64,
    /// Transition weight; defaults to the discount factor.
    #[arg(long)]
    pub c_t: Option<f64>,
    /// Sup-norm accuracy of the fixed point.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value_t = Suite::All)]
    pub suite: Suite,
    /// Break the homomorphisms under test; the affected checks must then fail.
    #[arg(long)]
    pub negative_control: bool,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct TrainArgs {
    /// `pendulum` or `lqr`.
    #[arg(long, default_value = "pendulum")]
    pub env: String,
    /// Overrides the variant of the configuration.
    #[arg(long)]
    pub variant: Option<Variant>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100_000)]
    pub steps: u64,
    /// JSON agent configuration; unspecified fields take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Distance below which a probe of the learned action map counts as symmetric.
    #[arg(long, default_value_t = 0.2)]
    pub symmetry_threshold: f64,
    /// Suppress per-episode progress on stderr.
    #[arg(long)]
    pub quiet: bool,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    /// Configuration restored from a manifest by `rerun`.
    #[arg(skip)]
    #[serde(skip)]
    pub resolved_config: Option<AgentConfig>,
}

#[derive(Args, Debug, Clone)]
pub struct RerunArgs {
    pub manifest: PathBuf,
    /// Run directory for the replay.
    #[arg(long)]
    pub out: PathBuf,
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "input".to_string(), |s| s.to_string_lossy().into_owned())
}

fn run_dir(root: &Path, out: &Option<PathBuf>, default_name: String) -> Result<RunDir> {
    RunDir::create(out.clone().unwrap_or_else(|| root.join(default_name)))
}

/// Finishes the manifest whatever the outcome and passes the outcome through.
fn record(
    run: RunDir,
    command: &str,
    argv: &[String],
    config: serde_json::Value,
    seed: Option<u64>,
    outcome: Result<i32>,
) -> Result<i32> {
    let code = match &outcome {
        Ok(code) => *code,
        Err(e) => e.exit_code(),
    };
    let path = run.finish(command, argv, config, seed, code)?;
    if code == EXIT_OK {
        println!("wrote {}", path.display());
    }
    outcome
}

/// Runs a parsed command line. `argv` excludes the program name and is recorded in
/// manifests. Returns the exit code of a completed run.
pub fn execute(cli: Cli, argv: &[String]) -> Result<i32> {
    let root = cli.output_root;
    match cli.command {
        Command::Mdp(MdpCommand::Validate { file }) => finite::validate(&file),
        Command::Mdp(MdpCommand::Show { file }) => finite::show(&file),
        Command::Quotient(args) => {
            let mut run = run_dir(&root, &args.out, format!("quotient-{}-{}", stem(&args.mdp), stem(&args.homomorphism)))?;
            let outcome = finite::quotient(&args, &mut run);
            record(run, "quotient", argv, serde_json::to_value(&args)?, None, outcome)
        }
        Command::Minimize(args) => {
            let mut run = run_dir(&root, &args.out, format!("minimize-{}", stem(&args.mdp)))?;
            let outcome = finite::minimize(&args, &mut run);
            record(run, "minimize", argv, serde_json::to_value(&args)?, None, outcome)
        }
        Command::Metrics(args) => {
            let kind = serde_json::to_value(args.kind)?;
            let name = format!("metrics-{}-{}", stem(&args.mdp), kind.as_str().unwrap_or("metric"));
            let mut run = run_dir(&root, &args.out, name)?;
            let outcome = finite::metrics(&args, &mut run);
            record(run, "metrics", argv, serde_json::to_value(&args)?, None, outcome)
        }
        Command::Verify(args) => {
            let suffix = if args.negative_control { "-negative-control" } else { "" };
            let mut run = run_dir(&root, &args.out, format!("verify-{}{suffix}", args.suite))?;
            let outcome = run_verify(&args, &mut run);
            record(run, "verify", argv, serde_json::to_value(&args)?, None, outcome)
        }
        Command::Train(args) => {
            let config = training::resolve_config(&args)?;
            let name = format!("train-{}-{}-seed{}-steps{}", args.env, config.variant, args.seed, args.steps);
            let mut run = run_dir(&root, &args.out, name)?;
            let outcome = training::train(&args, &config, &mut run);
            let snapshot = serde_json::json!({ "env": args.env, "steps": args.steps, "agent": config });
            record(run, "train", argv, snapshot, Some(args.seed), outcome)
        }
        Command::Rerun(args) => rerun(&args),
    }
}

fn run_verify(args: &VerifyArgs, run: &mut RunDir) -> Result<i32> {
    let outcomes = verify::run_suite(args.suite, args.negative_control)?;
    for o in &outcomes {
        println!("{} {}: {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.summary);
        run.write_json(&format!("{}/{}.json", o.suite, o.name), o)?;
    }
    let failed: Vec<&str> = outcomes.iter().filter(|o| !o.passed).map(|o| o.name).collect();
    run.write_json(
        "verify.json",
        &serde_json::json!({
            "suite": args.suite,
            "negative_control": args.negative_control,
            "passed": failed.is_empty(),
            "checks": outcomes.iter().map(|o| serde_json::json!({"name": o.name, "suite": o.suite, "passed": o.passed})).collect::<Vec<_>>(),
        }),
    )?;
    if failed.is_empty() {
        Ok(EXIT_OK)
    } else {
        Err(CliError::CheckFailed(format!("failed checks: {}", failed.join(", "))))
    }
}

fn rerun(args: &RerunArgs) -> Result<i32> {
    let manifest = RunManifest::load(&args.manifest)?;
    let argv: Vec<String> = std::iter::once("homdp".to_string()).chain(manifest.args.iter().cloned()).collect();
    let mut cli = Cli::try_parse_from(&argv)
        .map_err(|e| CliError::Input(format!("manifest arguments do not parse: {e}")))?;
    let out = Some(args.out.clone());
    match &mut cli.command {
        Command::Quotient(a) => a.out = out,
        Command::Minimize(a) => a.out = out,
        Command::Metrics(a) => a.out = out,
        Command::Verify(a) => a.out = out,
        Command::Train(a) => {
            a.out = out;
            let agent = manifest
                .config
                .get("agent")
                .cloned()
                .ok_or_else(|| CliError::Input("train manifest has no agent configuration".into()))?;
            a.resolved_config = Some(serde_json::from_value(agent)?);
        }
        Command::Mdp(_) | Command::Rerun(_) => {
            return Err(CliError::Input(format!("{:?} does not produce a run directory", manifest.command)))
        }
    }
    execute(cli, &manifest.args)
}
