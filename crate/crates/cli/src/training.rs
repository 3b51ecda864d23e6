//! The `train` command: one seeded run of an agent variant on a continuous environment.

use serde::Serialize;

use homdp_control::dhpg::{pendulum_symmetry_report, train as train_agent, AgentConfig, RunSummary, StepRow, SymmetryReport};
use homdp_control::envs::make_env;

use crate::error::{CliError, Result, EXIT_OK};
use crate::manifest::RunDir;
use crate::TrainArgs;

/// Contents of `summary.json`.
#[derive(Clone, Debug, Serialize)]
pub struct TrainReport {
    pub env: String,
    #[serde(flatten)]
    pub summary: RunSummary,
    /// Only for pendulum runs of variants that learn an action map.
    pub symmetry: Option<SymmetryReport>,
}

/// The configuration a run uses: a snapshot restored by `rerun`, else the `--config` file or
/// the defaults, with `--variant` applied on top.
pub fn resolve_config(args: &TrainArgs) -> Result<AgentConfig> {
    if let Some(config) = &args.resolved_config {
        config.validate()?;
        return Ok(config.clone());
    }
    let mut config = match &args.config {
        Some(path) => AgentConfig::load(path)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?,
        None => AgentConfig::default(),
    };
    if let Some(variant) = args.variant {
        config.variant = variant;
    }
    config.validate()?;
    Ok(config)
}

/// Writes `config.json`, `log.csv` (one row per agent step), `summary.json` and
/// `checkpoint.json`. On numerical divergence the log written so far stays in place and the
/// error is recorded in `failure.json`.
pub fn train(args: &TrainArgs, config: &AgentConfig, run: &mut RunDir) -> Result<i32> {
    let env = make_env(&args.env)?;
    run.write_json("config.json", config)?;
    let log_path = run.output("log.csv")?;
    let mut writer = csv::Writer::from_path(&log_path)?;
    let quiet = args.quiet;
    let mut sink = |row: &StepRow| -> homdp_control::Result<()> {
        writer.serialize(row)?;
        if let (Some(ret), false) = (row.episode_return, quiet) {
            eprintln!("step {:>7}  episode return {ret:9.3}", row.step + 1);
        }
        Ok(())
    };
    let outcome = train_agent(env.as_ref(), config, args.seed, args.steps, &mut sink);
    writer.flush().map_err(|e| CliError::io(&log_path, e))?;
    let (agent, summary) = match outcome {
        Ok(done) => done,
        Err(e) => {
            run.write_json("failure.json", &serde_json::json!({ "error": e.to_string() }))?;
            return Err(e.into());
        }
    };

    let symmetry = if args.env == "pendulum" {
        pendulum_symmetry_report(&agent, args.symmetry_threshold)?
    } else {
        None
    };
    run.write_text("checkpoint.json", &agent.checkpoint().to_json_string())?;
    let report = TrainReport {
        env: args.env.clone(),
        summary,
        symmetry,
    };
    run.write_json("summary.json", &report)?;
    println!(
        "{} seed {}: final return {:.3} over {} evaluation episodes",
        report.summary.variant,
        args.seed,
        report.summary.final_return,
        report.summary.eval_returns.len()
    );
    Ok(EXIT_OK)
}
