//! Commands on finite MDP files: validation, summaries, quotients, minimisation, metrics.

use std::path::Path;

use serde::Serialize;

use homdp_core::homomorphism::{minimize_lax, quotient_mdp};
use homdp_core::metrics::{bisim_metric, lax_bisim_metric, lax_state_metric};
use homdp_core::{FiniteHomomorphism, FiniteMdp, MdpError, MetricTable};

use crate::error::{Result, EXIT_CHECK_FAILED, EXIT_OK};
use crate::manifest::RunDir;
use crate::{MetricKind, MetricsArgs, MinimizeArgs, QuotientArgs};

/// Stochasticity and reward summary printed by `homdp mdp show`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MdpSummary {
    pub n_states: usize,
    pub n_actions: usize,
    pub gamma: f64,
    /// Largest `|Σ_t τ_a(t|s) − 1|` over all rows.
    pub max_row_sum_error: f64,
    pub min_nonzero_transition: f64,
    pub max_support_size: usize,
    /// Rows that put all their mass on one next state.
    pub deterministic_rows: usize,
    /// States that return to themselves with probability 1 under every action.
    pub absorbing_states: Vec<usize>,
    pub reward_min: f64,
    pub reward_max: f64,
}

impl MdpSummary {
    pub fn of(mdp: &FiniteMdp) -> Self {
        let (ns, na) = (mdp.n_states(), mdp.n_actions());
        let mut summary = Self {
            n_states: ns,
            n_actions: na,
            gamma: mdp.gamma(),
            max_row_sum_error: 0.0,
            min_nonzero_transition: f64::INFINITY,
            max_support_size: 0,
            deterministic_rows: 0,
            absorbing_states: Vec::new(),
            reward_min: f64::INFINITY,
            reward_max: f64::NEG_INFINITY,
        };
        for s in 0..ns {
            let mut absorbing = true;
            for a in 0..na {
                let row = mdp.transition_row(s, a);
                let sum: f64 = row.iter().sum();
                summary.max_row_sum_error = summary.max_row_sum_error.max((sum - 1.0).abs());
                let support = row.iter().filter(|&&p| p > 0.0).count();
                summary.max_support_size = summary.max_support_size.max(support);
                if let Some(min) = row.iter().copied().filter(|&p| p > 0.0).reduce(f64::min) {
                    summary.min_nonzero_transition = summary.min_nonzero_transition.min(min);
                }
                if support == 1 {
                    summary.deterministic_rows += 1;
                }
                absorbing &= row[s] == 1.0;
                summary.reward_min = summary.reward_min.min(mdp.reward(s, a));
                summary.reward_max = summary.reward_max.max(mdp.reward(s, a));
            }
            if absorbing {
                summary.absorbing_states.push(s);
            }
        }
        summary
    }
}

pub fn validate(path: &Path) -> Result<i32> {
    let mdp = FiniteMdp::load(path).map_err(|e| with_path(path, e))?;
    println!(
        "{}: valid MDP with {} states, {} actions, gamma {}",
        path.display(),
        mdp.n_states(),
        mdp.n_actions(),
        mdp.gamma()
    );
    Ok(EXIT_OK)
}

pub fn show(path: &Path) -> Result<i32> {
    let mdp = FiniteMdp::load(path).map_err(|e| with_path(path, e))?;
    println!("{}", serde_json::to_string_pretty(&MdpSummary::of(&mdp))?);
    Ok(EXIT_OK)
}

/// Prefixes load errors with the file they came from.
fn with_path(path: &Path, e: MdpError) -> crate::CliError {
    match e {
        MdpError::Io(source) => crate::CliError::io(path, source),
        other => crate::CliError::Input(format!("{}: {other}", path.display())),
    }
}

fn load_mdp(path: &Path) -> Result<FiniteMdp> {
    FiniteMdp::load(path).map_err(|e| with_path(path, e))
}

/// Writes `quotient.json` and `report.json`; an inconsistent homomorphism still gets both
/// files and exits 1.
pub fn quotient(args: &QuotientArgs, run: &mut RunDir) -> Result<i32> {
    let mdp = load_mdp(&args.mdp)?;
    let h = FiniteHomomorphism::load(&args.homomorphism).map_err(|e| with_path(&args.homomorphism, e))?;
    let (quotient, report, code) = match quotient_mdp(&mdp, &h, args.tol) {
        Ok((q, report)) => (q, report, EXIT_OK),
        Err(MdpError::InconsistentQuotient { quotient, report }) => (*quotient, report, EXIT_CHECK_FAILED),
        Err(e) => return Err(e.into()),
    };
    run.write_text("quotient.json", &quotient.to_json_string())?;
    run.write_json("report.json", &report)?;
    if code != EXIT_OK {
        eprintln!(
            "homomorphism is inconsistent: reward error {:.3e}, transition error {:.3e} (tol {:.1e})",
            report.reward_invariance_error, report.transition_equivariance_error, args.tol
        );
    }
    Ok(code)
}

pub fn minimize(args: &MinimizeArgs, run: &mut RunDir) -> Result<i32> {
    let mdp = load_mdp(&args.mdp)?;
    let (h, quotient) = minimize_lax(&mdp, args.tol)?;
    // The minimiser builds its quotient from the same preimages, so this re-check only
    // produces the report.
    let report = match quotient_mdp(&mdp, &h, args.tol.max(1e-12)) {
        Ok((_, report)) => report,
        Err(MdpError::InconsistentQuotient { report, .. }) => report,
        Err(e) => return Err(e.into()),
    };
    run.write_text("homomorphism.json", &h.to_json_string())?;
    run.write_text("quotient.json", &quotient.to_json_string())?;
    run.write_json(
        "report.json",
        &serde_json::json!({
            "n_states": mdp.n_states(),
            "n_actions": mdp.n_actions(),
            "n_abstract_states": h.n_abstract_states(),
            "n_abstract_actions": h.n_abstract_actions(),
            "homomorphism": report,
        }),
    )?;
    println!(
        "{} states -> {} abstract states, {} actions -> {} abstract actions",
        mdp.n_states(),
        h.n_abstract_states(),
        mdp.n_actions(),
        h.n_abstract_actions()
    );
    Ok(EXIT_OK)
}

fn write_table(run: &mut RunDir, name: &str, table: &MetricTable) -> Result<()> {
    let path = run.output(name)?;
    let mut writer = csv::Writer::from_path(&path)?;
    writer.write_record(["row", "col", "distance"])?;
    for i in 0..table.size {
        for j in 0..table.size {
            writer.serialize((i, j, table.get(i, j)))?;
        }
    }
    writer.flush().map_err(|e| crate::CliError::io(&path, e))?;
    Ok(())
}

fn table_summary(table: &MetricTable) -> serde_json::Value {
    let max = table.d.iter().copied().fold(0.0, f64::max);
    let classes = table.zero_classes();
    let n_classes = classes.iter().copied().max().map_or(0, |m| m + 1);
    serde_json::json!({
        "size": table.size,
        "c_r": table.c_r,
        "c_t": table.c_t,
        "iterations": table.iterations_run,
        "residual": table.residual,
        "max_distance": max,
        "zero_classes": classes,
        "n_zero_classes": n_classes,
    })
}

/// Writes `metric.csv` (`row, col, distance`) and `metric.json`. The lax metric is over
/// state-action pairs `s · n_actions + a`; its induced state metric goes to
/// `state_metric.csv`.
pub fn metrics(args: &MetricsArgs, run: &mut RunDir) -> Result<i32> {
    let mdp = load_mdp(&args.mdp)?;
    let c_t = args.c_t.unwrap_or(mdp.gamma());
    let mut summary = serde_json::Map::new();
    summary.insert("kind".into(), serde_json::to_value(args.kind)?);
    match args.kind {
        MetricKind::Bisim => {
            let table = bisim_metric(&mdp, args.c_r, c_t, args.tol)?;
            write_table(run, "metric.csv", &table)?;
            summary.insert("metric".into(), table_summary(&table));
        }
        MetricKind::Lax => {
            let table = lax_bisim_metric(&mdp, args.c_r, c_t, args.tol)?;
            let states = lax_state_metric(&table, mdp.n_actions());
            write_table(run, "metric.csv", &table)?;
            write_table(run, "state_metric.csv", &states)?;
            summary.insert("metric".into(), table_summary(&table));
            summary.insert("state_metric".into(), table_summary(&states));
        }
    }
    run.write_json("metric.json", &summary)?;
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;
    use homdp_core::generators::symmetric_ring_mdp;

    #[test]
    fn summary_of_a_deterministic_ring() {
        let mdp = symmetric_ring_mdp(4, 2, 0.9);
        let s = MdpSummary::of(&mdp);
        assert_eq!((s.n_states, s.n_actions), (4, 2));
        assert!(s.max_row_sum_error <= 1e-12);
        assert!(s.min_nonzero_transition > 0.0);
        assert!(s.reward_min <= s.reward_max);
    }
}
