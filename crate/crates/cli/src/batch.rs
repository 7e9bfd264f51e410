//! Seeded batch execution over scenarios, strategies, and repeats, with a
//! plain-text summary table of per-run rows and per-combination aggregates.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use mdcpp_core::engine::Strategy;

use crate::config::ScenarioConfig;
use crate::output;

#[derive(Debug, Clone, PartialEq)]
pub struct BatchRow {
    pub scenario: String,
    pub strategy: Strategy,
    pub seed: u64,
    pub completed: bool,
    pub completion_time: Option<f64>,
    pub total_path_length: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchAggregate {
    pub scenario: String,
    pub strategy: Strategy,
    pub runs: usize,
    pub completed_runs: usize,
    pub mean_time: f64,
    pub std_time: f64,
    pub mean_path: f64,
    pub std_path: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BatchSummary {
    pub rows: Vec<BatchRow>,
    pub aggregates: Vec<BatchAggregate>,
}

impl BatchSummary {
    pub fn all_completed(&self) -> bool {
        self.rows.iter().all(|r| r.completed)
    }

    pub fn aggregate_for(&self, scenario: &str, strategy: Strategy) -> Option<&BatchAggregate> {
        self.aggregates
            .iter()
            .find(|a| a.scenario == scenario && a.strategy == strategy)
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Run every (scenario, strategy, seed_base + r) combination, writing per-run
/// directories under `out_root` and `batch_summary.txt` beside them. A run
/// stopped by the watchdog is reported in its row; the batch continues.
pub fn run_batch(
    scenario_paths: &[PathBuf],
    strategies: &[Strategy],
    repeats: u64,
    seed_base: u64,
    out_root: &Path,
) -> Result<BatchSummary> {
    let mut summary = BatchSummary::default();
    for path in scenario_paths {
        let config =
            ScenarioConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
        for &strategy in strategies {
            for r in 0..repeats {
                let seed = seed_base + r;
                let (scenario, _) = config.to_scenario(Some(seed), Some(strategy), None)?;
                let record = mdcpp_core::engine::run(&scenario, strategy)?;
                output::write_run(out_root, &config, strategy, seed, &record)?;
                summary.rows.push(BatchRow {
                    scenario: config.name().to_string(),
                    strategy,
                    seed,
                    completed: record.result.completed,
                    completion_time: record.result.completion_time,
                    total_path_length: record.result.total_path_length,
                });
            }
            let rows: Vec<&BatchRow> = summary
                .rows
                .iter()
                .filter(|row| row.scenario == config.name() && row.strategy == strategy)
                .collect();
            let times: Vec<f64> = rows.iter().filter_map(|r| r.completion_time).collect();
            let paths: Vec<f64> = rows.iter().map(|r| r.total_path_length).collect();
            let (mean_time, std_time) = mean_std(&times);
            let (mean_path, std_path) = mean_std(&paths);
            summary.aggregates.push(BatchAggregate {
                scenario: config.name().to_string(),
                strategy,
                runs: rows.len(),
                completed_runs: times.len(),
                mean_time,
                std_time,
                mean_path,
                std_path,
            });
        }
    }
    write_summary(out_root, &summary)?;
    Ok(summary)
}

fn write_summary(out_root: &Path, summary: &BatchSummary) -> Result<()> {
    std::fs::create_dir_all(out_root)?;
    let mut text = String::from("# scenario strategy seed completed completion_time total_path_length\n");
    for row in &summary.rows {
        text.push_str(&format!(
            "{} {} {} {} {} {:.6}\n",
            row.scenario,
            row.strategy.name(),
            row.seed,
            row.completed,
            row.completion_time
                .map_or("none".to_string(), |t| format!("{t:.6}")),
            row.total_path_length
        ));
    }
    text.push_str("# aggregate: scenario strategy runs completed mean_time std_time mean_path std_path\n");
    for a in &summary.aggregates {
        text.push_str(&format!(
            "{} {} {} {} {:.6} {:.6} {:.6} {:.6}\n",
            a.scenario,
            a.strategy.name(),
            a.runs,
            a.completed_runs,
            a.mean_time,
            a.std_time,
            a.mean_path,
            a.std_path
        ));
    }
    std::fs::write(out_root.join("batch_summary.txt"), text)?;
    Ok(())
}
