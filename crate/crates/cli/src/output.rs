//! Run directories and their plain-text columnar logs.
//!
//! Every run writes into its own directory named from (scenario, strategy,
//! seed). Directories are never silently overwritten: a clashing run is
//! refused. All records are line-oriented text with a `#`-prefixed header,
//! formatted with fixed precision so identical runs produce identical bytes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use mdcpp_core::engine::{RunRecord, Strategy};
use mdcpp_core::world::GridSpec;

use crate::config::ScenarioConfig;

/// Name of the directory a run writes into.
pub fn run_dir_name(scenario_name: &str, strategy: Strategy, seed: u64) -> String {
    format!("{}__{}__seed{}", scenario_name, strategy.name(), seed)
}

fn fmt_f(v: f64) -> String {
    format!("{v:.6}")
}

/// Write all artifacts of a finished run. Returns the run directory.
pub fn write_run(
    out_root: &Path,
    config: &ScenarioConfig,
    strategy: Strategy,
    seed: u64,
    record: &RunRecord,
) -> Result<PathBuf> {
    let dir = out_root.join(run_dir_name(config.name(), strategy, seed));
    if dir.exists() {
        bail!(
            "run directory {} already exists; refusing to overwrite",
            dir.display()
        );
    }
    fs::create_dir_all(&dir)
        .with_context(|| format!("creating run directory {}", dir.display()))?;

    // The resolved configuration, with the effective seed and strategy.
    let mut resolved = config.clone();
    resolved.seed = Some(seed);
    resolved.strategy = Some(strategy.name().to_string());
    fs::write(dir.join("scenario.toml"), resolved.to_toml())?;

    let r = &record.result;
    let mut result = String::new();
    result.push_str(&format!("strategy {}\n", r.strategy.name()));
    result.push_str(&format!("seed {}\n", r.seed));
    result.push_str(&format!("completed {}\n", r.completed));
    result.push_str(&format!(
        "completion_time {}\n",
        r.completion_time.map_or("none".into(), fmt_f)
    ));
    result.push_str(&format!("total_path_length {}\n", fmt_f(r.total_path_length)));
    for (i, len) in r.per_robot_path_length.iter().enumerate() {
        result.push_str(&format!("path_length_robot_{i} {}\n", fmt_f(*len)));
    }
    for (i, t) in r.per_robot_finish_time.iter().enumerate() {
        result.push_str(&format!("finish_time_robot_{i} {}\n", fmt_f(*t)));
    }
    result.push_str(&format!("partition_events {}\n", r.partition_events));
    result.push_str(&format!("messages_sent {}\n", r.messages_sent));
    result.push_str(&format!("messages_dropped {}\n", r.messages_dropped));
    fs::write(dir.join("result.txt"), result)?;

    let mut traj = String::from("# time robot x y\n");
    for s in &record.trajectories {
        traj.push_str(&format!(
            "{} {} {} {}\n",
            fmt_f(s.time),
            s.robot,
            fmt_f(s.position.x),
            fmt_f(s.position.y)
        ));
    }
    fs::write(dir.join("trajectory.txt"), traj)?;

    let grid = grid_of(config);
    let mut parts = String::from("# partition snapshots: cell ix iy robot\n");
    for (k, snap) in record.partition_snapshots.iter().enumerate() {
        parts.push_str(&format!("# event {k} time {}\n", fmt_f(snap.time)));
        for (&cell, &robot) in &snap.assignment {
            let (ix, iy) = grid.cell_xy(cell);
            parts.push_str(&format!("{cell} {ix} {iy} {robot}\n"));
        }
    }
    fs::write(dir.join("partitions.txt"), parts)?;

    let mut swd = String::from("# time swd\n");
    for &(t, v) in &r.swd_series {
        swd.push_str(&format!("{} {}\n", fmt_f(t), fmt_f(v)));
    }
    fs::write(dir.join("swd.txt"), swd)?;

    let mut density = String::from("# ix iy truth estimate\n");
    for cell in 0..grid.cell_count() {
        let (ix, iy) = grid.cell_xy(cell);
        let truth = record.truth_grid[cell];
        let est = record
            .final_estimate_grid
            .as_ref()
            .map_or(0.0, |g| g[cell]);
        density.push_str(&format!("{ix} {iy} {} {}\n", fmt_f(truth), fmt_f(est)));
    }
    fs::write(dir.join("density.txt"), density)?;

    if !record.goals.is_empty() {
        let mut goals = String::from("# robot x y\n");
        for (i, g) in record.goals.iter().enumerate() {
            goals.push_str(&format!("{i} {} {}\n", fmt_f(g.x), fmt_f(g.y)));
        }
        fs::write(dir.join("goals.txt"), goals)?;
    }

    let mut net = String::from("# messages_sent messages_dropped\n");
    net.push_str(&format!("{} {}\n", r.messages_sent, r.messages_dropped));
    fs::write(dir.join("net.txt"), net)?;

    Ok(dir)
}

pub(crate) fn grid_of(config: &ScenarioConfig) -> GridSpec {
    GridSpec::new(
        config.grid.width_cells,
        config.grid.height_cells,
        config.grid.cell_size,
    )
    .expect("validated grid")
}

/// Run one scenario and write its artifacts; the standard `run` entry point.
pub fn execute_run(
    scenario_path: &Path,
    strategy_override: Option<Strategy>,
    seed_override: Option<u64>,
    range_override: Option<mdcpp_core::netsim::CommRange>,
    out_root: &Path,
) -> Result<(PathBuf, RunRecord)> {
    let config = ScenarioConfig::load(scenario_path)
        .with_context(|| format!("loading {}", scenario_path.display()))?;
    let (scenario, strategy) =
        config.to_scenario(seed_override, strategy_override, range_override)?;
    let record = mdcpp_core::engine::run(&scenario, strategy)?;
    let dir = write_run(out_root, &config, strategy, scenario.seed, &record)?;
    Ok((dir, record))
}

/// Append one line to a shared log file, creating it on first use.
pub fn append_line(path: &Path, line: &str) -> Result<()> {
    let mut f = fs::OpenOptions::new().create(true).append(true).open(path)?;
    writeln!(f, "{line}")?;
    Ok(())
}
