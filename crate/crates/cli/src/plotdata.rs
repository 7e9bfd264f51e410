//! Post-processing of run logs into plot-ready columnar files: per-robot
//! trajectory polylines, per-event partition grids, the SWD curve, paired
//! density heatmaps, and batch summary bars.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use crate::config::ScenarioConfig;

/// The data products that can be emitted from finished runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum PlotKind {
    /// One polyline file per robot (from a run directory).
    Trajectories,
    /// One cell-ownership file per re-partition event (from a run directory).
    Partitions,
    /// Time/SWD curve (from a run directory).
    SwdCurve,
    /// Ground-truth and prediction grids (from a run directory).
    DensityHeatmaps,
    /// Mean time and path length per scenario/strategy (from a batch directory).
    SummaryBars,
}

impl fmt::Display for PlotKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            PlotKind::Trajectories => "trajectories",
            PlotKind::Partitions => "partitions",
            PlotKind::SwdCurve => "swd-curve",
            PlotKind::DensityHeatmaps => "density-heatmaps",
            PlotKind::SummaryBars => "summary-bars",
        };
        write!(f, "{name}")
    }
}

/// Emit plot data of `kind` from a run (or batch) directory into `out_dir`.
/// Returns the files written.
pub fn emit_plot_data(input_dir: &Path, kind: PlotKind, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    match kind {
        PlotKind::Trajectories => emit_trajectories(input_dir, out_dir),
        PlotKind::Partitions => emit_partitions(input_dir, out_dir),
        PlotKind::SwdCurve => emit_swd_curve(input_dir, out_dir),
        PlotKind::DensityHeatmaps => emit_density_heatmaps(input_dir, out_dir),
        PlotKind::SummaryBars => emit_summary_bars(input_dir, out_dir),
    }
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    Ok(text.lines().map(str::to_string).collect())
}

fn emit_trajectories(run_dir: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let lines = read_lines(&run_dir.join("trajectory.txt"))?;
    let mut per_robot: Vec<(usize, String)> = Vec::new();
    for line in lines.iter().filter(|l| !l.starts_with('#')) {
        let mut it = line.split_whitespace();
        let (Some(t), Some(robot), Some(x), Some(y)) = (it.next(), it.next(), it.next(), it.next())
        else {
            continue;
        };
        let robot: usize = robot.parse().context("robot column")?;
        while per_robot.len() <= robot {
            let i = per_robot.len();
            per_robot.push((i, String::from("# time x y\n")));
        }
        per_robot[robot].1.push_str(&format!("{t} {x} {y}\n"));
    }
    let mut written = Vec::new();
    for (robot, text) in per_robot {
        let path = out_dir.join(format!("trajectory_robot_{robot}.txt"));
        fs::write(&path, text)?;
        written.push(path);
    }
    Ok(written)
}

fn emit_partitions(run_dir: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let lines = read_lines(&run_dir.join("partitions.txt"))?;
    let mut written = Vec::new();
    let mut current: Option<(usize, String)> = None;
    let flush = |cur: &mut Option<(usize, String)>, written: &mut Vec<PathBuf>| -> Result<()> {
        if let Some((event, text)) = cur.take() {
            let path = out_dir.join(format!("partition_event_{event}.txt"));
            fs::write(&path, text)?;
            written.push(path);
        }
        Ok(())
    };
    for line in lines {
        if let Some(rest) = line.strip_prefix("# event ") {
            flush(&mut current, &mut written)?;
            let event: usize = rest
                .split_whitespace()
                .next()
                .context("event header")?
                .parse()
                .context("event number")?;
            let time = rest
                .split_whitespace()
                .nth(2)
                .unwrap_or("0")
                .to_string();
            current = Some((event, format!("# time {time}\n# ix iy robot\n")));
        } else if !line.starts_with('#') {
            if let Some((_, text)) = &mut current {
                // Drop the flat cell index; keep ix iy robot.
                let mut it = line.split_whitespace();
                let _cell = it.next();
                let (Some(ix), Some(iy), Some(robot)) = (it.next(), it.next(), it.next()) else {
                    continue;
                };
                text.push_str(&format!("{ix} {iy} {robot}\n"));
            }
        }
    }
    flush(&mut current, &mut written)?;
    Ok(written)
}

fn emit_swd_curve(run_dir: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let lines = read_lines(&run_dir.join("swd.txt"))?;
    let mut text = String::from("# time swd\n");
    for line in lines.iter().filter(|l| !l.starts_with('#')) {
        text.push_str(line);
        text.push('\n');
    }
    let path = out_dir.join("swd_curve.txt");
    fs::write(&path, text)?;
    Ok(vec![path])
}

fn emit_density_heatmaps(run_dir: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let config = ScenarioConfig::load(&run_dir.join("scenario.toml"))?;
    let (w, h) = (config.grid.width_cells, config.grid.height_cells);
    let lines = read_lines(&run_dir.join("density.txt"))?;
    let mut truth = vec![vec![String::from("0"); w]; h];
    let mut estimate = vec![vec![String::from("0"); w]; h];
    for line in lines.iter().filter(|l| !l.starts_with('#')) {
        let mut it = line.split_whitespace();
        let (Some(ix), Some(iy), Some(t), Some(e)) = (it.next(), it.next(), it.next(), it.next())
        else {
            continue;
        };
        let ix: usize = ix.parse()?;
        let iy: usize = iy.parse()?;
        truth[iy][ix] = t.to_string();
        estimate[iy][ix] = e.to_string();
    }
    let render = |grid: &Vec<Vec<String>>| -> String {
        let mut text = format!("# {w} x {h} grid, row y per line, x ascending\n");
        for row in grid {
            text.push_str(&row.join(" "));
            text.push('\n');
        }
        text
    };
    let truth_path = out_dir.join("density_truth.txt");
    let est_path = out_dir.join("density_prediction.txt");
    fs::write(&truth_path, render(&truth))?;
    fs::write(&est_path, render(&estimate))?;
    Ok(vec![truth_path, est_path])
}

fn emit_summary_bars(batch_dir: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let summary = batch_dir.join("batch_summary.txt");
    if !summary.exists() {
        bail!(
            "{} has no batch_summary.txt; summary-bars reads a batch directory",
            batch_dir.display()
        );
    }
    let lines = read_lines(&summary)?;
    let mut text = String::from("# scenario strategy mean_time std_time mean_path std_path\n");
    let mut in_aggregates = false;
    for line in lines {
        if line.starts_with("# aggregate") {
            in_aggregates = true;
            continue;
        }
        if !in_aggregates || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() == 8 {
            text.push_str(&format!(
                "{} {} {} {} {} {}\n",
                cols[0], cols[1], cols[4], cols[5], cols[6], cols[7]
            ));
        }
    }
    let path = out_dir.join("summary_bars.txt");
    fs::write(&path, text)?;
    Ok(vec![path])
}
