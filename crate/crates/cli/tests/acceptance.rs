//! Acceptance suite: one test per exit criterion, each printing a PASS line
//! with the measured values (visible with `cargo test -- --nocapture`).
//!
//! Run with: `cargo test -p mdcpp-cli --test acceptance`

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use mdcpp_core::assignment::{
    capacity_counts, centralized_assignment, distributed_assignment, lloyd_init, swap_key,
    LloydParams, WorkloadModel,
};
use mdcpp_core::engine::{run, Strategy};
use mdcpp_core::estimator::{fit_sigma, select_k, EstimatorParams, Observation, ObservationStore};
use mdcpp_core::netsim::{Network, NetworkConfig};
use mdcpp_core::planner::{brute_force_path, nearest_neighbor_path};
use mdcpp_core::rng::{stream, StreamKind};
use mdcpp_core::world::GridSpec;
use mdcpp_core::{CellIndex, Point2, RobotId};
use rand::Rng;

fn scenario_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn load(name: &str) -> mdcpp_cli::config::ScenarioConfig {
    mdcpp_cli::config::ScenarioConfig::load(&scenario_path(name)).expect("preset loads")
}

struct Instance {
    grid: GridSpec,
    robots: Vec<RobotId>,
    cells: Vec<CellIndex>,
    positions: Vec<Point2>,
    model: WorkloadModel,
}

fn random_instance(seed: u64, max_robots: usize) -> Instance {
    let mut rng = stream(seed, StreamKind::World);
    let w = rng.gen_range(4..=20);
    let h = rng.gen_range(4..=20);
    let grid = GridSpec::new(w, h, 1.0).unwrap();
    let n_robots = rng.gen_range(1..=max_robots);
    let robots: Vec<RobotId> = (0..n_robots).collect();
    let mut cells: Vec<CellIndex> = (0..grid.cell_count()).collect();
    cells.retain(|_| rng.gen::<f64>() > 0.25);
    if cells.is_empty() {
        cells.push(0);
    }
    let positions: Vec<Point2> = (0..n_robots)
        .map(|_| Point2::new(rng.gen_range(0.0..w as f64), rng.gen_range(0.0..h as f64)))
        .collect();
    let alphas: Vec<f64> = (0..n_robots).map(|_| rng.gen_range(0.2..3.0)).collect();
    let model = WorkloadModel::from_alphas(alphas).unwrap();
    Instance {
        grid,
        robots,
        cells,
        positions,
        model,
    }
}

fn nearest_prior(inst: &Instance) -> BTreeMap<CellIndex, RobotId> {
    inst.cells
        .iter()
        .map(|&c| {
            let g = inst.grid.centroid(c);
            let owner = inst
                .robots
                .iter()
                .copied()
                .min_by(|&a, &b| {
                    inst.positions[a]
                        .distance(g)
                        .total_cmp(&inst.positions[b].distance(g))
                        .then(a.cmp(&b))
                })
                .unwrap();
            (c, owner)
        })
        .collect()
}

/// Criterion: every assignment is disjoint and exhaustive over the pooled
/// cells, with per-robot counts matching largest-remainder capacities
/// exactly, across 200 randomized instances, in under 10 seconds.
#[test]
fn partition_validity_on_randomized_instances() {
    let started = Instant::now();
    for seed in 0..200u64 {
        let inst = random_instance(seed, 6);
        let prior = nearest_prior(&inst);
        let mut net = Network::new(NetworkConfig::unlimited(), inst.robots.len());
        let mut rng = stream(seed, StreamKind::Assignment);
        let part = distributed_assignment(
            &inst.robots,
            &prior,
            &inst.positions,
            &inst.model,
            &inst.grid,
            &mut net,
            &mut rng,
        );
        // Exhaustive and disjoint: the map covers exactly the pooled cells.
        assert_eq!(part.cell_count(), inst.cells.len(), "seed {seed}");
        for &c in &inst.cells {
            let owner = part.owner(c).unwrap_or_else(|| panic!("cell {c} unowned"));
            assert!(owner < inst.robots.len());
        }
        let expected = capacity_counts(
            inst.cells.len(),
            &inst.robots,
            inst.model.capacity_weights(),
        );
        assert_eq!(part.counts(inst.robots.len()), expected, "seed {seed}");
    }
    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs_f64() < 10.0,
        "budget exceeded: {elapsed:?}"
    );
    println!("PASS partition validity: 200 instances, {elapsed:?}");
}

/// Criterion: with unlimited range and a shared seed, the distributed
/// protocol is bit-identical to the centralized reference on 50 randomized
/// instances, in under 30 seconds.
#[test]
fn distributed_equals_centralized_oracle() {
    let started = Instant::now();
    for seed in 1000..1050u64 {
        let inst = random_instance(seed, 6);
        let prior = nearest_prior(&inst);
        let mut rng_c = stream(seed, StreamKind::Assignment);
        let reference = centralized_assignment(
            &inst.robots,
            &inst.cells,
            &inst.positions,
            &inst.model,
            &inst.grid,
            &mut rng_c,
        );
        let mut net = Network::new(NetworkConfig::unlimited(), inst.robots.len());
        let mut rng_d = stream(seed, StreamKind::Assignment);
        let distributed = distributed_assignment(
            &inst.robots,
            &prior,
            &inst.positions,
            &inst.model,
            &inst.grid,
            &mut net,
            &mut rng_d,
        );
        assert_eq!(distributed, reference, "seed {seed} diverged");
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "budget exceeded: {elapsed:?}");
    println!("PASS distributed = centralized: 50 instances bit-identical, {elapsed:?}");
}

/// Criterion: after the protocol converges, no robot pair retains a cell
/// pair whose exchange would have positive combined gain.
#[test]
fn no_positive_swap_remains_after_convergence() {
    let mut worst: f64 = f64::NEG_INFINITY;
    for seed in 1000..1050u64 {
        let inst = random_instance(seed, 6);
        let prior = nearest_prior(&inst);
        let mut net = Network::new(NetworkConfig::unlimited(), inst.robots.len());
        let mut rng = stream(seed, StreamKind::Assignment);
        let part = distributed_assignment(
            &inst.robots,
            &prior,
            &inst.positions,
            &inst.model,
            &inst.grid,
            &mut net,
            &mut rng,
        );
        let sets: Vec<Vec<CellIndex>> = inst
            .robots
            .iter()
            .map(|&r| part.robot_cells(r))
            .collect();
        for a in 0..inst.robots.len() {
            for b in (a + 1)..inst.robots.len() {
                for &ga in &sets[a] {
                    for &gb in &sets[b] {
                        let gain = swap_key(
                            inst.grid.centroid(ga),
                            inst.positions[a],
                            inst.positions[b],
                        ) + swap_key(
                            inst.grid.centroid(gb),
                            inst.positions[b],
                            inst.positions[a],
                        );
                        worst = worst.max(gain);
                        assert!(
                            gain <= 1e-9,
                            "seed {seed}: positive pair ({ga},{gb}) gain {gain}"
                        );
                    }
                }
            }
        }
    }
    println!("PASS swap convergence: worst remaining pair gain {worst:.3e}");
}

/// Criterion: on 20 random four-robot initializations of the 20x20 grid, the
/// partition functional never increases across iterations and every run
/// converges within the 100-iteration cap.
#[test]
fn lloyd_functional_nonincreasing_and_convergent() {
    let grid = GridSpec::new(20, 20, 1.0).unwrap();
    let cells: Vec<CellIndex> = (0..grid.cell_count()).collect();
    let weights = vec![1.0; cells.len()];
    let model = WorkloadModel::from_alphas(vec![1.0; 4]).unwrap();
    let params = LloydParams::for_cell_size(1.0);
    let mut max_iters_seen = 0;
    for seed in 0..20u64 {
        let mut rng = stream(seed, StreamKind::World);
        let positions: Vec<Point2> = (0..4)
            .map(|_| Point2::new(rng.gen_range(0.0..20.0), rng.gen_range(0.0..20.0)))
            .collect();
        let out = lloyd_init(&grid, &cells, &weights, &positions, &model, &params);
        assert!(out.converged, "seed {seed} did not converge");
        assert!(out.iterations <= 100);
        max_iters_seen = max_iters_seen.max(out.iterations);
        for (i, w) in out.functional.windows(2).enumerate() {
            assert!(
                w[1] <= w[0] + 1e-9,
                "seed {seed}: functional rose at iteration {i}: {} -> {}",
                w[0],
                w[1]
            );
        }
    }
    println!("PASS Lloyd monotonicity: 20 runs converged (max {max_iters_seen} iterations)");
}

/// Criterion: on 1000 random instances of up to 8 cells, the greedy path is
/// a permutation of the input, never beats the exact optimum, and stays
/// below a mean length ratio of 1.25.
#[test]
fn nearest_neighbor_path_validity_and_quality() {
    let mut rng = stream(99, StreamKind::World);
    let mut ratio_sum = 0.0;
    let mut count = 0usize;
    for _ in 0..1000 {
        let n = rng.gen_range(2..=8);
        let cells: Vec<(CellIndex, Point2)> = (0..n)
            .map(|i| {
                (
                    i,
                    Point2::new(rng.gen_range(0.0..20.0), rng.gen_range(0.0..20.0)),
                )
            })
            .collect();
        let start = Point2::new(rng.gen_range(0.0..20.0), rng.gen_range(0.0..20.0));
        let greedy = nearest_neighbor_path(start, &cells);
        let exact = brute_force_path(start, &cells).unwrap();
        let mut visited = greedy.cells.clone();
        visited.sort_unstable();
        assert_eq!(visited, (0..n).collect::<Vec<_>>(), "not a permutation");
        assert!(
            greedy.total_length >= exact.total_length - 1e-9,
            "greedy beat the exact optimum"
        );
        if exact.total_length > 0.0 {
            ratio_sum += greedy.total_length / exact.total_length;
            count += 1;
        }
    }
    let mean_ratio = ratio_sum / count as f64;
    assert!(
        mean_ratio < 1.25,
        "mean greedy/exact ratio {mean_ratio} exceeds the regression guard"
    );
    println!("PASS path planning: 1000 instances, mean ratio {mean_ratio:.4}");
}

/// Criterion: from noiseless observations of at least 90% of the cells of a
/// three-hotspot field, the estimator recovers the component count, every
/// center within 1.5 cell widths, and every spread within one grid step.
#[test]
fn estimator_recovers_three_hotspots() {
    let cell = 10.0;
    let grid = GridSpec::new(20, 20, cell).unwrap();
    let sigma_true = 3.0 * cell;
    let centers = [
        Point2::new(5.0 * cell, 5.0 * cell),
        Point2::new(15.0 * cell, 5.0 * cell),
        Point2::new(10.0 * cell, 15.0 * cell),
    ];
    let params = EstimatorParams::for_cell_size(cell);
    let mut store = ObservationStore::new(params.theta);
    let mut observed = 0usize;
    for j in 0..grid.cell_count() {
        if j % 10 == 9 {
            continue; // hold out 10% of cells
        }
        observed += 1;
        let p = grid.centroid(j);
        let z: f64 = centers
            .iter()
            .map(|&mu| (-p.distance_squared(mu) / (2.0 * sigma_true * sigma_true)).exp())
            .sum();
        store.ingest(
            j,
            p,
            Observation {
                value: z,
                time: 0.0,
                source: 0,
            },
        );
    }
    assert!(observed as f64 >= 0.9 * grid.cell_count() as f64);

    let mut rng = stream(6, StreamKind::Estimator(0));
    let selected = select_k(&store, &params, params.sigma_midpoint(), &mut rng);
    assert_eq!(selected.k_hat(), 3, "estimated component count");
    let step = params.sigma_grid[1] - params.sigma_grid[0];
    let mut worst_center = 0.0f64;
    let mut worst_sigma = 0.0f64;
    for &truth in &centers {
        let (mu_hat, d) = selected
            .centers
            .iter()
            .map(|&c| (c, c.distance(truth)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        assert!(
            d <= 1.5 * cell,
            "center {truth:?} missed by {d} m (limit {} m)",
            1.5 * cell
        );
        worst_center = worst_center.max(d);
        let fit = fit_sigma(mu_hat, &store, &params.sigma_grid, params.exploration_radius);
        let err = (fit.sigma - sigma_true).abs();
        assert!(
            err <= step + 1e-9,
            "sigma for {truth:?}: {} vs {} (step {step})",
            fit.sigma,
            sigma_true
        );
        worst_sigma = worst_sigma.max(err);
    }
    println!(
        "PASS estimator recovery: K=3, worst center error {:.2} cells, worst sigma error {:.2} steps",
        worst_center / cell,
        worst_sigma / step
    );
}

fn smoothed(series: &[f64], window: usize) -> Vec<f64> {
    (0..series.len())
        .map(|i| {
            let lo = i.saturating_sub(window - 1);
            let slice = &series[lo..=i];
            slice.iter().sum::<f64>() / slice.len() as f64
        })
        .collect()
}

/// Criterion: over a three-hotspot run, the smoothed estimation-error series
/// ends at least 50% lower than it starts (first vs final quartile means).
#[test]
fn swd_series_declines_over_the_run() {
    let config = load("ld_3c.toml");
    let (scenario, _) = config
        .to_scenario(Some(1), Some(Strategy::Mdcpp), None)
        .unwrap();
    let record = run(&scenario, Strategy::Mdcpp).unwrap();
    assert!(record.result.completed);
    let values: Vec<f64> = record.result.swd_series.iter().map(|&(_, v)| v).collect();
    assert!(values.len() >= 16, "series too short: {}", values.len());
    let sm = smoothed(&values, 5);
    let q = sm.len() / 4;
    let first = sm[..q].iter().sum::<f64>() / q as f64;
    let last = sm[sm.len() - q..].iter().sum::<f64>() / q as f64;
    assert!(
        last <= 0.5 * first,
        "final quartile {last} not half of first quartile {first}"
    );
    println!(
        "PASS SWD decline: first quartile {first:.3}, final quartile {last:.3} (ratio {:.3})",
        last / first
    );
}

/// Criterion: over at least five seeds of the heterogeneous two-hotspot
/// scenario, mean completion time orders full pipeline < reactive < static
/// with at least a 30% cut versus the static baseline, and the full
/// pipeline's mean total path is shorter than the reactive one's. The whole
/// comparison fits a ten-minute budget.
#[test]
fn strategy_ordering_on_heterogeneous_hotspots() {
    let started = Instant::now();
    let config = load("ld_2c.toml");
    let seeds: Vec<u64> = (100..106).collect();
    let mut times: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    let mut paths: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for strategy in [
        Strategy::Mdcpp,
        Strategy::DynamicNoPrediction,
        Strategy::Sweeping,
    ] {
        for &seed in &seeds {
            let (scenario, _) = config
                .to_scenario(Some(seed), Some(strategy), None)
                .unwrap();
            let record = run(&scenario, strategy).unwrap();
            assert!(record.result.completed, "{strategy:?} seed {seed} incomplete");
            times
                .entry(strategy.name())
                .or_default()
                .push(record.result.completion_time.unwrap());
            paths
                .entry(strategy.name())
                .or_default()
                .push(record.result.total_path_length);
        }
    }
    let mean = |v: &Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;
    let t_mdcpp = mean(&times["mdcpp"]);
    let t_dynamic = mean(&times["dynamic"]);
    let t_sweeping = mean(&times["sweeping"]);
    let p_mdcpp = mean(&paths["mdcpp"]);
    let p_dynamic = mean(&paths["dynamic"]);
    assert!(
        t_mdcpp < t_dynamic,
        "mean time: full {t_mdcpp} !< reactive {t_dynamic}"
    );
    assert!(
        t_dynamic < t_sweeping,
        "mean time: reactive {t_dynamic} !< static {t_sweeping}"
    );
    let reduction = (t_sweeping - t_mdcpp) / t_sweeping;
    assert!(
        reduction >= 0.30,
        "only {:.1}% reduction vs the static baseline",
        100.0 * reduction
    );
    assert!(
        p_mdcpp < p_dynamic,
        "mean path: full {p_mdcpp} !< reactive {p_dynamic}"
    );
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 600.0, "budget exceeded: {elapsed:?}");
    println!(
        "PASS strategy ordering: times {t_mdcpp:.0} < {t_dynamic:.0} < {t_sweeping:.0} s \
         ({:.1}% cut), paths {p_mdcpp:.0} < {p_dynamic:.0} m, {elapsed:?}",
        100.0 * reduction
    );
}

/// Criterion: over at least five seeds of the low-heterogeneity scenario,
/// unlimited communication never loses to a two-cell-width range on mean
/// completion time.
#[test]
fn communication_range_effect() {
    let config = load("sd_2c.toml");
    let seeds: Vec<u64> = (1..=5).collect();
    let run_mean = |range: Option<mdcpp_core::netsim::CommRange>| -> f64 {
        let total: f64 = seeds
            .iter()
            .map(|&seed| {
                let (scenario, _) = config
                    .to_scenario(Some(seed), Some(Strategy::Mdcpp), range)
                    .unwrap();
                let record = run(&scenario, Strategy::Mdcpp).unwrap();
                assert!(record.result.completed);
                record.result.completion_time.unwrap()
            })
            .sum();
        total / seeds.len() as f64
    };
    let unlimited = run_mean(None);
    let limited = run_mean(Some(mdcpp_core::netsim::CommRange::Limited(20.0)));
    assert!(
        unlimited <= limited,
        "unlimited {unlimited} should not exceed limited {limited}"
    );
    println!(
        "PASS communication range: unlimited mean {unlimited:.0} s <= 2-cell range mean {limited:.0} s"
    );
}

/// Criterion: the same scenario and seed produce byte-identical result files.
#[test]
fn runs_are_byte_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let out_a = tmp.path().join("a");
    let out_b = tmp.path().join("b");
    let path = scenario_path("ld_2c.toml");
    let (dir_a, _) =
        mdcpp_cli::output::execute_run(&path, Some(Strategy::Mdcpp), Some(77), None, &out_a)
            .unwrap();
    let (dir_b, _) =
        mdcpp_cli::output::execute_run(&path, Some(Strategy::Mdcpp), Some(77), None, &out_b)
            .unwrap();
    let mut names: Vec<String> = std::fs::read_dir(&dir_a)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert!(!names.is_empty());
    for name in &names {
        let a = std::fs::read(dir_a.join(name)).unwrap();
        let b = std::fs::read(dir_b.join(name)).unwrap();
        assert_eq!(a, b, "file {name} differs between identical runs");
    }
    println!("PASS determinism: {} files byte-identical", names.len());
}
