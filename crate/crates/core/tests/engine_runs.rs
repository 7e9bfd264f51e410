//! End-to-end simulation runs: completion, determinism, strategy behavior,
//! and the degenerate cases.

use mdcpp_core::engine::{
    run, Scenario, SpeedModel, SpeedProfile, Strategy,
};
use mdcpp_core::estimator::EstimatorParams;
use mdcpp_core::netsim::CommRange;
use mdcpp_core::world::{GaussianComponent, GridSpec, TargetSeeding};
use mdcpp_core::Point2;
use mdcpp_core::assignment::LloydParams;

fn base_scenario(seed: u64) -> Scenario {
    let cell = 10.0;
    let grid = GridSpec::new(8, 8, cell).unwrap();
    let components = vec![GaussianComponent::new(
        Point2::new(5.5 * cell, 5.5 * cell),
        3.0 * cell,
        1.0,
    )
    .unwrap()];
    let robots = vec![
        mdcpp_core::engine::RobotSpec {
            start: Point2::new(5.0, 5.0),
            profile: SpeedProfile::Interpolated { v_max: 2.0, v_min: 0.5 },
            alpha: 1.0,
            noise_sigma: 0.0,
        },
        mdcpp_core::engine::RobotSpec {
            start: Point2::new(15.0, 5.0),
            profile: SpeedProfile::Interpolated { v_max: 1.0, v_min: 0.25 },
            alpha: 1.0,
            noise_sigma: 0.0,
        },
    ];
    Scenario {
        grid,
        components,
        robots,
        speed_model: SpeedModel::interpolated(),
        comm_range: CommRange::Unlimited,
        n0: 2,
        seed,
        estimator: EstimatorParams::for_cell_size(cell),
        target_seeding: TargetSeeding::DeterministicThreshold(0.5),
        dt: 1.0,
        max_sim_time: 100_000.0,
        swd_interval: 50.0,
        swd_projections: 25,
        trajectory_interval: 20.0,
        lloyd: LloydParams::for_cell_size(cell),
    }
}

#[test]
fn mdcpp_run_reaches_complete_coverage() {
    let scenario = base_scenario(3);
    let record = run(&scenario, Strategy::Mdcpp).unwrap();
    assert!(record.result.completed);
    let t = record.result.completion_time.unwrap();
    assert!(t > 0.0 && t < scenario.max_sim_time);
    assert!(record.result.total_path_length > 0.0);
    assert!(!record.result.swd_series.is_empty());
    assert!(record.final_estimate_grid.is_some());
    assert_eq!(record.goals.len(), 2);
    // Completion time is the max over per-robot finish times.
    let max_finish = record
        .result
        .per_robot_finish_time
        .iter()
        .copied()
        .fold(0.0, f64::max);
    assert_eq!(t, max_finish);
}

#[test]
fn dynamic_run_completes_without_estimation() {
    let record = run(&base_scenario(4), Strategy::DynamicNoPrediction).unwrap();
    assert!(record.result.completed);
    assert!(record.result.swd_series.is_empty());
    assert!(record.final_estimate_grid.is_none());
}

#[test]
fn identical_seeds_give_identical_records() {
    for strategy in [Strategy::Mdcpp, Strategy::DynamicNoPrediction, Strategy::Sweeping] {
        let a = run(&base_scenario(7), strategy).unwrap();
        let b = run(&base_scenario(7), strategy).unwrap();
        assert_eq!(a, b, "strategy {:?} not reproducible", strategy);
    }
}

#[test]
fn different_seeds_diverge() {
    let a = run(&base_scenario(1), Strategy::Mdcpp).unwrap();
    let b = run(&base_scenario(2), Strategy::Mdcpp).unwrap();
    assert_ne!(a.result, b.result);
}

#[test]
fn single_robot_degenerates_to_one_tour_without_messages() {
    let mut scenario = base_scenario(11);
    scenario.robots.truncate(1);
    let record = run(&scenario, Strategy::Mdcpp).unwrap();
    assert!(record.result.completed);
    assert_eq!(record.result.messages_sent, 0);
    assert_eq!(record.result.messages_dropped, 0);
    assert_eq!(record.goals.len(), 1);
    // Single site converges to the density-unweighted grid centroid.
    let center = Point2::new(40.0, 40.0);
    assert!(record.goals[0].distance(center) < 10.0);
}

#[test]
fn watchdog_stops_incomplete_runs() {
    let mut scenario = base_scenario(5);
    scenario.max_sim_time = 10.0;
    let record = run(&scenario, Strategy::Mdcpp).unwrap();
    assert!(!record.result.completed);
    assert_eq!(record.result.completion_time, None);
}

#[test]
fn sweeping_covers_everything_deterministically() {
    let cell = 10.0;
    let grid = GridSpec::new(20, 20, cell).unwrap();
    let profile = SpeedProfile::ThreeSpeed {
        v_max: 3.0,
        v_det: 1.0,
        v_int: 0.1,
    };
    let robots: Vec<mdcpp_core::engine::RobotSpec> = (0..4)
        .map(|i| mdcpp_core::engine::RobotSpec {
            start: Point2::new(5.0 + 10.0 * i as f64, 5.0),
            profile,
            alpha: 1.0,
            noise_sigma: 0.0,
        })
        .collect();
    // Uniform (empty) field: no targets anywhere, so all robots face the
    // same workload shape in their strips.
    let scenario = Scenario {
        grid,
        components: vec![],
        robots,
        speed_model: SpeedModel::three_speed(),
        comm_range: CommRange::Unlimited,
        n0: 2,
        seed: 42,
        estimator: EstimatorParams::for_cell_size(cell),
        target_seeding: TargetSeeding::DeterministicThreshold(0.5),
        dt: 1.0,
        max_sim_time: 500_000.0,
        swd_interval: 100.0,
        swd_projections: 10,
        trajectory_interval: 50.0,
        lloyd: LloydParams::for_cell_size(cell),
    };
    let record = run(&scenario, Strategy::Sweeping).unwrap();
    assert!(record.result.completed);
    assert_eq!(record.result.partition_events, 0);
    assert_eq!(record.result.messages_sent, 0);

    // Identical robots and identical strips: finish times agree within the
    // jitter spread.
    let finishes = &record.result.per_robot_finish_time;
    let min = finishes.iter().copied().fold(f64::INFINITY, f64::min);
    let max = finishes.iter().copied().fold(0.0, f64::max);
    assert!(
        (max - min) / max < 0.15,
        "finish spread too wide: {finishes:?}"
    );

    let again = run(&scenario, Strategy::Sweeping).unwrap();
    assert_eq!(record, again);
}

#[test]
fn repartition_fires_when_assignments_run_low() {
    let scenario = base_scenario(13);
    let record = run(&scenario, Strategy::Mdcpp).unwrap();
    assert!(record.result.completed);
    assert!(
        record.result.partition_events > 0,
        "a 64-cell two-robot run must re-partition at least once"
    );
    assert!(record.result.messages_sent > 0);
    // Snapshots: the initial assignment plus one per event.
    assert_eq!(
        record.partition_snapshots.len(),
        record.result.partition_events + 1
    );
}

#[test]
fn limited_range_runs_still_terminate() {
    let mut scenario = base_scenario(17);
    scenario.comm_range = CommRange::Limited(2.0 * scenario.grid.cell_size());
    let record = run(&scenario, Strategy::Mdcpp).unwrap();
    assert!(record.result.completed);
}

#[test]
fn robots_outside_the_grid_are_rejected() {
    let mut scenario = base_scenario(1);
    scenario.robots[0].start = Point2::new(-5.0, 0.0);
    assert!(mdcpp_core::engine::run(&scenario, Strategy::Mdcpp).is_err());
}

#[test]
fn mismatched_profile_is_rejected() {
    let mut scenario = base_scenario(1);
    scenario.speed_model = SpeedModel::three_speed();
    assert!(mdcpp_core::engine::run(&scenario, Strategy::Mdcpp).is_err());
}

#[test]
fn coverage_is_monotone_during_a_run() {
    let scenario = base_scenario(19);
    let mut sim = mdcpp_core::engine::Simulation::new(&scenario, Strategy::Mdcpp).unwrap();
    let mut last = 0;
    for _ in 0..5000 {
        if sim.is_complete() {
            break;
        }
        sim.step();
        let now = sim.world().coverage().covered_count();
        assert!(now >= last, "coverage went backwards");
        last = now;
    }
    assert!(sim.is_complete());
}
