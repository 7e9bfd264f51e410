//! The discrete-time simulation loop: robot kinematics over planned paths,
//! coverage and interaction timing, re-partition triggering, the baseline
//! strategies, and run-level metrics.
//!
//! Motion model: cells are waypoints. A robot travels to a cell centroid at
//! its travel speed, then covers the cell in place for `cell_size /
//! coverage_speed` seconds; only that completes coverage (passing through a
//! cell covers nothing). Speed jitter under the three-speed model is redrawn
//! once per leg or cell entered, keeping speeds piecewise constant and runs
//! reproducible.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::assignment::{
    self, distributed_assignment, lloyd_init, LloydParams, WorkloadModel,
};
use crate::estimator::{
    swd::sliced_wasserstein, Estimator, EstimatorParams, Observation,
};
use crate::geometry::Point2;
use crate::netsim::{
    self, CommRange, Message, MessageKind, Network, NetworkConfig, Recipient,
};
use crate::planner::nearest_neighbor_path;
use crate::rng::{stream, StreamKind};
use crate::world::{
    seed_targets, GaussianComponent, GridSpec, GridWorld, GroundTruthField, TargetSeeding,
    WorldError,
};
use crate::{CellIndex, RobotId};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EngineError {
    #[error("a scenario needs at least one robot")]
    EmptyTeam,
    #[error("robot {0}: speed profile must satisfy 0 < slow <= fast")]
    InvalidSpeedProfile(RobotId),
    #[error("robot {0}: profile does not match the scenario speed model")]
    ProfileModelMismatch(RobotId),
    #[error("robot {0}: start position outside the grid")]
    RobotOutsideGrid(RobotId),
    #[error("robot {0}: alpha must be positive and noise sigma non-negative")]
    InvalidRobotParams(RobotId),
    #[error("jitter range must satisfy 0 < lo <= hi")]
    InvalidJitter,
    #[error("dt, horizons and intervals must be positive")]
    InvalidTiming,
    #[error("re-partition trigger n0 must be at least 1")]
    InvalidTrigger,
    #[error("estimator params invalid: {0}")]
    InvalidEstimatorParams(&'static str),
    #[error(transparent)]
    World(#[from] WorldError),
}

/// Which coverage strategy a run executes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    /// Full pipeline: estimation, workload-aware re-partitioning, planning.
    Mdcpp,
    /// Same machinery with the estimator disabled (flat density).
    DynamicNoPrediction,
    /// Static strip split with boustrophedon sweeps and no communication.
    Sweeping,
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Mdcpp => "mdcpp",
            Strategy::DynamicNoPrediction => "dynamic",
            Strategy::Sweeping => "sweeping",
        }
    }

    fn repartitions(&self) -> bool {
        !matches!(self, Strategy::Sweeping)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpeedModelKind {
    ThreeSpeed,
    Interpolated,
}

/// Scenario-wide speed semantics: which profile family robots use and the
/// jitter band applied to three-speed draws.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpeedModel {
    pub kind: SpeedModelKind,
    /// Multiplicative jitter band (lo, hi) for the three-speed model.
    pub jitter: (f64, f64),
}

impl SpeedModel {
    pub fn three_speed() -> Self {
        SpeedModel {
            kind: SpeedModelKind::ThreeSpeed,
            jitter: (0.5, 1.5),
        }
    }

    pub fn interpolated() -> Self {
        SpeedModel {
            kind: SpeedModelKind::Interpolated,
            jitter: (1.0, 1.0),
        }
    }
}

/// Per-robot speeds, in m/s.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SpeedProfile {
    /// Travel / detection / interaction speeds.
    ThreeSpeed { v_max: f64, v_det: f64, v_int: f64 },
    /// Travel speed and the floor reached in the densest cell.
    Interpolated { v_max: f64, v_min: f64 },
}

impl SpeedProfile {
    pub fn v_max(&self) -> f64 {
        match *self {
            SpeedProfile::ThreeSpeed { v_max, .. } => v_max,
            SpeedProfile::Interpolated { v_max, .. } => v_max,
        }
    }

    fn valid(&self) -> bool {
        match *self {
            SpeedProfile::ThreeSpeed { v_max, v_det, v_int } => {
                v_int > 0.0 && v_int <= v_det && v_det <= v_max
            }
            SpeedProfile::Interpolated { v_max, v_min } => v_min > 0.0 && v_min <= v_max,
        }
    }

    fn matches(&self, kind: SpeedModelKind) -> bool {
        matches!(
            (self, kind),
            (SpeedProfile::ThreeSpeed { .. }, SpeedModelKind::ThreeSpeed)
                | (SpeedProfile::Interpolated { .. }, SpeedModelKind::Interpolated)
        )
    }
}

/// Speed while covering a cell. Three-speed robots detect or interact
/// (jittered); interpolated robots slow linearly with the normalized true
/// density, from `v_max` in empty cells down to `v_min` at the densest cell.
pub fn coverage_speed(
    profile: &SpeedProfile,
    has_targets: bool,
    rho_norm: f64,
    jitter: f64,
) -> f64 {
    match *profile {
        SpeedProfile::ThreeSpeed { v_det, v_int, .. } => {
            let base = if has_targets { v_int } else { v_det };
            base * jitter
        }
        SpeedProfile::Interpolated { v_max, v_min } => {
            v_max + (v_min - v_max) * rho_norm.clamp(0.0, 1.0)
        }
    }
}

/// Coverage speed a robot would predict for a cell of estimated density
/// `rho_hat`; this prices cells when capacity weights are computed.
pub fn predicted_cover_speed(
    profile: &SpeedProfile,
    rho_hat: f64,
    target_threshold: f64,
) -> f64 {
    match *profile {
        SpeedProfile::ThreeSpeed { v_det, v_int, .. } => {
            if rho_hat > target_threshold {
                v_int
            } else {
                v_det
            }
        }
        SpeedProfile::Interpolated { v_max, v_min } => {
            v_max + (v_min - v_max) * rho_hat.clamp(0.0, 1.0)
        }
    }
}

fn travel_speed(profile: &SpeedProfile, jitter: f64) -> f64 {
    match *profile {
        SpeedProfile::ThreeSpeed { v_max, .. } => v_max * jitter,
        SpeedProfile::Interpolated { v_max, .. } => v_max,
    }
}

/// Configuration of one robot.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RobotSpec {
    pub start: Point2,
    pub profile: SpeedProfile,
    pub alpha: f64,
    pub noise_sigma: f64,
}

/// A complete, file-format-free run description.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub grid: GridSpec,
    pub components: Vec<GaussianComponent>,
    pub robots: Vec<RobotSpec>,
    pub speed_model: SpeedModel,
    pub comm_range: CommRange,
    /// Re-partition trigger: fires when a robot's remaining assigned cell
    /// count drops below this.
    pub n0: usize,
    pub seed: u64,
    pub estimator: EstimatorParams,
    pub target_seeding: TargetSeeding,
    pub dt: f64,
    pub max_sim_time: f64,
    pub swd_interval: f64,
    pub swd_projections: usize,
    pub trajectory_interval: f64,
    pub lloyd: LloydParams,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), EngineError> {
        if self.robots.is_empty() {
            return Err(EngineError::EmptyTeam);
        }
        let (lo, hi) = self.speed_model.jitter;
        if !(lo > 0.0 && lo <= hi) {
            return Err(EngineError::InvalidJitter);
        }
        if !(self.dt > 0.0
            && self.max_sim_time > 0.0
            && self.swd_interval > 0.0
            && self.trajectory_interval > 0.0)
        {
            return Err(EngineError::InvalidTiming);
        }
        if self.n0 == 0 {
            return Err(EngineError::InvalidTrigger);
        }
        for (i, r) in self.robots.iter().enumerate() {
            if !r.profile.valid() {
                return Err(EngineError::InvalidSpeedProfile(i));
            }
            if !r.profile.matches(self.speed_model.kind) {
                return Err(EngineError::ProfileModelMismatch(i));
            }
            if !(r.alpha > 0.0) || r.noise_sigma < 0.0 {
                return Err(EngineError::InvalidRobotParams(i));
            }
            let o = self.grid.origin();
            let inside = r.start.x >= o.x
                && r.start.y >= o.y
                && r.start.x <= o.x + self.grid.width_m()
                && r.start.y <= o.y + self.grid.height_m();
            if !inside {
                return Err(EngineError::RobotOutsideGrid(i));
            }
        }
        let e = &self.estimator;
        if e.k_max == 0 {
            return Err(EngineError::InvalidEstimatorParams("k_max must be >= 1"));
        }
        if !(e.exploration_radius > 0.0) {
            return Err(EngineError::InvalidEstimatorParams(
                "exploration radius must be positive",
            ));
        }
        if e.sigma_grid.is_empty() || e.sigma_grid.iter().any(|&s| !(s > 0.0)) {
            return Err(EngineError::InvalidEstimatorParams(
                "sigma grid must be non-empty and positive",
            ));
        }
        if e.sigma_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(EngineError::InvalidEstimatorParams(
                "sigma grid must be strictly ascending",
            ));
        }
        if self.target_seeding_threshold().is_nan() {
            return Err(EngineError::InvalidEstimatorParams("bad target threshold"));
        }
        Ok(())
    }

    /// Density level treated as "targets present" when predicting speeds.
    fn target_seeding_threshold(&self) -> f64 {
        match self.target_seeding {
            TargetSeeding::DeterministicThreshold(th) => th,
            TargetSeeding::Bernoulli => 0.5,
        }
    }
}

/// What a robot is currently doing with its time.
#[derive(Clone, Debug, PartialEq)]
enum Activity {
    Idle,
    Travel {
        dest: Point2,
        speed: f64,
        /// Cell to start covering on arrival; `None` when heading to the
        /// initial goal.
        cover_after: Option<CellIndex>,
    },
    Cover { cell: CellIndex, remaining: f64 },
}

/// Coarse robot mode, as reported in logs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    ToInitialGoal,
    Covering,
    Idle,
}

struct RobotState {
    spec: RobotSpec,
    position: Point2,
    mode: Mode,
    activity: Activity,
    /// Uncovered cells currently owned by this robot.
    assigned: BTreeSet<CellIndex>,
    /// Remaining planned visit order (excludes the committed cell).
    path: VecDeque<CellIndex>,
    goal: Option<Point2>,
    estimator: Option<Estimator>,
    motion_rng: ChaCha8Rng,
    obs_rng: ChaCha8Rng,
    est_rng: ChaCha8Rng,
    distance_traveled: f64,
    last_finish: f64,
    wants_repartition: bool,
}

impl RobotState {
    /// The cell this robot is traveling to or covering right now; it stays
    /// with the robot through a re-partition.
    fn committed_cell(&self) -> Option<CellIndex> {
        match self.activity {
            Activity::Travel { cover_after, .. } => cover_after,
            Activity::Cover { cell, .. } => Some(cell),
            Activity::Idle => None,
        }
    }

    fn draw_jitter(&mut self, model: &SpeedModel) -> f64 {
        match model.kind {
            SpeedModelKind::ThreeSpeed => {
                let (lo, hi) = model.jitter;
                self.motion_rng.gen_range(lo..=hi)
            }
            SpeedModelKind::Interpolated => 1.0,
        }
    }
}

/// Aggregate outcome of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioResult {
    pub strategy: Strategy,
    pub seed: u64,
    /// False when the watchdog stopped the run before complete coverage.
    pub completed: bool,
    /// Simulated time at which the last cell was covered.
    pub completion_time: Option<f64>,
    pub per_robot_path_length: Vec<f64>,
    pub total_path_length: f64,
    pub per_robot_finish_time: Vec<f64>,
    pub swd_series: Vec<(f64, f64)>,
    pub partition_events: usize,
    pub messages_sent: u64,
    pub messages_dropped: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectorySample {
    pub time: f64,
    pub robot: RobotId,
    pub position: Point2,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PartitionSnapshot {
    pub time: f64,
    pub assignment: BTreeMap<CellIndex, RobotId>,
}

/// Everything a run produces: the result plus the logs needed to reproduce
/// the study's figures.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub result: ScenarioResult,
    pub trajectories: Vec<TrajectorySample>,
    pub partition_snapshots: Vec<PartitionSnapshot>,
    /// Ground-truth cell densities.
    pub truth_grid: Vec<f64>,
    /// Final predicted cell densities (estimation strategies only).
    pub final_estimate_grid: Option<Vec<f64>>,
    /// Initial goals (empty for sweeping).
    pub goals: Vec<Point2>,
}

pub struct Simulation {
    scenario: Scenario,
    strategy: Strategy,
    world: GridWorld,
    robots: Vec<RobotState>,
    net: Network,
    time: f64,
    assignment_rng: ChaCha8Rng,
    swd_rng: ChaCha8Rng,
    eval_rng: ChaCha8Rng,
    eval_estimator: Option<Estimator>,
    cell_centroids: Vec<Point2>,
    partition_events: usize,
    swd_series: Vec<(f64, f64)>,
    next_swd: f64,
    trajectories: Vec<TrajectorySample>,
    next_trajectory: f64,
    partition_snapshots: Vec<PartitionSnapshot>,
    goals: Vec<Point2>,
}

struct CoverEvent {
    robot: RobotId,
    cell: CellIndex,
    time: f64,
    value: f64,
}

impl Simulation {
    pub fn new(scenario: &Scenario, strategy: Strategy) -> Result<Self, EngineError> {
        scenario.validate()?;
        let scenario = scenario.clone();
        let seed = scenario.seed;

        let field = GroundTruthField::new(&scenario.grid, scenario.components.clone())?;
        let mut world_rng = stream(seed, StreamKind::World);
        let targets = seed_targets(&scenario.grid, &field, scenario.target_seeding, &mut world_rng);
        let world = GridWorld::new(scenario.grid.clone(), field, targets);

        let estimating = strategy == Strategy::Mdcpp;
        let robots: Vec<RobotState> = scenario
            .robots
            .iter()
            .enumerate()
            .map(|(i, spec)| RobotState {
                spec: *spec,
                position: spec.start,
                mode: Mode::Covering,
                activity: Activity::Idle,
                assigned: BTreeSet::new(),
                path: VecDeque::new(),
                goal: None,
                estimator: estimating.then(|| Estimator::new(scenario.estimator.clone())),
                motion_rng: stream(seed, StreamKind::Motion(i)),
                obs_rng: stream(seed, StreamKind::Observation(i)),
                est_rng: stream(seed, StreamKind::Estimator(i)),
                distance_traveled: 0.0,
                last_finish: 0.0,
                wants_repartition: false,
            })
            .collect();

        let net = Network::new(
            NetworkConfig {
                comm_range: scenario.comm_range,
            },
            robots.len(),
        );
        let cell_centroids: Vec<Point2> = (0..scenario.grid.cell_count())
            .map(|j| scenario.grid.centroid(j))
            .collect();

        let mut sim = Simulation {
            strategy,
            world,
            robots,
            net,
            time: 0.0,
            assignment_rng: stream(seed, StreamKind::Assignment),
            swd_rng: stream(seed, StreamKind::Swd),
            eval_rng: stream(seed, StreamKind::Evaluation),
            eval_estimator: estimating.then(|| Estimator::new(scenario.estimator.clone())),
            cell_centroids,
            partition_events: 0,
            swd_series: Vec::new(),
            next_swd: 0.0,
            trajectories: Vec::new(),
            next_trajectory: 0.0,
            partition_snapshots: Vec::new(),
            goals: Vec::new(),
            scenario,
        };

        match strategy {
            Strategy::Sweeping => sim.setup_sweeping(),
            Strategy::Mdcpp | Strategy::DynamicNoPrediction => sim.setup_dynamic(),
        }
        sim.snapshot_partition();
        sim.sample_outputs();
        Ok(sim)
    }

    fn setup_sweeping(&mut self) {
        let grid = self.scenario.grid.clone();
        let n = self.robots.len();
        let robots_ids: Vec<RobotId> = (0..n).collect();
        let equal = alloc::vec![1.0; n];
        let col_counts = assignment::capacity_counts(grid.width_cells(), &robots_ids, &equal);
        let mut x0 = 0;
        for (i, &cols) in col_counts.iter().enumerate() {
            let mut path: Vec<CellIndex> = Vec::new();
            for (k, x) in (x0..x0 + cols).enumerate() {
                if k % 2 == 0 {
                    for y in 0..grid.height_cells() {
                        path.push(grid.index_of(x, y));
                    }
                } else {
                    for y in (0..grid.height_cells()).rev() {
                        path.push(grid.index_of(x, y));
                    }
                }
            }
            x0 += cols;
            let robot = &mut self.robots[i];
            robot.assigned = path.iter().copied().collect();
            let mut queue: VecDeque<CellIndex> = path.into_iter().collect();
            if let Some(first) = queue.pop_front() {
                let jitter = robot.draw_jitter(&self.scenario.speed_model);
                robot.activity = Activity::Travel {
                    dest: grid.centroid(first),
                    speed: travel_speed(&robot.spec.profile, jitter),
                    cover_after: Some(first),
                };
            }
            robot.path = queue;
            robot.mode = Mode::Covering;
        }
    }

    fn setup_dynamic(&mut self) {
        let grid = self.scenario.grid.clone();
        let cells: Vec<CellIndex> = (0..grid.cell_count()).collect();
        let uniform = alloc::vec![1.0; cells.len()];
        let alphas: Vec<f64> = self.robots.iter().map(|r| r.spec.alpha).collect();
        let model = WorkloadModel::from_alphas(alphas).expect("validated alphas");
        let starts: Vec<Point2> = self.robots.iter().map(|r| r.spec.start).collect();
        let outcome = lloyd_init(&grid, &cells, &uniform, &starts, &model, &self.scenario.lloyd);
        self.goals = outcome.goals.clone();

        // Prior ownership by nearest goal; the offline assignment then runs
        // over goal positions, per connected component of the goal layout.
        let prior: BTreeMap<CellIndex, RobotId> = cells
            .iter()
            .map(|&c| {
                let g = grid.centroid(c);
                let mut best = 0;
                let mut best_d = f64::INFINITY;
                for (i, &q) in self.goals.iter().enumerate() {
                    let d = g.distance(q);
                    if d < best_d {
                        best_d = d;
                        best = i;
                    }
                }
                (c, best)
            })
            .collect();

        let members: Vec<RobotId> = (0..self.robots.len()).collect();
        let partition = self.run_assignment(&members, &prior, &outcome.goals.clone());
        for i in 0..self.robots.len() {
            let cells = partition.robot_cells(i);
            let goal = self.goals[i];
            let robot = &mut self.robots[i];
            robot.assigned = cells.into_iter().collect();
            robot.goal = Some(goal);
            robot.mode = Mode::ToInitialGoal;
            let jitter = robot.draw_jitter(&self.scenario.speed_model);
            robot.activity = Activity::Travel {
                dest: goal,
                speed: travel_speed(&robot.spec.profile, jitter),
                cover_after: None,
            };
        }
    }

    /// Capacity weights for a (re-)partition: each robot's capability weight
    /// times its predicted coverage throughput over the pool cells nearest to
    /// it (the swap phase hands robots their nearby cells, so that share is
    /// what the robot will actually pay for). With no estimate the predicted
    /// density is flat and the weights reduce to alpha-proportional shares
    /// scaled by nominal speeds.
    fn capacity_model(&mut self, members: &[RobotId], pool: &[CellIndex]) -> WorkloadModel {
        let grid = &self.scenario.grid;
        let cell_size = grid.cell_size();
        let threshold = self.scenario.target_seeding_threshold();
        let alphas: Vec<f64> = self.robots.iter().map(|r| r.spec.alpha).collect();
        let mut weights = alphas.clone();
        let mut phis = alloc::vec![0.0; self.robots.len()];
        let mut nearest_share: BTreeMap<RobotId, Vec<CellIndex>> =
            members.iter().map(|&i| (i, Vec::new())).collect();
        for &c in pool {
            let g = grid.centroid(c);
            let owner = members
                .iter()
                .copied()
                .min_by(|&a, &b| {
                    self.robots[a]
                        .position
                        .distance(g)
                        .total_cmp(&self.robots[b].position.distance(g))
                        .then(a.cmp(&b))
                })
                .expect("members nonempty");
            nearest_share.get_mut(&owner).expect("present").push(c);
        }
        for &i in members {
            let robot = &mut self.robots[i];
            let share = &nearest_share[&i];
            let pricing: Vec<CellIndex> = if share.is_empty() {
                pool.to_vec()
            } else {
                share.clone()
            };
            // Density prediction: the robot's own estimate, or flat zero
            // when estimation is disabled.
            let estimate = robot
                .estimator
                .as_mut()
                .map(|e| e.estimate(&mut robot.est_rng).clone());
            let rho = |cell: CellIndex| -> f64 {
                match &estimate {
                    Some(est) => est.predicted_density(grid.centroid(cell)),
                    None => 0.0,
                }
            };
            phis[i] = robot.assigned.iter().map(|&c| rho(c)).sum();
            if pricing.is_empty() {
                continue;
            }
            let mean_time: f64 = pricing
                .iter()
                .map(|&c| cell_size / predicted_cover_speed(&robot.spec.profile, rho(c), threshold))
                .sum::<f64>()
                / pricing.len() as f64;
            weights[i] = robot.spec.alpha / mean_time;
        }
        WorkloadModel::from_alphas(alphas)
            .expect("validated alphas")
            .with_phi(phis)
            .expect("lengths match")
            .with_capacity_weights(weights)
            .expect("positive weights")
    }

    fn run_assignment(
        &mut self,
        members: &[RobotId],
        prior: &BTreeMap<CellIndex, RobotId>,
        positions: &[Point2],
    ) -> assignment::Partition {
        let pool: Vec<CellIndex> = prior.keys().copied().collect();
        let model = self.capacity_model(members, &pool);
        let grid = self.scenario.grid.clone();
        distributed_assignment(
            members,
            prior,
            positions,
            &model,
            &grid,
            &mut self.net,
            &mut self.assignment_rng,
        )
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn world(&self) -> &GridWorld {
        &self.world
    }

    pub fn is_complete(&self) -> bool {
        self.world.coverage().all_covered()
    }

    pub fn robot_position(&self, robot: RobotId) -> Point2 {
        self.robots[robot].position
    }

    pub fn robot_mode(&self, robot: RobotId) -> Mode {
        self.robots[robot].mode
    }

    pub fn robot_assigned(&self, robot: RobotId) -> Vec<CellIndex> {
        self.robots[robot].assigned.iter().copied().collect()
    }

    pub fn partition_events(&self) -> usize {
        self.partition_events
    }

    /// Advance the simulation by one dt step: move every robot, then process
    /// any re-partition event triggered during the step.
    pub fn step(&mut self) {
        let dt = self.scenario.dt;
        let step_start = self.time;
        let mut events: Vec<CoverEvent> = Vec::new();
        for i in 0..self.robots.len() {
            self.advance_robot(i, step_start, dt, &mut events);
        }
        self.time = step_start + dt;

        // Estimation-strategy bookkeeping for the evaluation series.
        if let Some(eval) = &mut self.eval_estimator {
            for ev in &events {
                eval.ingest(
                    ev.cell,
                    self.cell_centroids[ev.cell],
                    Observation {
                        value: ev.value,
                        time: ev.time,
                        source: ev.robot,
                    },
                );
            }
        }

        if self.strategy.repartitions() && self.robots.iter().any(|r| r.wants_repartition) {
            self.handle_repartition();
        }

        self.sample_outputs();
    }

    fn advance_robot(
        &mut self,
        i: RobotId,
        step_start: f64,
        dt: f64,
        events: &mut Vec<CoverEvent>,
    ) {
        let mut budget = dt;
        loop {
            let activity = self.robots[i].activity.clone();
            match activity {
                Activity::Idle => {
                    if self.robots[i].assigned.is_empty() && self.robots[i].path.is_empty() {
                        self.robots[i].mode = Mode::Idle;
                    }
                    break;
                }
                Activity::Travel {
                    dest,
                    speed,
                    cover_after,
                } => {
                    let robot = &mut self.robots[i];
                    let d = robot.position.distance(dest);
                    let needed = d / speed;
                    if needed > budget {
                        let moved = budget * speed;
                        let dir = dest - robot.position;
                        robot.position = robot.position + dir * (moved / d);
                        robot.distance_traveled += moved;
                        break;
                    }
                    robot.position = dest;
                    robot.distance_traveled += d;
                    budget -= needed;
                    match cover_after {
                        Some(cell) => {
                            let jitter = self.robots[i].draw_jitter(&self.scenario.speed_model);
                            let duration = self.cover_duration(i, cell, jitter);
                            self.robots[i].activity = Activity::Cover {
                                cell,
                                remaining: duration,
                            };
                        }
                        None => {
                            // Arrived at the initial goal: plan and start.
                            self.robots[i].mode = Mode::Covering;
                            self.robots[i].activity = Activity::Idle;
                            self.plan_from_current(i);
                        }
                    }
                }
                Activity::Cover { cell, remaining } => {
                    if remaining > budget {
                        self.robots[i].activity = Activity::Cover {
                            cell,
                            remaining: remaining - budget,
                        };
                        break;
                    }
                    budget -= remaining;
                    let finish = step_start + (dt - budget);
                    self.finish_cover(i, cell, finish, events);
                    let next = self.robots[i].path.pop_front();
                    match next {
                        Some(next_cell) => {
                            let jitter = self.robots[i].draw_jitter(&self.scenario.speed_model);
                            let dest = self.scenario.grid.centroid(next_cell);
                            let speed = travel_speed(&self.robots[i].spec.profile, jitter);
                            self.robots[i].activity = Activity::Travel {
                                dest,
                                speed,
                                cover_after: Some(next_cell),
                            };
                        }
                        None => {
                            self.robots[i].activity = Activity::Idle;
                        }
                    }
                }
            }
            if budget <= 0.0 {
                break;
            }
        }
    }

    fn cover_duration(&mut self, i: RobotId, cell: CellIndex, jitter: f64) -> f64 {
        let grid = &self.scenario.grid;
        let field = self.world.field();
        let max_rho = field.max_cell_density();
        let rho_norm = if max_rho > 0.0 {
            field.cell_density(cell) / max_rho
        } else {
            0.0
        };
        let has_targets = self.world.coverage().has_targets(cell);
        let speed = coverage_speed(&self.robots[i].spec.profile, has_targets, rho_norm, jitter);
        grid.cell_size() / speed
    }

    fn finish_cover(
        &mut self,
        i: RobotId,
        cell: CellIndex,
        finish: f64,
        events: &mut Vec<CoverEvent>,
    ) {
        let newly = self
            .world
            .coverage_mut()
            .mark_covered(cell)
            .expect("planned cells are valid");
        debug_assert!(newly, "a robot covered a cell twice");
        let noise = self.robots[i].spec.noise_sigma;
        let value = {
            let robot = &mut self.robots[i];
            self.world
                .observe(cell, noise, &mut robot.obs_rng)
                .expect("valid cell")
        };
        let centroid = self.cell_centroids[cell];
        let robot = &mut self.robots[i];
        robot.assigned.remove(&cell);
        robot.last_finish = finish;
        if let Some(est) = &mut robot.estimator {
            est.ingest(
                cell,
                centroid,
                Observation {
                    value,
                    time: finish,
                    source: i,
                },
            );
        }
        events.push(CoverEvent {
            robot: i,
            cell,
            time: finish,
            value,
        });
        if self.strategy.repartitions() && robot.assigned.len() < self.scenario.n0 {
            robot.wants_repartition = true;
        }
    }

    /// Plan a fresh path over the robot's assigned cells from its current
    /// position and start moving.
    fn plan_from_current(&mut self, i: RobotId) {
        let grid = self.scenario.grid.clone();
        let robot = &mut self.robots[i];
        let cells: Vec<(CellIndex, Point2)> = robot
            .assigned
            .iter()
            .map(|&c| (c, grid.centroid(c)))
            .collect();
        if cells.is_empty() {
            robot.path.clear();
            robot.activity = Activity::Idle;
            return;
        }
        let path = nearest_neighbor_path(robot.position, &cells);
        let mut queue: VecDeque<CellIndex> = path.cells.into_iter().collect();
        let first = queue.pop_front().expect("nonempty path");
        robot.path = queue;
        let jitter = robot.draw_jitter(&self.scenario.speed_model);
        robot.activity = Activity::Travel {
            dest: grid.centroid(first),
            speed: travel_speed(&robot.spec.profile, jitter),
            cover_after: Some(first),
        };
        robot.mode = Mode::Covering;
    }

    /// Re-plan after a re-partition, keeping the committed cell first so the
    /// current motion is never interrupted.
    fn replan_after_assignment(&mut self, i: RobotId) {
        let grid = self.scenario.grid.clone();
        match self.robots[i].mode {
            Mode::ToInitialGoal => {
                // Plans on arrival.
            }
            Mode::Covering | Mode::Idle => {
                if let Some(committed) = self.robots[i].committed_cell() {
                    let robot = &mut self.robots[i];
                    let rest: Vec<(CellIndex, Point2)> = robot
                        .assigned
                        .iter()
                        .filter(|&&c| c != committed)
                        .map(|&c| (c, grid.centroid(c)))
                        .collect();
                    let path = nearest_neighbor_path(grid.centroid(committed), &rest);
                    robot.path = path.cells.into_iter().collect();
                } else {
                    self.plan_from_current(i);
                }
            }
        }
    }

    fn handle_repartition(&mut self) {
        let positions: Vec<Point2> = self.robots.iter().map(|r| r.position).collect();
        let cfg = *self.net.config();
        let components = netsim::connected_components(&positions, &cfg);
        for component in components {
            let flagged: Vec<RobotId> = component
                .iter()
                .copied()
                .filter(|&i| self.robots[i].wants_repartition)
                .collect();
            if flagged.is_empty() {
                continue;
            }
            for &i in &component {
                self.robots[i].wants_repartition = false;
            }

            // Requesters announce the event (when anyone can hear them).
            if self.robots.len() > 1 {
                for &i in &flagged {
                    self.net.send(
                        Message {
                            from: i,
                            to: Recipient::Broadcast,
                            kind: MessageKind::RepartitionRequest,
                        },
                        &positions,
                    );
                }
            }

            // Estimating robots piggyback observation shares on the event.
            if self.strategy == Strategy::Mdcpp && component.len() > 1 {
                for &i in &component {
                    let entries = self.robots[i]
                        .estimator
                        .as_ref()
                        .map(|e| e.store().entries())
                        .unwrap_or_default();
                    self.net.send(
                        Message {
                            from: i,
                            to: Recipient::Broadcast,
                            kind: MessageKind::ObservationShare {
                                observations: entries,
                            },
                        },
                        &positions,
                    );
                }
            }
            for &i in &component {
                for msg in self.net.drain(i) {
                    if let MessageKind::ObservationShare { observations } = msg.kind {
                        if let Some(est) = &mut self.robots[i].estimator {
                            est.merge_from(&observations);
                        }
                    }
                }
            }

            // Pool: members' uncovered cells, minus cells being worked on.
            let mut prior: BTreeMap<CellIndex, RobotId> = BTreeMap::new();
            for &i in &component {
                let committed = self.robots[i].committed_cell();
                for &c in &self.robots[i].assigned {
                    if Some(c) != committed {
                        prior.insert(c, i);
                    }
                }
            }
            if prior.is_empty() {
                continue;
            }

            let partition = self.run_assignment(&component, &prior, &positions);
            for &i in &component {
                let committed = self.robots[i].committed_cell();
                let mut cells: BTreeSet<CellIndex> =
                    partition.robot_cells(i).into_iter().collect();
                if let Some(c) = committed {
                    cells.insert(c);
                }
                self.robots[i].assigned = cells;
                self.replan_after_assignment(i);
            }
            self.partition_events += 1;
            self.snapshot_partition();
        }
        #[cfg(debug_assertions)]
        self.assert_partition_valid();
    }

    #[cfg(debug_assertions)]
    fn assert_partition_valid(&self) {
        let mut seen: BTreeMap<CellIndex, RobotId> = BTreeMap::new();
        for (i, robot) in self.robots.iter().enumerate() {
            for &c in &robot.assigned {
                assert!(!self.world.coverage().is_covered(c));
                assert!(seen.insert(c, i).is_none(), "cell {c} owned twice");
            }
        }
        for c in self.world.coverage().uncovered_cells() {
            assert!(seen.contains_key(&c), "uncovered cell {c} unowned");
        }
    }

    fn snapshot_partition(&mut self) {
        let mut assignment = BTreeMap::new();
        for (i, robot) in self.robots.iter().enumerate() {
            for &c in &robot.assigned {
                assignment.insert(c, i);
            }
        }
        self.partition_snapshots.push(PartitionSnapshot {
            time: self.time,
            assignment,
        });
    }

    fn sample_outputs(&mut self) {
        let eps = 1e-9;
        while self.time + eps >= self.next_trajectory {
            for (i, robot) in self.robots.iter().enumerate() {
                self.trajectories.push(TrajectorySample {
                    time: self.time,
                    robot: i,
                    position: robot.position,
                });
            }
            self.next_trajectory += self.scenario.trajectory_interval;
        }
        if self.eval_estimator.is_some() {
            while self.time + eps >= self.next_swd {
                self.sample_swd();
                self.next_swd += self.scenario.swd_interval;
            }
        }
    }

    fn sample_swd(&mut self) {
        let truth = self.world.field().density_grid();
        let truth_mass: f64 = truth.iter().sum();
        if truth_mass <= 0.0 {
            return;
        }
        let est = match &mut self.eval_estimator {
            Some(e) => e.estimate(&mut self.eval_rng),
            None => return,
        };
        // Before any component exists, compare a flat prior instead of the
        // (massless) zero field.
        let pred: Vec<f64> = if est.k_hat() == 0 {
            alloc::vec![1.0; truth.len()]
        } else {
            est.predicted_grid(&self.scenario.grid)
        };
        let value = sliced_wasserstein(
            &pred,
            truth,
            &self.cell_centroids,
            self.scenario.swd_projections,
            &mut self.swd_rng,
        )
        .expect("both fields have positive mass");
        self.swd_series.push((self.time, value));
    }

    /// Run to completion (or the watchdog horizon) and collect the record.
    pub fn finish(mut self) -> RunRecord {
        while !self.is_complete() && self.time < self.scenario.max_sim_time {
            self.step();
        }
        let completed = self.is_complete();
        let completion_time = completed.then(|| {
            self.robots
                .iter()
                .map(|r| r.last_finish)
                .fold(0.0, f64::max)
        });

        // Closing samples.
        let final_time = self.time;
        if self
            .trajectories
            .last()
            .map(|s| s.time + 1e-9 < final_time)
            .unwrap_or(true)
        {
            for (i, robot) in self.robots.iter().enumerate() {
                self.trajectories.push(TrajectorySample {
                    time: final_time,
                    robot: i,
                    position: robot.position,
                });
            }
        }
        if self.eval_estimator.is_some()
            && self
                .swd_series
                .last()
                .map(|&(t, _)| t + 1e-9 < final_time)
                .unwrap_or(false)
        {
            self.sample_swd();
            if let Some(last) = self.swd_series.last_mut() {
                last.0 = final_time;
            }
        }

        let final_estimate_grid = match &mut self.eval_estimator {
            Some(e) => Some(
                e.estimate(&mut self.eval_rng)
                    .predicted_grid(&self.scenario.grid),
            ),
            None => None,
        };

        let per_robot_path_length: Vec<f64> =
            self.robots.iter().map(|r| r.distance_traveled).collect();
        let total_path_length = per_robot_path_length.iter().sum();
        let per_robot_finish_time: Vec<f64> =
            self.robots.iter().map(|r| r.last_finish).collect();

        RunRecord {
            result: ScenarioResult {
                strategy: self.strategy,
                seed: self.scenario.seed,
                completed,
                completion_time,
                per_robot_path_length,
                total_path_length,
                per_robot_finish_time,
                swd_series: self.swd_series,
                partition_events: self.partition_events,
                messages_sent: self.net.messages_sent(),
                messages_dropped: self.net.messages_dropped(),
            },
            trajectories: self.trajectories,
            partition_snapshots: self.partition_snapshots,
            truth_grid: self.world.field().density_grid().to_vec(),
            final_estimate_grid,
            goals: self.goals,
        }
    }
}

/// Build and run one scenario end to end.
pub fn run(scenario: &Scenario, strategy: Strategy) -> Result<RunRecord, EngineError> {
    Ok(Simulation::new(scenario, strategy)?.finish())
}
