//! Workload-aware partitioning of uncovered cells.
//!
//! Three pieces: Lloyd's-algorithm goal initialization over a power diagram,
//! capacity-constrained random initial assignment (largest-remainder counts
//! proportional to per-robot capacity weights), and the pairwise-swap
//! protocol that moves every cell toward the closest robot of each pair
//! while preserving per-robot counts. The protocol exists twice: a
//! centralized reference used as a test oracle, and the distributed version
//! that exchanges all data through [`netsim`](crate::netsim) messages.

use alloc::collections::{BTreeMap, BTreeSet, BinaryHeap};
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::geometry::Point2;
use crate::netsim::{self, Message, MessageKind, Network, NetworkConfig, Recipient};
use crate::world::GridSpec;
use crate::{CellIndex, RobotId};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AssignmentError {
    #[error("alpha and capacity weights must be positive")]
    InvalidWeights,
    #[error("per-robot vectors must share one length")]
    LengthMismatch,
}

/// Per-robot workload data: capability weights, current predicted workload
/// sums, and the capacity weights that drive cell-count shares.
#[derive(Clone, Debug, PartialEq)]
pub struct WorkloadModel {
    alpha: Vec<f64>,
    phi: Vec<f64>,
    capacity_weights: Vec<f64>,
}

impl WorkloadModel {
    /// Build a model from capability weights alone; capacity weights default
    /// to the alphas and predicted workloads to zero.
    pub fn from_alphas(alpha: Vec<f64>) -> Result<Self, AssignmentError> {
        if alpha.iter().any(|&a| !(a > 0.0)) {
            return Err(AssignmentError::InvalidWeights);
        }
        let n = alpha.len();
        Ok(WorkloadModel {
            capacity_weights: alpha.clone(),
            alpha,
            phi: alloc::vec![0.0; n],
        })
    }

    /// Replace the per-robot predicted workload sums.
    pub fn with_phi(mut self, phi: Vec<f64>) -> Result<Self, AssignmentError> {
        if phi.len() != self.alpha.len() {
            return Err(AssignmentError::LengthMismatch);
        }
        self.phi = phi;
        Ok(self)
    }

    /// Override the capacity weights (cell-count shares).
    pub fn with_capacity_weights(mut self, weights: Vec<f64>) -> Result<Self, AssignmentError> {
        if weights.len() != self.alpha.len() {
            return Err(AssignmentError::LengthMismatch);
        }
        if weights.iter().any(|&w| !(w > 0.0)) {
            return Err(AssignmentError::InvalidWeights);
        }
        self.capacity_weights = weights;
        Ok(self)
    }

    pub fn robot_count(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self, robot: RobotId) -> f64 {
        self.alpha[robot]
    }

    pub fn phi(&self, robot: RobotId) -> f64 {
        self.phi[robot]
    }

    pub fn capacity_weights(&self) -> &[f64] {
        &self.capacity_weights
    }
}

/// A disjoint, exhaustive assignment of (uncovered) cells to robots.
#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    assignment: BTreeMap<CellIndex, RobotId>,
    capacities: Vec<usize>,
}

impl Partition {
    pub fn new(assignment: BTreeMap<CellIndex, RobotId>, capacities: Vec<usize>) -> Self {
        Partition {
            assignment,
            capacities,
        }
    }

    pub fn assignment(&self) -> &BTreeMap<CellIndex, RobotId> {
        &self.assignment
    }

    pub fn owner(&self, cell: CellIndex) -> Option<RobotId> {
        self.assignment.get(&cell).copied()
    }

    pub fn robot_cells(&self, robot: RobotId) -> Vec<CellIndex> {
        self.assignment
            .iter()
            .filter(|&(_, &r)| r == robot)
            .map(|(&c, _)| c)
            .collect()
    }

    /// Cell counts per robot id, over `n_robots` robots.
    pub fn counts(&self, n_robots: usize) -> Vec<usize> {
        let mut counts = alloc::vec![0usize; n_robots];
        for &r in self.assignment.values() {
            counts[r] += 1;
        }
        counts
    }

    /// The target counts the assignment was initialized with.
    pub fn capacities(&self) -> &[usize] {
        &self.capacities
    }

    pub fn cell_count(&self) -> usize {
        self.assignment.len()
    }
}

/// Remaining-completion-time surrogate for one robot: phi * alpha * the sum
/// of distances from the robot to its assigned cell centroids.
pub fn workload(
    robot: RobotId,
    partition: &Partition,
    position: Point2,
    model: &WorkloadModel,
    grid: &GridSpec,
) -> f64 {
    let dist_sum: f64 = partition
        .assignment
        .iter()
        .filter(|&(_, &r)| r == robot)
        .map(|(&c, _)| position.distance(grid.centroid(c)))
        .sum();
    model.phi(robot) * model.alpha(robot) * dist_sum
}

/// Largest-remainder split of `total_cells` into integer counts proportional
/// to the robots' capacity weights; remainder ties go to the lower robot id.
pub fn capacity_counts(total_cells: usize, robots: &[RobotId], weights: &[f64]) -> Vec<usize> {
    let weight_sum: f64 = robots.iter().map(|&r| weights[r]).sum();
    debug_assert!(weight_sum > 0.0);
    let shares: Vec<f64> = robots
        .iter()
        .map(|&r| total_cells as f64 * weights[r] / weight_sum)
        .collect();
    let mut counts: Vec<usize> = shares.iter().map(|&s| crate::math::floor(s) as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut leftover = total_cells - assigned;
    let mut order: Vec<usize> = (0..robots.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = shares[a] - counts[a] as f64;
        let rb = shares[b] - counts[b] as f64;
        rb.total_cmp(&ra).then(robots[a].cmp(&robots[b]))
    });
    for idx in order {
        if leftover == 0 {
            break;
        }
        counts[idx] += 1;
        leftover -= 1;
    }
    counts
}

/// Stopping rule and iteration cap for goal initialization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LloydParams {
    /// Converged when every site moves less than this per iteration (meters).
    pub eps: f64,
    pub max_iters: usize,
}

impl LloydParams {
    /// One tenth of a cell width, at most 100 iterations.
    pub fn for_cell_size(cell_size: f64) -> Self {
        LloydParams {
            eps: 0.1 * cell_size,
            max_iters: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LloydOutcome {
    pub goals: Vec<Point2>,
    pub iterations: usize,
    /// False when the iteration cap was hit before every displacement
    /// dropped below eps.
    pub converged: bool,
    /// The partition functional evaluated once per iteration, right after
    /// the assignment step.
    pub functional: Vec<f64>,
}

/// Lloyd relaxation over the power diagram: cells go to the site minimizing
/// squared distance minus the power weight `(phi_i * alpha_i)^2`, then each
/// site moves to the weighted centroid of its power cell. With uniform cell
/// weights the recorded functional is non-increasing.
pub fn lloyd_init(
    grid: &GridSpec,
    cells: &[CellIndex],
    cell_weights: &[f64],
    positions: &[Point2],
    model: &WorkloadModel,
    params: &LloydParams,
) -> LloydOutcome {
    debug_assert_eq!(cells.len(), cell_weights.len());
    let n_robots = positions.len();
    let power: Vec<f64> = (0..n_robots)
        .map(|i| {
            let w = model.phi(i) * model.alpha(i);
            w * w
        })
        .collect();
    let centroids: Vec<Point2> = cells.iter().map(|&c| grid.centroid(c)).collect();

    let mut sites: Vec<Point2> = positions.to_vec();
    let mut functional = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..params.max_iters {
        iterations += 1;

        // Assignment step: power rule, ties to the lower robot id.
        let owners: Vec<usize> = centroids
            .iter()
            .map(|&g| {
                let mut best = 0;
                let mut best_cost = f64::INFINITY;
                for (i, &q) in sites.iter().enumerate() {
                    let cost = g.distance_squared(q) - power[i];
                    if cost < best_cost {
                        best_cost = cost;
                        best = i;
                    }
                }
                best
            })
            .collect();

        let h: f64 = owners
            .iter()
            .zip(centroids.iter())
            .zip(cell_weights.iter())
            .map(|((&o, &g), &w)| w * g.distance_squared(sites[o]) - power[o])
            .sum();
        functional.push(h);

        // Move step: weighted centroid of each power cell; a site with an
        // empty cell (or zero total weight) stays put.
        let mut sums = alloc::vec![Point2::ORIGIN; n_robots];
        let mut mass = alloc::vec![0.0f64; n_robots];
        for ((&o, &g), &w) in owners.iter().zip(centroids.iter()).zip(cell_weights.iter()) {
            sums[o] = sums[o] + g * w;
            mass[o] += w;
        }
        let mut max_disp: f64 = 0.0;
        for i in 0..n_robots {
            if mass[i] > 0.0 {
                let target = sums[i] * (1.0 / mass[i]);
                max_disp = max_disp.max(sites[i].distance(target));
                sites[i] = target;
            }
        }
        if max_disp < params.eps {
            converged = true;
            break;
        }
    }

    LloydOutcome {
        goals: sites,
        iterations,
        converged,
        functional,
    }
}

/// Random capacity-respecting split of the pooled cells: counts follow the
/// model's capacity weights by largest remainder, and membership is a
/// seeded shuffle dealt out in robot order.
pub fn initial_capacity_assignment<R: Rng>(
    cells: &[CellIndex],
    robots: &[RobotId],
    model: &WorkloadModel,
    rng: &mut R,
) -> Partition {
    let counts = capacity_counts(cells.len(), robots, model.capacity_weights());
    let mut shuffled = cells.to_vec();
    shuffled.shuffle(rng);
    let mut assignment = BTreeMap::new();
    let mut cursor = 0;
    for (slot, &robot) in robots.iter().enumerate() {
        for &cell in &shuffled[cursor..cursor + counts[slot]] {
            assignment.insert(cell, robot);
        }
        cursor += counts[slot];
    }
    let mut capacities = alloc::vec![0usize; model.robot_count()];
    for (slot, &robot) in robots.iter().enumerate() {
        capacities[robot] = counts[slot];
    }
    Partition::new(assignment, capacities)
}

/// How much closer robot j is to cell g than robot i: positive means the
/// pair can improve by handing g from i to j.
#[inline]
pub fn swap_key(g: Point2, q_i: Point2, q_j: Point2) -> f64 {
    g.distance(q_i) - g.distance(q_j)
}

/// Entry of a swap heap: a cell and its swap-gain key.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SwapEntry {
    pub key: f64,
    pub cell: CellIndex,
}

impl Eq for SwapEntry {}

impl Ord for SwapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Max-heap by key; among equal keys the smaller cell index pops
        // first, which keeps the distributed/centralized runs bit-identical.
        self.key
            .total_cmp(&other.key)
            .then_with(|| other.cell.cmp(&self.cell))
    }
}

impl PartialOrd for SwapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Max-heap of swap candidates.
#[derive(Clone, Debug, Default)]
pub struct SwapHeap(BinaryHeap<SwapEntry>);

impl SwapHeap {
    pub fn new() -> Self {
        SwapHeap(BinaryHeap::new())
    }

    pub fn push(&mut self, key: f64, cell: CellIndex) {
        self.0.push(SwapEntry { key, cell });
    }

    pub fn pop(&mut self) -> Option<SwapEntry> {
        self.0.pop()
    }

    pub fn peek(&self) -> Option<&SwapEntry> {
        self.0.peek()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// One round of paired swaps between two disjoint cell sets: pop the top of
/// both heaps and exchange ownership while the combined gain is positive.
/// Cardinalities are preserved. Returns the number of executed swaps.
pub fn pairwise_swap(
    s_i: &mut BTreeSet<CellIndex>,
    s_j: &mut BTreeSet<CellIndex>,
    q_i: Point2,
    q_j: Point2,
    grid: &GridSpec,
) -> usize {
    debug_assert!(s_i.is_disjoint(s_j));
    let mut h_i = SwapHeap::new();
    for &g in s_i.iter() {
        h_i.push(swap_key(grid.centroid(g), q_i, q_j), g);
    }
    let mut h_j = SwapHeap::new();
    for &g in s_j.iter() {
        h_j.push(swap_key(grid.centroid(g), q_j, q_i), g);
    }
    let mut swaps = 0;
    while let (Some(&top_i), Some(&top_j)) = (h_i.peek(), h_j.peek()) {
        if top_i.key + top_j.key <= 0.0 {
            break;
        }
        h_i.pop();
        h_j.pop();
        s_i.remove(&top_i.cell);
        s_j.insert(top_i.cell);
        s_j.remove(&top_j.cell);
        s_i.insert(top_j.cell);
        swaps += 1;
    }
    swaps
}

fn sets_to_partition(
    robots: &[RobotId],
    sets: &[BTreeSet<CellIndex>],
    capacities: Vec<usize>,
) -> Partition {
    let mut assignment = BTreeMap::new();
    for (slot, &robot) in robots.iter().enumerate() {
        for &cell in &sets[slot] {
            assignment.insert(cell, robot);
        }
    }
    Partition::new(assignment, capacities)
}

/// Reference implementation of the cell-assignment protocol, run in one
/// process over every robot pair. Used as the equivalence oracle for the
/// distributed version and as the unlimited-range fast path.
pub fn centralized_assignment<R: Rng>(
    robots: &[RobotId],
    cells: &[CellIndex],
    positions: &[Point2],
    model: &WorkloadModel,
    grid: &GridSpec,
    rng: &mut R,
) -> Partition {
    let init = initial_capacity_assignment(cells, robots, model, rng);
    let capacities = init.capacities().to_vec();
    let mut sets: Vec<BTreeSet<CellIndex>> = robots
        .iter()
        .map(|&r| init.robot_cells(r).into_iter().collect())
        .collect();

    loop {
        let mut any_swap = false;
        for a in 0..robots.len() {
            for b in (a + 1)..robots.len() {
                let mut s_a = core::mem::take(&mut sets[a]);
                let mut s_b = core::mem::take(&mut sets[b]);
                let swaps =
                    pairwise_swap(&mut s_a, &mut s_b, positions[robots[a]], positions[robots[b]], grid);
                sets[a] = s_a;
                sets[b] = s_b;
                if swaps > 0 {
                    any_swap = true;
                }
            }
        }
        if !any_swap {
            break;
        }
    }
    sets_to_partition(robots, &sets, capacities)
}

/// The distributed cell assignment protocol.
///
/// Every robot snapshots its neighbor set. Robots that hold the smallest id
/// in their own neighborhood act as initializers: each pools the prior cells
/// of the robots whose minimum-id neighbor it is, draws a random
/// capacity-respecting split, and sends the parts back. Robots without a
/// live initializer keep their prior cells. Then neighbor pairs run
/// [`pairwise_swap`] (the lower id drives each pair) in synchronous rounds
/// until a full round makes no swap. All exchanged data flows through
/// `net`; with unlimited range the result is bit-identical to
/// [`centralized_assignment`] under the same RNG state.
///
/// A `robots` slice that is not internally connected is handled by running
/// the protocol independently per connected sub-component, so ownership
/// never crosses a connectivity boundary.
pub fn distributed_assignment<R: Rng>(
    robots: &[RobotId],
    prior: &BTreeMap<CellIndex, RobotId>,
    positions: &[Point2],
    model: &WorkloadModel,
    grid: &GridSpec,
    net: &mut Network,
    rng: &mut R,
) -> Partition {
    let sub_components =
        netsim::connected_components_of(robots, positions, net.config());
    if sub_components.len() > 1 {
        let mut assignment = BTreeMap::new();
        let mut capacities = alloc::vec![0usize; model.robot_count()];
        for sub in sub_components {
            let members: BTreeSet<RobotId> = sub.iter().copied().collect();
            let sub_prior: BTreeMap<CellIndex, RobotId> = prior
                .iter()
                .filter(|&(_, r)| members.contains(r))
                .map(|(&c, &r)| (c, r))
                .collect();
            let part = distributed_assignment(&sub, &sub_prior, positions, model, grid, net, rng);
            for (&c, &r) in part.assignment() {
                assignment.insert(c, r);
            }
            for &r in &sub {
                capacities[r] = part.capacities()[r];
            }
        }
        return Partition::new(assignment, capacities);
    }

    let member_set: BTreeSet<RobotId> = robots.iter().copied().collect();
    let cfg: NetworkConfig = *net.config();

    // Neighborhood snapshot for the whole protocol run.
    let neighborhoods: BTreeMap<RobotId, Vec<RobotId>> = robots
        .iter()
        .map(|&i| {
            let lambda: Vec<RobotId> = netsim::neighbors(i, positions, &cfg)
                .unwrap_or_default()
                .into_iter()
                .filter(|j| member_set.contains(j))
                .collect();
            (i, lambda)
        })
        .collect();

    // head(j) = min of j and its neighbors; initializers head themselves.
    let head = |j: RobotId| -> RobotId {
        neighborhoods[&j]
            .iter()
            .copied()
            .chain(core::iter::once(j))
            .min()
            .expect("nonempty")
    };

    let mut working: BTreeMap<RobotId, BTreeSet<CellIndex>> =
        robots.iter().map(|&r| (r, BTreeSet::new())).collect();
    for (&cell, &owner) in prior {
        if let Some(set) = working.get_mut(&owner) {
            set.insert(cell);
        }
    }

    // Initialization phase. Non-initializers broadcast their current cells;
    // initializers request, pool, split, and send assignments back.
    let initializers: Vec<RobotId> = robots.iter().copied().filter(|&i| head(i) == i).collect();
    for &j in robots {
        if head(j) != j {
            net.send(
                Message {
                    from: j,
                    to: Recipient::Broadcast,
                    kind: MessageKind::SendAssignment {
                        cells: working[&j].iter().copied().collect(),
                    },
                },
                positions,
            );
        }
    }
    for &i in &initializers {
        let group: Vec<RobotId> = robots.iter().copied().filter(|&j| head(j) == i).collect();
        for &j in &group {
            if j != i {
                net.send(
                    Message {
                        from: i,
                        to: Recipient::Unicast(j),
                        kind: MessageKind::RequestAssignment,
                    },
                    positions,
                );
            }
        }
        // Collect the group's broadcast cells from the mailbox.
        let mut pooled: BTreeSet<CellIndex> = working[&i].iter().copied().collect();
        for msg in net.drain(i) {
            if let MessageKind::SendAssignment { cells } = msg.kind {
                if group.contains(&msg.from) {
                    pooled.extend(cells);
                }
            }
        }
        let pool: Vec<CellIndex> = pooled.into_iter().collect();
        let split = initial_capacity_assignment(&pool, &group, model, rng);
        for &j in &group {
            let cells = split.robot_cells(j);
            if j == i {
                working.insert(i, cells.into_iter().collect());
            } else {
                net.send(
                    Message {
                        from: i,
                        to: Recipient::Unicast(j),
                        kind: MessageKind::SendAssignment { cells },
                    },
                    positions,
                );
            }
        }
    }
    for &j in robots {
        if head(j) != j {
            for msg in net.drain(j) {
                if let MessageKind::SendAssignment { cells } = msg.kind {
                    if msg.from == head(j) {
                        working.insert(j, cells.into_iter().collect());
                    }
                }
            }
        }
    }

    let capacities = {
        let mut caps = alloc::vec![0usize; model.robot_count()];
        for &r in robots {
            caps[r] = working[&r].len();
        }
        caps
    };

    // Swap phase: synchronous rounds over neighbor pairs, lower id driving,
    // until a full round executes no swap.
    loop {
        let mut any_swap = false;
        for &i in robots {
            let partners: Vec<RobotId> = neighborhoods[&i]
                .iter()
                .copied()
                .filter(|&j| j > i)
                .collect();
            for j in partners {
                // i asks j for its state; j answers with position and cells.
                net.send(
                    Message {
                        from: i,
                        to: Recipient::Unicast(j),
                        kind: MessageKind::RequestAssignment,
                    },
                    positions,
                );
                net.drain(j);
                net.send(
                    Message {
                        from: j,
                        to: Recipient::Unicast(i),
                        kind: MessageKind::SendStateAndCells {
                            position: positions[j],
                            cells: working[&j].iter().copied().collect(),
                        },
                    },
                    positions,
                );
                let mut s_j: BTreeSet<CellIndex> = BTreeSet::new();
                let mut q_j = positions[j];
                for msg in net.drain(i) {
                    if let MessageKind::SendStateAndCells { position, cells } = msg.kind {
                        if msg.from == j {
                            q_j = position;
                            s_j = cells.into_iter().collect();
                        }
                    }
                }
                let mut s_i = working.remove(&i).expect("member");
                let swaps = pairwise_swap(&mut s_i, &mut s_j, positions[i], q_j, grid);
                working.insert(i, s_i);
                net.send(
                    Message {
                        from: i,
                        to: Recipient::Unicast(j),
                        kind: MessageKind::SwappedAssignment {
                            cells: s_j.iter().copied().collect(),
                        },
                    },
                    positions,
                );
                for msg in net.drain(j) {
                    if let MessageKind::SwappedAssignment { cells } = msg.kind {
                        if msg.from == i {
                            working.insert(j, cells.into_iter().collect());
                        }
                    }
                }
                if swaps > 0 {
                    any_swap = true;
                }
            }
        }
        if !any_swap {
            break;
        }
    }

    let sets: Vec<BTreeSet<CellIndex>> = robots.iter().map(|&r| working[&r].clone()).collect();
    sets_to_partition(robots, &sets, capacities)
}
