//! Online estimation of the Gaussian-mixture target distribution from
//! sparse, noisy cell observations.
//!
//! The pipeline: observations above a threshold feed a K-means model
//! selection over candidate component counts, candidates are ranked by a
//! composite fit score (peak density at the center, explored-cell support,
//! Pearson correlation against the unit-Gaussian prediction), and component
//! spreads are fitted by exhaustive MSE search over a sigma grid. The
//! sliced Wasserstein distance in [`swd`] evaluates estimates against truth.

pub mod swd;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use rand::Rng;

use crate::geometry::Point2;
use crate::math;
use crate::world::GridSpec;
use crate::{CellIndex, RobotId};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EstimatorError {
    #[error("cannot form {k} clusters from {points} points")]
    InfeasibleK { k: usize, points: usize },
    #[error("distance undefined: a field has zero total mass")]
    UndefinedDistance,
    #[error("fields must share one grid")]
    MismatchedFields,
}

/// Tuning knobs of the estimation pipeline. Lengths are in meters.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorParams {
    /// Filtering threshold: only observations strictly above it feed K-means.
    pub theta: f64,
    /// Largest candidate component count.
    pub k_max: usize,
    /// Exploration radius around a candidate center (strict bound).
    pub exploration_radius: f64,
    /// Candidate spreads for the MSE search, ascending.
    pub sigma_grid: Vec<f64>,
    /// Density predicted everywhere while no estimate exists.
    pub prior_density: f64,
}

impl EstimatorParams {
    /// Defaults scaled to a grid's cell size: threshold 0.6, up to five
    /// components, a five-cell exploration radius, and spreads from 2.5 to
    /// 5.0 cell widths in 0.1-cell steps.
    pub fn for_cell_size(cell_size: f64) -> Self {
        EstimatorParams {
            theta: 0.6,
            k_max: 5,
            exploration_radius: 5.0 * cell_size,
            sigma_grid: sigma_grid(2.5 * cell_size, 5.0 * cell_size, 0.1 * cell_size),
            prior_density: 0.0,
        }
    }

    /// Midpoint of the sigma search range.
    pub fn sigma_midpoint(&self) -> f64 {
        match (self.sigma_grid.first(), self.sigma_grid.last()) {
            (Some(lo), Some(hi)) => (lo + hi) / 2.0,
            _ => 0.0,
        }
    }
}

/// Build an inclusive arithmetic grid `lo, lo+step, ..., hi`.
pub fn sigma_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    debug_assert!(step > 0.0 && hi >= lo);
    let n = math::floor((hi - lo) / step + 0.5) as usize;
    (0..=n).map(|i| lo + i as f64 * step).collect()
}

/// One recorded observation of a cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observation {
    pub value: f64,
    pub time: f64,
    pub source: RobotId,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct StoreEntry {
    centroid: Point2,
    obs: Observation,
}

/// A robot's observation memory: every cell it has seen (latest value wins)
/// plus the incrementally maintained filtered set of high-density readings.
#[derive(Clone, Debug)]
pub struct ObservationStore {
    theta: f64,
    all: BTreeMap<CellIndex, StoreEntry>,
    filtered: BTreeSet<CellIndex>,
}

impl ObservationStore {
    pub fn new(theta: f64) -> Self {
        ObservationStore {
            theta,
            all: BTreeMap::new(),
            filtered: BTreeSet::new(),
        }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn len(&self) -> usize {
        self.all.len()
    }

    pub fn is_empty(&self) -> bool {
        self.all.is_empty()
    }

    pub fn filtered_len(&self) -> usize {
        self.filtered.len()
    }

    /// Record an observation; a newer reading of the same cell replaces the
    /// older one, and the filtered set keeps only values strictly above theta.
    pub fn ingest(&mut self, cell: CellIndex, centroid: Point2, obs: Observation) {
        self.all.insert(cell, StoreEntry { centroid, obs });
        if obs.value > self.theta {
            self.filtered.insert(cell);
        } else {
            self.filtered.remove(&cell);
        }
    }

    /// Merge one shared entry; the reading with the greater (time, source)
    /// key wins, so merging is order-independent.
    pub fn merge(&mut self, cell: CellIndex, centroid: Point2, obs: Observation) {
        let newer = match self.all.get(&cell) {
            Some(existing) => {
                (obs.time, obs.source) > (existing.obs.time, existing.obs.source)
            }
            None => true,
        };
        if newer {
            self.ingest(cell, centroid, obs);
        }
    }

    /// Latest observed value of a cell.
    pub fn value_at(&self, cell: CellIndex) -> Option<f64> {
        self.all.get(&cell).map(|e| e.obs.value)
    }

    /// All observations, ascending by cell index.
    pub fn iter_all(&self) -> impl Iterator<Item = (CellIndex, Point2, f64)> + '_ {
        self.all.iter().map(|(&c, e)| (c, e.centroid, e.obs.value))
    }

    /// Full entries, for sharing over the network.
    pub fn entries(&self) -> Vec<(CellIndex, Point2, Observation)> {
        self.all.iter().map(|(&c, e)| (c, e.centroid, e.obs)).collect()
    }

    /// Centroids and values of the filtered set, ascending by cell index.
    pub fn filtered_points(&self) -> Vec<(Point2, f64)> {
        self.filtered
            .iter()
            .map(|c| {
                let e = &self.all[c];
                (e.centroid, e.obs.value)
            })
            .collect()
    }

    pub fn filtered_cells(&self) -> impl Iterator<Item = CellIndex> + '_ {
        self.filtered.iter().copied()
    }

    /// Observed cells strictly within `radius` of `center`.
    pub fn observed_within(&self, center: Point2, radius: f64) -> Vec<(CellIndex, Point2, f64)> {
        self.all
            .iter()
            .filter(|(_, e)| e.centroid.distance(center) < radius)
            .map(|(&c, e)| (c, e.centroid, e.obs.value))
            .collect()
    }

    /// The observed cell nearest to a point (ties to the lower cell index).
    pub fn nearest_observed(&self, center: Point2) -> Option<(CellIndex, Point2, f64)> {
        let mut best: Option<(f64, CellIndex)> = None;
        for (&c, e) in &self.all {
            let d = e.centroid.distance(center);
            let better = match best {
                None => true,
                Some((bd, _)) => d < bd,
            };
            if better {
                best = Some((d, c));
            }
        }
        best.map(|(_, c)| {
            let e = &self.all[&c];
            (c, e.centroid, e.obs.value)
        })
    }
}

/// Result of one K-means run.
#[derive(Clone, Debug, PartialEq)]
pub struct KmeansResult {
    pub labels: Vec<usize>,
    pub centroids: Vec<Point2>,
    /// Within-cluster sum of squares of the final assignment.
    pub wcss: f64,
}

fn nearest_centroid(p: Point2, centroids: &[Point2]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (k, &c) in centroids.iter().enumerate() {
        let d = p.distance_squared(c);
        if d < best_d {
            best_d = d;
            best = k;
        }
    }
    best
}

fn wcss_of(points: &[Point2], labels: &[usize], centroids: &[Point2]) -> f64 {
    points
        .iter()
        .zip(labels)
        .map(|(p, &l)| p.distance_squared(centroids[l]))
        .sum()
}

/// Lloyd-style K-means with farthest-point seeding from one random draw.
/// Deterministic given the RNG state; ties break toward lower indices.
pub fn kmeans<R: Rng>(
    points: &[Point2],
    k: usize,
    rng: &mut R,
) -> Result<KmeansResult, EstimatorError> {
    let n = points.len();
    if k == 0 || k > n {
        return Err(EstimatorError::InfeasibleK { k, points: n });
    }

    // Farthest-point seeding: random first center, then greedily the point
    // with the largest distance to its nearest chosen center.
    let mut centroids = Vec::with_capacity(k);
    centroids.push(points[rng.gen_range(0..n)]);
    while centroids.len() < k {
        let mut far_idx = 0;
        let mut far_d = -1.0;
        for (i, &p) in points.iter().enumerate() {
            let d = centroids
                .iter()
                .map(|&c| p.distance_squared(c))
                .fold(f64::INFINITY, f64::min);
            if d > far_d {
                far_d = d;
                far_idx = i;
            }
        }
        centroids.push(points[far_idx]);
    }

    let mut labels: Vec<usize> = points.iter().map(|&p| nearest_centroid(p, &centroids)).collect();
    let mut prev_wcss = f64::INFINITY;
    for _ in 0..100 {
        // Refill any empty cluster with the worst-fitting point of a
        // multi-member cluster so the cluster count stays k.
        let mut sizes = alloc::vec![0usize; k];
        for &l in &labels {
            sizes[l] += 1;
        }
        for empty in 0..k {
            if sizes[empty] > 0 {
                continue;
            }
            let mut steal: Option<(f64, usize)> = None;
            for (i, &p) in points.iter().enumerate() {
                if sizes[labels[i]] < 2 {
                    continue;
                }
                let d = p.distance_squared(centroids[labels[i]]);
                let better = match steal {
                    None => true,
                    Some((bd, _)) => d > bd,
                };
                if better {
                    steal = Some((d, i));
                }
            }
            if let Some((_, i)) = steal {
                sizes[labels[i]] -= 1;
                labels[i] = empty;
                sizes[empty] += 1;
            }
        }

        // Means of the current clusters.
        let mut sums = alloc::vec![Point2::ORIGIN; k];
        let mut counts = alloc::vec![0usize; k];
        for (&p, &l) in points.iter().zip(&labels) {
            sums[l] = sums[l] + p;
            counts[l] += 1;
        }
        for (c, (&s, &cnt)) in centroids.iter_mut().zip(sums.iter().zip(&counts)) {
            if cnt > 0 {
                *c = s * (1.0 / cnt as f64);
            }
        }

        let new_labels: Vec<usize> =
            points.iter().map(|&p| nearest_centroid(p, &centroids)).collect();
        let new_wcss = wcss_of(points, &new_labels, &centroids);
        debug_assert!(
            new_wcss <= prev_wcss + 1e-9,
            "wcss increased: {prev_wcss} -> {new_wcss}"
        );
        let converged = new_labels == labels;
        labels = new_labels;
        prev_wcss = new_wcss;
        if converged {
            break;
        }
    }

    let wcss = wcss_of(points, &labels, &centroids);
    Ok(KmeansResult {
        labels,
        centroids,
        wcss,
    })
}

/// Pearson correlation coefficient; defined as 0 for fewer than two samples
/// or when either side has zero variance.
pub fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len();
    debug_assert_eq!(n, ys.len());
    if n < 2 {
        return 0.0;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / math::sqrt(sxx * syy)
}

/// Score of one candidate center.
#[derive(Clone, Debug, PartialEq)]
pub struct ComponentScore {
    /// Observed density at the nearest observed cell to the center.
    pub peak_density: f64,
    /// Number of observed cells strictly within the exploration radius.
    pub explored_count: usize,
    /// Correlation between observed densities and the unit-Gaussian
    /// prediction across the explored cells.
    pub pearson: f64,
    /// peak_density * explored_count * pearson.
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitScoreBreakdown {
    pub per_component: Vec<ComponentScore>,
    /// Mean of the per-component scores.
    pub aggregate: f64,
}

/// Score a set of candidate centers against the observation store. `sigma`
/// is the spread used for the unit-Gaussian predictions (the previous fit's
/// value, or the grid midpoint before any fit exists).
pub fn fit_score(
    candidates: &[Point2],
    store: &ObservationStore,
    radius: f64,
    sigma: f64,
) -> FitScoreBreakdown {
    let per_component: Vec<ComponentScore> = candidates
        .iter()
        .map(|&mu| {
            let explored = store.observed_within(mu, radius);
            let peak_density = store.nearest_observed(mu).map_or(0.0, |(_, _, z)| z);
            let e = if explored.len() < 2 {
                0.0
            } else {
                let observed: Vec<f64> = explored.iter().map(|&(_, _, z)| z).collect();
                let predicted: Vec<f64> = explored
                    .iter()
                    .map(|&(_, p, _)| math::exp(-p.distance_squared(mu) / (2.0 * sigma * sigma)))
                    .collect();
                pearson(&observed, &predicted)
            };
            ComponentScore {
                peak_density,
                explored_count: explored.len(),
                pearson: e,
                score: peak_density * explored.len() as f64 * e,
            }
        })
        .collect();
    let aggregate = if per_component.is_empty() {
        0.0
    } else {
        per_component.iter().map(|c| c.score).sum::<f64>() / per_component.len() as f64
    };
    FitScoreBreakdown {
        per_component,
        aggregate,
    }
}

/// Centers chosen by the model-selection step; spreads are fitted separately.
#[derive(Clone, Debug, PartialEq)]
pub struct SelectedCenters {
    pub centers: Vec<Point2>,
    pub score: f64,
}

impl SelectedCenters {
    pub fn k_hat(&self) -> usize {
        self.centers.len()
    }
}

/// Run K-means for every candidate component count and keep the candidate
/// with the highest fit score; ties go to the smaller count. An empty
/// filtered set yields an empty selection (no prediction yet).
pub fn select_k<R: Rng>(
    store: &ObservationStore,
    params: &EstimatorParams,
    sigma_prev: f64,
    rng: &mut R,
) -> SelectedCenters {
    let filtered = store.filtered_points();
    if filtered.is_empty() {
        return SelectedCenters {
            centers: Vec::new(),
            score: 0.0,
        };
    }
    let points: Vec<Point2> = filtered.iter().map(|&(p, _)| p).collect();
    let k_hi = params.k_max.min(points.len());
    let mut best: Option<SelectedCenters> = None;
    for k in 1..=k_hi {
        let result = kmeans(&points, k, rng).expect("k capped at point count");
        let breakdown = fit_score(&result.centroids, store, params.exploration_radius, sigma_prev);
        let candidate = SelectedCenters {
            centers: result.centroids,
            score: breakdown.aggregate,
        };
        let better = match &best {
            None => true,
            Some(b) => candidate.score > b.score,
        };
        if better {
            best = Some(candidate);
        }
    }
    best.expect("at least one candidate evaluated")
}

/// Outcome of the per-component spread search.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SigmaFit {
    pub sigma: f64,
    pub mse: f64,
    /// Set when no explored cells were available and the midpoint fallback
    /// was used.
    pub low_confidence: bool,
}

/// Exhaustive MSE search over the sigma grid for one center. Ties go to the
/// smaller sigma; an empty explored set falls back to the range midpoint.
pub fn fit_sigma(
    center: Point2,
    store: &ObservationStore,
    sigma_grid: &[f64],
    radius: f64,
) -> SigmaFit {
    let explored = store.observed_within(center, radius);
    let midpoint = match (sigma_grid.first(), sigma_grid.last()) {
        (Some(lo), Some(hi)) => (lo + hi) / 2.0,
        _ => 0.0,
    };
    if explored.is_empty() {
        return SigmaFit {
            sigma: midpoint,
            mse: f64::INFINITY,
            low_confidence: true,
        };
    }
    let mut best: Option<(f64, f64)> = None;
    for &sigma in sigma_grid {
        let mse = explored
            .iter()
            .map(|&(_, p, z)| {
                let pred = math::exp(-p.distance_squared(center) / (2.0 * sigma * sigma));
                (z - pred) * (z - pred)
            })
            .sum::<f64>()
            / explored.len() as f64;
        let better = match best {
            None => true,
            Some((best_mse, _)) => mse < best_mse,
        };
        if better {
            best = Some((mse, sigma));
        }
    }
    let (mse, sigma) = best.unwrap_or((f64::INFINITY, midpoint));
    SigmaFit {
        sigma,
        mse,
        low_confidence: false,
    }
}

/// One fitted mixture component (unit amplitude).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GmmComponent {
    pub center: Point2,
    pub sigma: f64,
}

/// The current belief about the target distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct GmmEstimate {
    pub components: Vec<GmmComponent>,
    pub fit_score: f64,
    /// Density reported everywhere while no components exist.
    pub prior_density: f64,
}

impl GmmEstimate {
    pub fn empty(prior_density: f64) -> Self {
        GmmEstimate {
            components: Vec::new(),
            fit_score: 0.0,
            prior_density,
        }
    }

    pub fn k_hat(&self) -> usize {
        self.components.len()
    }

    /// Estimated density: the maximum over components of the unit-amplitude
    /// Gaussian value, or the prior when no components exist.
    pub fn predicted_density(&self, p: Point2) -> f64 {
        if self.components.is_empty() {
            return self.prior_density;
        }
        self.components
            .iter()
            .map(|c| math::exp(-p.distance_squared(c.center) / (2.0 * c.sigma * c.sigma)))
            .fold(0.0, f64::max)
    }

    /// Predicted density sampled at every cell centroid.
    pub fn predicted_grid(&self, spec: &GridSpec) -> Vec<f64> {
        (0..spec.cell_count())
            .map(|j| self.predicted_density(spec.centroid(j)))
            .collect()
    }
}

/// Stateful per-robot estimator: an observation store plus the lazily
/// refitted mixture estimate.
#[derive(Clone, Debug)]
pub struct Estimator {
    params: EstimatorParams,
    store: ObservationStore,
    estimate: GmmEstimate,
    last_sigma: f64,
    dirty: bool,
}

impl Estimator {
    pub fn new(params: EstimatorParams) -> Self {
        let store = ObservationStore::new(params.theta);
        let estimate = GmmEstimate::empty(params.prior_density);
        let last_sigma = params.sigma_midpoint();
        Estimator {
            params,
            store,
            estimate,
            last_sigma,
            dirty: false,
        }
    }

    pub fn params(&self) -> &EstimatorParams {
        &self.params
    }

    pub fn store(&self) -> &ObservationStore {
        &self.store
    }

    pub fn ingest(&mut self, cell: CellIndex, centroid: Point2, obs: Observation) {
        self.store.ingest(cell, centroid, obs);
        self.dirty = true;
    }

    /// Merge observations shared by another robot.
    pub fn merge_from(&mut self, entries: &[(CellIndex, Point2, Observation)]) {
        for &(cell, centroid, obs) in entries {
            self.store.merge(cell, centroid, obs);
        }
        if !entries.is_empty() {
            self.dirty = true;
        }
    }

    /// Re-run the full pipeline: model selection, then a spread fit per
    /// selected center.
    pub fn refit<R: Rng>(&mut self, rng: &mut R) {
        let selected = select_k(&self.store, &self.params, self.last_sigma, rng);
        let components: Vec<GmmComponent> = selected
            .centers
            .iter()
            .map(|&center| {
                let fit = fit_sigma(
                    center,
                    &self.store,
                    &self.params.sigma_grid,
                    self.params.exploration_radius,
                );
                GmmComponent {
                    center,
                    sigma: fit.sigma,
                }
            })
            .collect();
        if !components.is_empty() {
            self.last_sigma =
                components.iter().map(|c| c.sigma).sum::<f64>() / components.len() as f64;
        }
        self.estimate = GmmEstimate {
            components,
            fit_score: selected.score,
            prior_density: self.params.prior_density,
        };
        self.dirty = false;
    }

    /// The current estimate, refitting first if observations changed.
    pub fn estimate<R: Rng>(&mut self, rng: &mut R) -> &GmmEstimate {
        if self.dirty {
            self.refit(rng);
        }
        &self.estimate
    }

    /// The estimate as of the last refit, without updating.
    pub fn current_estimate(&self) -> &GmmEstimate {
        &self.estimate
    }
}
