//! The gridded task space: cell geometry, the ground-truth target density,
//! the noisy observation model, and coverage bookkeeping.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::geometry::Point2;
use crate::math;
use crate::CellIndex;

/// Errors raised by world construction and bookkeeping.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WorldError {
    #[error("grid dimensions and cell size must be positive")]
    InvalidGrid,
    #[error("cell index {index} out of range for {count} cells")]
    CellOutOfRange { index: usize, count: usize },
    #[error("gaussian component requires sigma > 0 and amplitude > 0")]
    InvalidComponent,
    #[error("observation noise must be non-negative")]
    NegativeNoise,
}

/// Geometry of the uniform square grid over the task space.
///
/// Cells are indexed row-major: index `iy * width + ix`, centroid at
/// `origin + ((ix + 0.5) * cell_size, (iy + 0.5) * cell_size)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    width_cells: usize,
    height_cells: usize,
    cell_size: f64,
    origin: Point2,
}

impl GridSpec {
    pub fn new(width_cells: usize, height_cells: usize, cell_size: f64) -> Result<Self, WorldError> {
        Self::with_origin(width_cells, height_cells, cell_size, Point2::ORIGIN)
    }

    pub fn with_origin(
        width_cells: usize,
        height_cells: usize,
        cell_size: f64,
        origin: Point2,
    ) -> Result<Self, WorldError> {
        if width_cells == 0 || height_cells == 0 || !(cell_size > 0.0) {
            return Err(WorldError::InvalidGrid);
        }
        Ok(GridSpec {
            width_cells,
            height_cells,
            cell_size,
            origin,
        })
    }

    pub fn width_cells(&self) -> usize {
        self.width_cells
    }

    pub fn height_cells(&self) -> usize {
        self.height_cells
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn origin(&self) -> Point2 {
        self.origin
    }

    /// Total number of cells in the grid.
    pub fn cell_count(&self) -> usize {
        self.width_cells * self.height_cells
    }

    pub fn check_cell(&self, index: CellIndex) -> Result<(), WorldError> {
        if index < self.cell_count() {
            Ok(())
        } else {
            Err(WorldError::CellOutOfRange {
                index,
                count: self.cell_count(),
            })
        }
    }

    /// Column/row coordinates of a cell.
    pub fn cell_xy(&self, index: CellIndex) -> (usize, usize) {
        debug_assert!(index < self.cell_count());
        (index % self.width_cells, index / self.width_cells)
    }

    pub fn index_of(&self, ix: usize, iy: usize) -> CellIndex {
        debug_assert!(ix < self.width_cells && iy < self.height_cells);
        iy * self.width_cells + ix
    }

    /// Centroid of a cell, in meters.
    pub fn centroid(&self, index: CellIndex) -> Point2 {
        let (ix, iy) = self.cell_xy(index);
        Point2::new(
            self.origin.x + (ix as f64 + 0.5) * self.cell_size,
            self.origin.y + (iy as f64 + 0.5) * self.cell_size,
        )
    }

    /// The cell containing a point, if the point lies inside the grid.
    pub fn cell_containing(&self, p: Point2) -> Option<CellIndex> {
        let fx = (p.x - self.origin.x) / self.cell_size;
        let fy = (p.y - self.origin.y) / self.cell_size;
        if fx < 0.0 || fy < 0.0 {
            return None;
        }
        let ix = math::floor(fx) as usize;
        let iy = math::floor(fy) as usize;
        if ix < self.width_cells && iy < self.height_cells {
            Some(self.index_of(ix, iy))
        } else {
            None
        }
    }

    /// Side length of the grid along x, in meters.
    pub fn width_m(&self) -> f64 {
        self.width_cells as f64 * self.cell_size
    }

    /// Side length of the grid along y, in meters.
    pub fn height_m(&self) -> f64 {
        self.height_cells as f64 * self.cell_size
    }
}

/// One isotropic Gaussian component of the target distribution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianComponent {
    pub center: Point2,
    pub sigma: f64,
    pub amplitude: f64,
}

impl GaussianComponent {
    pub fn new(center: Point2, sigma: f64, amplitude: f64) -> Result<Self, WorldError> {
        if !(sigma > 0.0) || !(amplitude > 0.0) {
            return Err(WorldError::InvalidComponent);
        }
        Ok(GaussianComponent {
            center,
            sigma,
            amplitude,
        })
    }

    /// Density contribution of this component at `p`.
    pub fn density_at(&self, p: Point2) -> f64 {
        let d2 = p.distance_squared(self.center);
        self.amplitude * math::exp(-d2 / (2.0 * self.sigma * self.sigma))
    }
}

/// The ground-truth target density: a superposition of Gaussian components,
/// cached per cell centroid.
#[derive(Clone, Debug)]
pub struct GroundTruthField {
    components: Vec<GaussianComponent>,
    density_cache: Vec<f64>,
    max_cell_density: f64,
}

impl GroundTruthField {
    pub fn new(spec: &GridSpec, components: Vec<GaussianComponent>) -> Result<Self, WorldError> {
        for c in &components {
            if !(c.sigma > 0.0) || !(c.amplitude > 0.0) {
                return Err(WorldError::InvalidComponent);
            }
        }
        let density_cache: Vec<f64> = (0..spec.cell_count())
            .map(|j| {
                let p = spec.centroid(j);
                components.iter().map(|c| c.density_at(p)).sum()
            })
            .collect();
        let max_cell_density = density_cache.iter().copied().fold(0.0, f64::max);
        Ok(GroundTruthField {
            components,
            density_cache,
            max_cell_density,
        })
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }

    /// The superposed density at an arbitrary point. Zero components yield 0.
    pub fn true_density(&self, p: Point2) -> f64 {
        self.components.iter().map(|c| c.density_at(p)).sum()
    }

    /// Cached density at a cell centroid.
    pub fn cell_density(&self, index: CellIndex) -> f64 {
        self.density_cache[index]
    }

    /// Per-cell densities in cell-index order.
    pub fn density_grid(&self) -> &[f64] {
        &self.density_cache
    }

    /// Largest cached cell density (0 for an empty field).
    pub fn max_cell_density(&self) -> f64 {
        self.max_cell_density
    }
}

/// How target presence per cell is derived from the density field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TargetSeeding {
    /// A cell holds targets iff its density exceeds the threshold.
    DeterministicThreshold(f64),
    /// A cell holds targets with probability `min(1, density)`.
    Bernoulli,
}

/// Sample the per-cell target presence for a field.
pub fn seed_targets<R: Rng>(
    spec: &GridSpec,
    field: &GroundTruthField,
    mode: TargetSeeding,
    rng: &mut R,
) -> Vec<bool> {
    (0..spec.cell_count())
        .map(|j| {
            let rho = field.cell_density(j);
            match mode {
                TargetSeeding::DeterministicThreshold(th) => rho > th,
                TargetSeeding::Bernoulli => rng.gen::<f64>() < rho.min(1.0),
            }
        })
        .collect()
}

/// Which cells have been covered and which contain targets.
#[derive(Clone, Debug)]
pub struct CoverageState {
    covered: Vec<bool>,
    has_targets: Vec<bool>,
    covered_count: usize,
}

impl CoverageState {
    pub fn new(cell_count: usize, has_targets: Vec<bool>) -> Self {
        debug_assert_eq!(cell_count, has_targets.len());
        CoverageState {
            covered: alloc::vec![false; cell_count],
            has_targets,
            covered_count: 0,
        }
    }

    /// Mark a cell covered. Returns whether the cell was newly covered.
    /// Coverage is monotone: marking never un-covers anything.
    pub fn mark_covered(&mut self, index: CellIndex) -> Result<bool, WorldError> {
        if index >= self.covered.len() {
            return Err(WorldError::CellOutOfRange {
                index,
                count: self.covered.len(),
            });
        }
        if self.covered[index] {
            Ok(false)
        } else {
            self.covered[index] = true;
            self.covered_count += 1;
            Ok(true)
        }
    }

    pub fn is_covered(&self, index: CellIndex) -> bool {
        self.covered[index]
    }

    pub fn has_targets(&self, index: CellIndex) -> bool {
        self.has_targets[index]
    }

    pub fn covered_count(&self) -> usize {
        self.covered_count
    }

    pub fn cell_count(&self) -> usize {
        self.covered.len()
    }

    pub fn all_covered(&self) -> bool {
        self.covered_count == self.covered.len()
    }

    /// Indices of uncovered cells, ascending.
    pub fn uncovered_cells(&self) -> impl Iterator<Item = CellIndex> + '_ {
        self.covered
            .iter()
            .enumerate()
            .filter(|(_, &c)| !c)
            .map(|(j, _)| j)
    }
}

/// The full simulated environment: grid geometry, ground truth, coverage.
#[derive(Clone, Debug)]
pub struct GridWorld {
    spec: GridSpec,
    field: GroundTruthField,
    coverage: CoverageState,
}

impl GridWorld {
    pub fn new(spec: GridSpec, field: GroundTruthField, has_targets: Vec<bool>) -> Self {
        let coverage = CoverageState::new(spec.cell_count(), has_targets);
        GridWorld {
            spec,
            field,
            coverage,
        }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn field(&self) -> &GroundTruthField {
        &self.field
    }

    pub fn coverage(&self) -> &CoverageState {
        &self.coverage
    }

    pub fn coverage_mut(&mut self) -> &mut CoverageState {
        &mut self.coverage
    }

    /// Observe the density in a cell: the true centroid density plus
    /// zero-mean Gaussian noise, clamped to be non-negative.
    pub fn observe<R: Rng>(
        &self,
        index: CellIndex,
        noise_sigma: f64,
        rng: &mut R,
    ) -> Result<f64, WorldError> {
        self.spec.check_cell(index)?;
        if noise_sigma < 0.0 {
            return Err(WorldError::NegativeNoise);
        }
        let truth = self.field.cell_density(index);
        let value = if noise_sigma == 0.0 {
            truth
        } else {
            let noise = Normal::new(0.0, noise_sigma)
                .expect("sigma checked non-negative")
                .sample(rng);
            truth + noise
        };
        Ok(value.max(0.0))
    }
}
