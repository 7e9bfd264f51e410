//! Coverage path planning inside an assigned cell set: the nearest-neighbor
//! heuristic for the open shortest-coverage-path problem, plus an exact
//! brute-force solver for small instances used as a test oracle.

use alloc::vec::Vec;

use crate::geometry::Point2;
use crate::CellIndex;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlannerError {
    #[error("brute-force planning limited to {limit} cells, got {got}")]
    TooLarge { got: usize, limit: usize },
    #[error("speed must be positive")]
    NonPositiveSpeed,
}

/// Largest instance the exact solver will accept.
pub const BRUTE_FORCE_LIMIT: usize = 10;

/// An ordered visit plan over a set of cells. The path is open: it starts at
/// the robot's position and ends at the last cell, with no return leg.
#[derive(Debug, Clone, PartialEq)]
pub struct CoveragePath {
    /// Cells in visit order; a permutation of the planned set.
    pub cells: Vec<CellIndex>,
    /// Where the path starts (the robot's position when planned).
    pub start: Point2,
    /// Sum of consecutive leg lengths, in meters, including the first leg
    /// from `start`.
    pub total_length: f64,
}

impl CoveragePath {
    pub fn empty(start: Point2) -> Self {
        CoveragePath {
            cells: Vec::new(),
            start,
            total_length: 0.0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

fn path_length(start: Point2, order: &[usize], pts: &[Point2]) -> f64 {
    let mut len = 0.0;
    let mut cur = start;
    for &i in order {
        len += cur.distance(pts[i]);
        cur = pts[i];
    }
    len
}

/// Greedy nearest-neighbor construction: from the current point, repeatedly
/// visit the nearest unvisited cell (ties broken by ascending cell index).
pub fn nearest_neighbor_path(start: Point2, cells: &[(CellIndex, Point2)]) -> CoveragePath {
    let n = cells.len();
    let mut visited = alloc::vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut cur = start;
    let mut total = 0.0;
    for _ in 0..n {
        let mut best: Option<(f64, CellIndex, usize)> = None;
        for (slot, &(cell, p)) in cells.iter().enumerate() {
            if visited[slot] {
                continue;
            }
            let d = cur.distance(p);
            let better = match best {
                None => true,
                Some((bd, bc, _)) => d < bd || (d == bd && cell < bc),
            };
            if better {
                best = Some((d, cell, slot));
            }
        }
        let (d, cell, slot) = best.expect("unvisited cell must exist");
        visited[slot] = true;
        order.push(cell);
        total += d;
        cur = cells[slot].1;
    }
    CoveragePath {
        cells: order,
        start,
        total_length: total,
    }
}

/// Exact minimum-length open path by exhaustive permutation. Only meant for
/// oracle checks on small instances.
pub fn brute_force_path(
    start: Point2,
    cells: &[(CellIndex, Point2)],
) -> Result<CoveragePath, PlannerError> {
    let n = cells.len();
    if n > BRUTE_FORCE_LIMIT {
        return Err(PlannerError::TooLarge {
            got: n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    if n == 0 {
        return Ok(CoveragePath::empty(start));
    }
    let pts: Vec<Point2> = cells.iter().map(|&(_, p)| p).collect();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best_order = perm.clone();
    let mut best_len = path_length(start, &perm, &pts);

    // Heap's algorithm over slot indices.
    let mut c = alloc::vec![0usize; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            let len = path_length(start, &perm, &pts);
            if len < best_len {
                best_len = len;
                best_order = perm.clone();
            }
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }

    Ok(CoveragePath {
        cells: best_order.iter().map(|&i| cells[i].0).collect(),
        start,
        total_length: best_len,
    })
}

/// Travel time to traverse the whole path at a constant speed.
pub fn path_travel_time(path: &CoveragePath, v_max: f64) -> Result<f64, PlannerError> {
    if !(v_max > 0.0) {
        return Err(PlannerError::NonPositiveSpeed);
    }
    Ok(path.total_length / v_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn pts(ps: &[(f64, f64)]) -> Vec<(CellIndex, Point2)> {
        ps.iter()
            .enumerate()
            .map(|(i, &(x, y))| (i, Point2::new(x, y)))
            .collect()
    }

    #[test]
    fn single_cell_path() {
        let cells = pts(&[(3.0, 4.0)]);
        let path = nearest_neighbor_path(Point2::ORIGIN, &cells);
        assert_eq!(path.cells, vec![0]);
        assert_eq!(path.total_length, 5.0);
        let exact = brute_force_path(Point2::ORIGIN, &cells).unwrap();
        assert_eq!(exact, path);
    }

    #[test]
    fn greedy_follows_nearest_first() {
        let cells = pts(&[(1.0, 0.0), (2.0, 0.0), (0.0, 5.0)]);
        let path = nearest_neighbor_path(Point2::ORIGIN, &cells);
        assert_eq!(path.cells, vec![0, 1, 2]);
        let expected = 1.0 + 1.0 + (4.0f64 + 25.0).sqrt();
        assert!((path.total_length - expected).abs() < 1e-12);
    }

    #[test]
    fn collinear_cells_visited_in_order() {
        let cells = pts(&[(4.0, 0.0), (1.0, 0.0), (3.0, 0.0), (2.0, 0.0)]);
        let path = nearest_neighbor_path(Point2::ORIGIN, &cells);
        assert_eq!(path.cells, vec![1, 3, 2, 0]);
        assert_eq!(path.total_length, 4.0);
    }

    #[test]
    fn tie_breaks_by_cell_index() {
        // Two cells equidistant from the start.
        let cells = vec![
            (7, Point2::new(1.0, 0.0)),
            (2, Point2::new(-1.0, 0.0)),
        ];
        let path = nearest_neighbor_path(Point2::ORIGIN, &cells);
        assert_eq!(path.cells[0], 2);
    }

    #[test]
    fn unit_triangle_tour() {
        // Unit triangle: the exact open path walks the two remaining corners.
        let cells = pts(&[(1.0, 0.0), (0.5, 0.8660254037844386)]);
        let exact = brute_force_path(Point2::ORIGIN, &cells).unwrap();
        assert!((exact.total_length - 2.0).abs() < 1e-12);
    }

    #[test]
    fn brute_force_refuses_large_instances() {
        let cells = pts(&(0..11).map(|i| (i as f64, 0.0)).collect::<Vec<_>>());
        assert!(matches!(
            brute_force_path(Point2::ORIGIN, &cells),
            Err(PlannerError::TooLarge { got: 11, limit: 10 })
        ));
    }

    #[test]
    fn empty_set_gives_empty_path() {
        let path = nearest_neighbor_path(Point2::ORIGIN, &[]);
        assert!(path.is_empty());
        assert_eq!(path.total_length, 0.0);
        assert_eq!(path_travel_time(&path, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn travel_time_is_length_over_speed() {
        let path = CoveragePath {
            cells: vec![0],
            start: Point2::ORIGIN,
            total_length: 100.0,
        };
        assert_eq!(path_travel_time(&path, 5.0).unwrap(), 20.0);
        assert!(matches!(
            path_travel_time(&path, 0.0),
            Err(PlannerError::NonPositiveSpeed)
        ));
        let greedy_example = CoveragePath {
            cells: vec![0, 1, 2],
            start: Point2::ORIGIN,
            total_length: 2.0 + 29.0f64.sqrt(),
        };
        let t = path_travel_time(&greedy_example, 1.0).unwrap();
        assert!((t - (2.0 + 29.0f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn heuristic_never_beats_exact() {
        use rand::Rng;
        let mut rng = crate::rng::stream(11, crate::rng::StreamKind::World);
        for _ in 0..200 {
            let n = rng.gen_range(1..=7);
            let cells: Vec<(CellIndex, Point2)> = (0..n)
                .map(|i| {
                    (
                        i,
                        Point2::new(rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0)),
                    )
                })
                .collect();
            let start = Point2::new(rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0));
            let greedy = nearest_neighbor_path(start, &cells);
            let exact = brute_force_path(start, &cells).unwrap();
            let mut sorted = greedy.cells.clone();
            sorted.sort_unstable();
            assert_eq!(sorted, (0..n).collect::<Vec<_>>());
            assert!(greedy.total_length >= exact.total_length - 1e-9);
        }
    }
}
