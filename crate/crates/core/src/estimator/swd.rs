//! Sliced Wasserstein distance between two discrete densities on shared
//! support points: both fields are normalized to probability distributions,
//! projected onto random unit directions, and compared by the closed-form 1D
//! Wasserstein-1 distance, averaged over projections.

use alloc::vec::Vec;

use rand::Rng;

use crate::estimator::EstimatorError;
use crate::geometry::Point2;
use crate::math;

/// Mean 1D Wasserstein-1 distance over `n_projections` random directions.
/// Deterministic given the RNG state. Both fields must have positive mass.
pub fn sliced_wasserstein<R: Rng>(
    a: &[f64],
    b: &[f64],
    points: &[Point2],
    n_projections: usize,
    rng: &mut R,
) -> Result<f64, EstimatorError> {
    if a.len() != b.len() || a.len() != points.len() {
        return Err(EstimatorError::MismatchedFields);
    }
    let mass_a: f64 = a.iter().sum();
    let mass_b: f64 = b.iter().sum();
    if !(mass_a > 0.0) || !(mass_b > 0.0) {
        return Err(EstimatorError::UndefinedDistance);
    }
    let n = points.len();
    if n == 0 || n_projections == 0 {
        return Ok(0.0);
    }

    let mut order: Vec<usize> = (0..n).collect();
    let mut projected = alloc::vec![0.0f64; n];
    let mut total = 0.0;
    for _ in 0..n_projections {
        let angle = rng.gen_range(0.0..core::f64::consts::PI);
        let dir = Point2::new(math::cos(angle), math::sin(angle));
        for (t, &p) in projected.iter_mut().zip(points) {
            *t = p.dot(dir);
        }
        order.sort_unstable_by(|&i, &j| {
            projected[i].total_cmp(&projected[j]).then(i.cmp(&j))
        });

        // W1 on the line: integrate |F_a - F_b| over the merged support.
        let mut cum = 0.0;
        let mut dist = 0.0;
        for w in order.windows(2) {
            let (i, j) = (w[0], w[1]);
            cum += a[i] / mass_a - b[i] / mass_b;
            dist += math::abs(cum) * (projected[j] - projected[i]);
        }
        total += dist;
    }
    Ok(total / n_projections as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, StreamKind};
    use alloc::vec;
    use alloc::vec::Vec;

    fn grid_points(w: usize, h: usize) -> Vec<Point2> {
        (0..w * h)
            .map(|j| Point2::new((j % w) as f64 + 0.5, (j / w) as f64 + 0.5))
            .collect()
    }

    #[test]
    fn identical_fields_have_zero_distance() {
        let points = grid_points(6, 6);
        let field: Vec<f64> = (0..36).map(|j| 0.1 + (j % 5) as f64).collect();
        let mut rng = stream(1, StreamKind::Swd);
        let d = sliced_wasserstein(&field, &field, &points, 64, &mut rng).unwrap();
        assert!(d.abs() < 1e-12);
    }

    #[test]
    fn point_masses_match_the_cosine_expectation() {
        // Masses five apart project to |5 cos(phi)|; the mean over uniform
        // directions is 5 * 2/pi ~ 3.1831.
        let points = grid_points(5, 5);
        let mut a = vec![0.0; 25];
        let mut b = vec![0.0; 25];
        a[0] = 1.0; // cell (0,0)
        b[3 + 4 * 5] = 1.0; // cell (3,4), distance 5
        let mut rng = stream(2, StreamKind::Swd);
        let d = sliced_wasserstein(&a, &b, &points, 1000, &mut rng).unwrap();
        let expected = 5.0 * core::f64::consts::FRAC_2_PI;
        assert!(
            (d - expected).abs() < 0.05 * expected,
            "got {d}, expected within 5% of {expected}"
        );
    }

    #[test]
    fn zero_mass_is_an_error() {
        let points = grid_points(3, 3);
        let zero = vec![0.0; 9];
        let some = vec![1.0; 9];
        let mut rng = stream(3, StreamKind::Swd);
        assert!(matches!(
            sliced_wasserstein(&zero, &some, &points, 10, &mut rng),
            Err(EstimatorError::UndefinedDistance)
        ));
        assert!(matches!(
            sliced_wasserstein(&some, &zero, &points, 10, &mut rng),
            Err(EstimatorError::UndefinedDistance)
        ));
    }

    #[test]
    fn mismatched_lengths_are_rejected() {
        let points = grid_points(3, 3);
        let a = vec![1.0; 9];
        let b = vec![1.0; 8];
        let mut rng = stream(4, StreamKind::Swd);
        assert!(matches!(
            sliced_wasserstein(&a, &b, &points, 10, &mut rng),
            Err(EstimatorError::MismatchedFields)
        ));
    }

    #[test]
    fn normalization_makes_scale_irrelevant() {
        let points = grid_points(6, 6);
        let a: Vec<f64> = (0..36).map(|j| 1.0 + (j % 7) as f64).collect();
        let b: Vec<f64> = (0..36).map(|j| 2.0 + ((j + 3) % 5) as f64).collect();
        let a_scaled: Vec<f64> = a.iter().map(|v| v * 17.0).collect();
        let d1 = sliced_wasserstein(&a, &b, &points, 32, &mut stream(5, StreamKind::Swd)).unwrap();
        let d2 =
            sliced_wasserstein(&a_scaled, &b, &points, 32, &mut stream(5, StreamKind::Swd))
                .unwrap();
        assert!((d1 - d2).abs() < 1e-12);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            /// Symmetric and non-negative on random fields.
            #[test]
            fn symmetric_and_nonnegative(
                seed in 0u64..500,
                a in proptest::collection::vec(0.0f64..2.0, 16),
                b in proptest::collection::vec(0.0f64..2.0, 16),
            ) {
                prop_assume!(a.iter().sum::<f64>() > 0.0);
                prop_assume!(b.iter().sum::<f64>() > 0.0);
                let points = grid_points(4, 4);
                let dab = sliced_wasserstein(&a, &b, &points, 16, &mut stream(seed, StreamKind::Swd)).unwrap();
                let dba = sliced_wasserstein(&b, &a, &points, 16, &mut stream(seed, StreamKind::Swd)).unwrap();
                prop_assert!(dab >= 0.0);
                prop_assert!((dab - dba).abs() < 1e-9);
            }
        }
    }
}
