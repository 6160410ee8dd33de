use nalgebra::{Cholesky, SMatrix, SVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Corner offsets of a cell in marching-cubes order: the bottom face counter-
/// clockwise (z low), then the top face in the same rotation.
pub const CORNER_OFFSETS: [[usize; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [1, 1, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [1, 1, 1],
    [0, 1, 1],
];

/// Joint Gaussian over the 8 corner values of one grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellGaussian {
    /// Corner positions ordered per `CORNER_OFFSETS`.
    pub corner_positions: [Vector3<f64>; 8],
    pub mean: SVector<f64, 8>,
    pub cov: SMatrix<f64, 8, 8>,
}

/// Standard normal CDF via the complementary error function, accurate in both
/// tails.
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * std::f64::consts::FRAC_1_SQRT_2)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-cell RNG seed. The outer hash is a bijection of (mixed seed XOR cell
/// index), so distinct cells always receive distinct seeds and the result does
/// not depend on evaluation order or thread schedule.
pub fn derive_cell_seed(global_seed: u64, cell_index: u64) -> u64 {
    splitmix64(splitmix64(global_seed) ^ cell_index)
}

/// Lower Cholesky factor of `cov + jitter*I` with jitter escalation
/// 1e-10*max_diag, x10 up to 3 times.
fn corner_chol(cov: &SMatrix<f64, 8, 8>, context: &str) -> Result<SMatrix<f64, 8, 8>> {
    let max_diag = (0..8).map(|i| cov[(i, i)]).fold(0.0f64, f64::max);
    let base = 1e-10 * max_diag;
    let mut jitter = base;
    for _ in 0..=3 {
        let mut work = *cov;
        for i in 0..8 {
            work[(i, i)] += jitter;
        }
        if let Some(chol) = Cholesky::new(work) {
            return Ok(chol.unpack());
        }
        jitter *= 10.0;
    }
    Err(Error::FactorizationFailure(format!(
        "corner covariance not positive semidefinite after jitter escalation (base {base:.3e}): {context}"
    )))
}

/// Monte Carlo estimate of the probability that the cell's corner values do
/// not all lie on the same side of `theta`. Samples exactly equal to `theta`
/// count as crossings. Deterministic given the seed.
pub fn mc_crossing_probability(
    cell: &CellGaussian,
    theta: f64,
    samples: u32,
    seed: u64,
) -> Result<f64> {
    assert!(samples >= 1, "samples must be at least 1");
    let l = corner_chol(&cell.cov, "mc_crossing_probability")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut crossings = 0u64;
    let mut z = SVector::<f64, 8>::zeros();
    for _ in 0..samples {
        for zi in z.iter_mut() {
            *zi = rng.sample(StandardNormal);
        }
        let mut all_below = true;
        let mut all_above = true;
        for i in 0..8 {
            let mut y = cell.mean[i];
            for j in 0..=i {
                y += l[(i, j)] * z[j];
            }
            all_below &= y < theta;
            all_above &= y > theta;
        }
        if !(all_below || all_above) {
            crossings += 1;
        }
    }
    Ok(crossings as f64 / samples as f64)
}

/// Closed-form crossing probability for independent corners:
/// 1 - prod P(Y_i < theta) - prod P(Y_i > theta). Zero-variance corners
/// contribute indicator probabilities (a corner pinned exactly at theta makes
/// the crossing certain).
pub fn independent_crossing_probability(
    means: &[f64; 8],
    variances: &[f64; 8],
    theta: f64,
) -> f64 {
    let mut prod_below = 1.0;
    let mut prod_above = 1.0;
    for i in 0..8 {
        debug_assert!(variances[i] >= 0.0);
        if variances[i] > 0.0 {
            let sd = variances[i].sqrt();
            prod_below *= std_normal_cdf((theta - means[i]) / sd);
            prod_above *= std_normal_cdf((means[i] - theta) / sd);
        } else {
            prod_below *= if means[i] < theta { 1.0 } else { 0.0 };
            prod_above *= if means[i] > theta { 1.0 } else { 0.0 };
        }
    }
    1.0 - prod_below - prod_above
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn unit_cell(mean: SVector<f64, 8>, cov: SMatrix<f64, 8, 8>) -> CellGaussian {
        let corner_positions = CORNER_OFFSETS
            .map(|o| Vector3::new(o[0] as f64, o[1] as f64, o[2] as f64));
        CellGaussian { corner_positions, mean, cov }
    }

    #[test]
    fn cdf_reference_values() {
        assert_eq!(std_normal_cdf(0.0), 0.5);
        assert_abs_diff_eq!(std_normal_cdf(1.0), 0.8413447460685429, epsilon = 1e-12);
        assert_abs_diff_eq!(std_normal_cdf(40.0), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(std_normal_cdf(-3.0), 0.0013498980316300945, epsilon = 1e-15);
    }

    #[test]
    fn cdf_matches_erf_identity() {
        let mut z = -8.0;
        while z <= 8.0 {
            let identity = 0.5 * (1.0 + libm::erf(z * std::f64::consts::FRAC_1_SQRT_2));
            assert_abs_diff_eq!(std_normal_cdf(z), identity, epsilon = 1e-12);
            assert_abs_diff_eq!(std_normal_cdf(z) + std_normal_cdf(-z), 1.0, epsilon = 1e-15);
            z += 0.25;
        }
    }

    #[test]
    fn cell_seeds_are_distinct_and_stable() {
        let a = derive_cell_seed(42, 7);
        assert_eq!(a, derive_cell_seed(42, 7));
        let mut seen = std::collections::HashSet::new();
        for cell in 0..100_000u64 {
            assert!(seen.insert(derive_cell_seed(42, cell)));
        }
        assert_ne!(derive_cell_seed(1, 7), derive_cell_seed(2, 7));
    }

    #[test]
    fn far_above_iso_cell_never_crosses() {
        let theta = 2.0;
        let cov = SMatrix::<f64, 8, 8>::identity();
        let mean = SVector::<f64, 8>::from_element(theta + 10.0);
        let cell = unit_cell(mean, cov);
        assert_eq!(mc_crossing_probability(&cell, theta, 1600, 9).unwrap(), 0.0);
    }

    #[test]
    fn diagonal_half_probability_cell_matches_closed_form() {
        // Every corner has P(Y_i < theta) = 0.5, so the exact crossing
        // probability is 1 - 2^-7 = 0.9921875.
        let theta = 1.5;
        let cov = SMatrix::<f64, 8, 8>::identity();
        let mean = SVector::<f64, 8>::from_element(theta);
        let cell = unit_cell(mean, cov);
        let p: f64 = 0.9921875;
        let tol = 3.0 * (p * (1.0 - p) / 1600.0).sqrt();
        let est = mc_crossing_probability(&cell, theta, 1600, 1234).unwrap();
        assert!((est - p).abs() <= tol, "estimate {est} vs {p} (tol {tol})");
    }

    #[test]
    fn comonotone_cell_never_crosses() {
        // Rank-1 covariance with equal means: all corners move together.
        let cov = SMatrix::<f64, 8, 8>::from_element(1.0);
        let mean = SVector::<f64, 8>::from_element(-2.0);
        let cell = unit_cell(mean, cov);
        let est = mc_crossing_probability(&cell, 0.0, 1600, 5).unwrap();
        assert!(est <= 1.0 / 1600.0, "estimate {est}");
    }

    #[test]
    fn independent_closed_form_examples() {
        let means = [0.0; 8];
        let vars = [1.0; 8];
        assert_eq!(independent_crossing_probability(&means, &vars, 0.0), 0.9921875);

        let below = [-1.0; 8];
        let zeros = [0.0; 8];
        assert_eq!(independent_crossing_probability(&below, &zeros, 0.0), 0.0);

        // A deterministic corner pinned exactly at theta forces a crossing.
        let mut pinned = [-1.0; 8];
        pinned[3] = 0.0;
        assert_eq!(independent_crossing_probability(&pinned, &zeros, 0.0), 1.0);
    }

    #[test]
    fn independent_oracle_agrees_with_large_mc() {
        let mut rng = StdRng::seed_from_u64(77);
        for round in 0..3 {
            let mut means = [0.0; 8];
            let mut vars = [0.0; 8];
            for i in 0..8 {
                means[i] = rng.random_range(-1.0..1.0);
                vars[i] = rng.random_range(0.05..2.0);
            }
            let theta = rng.random_range(-0.5..0.5);
            let exact = independent_crossing_probability(&means, &vars, theta);
            let cov = SMatrix::<f64, 8, 8>::from_fn(|i, j| if i == j { vars[i] } else { 0.0 });
            let cell = unit_cell(SVector::from_row_slice(&means), cov);
            let n = 1_000_000u32;
            let est = mc_crossing_probability(&cell, theta, n, 1000 + round).unwrap();
            let tol = 3.0 * (exact * (1.0 - exact) / n as f64).sqrt() + 1e-9;
            assert!((est - exact).abs() <= tol, "round {round}: {est} vs {exact}");
        }
    }

    #[test]
    fn estimates_are_seed_deterministic() {
        let cov = SMatrix::<f64, 8, 8>::identity();
        let mean = SVector::<f64, 8>::from_element(0.3);
        let cell = unit_cell(mean, cov);
        let a = mc_crossing_probability(&cell, 0.0, 1600, 99).unwrap();
        let b = mc_crossing_probability(&cell, 0.0, 1600, 99).unwrap();
        assert_eq!(a, b);
        assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn spread_shrinks_with_sample_count() {
        // Standard-error scaling: 4x the samples roughly halves the spread of
        // independent estimates (asserted within a factor 1.5).
        let cov = SMatrix::<f64, 8, 8>::identity() * 0.8;
        let mut mean = SVector::<f64, 8>::from_element(1.1);
        mean[2] = -0.4;
        let cell = unit_cell(mean, cov);
        let spread = |samples: u32| {
            let ests: Vec<f64> = (0..20)
                .map(|s| mc_crossing_probability(&cell, 0.0, samples, 5000 + s).unwrap())
                .collect();
            let m = ests.iter().sum::<f64>() / ests.len() as f64;
            (ests.iter().map(|e| (e - m) * (e - m)).sum::<f64>() / (ests.len() - 1) as f64).sqrt()
        };
        let s400 = spread(400);
        let s1600 = spread(1600);
        let s6400 = spread(6400);
        assert!(s1600 <= s400 / 2.0 * 1.5, "400: {s400}, 1600: {s1600}");
        assert!(s6400 <= s1600 / 2.0 * 1.5, "1600: {s1600}, 6400: {s6400}");
    }

    #[test]
    fn reflection_symmetry_within_mc_error() {
        let mut rng = StdRng::seed_from_u64(3);
        let c = 0.7;
        let theta = 0.2;
        let mut mean = SVector::<f64, 8>::zeros();
        for i in 0..8 {
            mean[i] = rng.random_range(-1.0..1.0);
        }
        let cov = SMatrix::<f64, 8, 8>::identity() * 0.6;
        let cell = unit_cell(mean, cov);
        let reflected = unit_cell(mean.map(|m| 2.0 * c - m), cov);
        let n = 40_000;
        let a = mc_crossing_probability(&cell, theta, n, 11).unwrap();
        let b = mc_crossing_probability(&reflected, 2.0 * c - theta, n, 11).unwrap();
        let tol = 3.0 * (2.0 * a.max(0.01) * (1.0 - a.min(0.99)) / n as f64).sqrt();
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn negative_definite_covariance_fails() {
        let cov = SMatrix::<f64, 8, 8>::identity() * -1.0;
        let cell = unit_cell(SVector::zeros(), cov);
        let err = mc_crossing_probability(&cell, 0.0, 16, 1).unwrap_err();
        assert!(matches!(err, Error::FactorizationFailure(_)));
    }
}
