use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{Error, Result};

/// How many times a failed factorization retries with 10x the jitter.
pub const JITTER_ESCALATIONS: u32 = 3;

/// Relative jitter level above which a factorization is considered suspect.
/// Callers compare `jitter_used` against `JITTER_WARN_FRACTION * trace`.
pub const JITTER_WARN_FRACTION: f64 = 1e-6;

/// Cholesky of `mat + jitter*I`, escalating jitter by 10x on failure.
///
/// The base jitter is always applied on the first attempt so that every
/// caller follows one deterministic arithmetic path regardless of
/// conditioning. Returns the factorization and the jitter that succeeded.
pub fn cholesky_with_jitter(
    mat: &DMatrix<f64>,
    base_jitter: f64,
    escalations: u32,
) -> Result<(Cholesky<f64, Dyn>, f64)> {
    debug_assert!(mat.is_square());
    let mut jitter = base_jitter;
    for attempt in 0..=escalations {
        let mut work = mat.clone();
        if jitter != 0.0 {
            for i in 0..work.nrows() {
                work[(i, i)] += jitter;
            }
        }
        if let Some(chol) = Cholesky::new(work) {
            return Ok((chol, jitter));
        }
        if attempt < escalations {
            // A zero base would never escalate; seed it from the diagonal scale.
            if jitter == 0.0 {
                let max_diag = (0..mat.nrows()).map(|i| mat[(i, i)].abs()).fold(0.0, f64::max);
                jitter = 1e-12 * max_diag.max(f64::MIN_POSITIVE);
            } else {
                jitter *= 10.0;
            }
        }
    }
    Err(Error::FactorizationFailure(format!(
        "matrix of size {} not positive definite after {} jitter escalations (base {:.3e})",
        mat.nrows(),
        escalations,
        base_jitter
    )))
}

/// Largest absolute asymmetry |A - A^T| relative to max(1, |A|_max).
pub fn relative_asymmetry(mat: &DMatrix<f64>) -> f64 {
    debug_assert!(mat.is_square());
    let mut max_abs = 0.0f64;
    let mut max_asym = 0.0f64;
    for i in 0..mat.nrows() {
        for j in 0..mat.ncols() {
            max_abs = max_abs.max(mat[(i, j)].abs());
            if j > i {
                max_asym = max_asym.max((mat[(i, j)] - mat[(j, i)]).abs());
            }
        }
    }
    max_asym / max_abs.max(1.0)
}
