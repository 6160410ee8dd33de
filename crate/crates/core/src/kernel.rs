use nalgebra::{DMatrix, DVector, Vector3};

use crate::model::KernelParams;

/// RBF covariance sigma^2 * exp(-||x1-x2||^2 / (2 l^2)).
///
/// The squared distance is formed from the componentwise difference, so the
/// result is exactly symmetric in its arguments and exactly sigma^2 at zero
/// distance.
pub fn rbf(x1: &Vector3<f64>, x2: &Vector3<f64>, params: &KernelParams) -> f64 {
    let d = x1 - x2;
    let l = params.lengthscale;
    params.variance * (-d.norm_squared() / (2.0 * l * l)).exp()
}

/// Dense cross-covariance matrix: element (i, j) = k(rows[i], cols[j]).
pub fn cov_matrix(
    rows: &[Vector3<f64>],
    cols: &[Vector3<f64>],
    params: &KernelParams,
) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| rbf(&rows[i], &cols[j], params))
}

/// Covariance of one query point against a set: element j = k(x, cols[j]).
pub fn cov_vector(x: &Vector3<f64>, cols: &[Vector3<f64>], params: &KernelParams) -> DVector<f64> {
    DVector::from_fn(cols.len(), |j, _| rbf(x, &cols[j], params))
}

/// Spatial gradient of the kernel with respect to its first argument:
/// d k(x, x_ref) / dx = -(x - x_ref) / l^2 * k(x, x_ref).
pub fn rbf_spatial_gradient(
    x: &Vector3<f64>,
    x_ref: &Vector3<f64>,
    params: &KernelParams,
) -> Vector3<f64> {
    let l = params.lengthscale;
    let k = rbf(x, x_ref, params);
    -(x - x_ref) * (k / (l * l))
}

/// World-unit truncation radius beta * l. Beyond this distance the covariance
/// has decayed to at most sigma^2 * exp(-beta^2 / 2).
pub fn distance_threshold(params: &KernelParams, beta: f64) -> f64 {
    beta * params.lengthscale
}
