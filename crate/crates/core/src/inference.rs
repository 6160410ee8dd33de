use nalgebra::{Cholesky, DMatrix, DVector, Dyn, Vector3};

use crate::error::{Error, Result};
use crate::kernel;
use crate::linalg;
use crate::model::SparseGpModel;

/// Joint posterior over a set of query positions.
#[derive(Debug, Clone)]
pub struct PosteriorGaussian {
    pub positions: Vec<Vector3<f64>>,
    /// De-centered mean (scalar_mean already added).
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

/// Factorizations shared by every prediction against one model.
///
/// With K = K_MM + jitter*I and A_M + cov_jitter*I = L_A L_A^T:
/// `w` = K^-1 mu_M and `b` = G G^T where G = K^-1 L_A, so b is the
/// inducing-covariance propagation term K_MM^-1 A_M K_MM^-1 in a form whose
/// quadratic contributions stay symmetric positive semidefinite.
#[derive(Debug, Clone)]
pub struct Precomp {
    chol: Cholesky<f64, Dyn>,
    /// Clean lower factor of K (zeros above the diagonal).
    l_lower: DMatrix<f64>,
    pub w: DVector<f64>,
    g: DMatrix<f64>,
    pub b: DMatrix<f64>,
    /// Jitter added to K_MM (base 1e-10*sigma^2*m, escalated on failure).
    pub jitter: f64,
    pub base_jitter: f64,
    /// Jitter added to A_M for its factor (base 1e-10*trace/m).
    pub cov_jitter: f64,
    /// Relative residual of K_MM*w against mu_M (no jitter in the check).
    pub mean_residual: f64,
    /// Advisory findings: escalated or outsized jitter, inconsistent mean.
    pub warnings: Vec<String>,
}

impl Precomp {
    /// Lower triangular factor L with K_MM + jitter*I = L L^T.
    pub fn l_factor(&self) -> &DMatrix<f64> {
        &self.l_lower
    }

    /// G = K^-1 L_A; the posterior inflation term is (K_IM G)(K_IM G)^T.
    pub fn g_factor(&self) -> &DMatrix<f64> {
        &self.g
    }

    /// Solve (K_MM + jitter*I) x = rhs.
    pub fn solve_kmm(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(rhs)
    }

    pub fn is_degenerate(&self) -> bool {
        !self.warnings.is_empty()
    }
}

/// Smallest variance `predict_point` will report.
pub fn variance_floor(model: &SparseGpModel) -> f64 {
    1e-12 * model.kernel.variance
}

/// Builds the shared factorizations. Deterministic and idempotent: the same
/// model always produces bitwise-identical precomputations.
pub fn precompute(model: &SparseGpModel) -> Result<Precomp> {
    let m = model.num_inducing();
    if m == 0 {
        return Err(Error::Config("model has no inducing points".into()));
    }
    let kmm = kernel::cov_matrix(&model.inducing_positions, &model.inducing_positions, &model.kernel);
    let base_jitter = 1e-10 * model.kernel.variance * m as f64;
    let (chol, jitter) =
        linalg::cholesky_with_jitter(&kmm, base_jitter, linalg::JITTER_ESCALATIONS)?;
    let l_lower = chol.l();

    let w = chol.solve(&model.inducing_mean);
    let mu_norm = model.inducing_mean.norm();
    let mean_residual = if mu_norm > 0.0 {
        (&kmm * &w - &model.inducing_mean).norm() / mu_norm
    } else {
        0.0
    };

    let a_trace = model.inducing_cov.trace();
    let base_a = 1e-10 * a_trace / m as f64;
    let (chol_a, cov_jitter) =
        linalg::cholesky_with_jitter(&model.inducing_cov, base_a, linalg::JITTER_ESCALATIONS)?;
    let l_a = chol_a.l();
    let g = chol.solve(&l_a);
    let b = &g * g.transpose();

    let mut warnings = Vec::new();
    if jitter > base_jitter {
        warnings.push(format!(
            "kernel matrix needed escalated jitter {jitter:.3e} (base {base_jitter:.3e}); inducing placement may be degenerate"
        ));
    }
    if jitter > linalg::JITTER_WARN_FRACTION * kmm.trace() {
        warnings.push(format!("kernel matrix jitter {jitter:.3e} exceeds 1e-6 of its trace"));
    }
    if cov_jitter > base_a && cov_jitter > linalg::JITTER_WARN_FRACTION * a_trace {
        warnings.push(format!(
            "inducing covariance jitter {cov_jitter:.3e} exceeds 1e-6 of its trace"
        ));
    }
    if mean_residual > 1e-8 {
        warnings.push(format!(
            "inducing mean is not reproduced by the kernel matrix (relative residual {mean_residual:.3e})"
        ));
    }

    Ok(Precomp {
        chol,
        l_lower,
        w,
        g,
        b,
        jitter,
        base_jitter,
        cov_jitter,
        mean_residual,
        warnings,
    })
}

/// Joint posterior over `positions`:
/// mean = scalar_mean + K_IM w,
/// cov  = K_II - U^T U + T^T T with U = L^-1 K_MI and T = G^T K_MI.
///
/// Negative diagonal entries in (-1e-8*sigma^2, 0) are clamped to zero;
/// anything lower reports NumericalInstability.
pub fn predict_joint(
    model: &SparseGpModel,
    precomp: &Precomp,
    positions: &[Vector3<f64>],
) -> Result<PosteriorGaussian> {
    if positions.is_empty() {
        return Err(Error::Config("predict_joint needs at least one query position".into()));
    }
    let kim = kernel::cov_matrix(positions, &model.inducing_positions, &model.kernel);
    let kmi = kim.transpose();

    let mut mean = &kim * &precomp.w;
    mean.add_scalar_mut(model.scalar_mean);

    let u = precomp
        .l_lower
        .solve_lower_triangular(&kmi)
        .ok_or_else(|| Error::FactorizationFailure("triangular solve failed".into()))?;
    let t = precomp.g.transpose() * &kmi;

    let mut cov = kernel::cov_matrix(positions, positions, &model.kernel);
    cov -= u.transpose() * &u;
    cov += t.transpose() * &t;

    let tol = 1e-8 * model.kernel.variance;
    for i in 0..positions.len() {
        let d = cov[(i, i)];
        if d < 0.0 {
            if d <= -tol {
                return Err(Error::NumericalInstability(format!(
                    "posterior variance {d:.6e} at query point {i} is below -1e-8*sigma^2"
                )));
            }
            cov[(i, i)] = 0.0;
        }
    }

    Ok(PosteriorGaussian { positions: positions.to_vec(), mean, cov })
}

/// Pointwise posterior (mean, variance). Shares the exact arithmetic of
/// `predict_joint` with a single query position; the variance is additionally
/// floored at `variance_floor`.
pub fn predict_point(
    model: &SparseGpModel,
    precomp: &Precomp,
    x: &Vector3<f64>,
) -> Result<(f64, f64)> {
    let joint = predict_joint(model, precomp, std::slice::from_ref(x))?;
    let var = joint.cov[(0, 0)].max(variance_floor(model));
    Ok((joint.mean[0], var))
}

/// Closed-form spatial gradients of the pointwise posterior mean and variance.
/// With D = d K_xM / dx (3 x m): dmean = D w, dvar = 2 D (B k_Mx - K^-1 k_Mx).
pub fn predict_point_gradients(
    model: &SparseGpModel,
    precomp: &Precomp,
    x: &Vector3<f64>,
) -> (Vector3<f64>, Vector3<f64>) {
    let m = model.num_inducing();
    let kx = kernel::cov_vector(x, &model.inducing_positions, &model.kernel);
    let mut d = DMatrix::<f64>::zeros(3, m);
    for (j, xm) in model.inducing_positions.iter().enumerate() {
        let g = kernel::rbf_spatial_gradient(x, xm, &model.kernel);
        d[(0, j)] = g.x;
        d[(1, j)] = g.y;
        d[(2, j)] = g.z;
    }
    let dmean = &d * &precomp.w;
    let rhs = &precomp.b * &kx - precomp.chol.solve(&kx);
    let dvar = 2.0 * (&d * rhs);
    (
        Vector3::new(dmean[0], dmean[1], dmean[2]),
        Vector3::new(dvar[0], dvar[1], dvar[2]),
    )
}
