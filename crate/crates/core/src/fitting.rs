//! Desk-scale SGPR model builder: inducing-position selection, the
//! deterministic-training-conditional posterior (mu_M, A_M), hyperparameter
//! grid search scored by holdout log predictive density, and PSNR.

use nalgebra::{Cholesky, DMatrix, DVector, Vector3};
use rayon::prelude::*;

use crate::baseline;
use crate::error::{Error, Result};
use crate::inference;
use crate::kernel;
use crate::linalg;
use crate::model::{GridSpec, KernelParams, SparseGpModel, VolumeField, VolumeKind};

/// How inducing positions are chosen from the training grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InducingSelection {
    /// Evenly strided subsample of the flat point index.
    UniformGridSubsample,
    /// Lloyd k-means on point positions, deterministic strided init.
    KmeansPositions,
}

/// Either fixed hyperparameters or a grid to search over.
#[derive(Debug, Clone)]
pub enum HyperSearch {
    Fixed { kernel: KernelParams, noise_variance: f64 },
    Search {
        lengthscales: Vec<f64>,
        variances: Vec<f64>,
        noise_variances: Vec<f64>,
    },
}

#[derive(Debug, Clone)]
pub struct FitConfig {
    pub num_inducing: usize,
    pub selection: InducingSelection,
    pub hyper: HyperSearch,
    /// Fraction of training points held out for scoring, in [0, 0.5).
    /// Zero scores candidates on the training points instead.
    pub holdout_fraction: f64,
}

/// Indices 0..m spread evenly over 0..n (midpoint-of-stripe rule). Strictly
/// increasing whenever m <= n.
fn uniform_subsample_indices(n: usize, m: usize) -> Vec<usize> {
    (0..m).map(|j| ((2 * j + 1) * n) / (2 * m)).collect()
}

fn kmeans_positions(points: &[Vector3<f64>], k: usize) -> Vec<Vector3<f64>> {
    let mut centroids: Vec<Vector3<f64>> = uniform_subsample_indices(points.len(), k)
        .into_iter()
        .map(|i| points[i])
        .collect();
    let mut assign: Vec<usize> = Vec::new();
    for _ in 0..50 {
        let next: Vec<usize> = points
            .par_iter()
            .map(|p| {
                let mut best = 0usize;
                let mut best_d = f64::INFINITY;
                for (c, cent) in centroids.iter().enumerate() {
                    let d = (p - cent).norm_squared();
                    if d < best_d {
                        best_d = d;
                        best = c;
                    }
                }
                best
            })
            .collect();
        if next == assign {
            break;
        }
        assign = next;
        let mut sums = vec![Vector3::<f64>::zeros(); k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assign) {
            sums[a] += p;
            counts[a] += 1;
        }
        for c in 0..k {
            // An emptied cluster keeps its previous centroid.
            if counts[c] > 0 {
                centroids[c] = sums[c] / counts[c] as f64;
            }
        }
    }
    centroids
}

struct DtcPosterior {
    mu: DVector<f64>,
    a: DMatrix<f64>,
}

/// DTC posterior over the inducing values for centered targets y:
/// with Q = K_MM + noise^-1 K_MN K_NM,
///   mu_M = noise^-1 K_MM Q^-1 K_MN y,  A_M = K_MM Q^-1 K_MM.
/// Computed through L = chol(K_MM + jitter I) and S = I + noise^-1 V V^T
/// (V = L^-1 K_MN) so A_M = D D^T stays symmetric PSD by construction; the
/// training set is streamed in chunks to bound memory.
fn dtc_posterior(
    inducing: &[Vector3<f64>],
    xs: &[Vector3<f64>],
    y: &[f64],
    kernel_params: &KernelParams,
    noise_variance: f64,
) -> Result<DtcPosterior> {
    let m = inducing.len();
    let kmm = kernel::cov_matrix(inducing, inducing, kernel_params);
    let base = 1e-10 * kernel_params.variance * m as f64;
    let (chol, _) = linalg::cholesky_with_jitter(&kmm, base, linalg::JITTER_ESCALATIONS)?;
    let l = chol.l();
    let inv_noise = 1.0 / noise_variance;
    let mut s = DMatrix::<f64>::identity(m, m);
    let mut vy = DVector::<f64>::zeros(m);
    const CHUNK: usize = 1 << 14;
    for (xs_c, y_c) in xs.chunks(CHUNK).zip(y.chunks(CHUNK)) {
        let kmc = kernel::cov_matrix(inducing, xs_c, kernel_params);
        let v = l
            .solve_lower_triangular(&kmc)
            .expect("Cholesky factor has positive diagonal");
        s.gemm(inv_noise, &v, &v.transpose(), 1.0);
        vy.gemv(1.0, &v, &DVector::from_column_slice(y_c), 1.0);
    }
    let s_chol = Cholesky::new(s).ok_or_else(|| {
        Error::FactorizationFailure(
            "DTC normal-equation matrix is not positive definite".into(),
        )
    })?;
    let dt = s_chol
        .l()
        .solve_lower_triangular(&l.transpose())
        .expect("Cholesky factor has positive diagonal");
    let a = dt.transpose() * &dt;
    let mu = (&l * s_chol.solve(&vy)) * inv_noise;
    Ok(DtcPosterior { mu, a })
}

fn build_model(
    inducing: Vec<Vector3<f64>>,
    post: DtcPosterior,
    kernel_params: KernelParams,
    noise_variance: f64,
    scalar_mean: f64,
    spec: &GridSpec,
) -> SparseGpModel {
    SparseGpModel {
        kernel: kernel_params,
        noise_variance,
        scalar_mean,
        inducing_positions: inducing,
        inducing_mean: post.mu,
        inducing_cov: post.a,
        domain_bounds: spec.bounds(),
    }
}

/// Sum of log N(y_i | mean(x_i), var(x_i) + noise) over the given points.
fn log_predictive_density(
    model: &SparseGpModel,
    xs: &[Vector3<f64>],
    ys: &[f64],
) -> Result<f64> {
    let precomp = inference::precompute(model)?;
    let terms: Vec<f64> = xs
        .par_iter()
        .zip(ys.par_iter())
        .map(|(x, &y)| {
            let (mean, var) = inference::predict_point(model, &precomp, x)?;
            let pv = var + model.noise_variance;
            let r = y - mean;
            Ok(-0.5 * ((2.0 * std::f64::consts::PI * pv).ln() + r * r / pv))
        })
        .collect::<Result<_>>()?;
    Ok(terms.iter().sum())
}

fn candidate_list(cfg: &FitConfig) -> Result<Vec<(KernelParams, f64)>> {
    let candidates: Vec<(KernelParams, f64)> = match &cfg.hyper {
        HyperSearch::Fixed { kernel, noise_variance } => {
            vec![(*kernel, *noise_variance)]
        }
        HyperSearch::Search { lengthscales, variances, noise_variances } => {
            if lengthscales.is_empty() || variances.is_empty() || noise_variances.is_empty()
            {
                return Err(Error::Config(
                    "hyperparameter search grids must be nonempty".into(),
                ));
            }
            let mut out = Vec::new();
            for &l in lengthscales {
                for &v in variances {
                    for &nv in noise_variances {
                        out.push((KernelParams::rbf(l, v), nv));
                    }
                }
            }
            out
        }
    };
    for (k, nv) in &candidates {
        if !(k.lengthscale.is_finite() && k.lengthscale > 0.0) {
            return Err(Error::Config("lengthscale must be positive".into()));
        }
        if !(k.variance.is_finite() && k.variance > 0.0) {
            return Err(Error::Config("kernel variance must be positive".into()));
        }
        if !(nv.is_finite() && *nv > 0.0) {
            return Err(Error::Config("noise variance must be positive".into()));
        }
    }
    Ok(candidates)
}

/// Fits an SGPR model to a point-centered training volume. Training values
/// are mean-centered; the removed mean is stored in the model and re-added
/// at prediction. With multiple candidates the winner maximizes holdout
/// (or training, when holdout is empty) log predictive density, ties going
/// to the larger lengthscale; the winner is refit on the full data.
pub fn fit_sgpr(training: &VolumeField, cfg: &FitConfig) -> Result<SparseGpModel> {
    if training.kind != VolumeKind::PointCentered {
        return Err(Error::Config("training volume must be point-centered".into()));
    }
    training.spec.validate()?;
    let n = training.values.len();
    if cfg.num_inducing == 0 {
        return Err(Error::Config("num_inducing must be at least 1".into()));
    }
    if cfg.num_inducing > n {
        return Err(Error::Config(format!(
            "num_inducing {} exceeds the {} training points",
            cfg.num_inducing, n
        )));
    }
    if !(0.0..0.5).contains(&cfg.holdout_fraction) {
        return Err(Error::Config("holdout_fraction must lie in [0, 0.5)".into()));
    }
    if training.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config("training values must be finite".into()));
    }

    let dims = training.spec.dims;
    let mut positions = Vec::with_capacity(n);
    for k in 0..dims[2] {
        for j in 0..dims[1] {
            for i in 0..dims[0] {
                positions.push(training.spec.position(i, j, k));
            }
        }
    }
    let scalar_mean = training.values.iter().sum::<f64>() / n as f64;
    let y: Vec<f64> = training.values.iter().map(|v| v - scalar_mean).collect();

    let inducing: Vec<Vector3<f64>> = match cfg.selection {
        InducingSelection::UniformGridSubsample => {
            uniform_subsample_indices(n, cfg.num_inducing)
                .into_iter()
                .map(|i| positions[i])
                .collect()
        }
        InducingSelection::KmeansPositions => kmeans_positions(&positions, cfg.num_inducing),
    };

    let candidates = candidate_list(cfg)?;

    // Deterministic strided holdout: every q-th point, offset to mid-stride.
    let (train_idx, hold_idx): (Vec<usize>, Vec<usize>) = if cfg.holdout_fraction == 0.0 {
        ((0..n).collect(), Vec::new())
    } else {
        let q = (1.0 / cfg.holdout_fraction).round().max(2.0) as usize;
        (0..n).partition(|i| i % q != q / 2)
    };

    let winner = if candidates.len() == 1 {
        candidates[0]
    } else {
        let xs_train: Vec<Vector3<f64>> = train_idx.iter().map(|&i| positions[i]).collect();
        let y_train: Vec<f64> = train_idx.iter().map(|&i| y[i]).collect();
        let (xs_score, y_score) = if hold_idx.is_empty() {
            (xs_train.clone(), y_train.clone())
        } else {
            (
                hold_idx.iter().map(|&i| positions[i]).collect(),
                hold_idx.iter().map(|&i| y[i]).collect(),
            )
        };
        let scores: Vec<Result<f64>> = candidates
            .par_iter()
            .map(|&(k, nv)| {
                let post = dtc_posterior(&inducing, &xs_train, &y_train, &k, nv)?;
                let model =
                    build_model(inducing.clone(), post, k, nv, 0.0, &training.spec);
                log_predictive_density(&model, &xs_score, &y_score)
            })
            .collect();
        let mut best: Option<((KernelParams, f64), f64)> = None;
        let mut last_err: Option<Error> = None;
        for (cand, score) in candidates.iter().zip(scores) {
            match score {
                // Candidates that fail to factorize drop out of the search.
                Err(e) => last_err = Some(e),
                Ok(s) => {
                    let better = match &best {
                        None => true,
                        Some((b_cand, b_score)) => {
                            s > *b_score
                                || (s == *b_score
                                    && cand.0.lengthscale > b_cand.0.lengthscale)
                        }
                    };
                    if better {
                        best = Some((*cand, s));
                    }
                }
            }
        }
        match best {
            Some((cand, _)) => cand,
            None => {
                return Err(last_err.unwrap_or_else(|| {
                    Error::Config("hyperparameter search produced no candidates".into())
                }))
            }
        }
    };

    let post = dtc_posterior(&inducing, &positions, &y, &winner.0, winner.1)?;
    Ok(build_model(inducing, post, winner.0, winner.1, scalar_mean, &training.spec))
}

/// Posterior mean sampled at every point of `grid`, as a point-centered
/// volume (the reconstruction PSNR is measured against this).
pub fn predict_mean_field(model: &SparseGpModel, grid: &GridSpec) -> Result<VolumeField> {
    grid.validate()?;
    let precomp = inference::precompute(model)?;
    let values: Vec<f64> = (0..grid.point_count())
        .into_par_iter()
        .map(|idx| {
            let [i, j, k] = grid.point_coords(idx);
            let (mean, _) = inference::predict_point(model, &precomp, &grid.position(i, j, k))?;
            Ok(mean)
        })
        .collect::<Result<_>>()?;
    VolumeField::new(*grid, VolumeKind::PointCentered, values)
}

/// Peak signal-to-noise ratio in decibels: 20 log10(range(reference)/rmse).
/// A perfect reconstruction reports +inf; a constant reference has no range
/// to normalize by and is an error.
pub fn psnr(reference: &VolumeField, reconstruction: &VolumeField) -> Result<f64> {
    let report = baseline::compare_fields(reference, reconstruction)?;
    let (lo, hi) = reference.value_range();
    let range = hi - lo;
    if range <= 0.0 {
        return Err(Error::DegenerateRange(
            "reference field is constant; PSNR is undefined".into(),
        ));
    }
    if report.rmse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(20.0 * (range / report.rmse).log10())
}
