use std::cell::RefCell;

use nalgebra::{DMatrix, DVector, Vector3};

use crate::cell_lcp::std_normal_cdf;
use crate::error::{Error, Result};
use crate::inference::{self, Precomp};
use crate::kernel;
use crate::model::{Aabb, KernelParams, OptimizerConfig, SparseGpModel};
use crate::optim::{self, MinimizeOutcome};

/// Sub-model over the inducing points within a beta-enlarged region. An empty
/// subset degrades to the prior: mean = scalar_mean, variance = sigma^2.
pub struct LocalGp {
    /// Indices into the parent model's inducing set.
    pub subset: Vec<usize>,
    sub: Option<SubGp>,
    scalar_mean: f64,
    kernel: KernelParams,
}

struct SubGp {
    model: SparseGpModel,
    precomp: Precomp,
}

/// Indices of the inducing points inside `bounds` enlarged by beta*l.
pub fn select_subset(model: &SparseGpModel, bounds: &Aabb, beta: f64) -> Vec<usize> {
    let enlarged = bounds.enlarged(kernel::distance_threshold(&model.kernel, beta));
    model
        .inducing_positions
        .iter()
        .enumerate()
        .filter(|(_, p)| enlarged.contains(p))
        .map(|(i, _)| i)
        .collect()
}

/// LocalGp over an explicit subset (used by the octree, which propagates
/// subsets down the tree instead of rescanning all inducing points).
pub fn local_gp_from_subset(model: &SparseGpModel, subset: Vec<usize>) -> Result<LocalGp> {
    let sub = if subset.is_empty() {
        None
    } else {
        let m = subset.len();
        let positions: Vec<Vector3<f64>> =
            subset.iter().map(|&i| model.inducing_positions[i]).collect();
        let mean = DVector::from_fn(m, |r, _| model.inducing_mean[subset[r]]);
        let cov =
            DMatrix::from_fn(m, m, |r, c| model.inducing_cov[(subset[r], subset[c])]);
        let sub_model = SparseGpModel {
            kernel: model.kernel,
            noise_variance: model.noise_variance,
            scalar_mean: model.scalar_mean,
            inducing_positions: positions,
            inducing_mean: mean,
            inducing_cov: cov,
            domain_bounds: model.domain_bounds,
        };
        let precomp = inference::precompute(&sub_model)?;
        Some(SubGp { model: sub_model, precomp })
    };
    Ok(LocalGp { subset, sub, scalar_mean: model.scalar_mean, kernel: model.kernel })
}

/// LocalGp over all inducing points within `bounds` enlarged by beta*l on
/// every face (the enlargement may extend beyond the domain).
pub fn build_local_gp(model: &SparseGpModel, bounds: &Aabb, beta: f64) -> Result<LocalGp> {
    local_gp_from_subset(model, select_subset(model, bounds, beta))
}

impl LocalGp {
    pub fn is_empty(&self) -> bool {
        self.sub.is_none()
    }

    /// Posterior (mean, variance) under the local model; prior when empty.
    pub fn predict_point(&self, x: &Vector3<f64>) -> Result<(f64, f64)> {
        match &self.sub {
            None => Ok((self.scalar_mean, self.kernel.variance)),
            Some(s) => inference::predict_point(&s.model, &s.precomp, x),
        }
    }

    /// F(x) = Phi((theta - mean(x)) / sd(x)).
    pub fn f_value(&self, x: &Vector3<f64>, theta: f64) -> Result<f64> {
        let (mean, var) = self.predict_point(x)?;
        Ok(std_normal_cdf((theta - mean) / var.sqrt()))
    }

    /// z(x) = (theta - mean(x)) / sd(x) and its spatial gradient. This is the
    /// quantity the bound minimizations descend on: F = Phi(z) saturates to a
    /// zero-gradient plateau wherever |z| is large, while z itself keeps a
    /// usable gradient everywhere. Where the variance sits on its floor the
    /// variance gradient is treated as zero (the floor is locally flat).
    pub fn z_with_gradient(&self, x: &Vector3<f64>, theta: f64) -> Result<(f64, Vector3<f64>)> {
        let s = match &self.sub {
            None => {
                let z = (theta - self.scalar_mean) / self.kernel.variance.sqrt();
                return Ok((z, Vector3::zeros()));
            }
            Some(s) => s,
        };
        let (mean, var) = inference::predict_point(&s.model, &s.precomp, x)?;
        let (dmean, dvar_raw) = inference::predict_point_gradients(&s.model, &s.precomp, x);
        let dvar = if var <= inference::variance_floor(&s.model) {
            Vector3::zeros()
        } else {
            dvar_raw
        };
        let sd = var.sqrt();
        let z = (theta - mean) / sd;
        let dsd = dvar / (2.0 * sd);
        let dz = (-dmean * sd - dsd * (theta - mean)) / var;
        Ok((z, dz))
    }

    /// F and its spatial gradient by the chain rule through Phi.
    pub fn f_with_gradient(&self, x: &Vector3<f64>, theta: f64) -> Result<(f64, Vector3<f64>)> {
        let (z, dz) = self.z_with_gradient(x, theta)?;
        let pdf = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
        Ok((std_normal_cdf(z), pdf * dz))
    }
}

/// F(x) and its gradient; the crossing CDF the bound minimizes.
pub fn f_crossing_cdf(local: &LocalGp, x: &Vector3<f64>, theta: f64) -> Result<(f64, Vector3<f64>)> {
    local.f_with_gradient(x, theta)
}

/// Which Slepian factor a minimization serves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundSide {
    /// B_l: minimize F (the all-below probability factor).
    Lower,
    /// B_u: minimize 1 - F (the all-above probability factor).
    Upper,
}

/// Bounded multistart minimization of F or 1-F over `bounds`. The descent
/// runs on the z-score (F = Phi(z), Phi monotone, so the argmin is shared);
/// the returned value is converted back to CDF units. The Upper side reports
/// 1 - Phi(z) so that both sides evaluated at the same point sum to exactly
/// 1 in floating point.
pub fn minimize_over_box(
    side: BoundSide,
    local: &LocalGp,
    bounds: &Aabb,
    theta: f64,
    opt: &OptimizerConfig,
) -> Result<MinimizeOutcome> {
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let objective = |x: &Vector3<f64>| match local.z_with_gradient(x, theta) {
        Ok((z, dz)) => match side {
            BoundSide::Lower => (z, dz),
            BoundSide::Upper => (-z, -dz),
        },
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            (f64::INFINITY, Vector3::zeros())
        }
    };
    let mut out = optim::minimize_box(&objective, bounds, opt);
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    out.value = match side {
        BoundSide::Lower => std_normal_cdf(out.value),
        BoundSide::Upper => 1.0 - std_normal_cdf(-out.value),
    };
    Ok(out)
}

/// Regional crossing-probability upper bound and its components.
#[derive(Debug, Clone, Copy)]
pub struct BoundResult {
    /// min over the box of F; 0 when that side was skipped.
    pub b_lower: f64,
    /// min over the box of 1 - F; 0 when that side was skipped.
    pub b_upper: f64,
    /// Number of target grid points the region covers.
    pub d: u64,
    /// clamp(1 - b_lower^d - b_upper^d, 0, 1), evaluated in log space.
    pub upper_bound: f64,
    pub argmin_lower: Option<Vector3<f64>>,
    pub argmin_upper: Option<Vector3<f64>>,
    /// Objective evaluations across both minimizations.
    pub evaluations: usize,
    /// False when any executed minimization stopped without meeting grad_tol.
    pub converged: bool,
}

fn pow_d(b: f64, d: u64) -> f64 {
    if b <= 0.0 {
        0.0
    } else if b >= 1.0 {
        1.0
    } else if d == 1 {
        b
    } else {
        (d as f64 * b.ln()).exp()
    }
}

/// 1 - B_l^d - B_u^d in [0, 1], with the subtraction from 1 performed via
/// expm1 on the larger factor so the result keeps precision when a factor is
/// close to 1 and d is large (the regime where pruning decisions happen).
/// A `None` factor was skipped per the case analysis and contributes 0.
pub fn slepian_bound(b_lower: Option<f64>, b_upper: Option<f64>, d: u64) -> f64 {
    assert!(d >= 1, "bound needs at least one grid point");
    let bl = b_lower.unwrap_or(0.0).clamp(0.0, 1.0);
    let bu = b_upper.unwrap_or(0.0).clamp(0.0, 1.0);
    if d == 1 {
        return ((1.0 - bl) - bu).clamp(0.0, 1.0);
    }
    let (big, small) = if bl >= bu { (bl, bu) } else { (bu, bl) };
    let one_minus_big_pow = if big <= 0.0 {
        1.0
    } else if big >= 1.0 {
        0.0
    } else {
        -f64::exp_m1(d as f64 * big.ln())
    };
    (one_minus_big_pow - pow_d(small, d)).clamp(0.0, 1.0)
}

/// Evaluates the requested sides and assembles the bound. Skipped sides
/// contribute a zero factor, which only loosens the bound.
pub fn regional_upper_bound_sides(
    local: &LocalGp,
    bounds: &Aabb,
    theta: f64,
    d: u64,
    opt: &OptimizerConfig,
    eval_lower: bool,
    eval_upper: bool,
) -> Result<BoundResult> {
    assert!(d >= 1);
    let mut evaluations = 0;
    let mut converged = true;
    let mut run = |side: BoundSide| -> Result<(f64, Option<Vector3<f64>>)> {
        let out = minimize_over_box(side, local, bounds, theta, opt)?;
        evaluations += out.evaluations;
        converged &= out.converged;
        Ok((out.value.clamp(0.0, 1.0), Some(out.argmin)))
    };
    let (mut b_lower, mut argmin_lower) =
        if eval_lower { run(BoundSide::Lower)? } else { (0.0, None) };
    let (mut b_upper, mut argmin_upper) =
        if eval_upper { run(BoundSide::Upper)? } else { (0.0, None) };
    // Value-only samples over the full start schedule. Every corner of the
    // box is a constrained stationary point whenever the gradient points
    // outward on all three axes, so descents can terminate there while a
    // far corner holds a smaller objective; sampling every corner and face
    // center pulls each side toward the true box minimum regardless of
    // where the descents stranded. Octree node corners are target grid
    // points, so these minima stay attainable by the field being bounded.
    for p in optim::start_points(bounds, optim::SCHEDULE_POINTS) {
        let f = local.f_value(&p, theta)?;
        evaluations += 1;
        if eval_lower && f < b_lower {
            b_lower = f;
            argmin_lower = Some(p);
        }
        if eval_upper && 1.0 - f < b_upper {
            b_upper = 1.0 - f;
            argmin_upper = Some(p);
        }
    }
    if eval_lower && eval_upper {
        // Each side's argmin is an evaluated point of the other side's
        // objective: min F <= F(argmin of 1-F) = 1 - b_upper and vice versa.
        // Capping repairs minimizations stranded in a local minimum, which
        // would otherwise report b_lower + b_upper > 1 and let the bound
        // clamp to zero on a region that in truth crosses.
        let (bl0, bu0) = (b_lower, b_upper);
        b_lower = bl0.min(1.0 - bu0);
        b_upper = bu0.min(1.0 - bl0);
    }
    let upper_bound = slepian_bound(
        eval_lower.then_some(b_lower),
        eval_upper.then_some(b_upper),
        d,
    );
    Ok(BoundResult {
        b_lower,
        b_upper,
        d,
        upper_bound,
        argmin_lower,
        argmin_upper,
        evaluations,
        converged,
    })
}

/// Full two-sided regional bound.
pub fn regional_upper_bound(
    local: &LocalGp,
    bounds: &Aabb,
    theta: f64,
    d: u64,
    opt: &OptimizerConfig,
) -> Result<BoundResult> {
    regional_upper_bound_sides(local, bounds, theta, d, opt, true, true)
}
