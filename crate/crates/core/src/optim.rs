use std::collections::VecDeque;

use nalgebra::Vector3;

use crate::model::{Aabb, OptimizerConfig};

/// Result of a (multistart) bounded minimization.
#[derive(Debug, Clone, Copy)]
pub struct MinimizeOutcome {
    pub value: f64,
    pub argmin: Vector3<f64>,
    /// Whether the start that produced `value` met the projected-gradient
    /// tolerance (false = stopped on max_iters or a stalled line search).
    pub converged: bool,
    /// Objective evaluations across all starts.
    pub evaluations: usize,
}

/// Full length of the start schedule: center, 8 corners, 6 face centers.
pub const SCHEDULE_POINTS: usize = 15;

/// Fixed multistart schedule over a box, truncated to `count` (at most 15):
/// the center; the four even-parity corners 0,3,5,6 (a tetrahedron); the
/// remaining corners 1,2,4,7; the six face centers.
pub fn start_points(bounds: &Aabb, count: usize) -> Vec<Vector3<f64>> {
    let mut pts = Vec::with_capacity(15);
    pts.push(bounds.center());
    for c in [0usize, 3, 5, 6, 1, 2, 4, 7] {
        pts.push(bounds.corner(c));
    }
    for f in 0..6 {
        pts.push(bounds.face_center(f));
    }
    pts.truncate(count.max(1));
    pts
}

fn clamp_to(bounds: &Aabb, p: &Vector3<f64>) -> Vector3<f64> {
    Vector3::new(
        p.x.clamp(bounds.lo.x, bounds.hi.x),
        p.y.clamp(bounds.lo.y, bounds.hi.y),
        p.z.clamp(bounds.lo.z, bounds.hi.z),
    )
}

/// Gradient with components pointing out of the box zeroed: the first-order
/// optimality measure for box-constrained problems.
fn projected_gradient(bounds: &Aabb, x: &Vector3<f64>, g: &Vector3<f64>) -> Vector3<f64> {
    let mut pg = *g;
    for a in 0..3 {
        if (x[a] <= bounds.lo[a] && g[a] > 0.0) || (x[a] >= bounds.hi[a] && g[a] < 0.0) {
            pg[a] = 0.0;
        }
    }
    pg
}

struct CurvaturePair {
    s: Vector3<f64>,
    y: Vector3<f64>,
    rho: f64,
}

/// Two-loop recursion: approximates H^-1 g from the stored curvature pairs.
fn two_loop(history: &VecDeque<CurvaturePair>, g: &Vector3<f64>) -> Vector3<f64> {
    let mut q = *g;
    let mut alphas = Vec::with_capacity(history.len());
    for pair in history.iter().rev() {
        let alpha = pair.rho * pair.s.dot(&q);
        q -= pair.y * alpha;
        alphas.push(alpha);
    }
    let gamma = history
        .back()
        .map(|p| {
            let yy = p.y.dot(&p.y);
            if yy > 0.0 { p.s.dot(&p.y) / yy } else { 1.0 }
        })
        .filter(|g| g.is_finite() && *g > 0.0)
        .unwrap_or(1.0);
    q *= gamma;
    for (pair, alpha) in history.iter().zip(alphas.into_iter().rev()) {
        let beta = pair.rho * pair.y.dot(&q);
        q += pair.s * (alpha - beta);
    }
    q
}

const HISTORY: usize = 10;
const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 30;

/// Projected limited-memory quasi-Newton descent from one start point.
fn descend<F>(
    f: &F,
    bounds: &Aabb,
    x0: Vector3<f64>,
    cfg: &OptimizerConfig,
    evaluations: &mut usize,
) -> (f64, Vector3<f64>, bool)
where
    F: Fn(&Vector3<f64>) -> (f64, Vector3<f64>),
{
    let mut x = clamp_to(bounds, &x0);
    let (mut fx, mut gx) = f(&x);
    *evaluations += 1;
    let mut history: VecDeque<CurvaturePair> = VecDeque::with_capacity(HISTORY);
    let mut converged = false;

    for _ in 0..cfg.max_iters {
        let pg = projected_gradient(bounds, &x, &gx);
        if pg.amax() <= cfg.grad_tol {
            converged = true;
            break;
        }

        let mut d = -two_loop(&history, &gx);
        for a in 0..3 {
            if (x[a] <= bounds.lo[a] && d[a] < 0.0) || (x[a] >= bounds.hi[a] && d[a] > 0.0) {
                d[a] = 0.0;
            }
        }
        // The projected quasi-Newton direction can lose descent; fall back to
        // the projected steepest direction, which is a descent direction by
        // construction whenever pg is nonzero.
        if !(d.dot(&gx) < 0.0) {
            d = -pg;
        }

        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_BACKTRACKS {
            let xt = clamp_to(bounds, &(x + d * step));
            let delta = xt - x;
            if delta == Vector3::zeros() {
                step *= 0.5;
                continue;
            }
            let (ft, gt) = f(&xt);
            *evaluations += 1;
            let dec = gx.dot(&delta);
            if ft <= fx + ARMIJO_C1 * dec {
                let s = delta;
                let y = gt - gx;
                let sy = s.dot(&y);
                if sy > 1e-12 * s.norm() * y.norm() {
                    if history.len() == HISTORY {
                        history.pop_front();
                    }
                    history.push_back(CurvaturePair { s, y, rho: 1.0 / sy });
                }
                x = xt;
                fx = ft;
                gx = gt;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // Stalled line search: the iterate is the best this start can do.
            break;
        }
    }
    (fx, x, converged)
}

/// Multistart bounded minimization. Starts run in their fixed order; the
/// strictly smallest terminal value wins, so exact ties keep the earliest
/// start's iterate.
pub fn minimize_box<F>(f: &F, bounds: &Aabb, cfg: &OptimizerConfig) -> MinimizeOutcome
where
    F: Fn(&Vector3<f64>) -> (f64, Vector3<f64>),
{
    let mut evaluations = 0usize;
    let mut best: Option<(f64, Vector3<f64>, bool)> = None;
    for start in start_points(bounds, cfg.multistarts) {
        let (value, argmin, converged) = descend(f, bounds, start, cfg, &mut evaluations);
        let better = match &best {
            None => true,
            Some((bv, _, _)) => value < *bv,
        };
        if better {
            best = Some((value, argmin, converged));
        }
    }
    let (value, argmin, converged) = best.expect("at least one start");
    MinimizeOutcome { value, argmin, converged, evaluations }
}
