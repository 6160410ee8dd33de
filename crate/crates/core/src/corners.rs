use nalgebra::{DVector, Vector3};

use crate::cell_lcp::{CellGaussian, CORNER_OFFSETS};
use crate::error::{Error, Result};
use crate::inference::Precomp;
use crate::kernel;
use crate::model::{GridSpec, SparseGpModel};

/// Per-corner solve against the full model: everything needed to assemble any
/// covariance entry involving this corner.
///
/// u = L^-1 k_Mx and t = G^T k_Mx, so that
/// cov(a, b) = k(x_a, x_b) - u_a . u_b + t_a . t_b.
#[derive(Debug, Clone)]
pub struct CornerSolve {
    pub mean: f64,
    u: DVector<f64>,
    t: DVector<f64>,
}

/// Shared corner machinery of the dense and adaptive reconstruction paths.
/// Both build cells through this type, which makes matched cells bitwise
/// identical between the two methods.
pub struct CornerPredictor<'a> {
    model: &'a SparseGpModel,
    precomp: &'a Precomp,
}

impl<'a> CornerPredictor<'a> {
    pub fn new(model: &'a SparseGpModel, precomp: &'a Precomp) -> Self {
        CornerPredictor { model, precomp }
    }

    /// One O(m^2) solve for a grid point.
    pub fn solve(&self, x: &Vector3<f64>) -> CornerSolve {
        let kx = kernel::cov_vector(x, &self.model.inducing_positions, &self.model.kernel);
        let mean = self.model.scalar_mean + kx.dot(&self.precomp.w);
        let u = self
            .precomp
            .l_factor()
            .solve_lower_triangular(&kx)
            .expect("Cholesky factor has positive diagonal");
        let t = self.precomp.g_factor().transpose() * &kx;
        CornerSolve { mean, u, t }
    }

    /// Posterior covariance between two solved grid points.
    pub fn covariance(
        &self,
        xa: &Vector3<f64>,
        sa: &CornerSolve,
        xb: &Vector3<f64>,
        sb: &CornerSolve,
    ) -> f64 {
        kernel::rbf(xa, xb, &self.model.kernel) - sa.u.dot(&sb.u) + sa.t.dot(&sb.t)
    }

    /// Assembles the 8-corner Gaussian of cell (i, j, k) of `grid` from
    /// already-solved corners, in `CORNER_OFFSETS` order. Applies the same
    /// diagonal clamping rule as joint prediction.
    pub fn cell_gaussian(
        &self,
        positions: &[Vector3<f64>; 8],
        solves: [&CornerSolve; 8],
    ) -> Result<CellGaussian> {
        let mut mean = nalgebra::SVector::<f64, 8>::zeros();
        let mut cov = nalgebra::SMatrix::<f64, 8, 8>::zeros();
        for i in 0..8 {
            mean[i] = solves[i].mean;
            for j in i..8 {
                let c = self.covariance(&positions[i], solves[i], &positions[j], solves[j]);
                cov[(i, j)] = c;
                cov[(j, i)] = c;
            }
        }
        let tol = 1e-8 * self.model.kernel.variance;
        for i in 0..8 {
            let d = cov[(i, i)];
            if d < 0.0 {
                if d <= -tol {
                    return Err(Error::NumericalInstability(format!(
                        "corner variance {d:.6e} below -1e-8*sigma^2"
                    )));
                }
                cov[(i, i)] = 0.0;
            }
        }
        Ok(CellGaussian { corner_positions: *positions, mean, cov })
    }
}

/// Corner positions of cell (i, j, k) in `CORNER_OFFSETS` order.
pub fn cell_corner_positions(grid: &GridSpec, cell: [usize; 3]) -> [Vector3<f64>; 8] {
    CORNER_OFFSETS.map(|o| grid.position(cell[0] + o[0], cell[1] + o[1], cell[2] + o[2]))
}

/// Convenience: solve all 8 corners of one cell and assemble its Gaussian.
pub fn cell_gaussian_for(
    model: &SparseGpModel,
    precomp: &Precomp,
    grid: &GridSpec,
    cell: [usize; 3],
) -> Result<CellGaussian> {
    let predictor = CornerPredictor::new(model, precomp);
    let positions = cell_corner_positions(grid, cell);
    let solves = positions.each_ref().map(|p| predictor.solve(p));
    predictor.cell_gaussian(&positions, solves.each_ref())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::{self, predict_joint};
    use crate::model::{Aabb, KernelParams};
    use nalgebra::{DMatrix, DVector};

    fn toy_model() -> SparseGpModel {
        let positions = vec![
            Vector3::new(0.5, 0.5, 0.5),
            Vector3::new(2.5, 0.5, 1.5),
            Vector3::new(1.0, 2.0, 0.0),
            Vector3::new(0.0, 1.0, 2.0),
        ];
        SparseGpModel {
            kernel: KernelParams::rbf(1.3, 2.0),
            noise_variance: 1e-4,
            scalar_mean: 0.4,
            inducing_positions: positions,
            inducing_mean: DVector::from_row_slice(&[1.0, -0.5, 0.25, 2.0]),
            inducing_cov: DMatrix::identity(4, 4) * 0.2,
            domain_bounds: Aabb::new(Vector3::repeat(-1.0), Vector3::repeat(4.0)),
        }
    }

    #[test]
    fn cell_gaussian_agrees_with_joint_prediction() {
        let model = toy_model();
        let pre = inference::precompute(&model).unwrap();
        let grid = GridSpec::index_coords([4, 4, 4]);
        let cell = cell_gaussian_for(&model, &pre, &grid, [1, 0, 1]).unwrap();
        let joint = predict_joint(&model, &pre, &cell.corner_positions).unwrap();
        for i in 0..8 {
            assert!((cell.mean[i] - joint.mean[i]).abs() <= 1e-10);
            for j in 0..8 {
                assert!(
                    (cell.cov[(i, j)] - joint.cov[(i, j)]).abs()
                        <= 1e-8 * model.kernel.variance
                );
            }
        }
    }

    #[test]
    fn covariance_is_exactly_symmetric() {
        let model = toy_model();
        let pre = inference::precompute(&model).unwrap();
        let predictor = CornerPredictor::new(&model, &pre);
        let a = Vector3::new(0.3, 1.7, 0.9);
        let b = Vector3::new(2.2, 0.1, 1.4);
        let sa = predictor.solve(&a);
        let sb = predictor.solve(&b);
        assert_eq!(
            predictor.covariance(&a, &sa, &b, &sb),
            predictor.covariance(&b, &sb, &a, &sa)
        );
    }

    #[test]
    fn corner_positions_follow_marching_cubes_order() {
        let grid = GridSpec::index_coords([3, 3, 3]);
        let p = cell_corner_positions(&grid, [1, 1, 1]);
        assert_eq!(p[0], Vector3::new(1.0, 1.0, 1.0));
        assert_eq!(p[1], Vector3::new(2.0, 1.0, 1.0));
        assert_eq!(p[2], Vector3::new(2.0, 2.0, 1.0));
        assert_eq!(p[3], Vector3::new(1.0, 2.0, 1.0));
        assert_eq!(p[6], Vector3::new(2.0, 2.0, 2.0));
    }

    #[test]
    fn repeated_solves_are_bitwise_stable() {
        let model = toy_model();
        let pre = inference::precompute(&model).unwrap();
        let predictor = CornerPredictor::new(&model, &pre);
        let x = Vector3::new(1.1, 0.4, 2.3);
        let s1 = predictor.solve(&x);
        let s2 = predictor.solve(&x);
        assert_eq!(s1.mean, s2.mean);
        assert_eq!(predictor.covariance(&x, &s1, &x, &s1), predictor.covariance(&x, &s2, &x, &s2));
    }
}
