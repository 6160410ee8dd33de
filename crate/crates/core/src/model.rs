use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Supported covariance kernels. Only the squared-exponential (RBF) kernel is
/// implemented; the enum exists so model files stay forward-compatible.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    Rbf,
}

/// Kernel hyperparameters in world units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    pub kind: KernelKind,
    /// Lengthscale (world distance units). Must be positive.
    pub lengthscale: f64,
    /// Signal variance sigma^2 (field-value^2 units). Must be positive.
    pub variance: f64,
}

impl KernelParams {
    pub fn rbf(lengthscale: f64, variance: f64) -> Self {
        KernelParams { kind: KernelKind::Rbf, lengthscale, variance }
    }
}

/// Closed axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub lo: Vector3<f64>,
    pub hi: Vector3<f64>,
}

impl Aabb {
    pub fn new(lo: Vector3<f64>, hi: Vector3<f64>) -> Self {
        Aabb { lo, hi }
    }

    pub fn center(&self) -> Vector3<f64> {
        (self.lo + self.hi) * 0.5
    }

    /// Closed containment test.
    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        (0..3).all(|a| p[a] >= self.lo[a] && p[a] <= self.hi[a])
    }

    /// Box grown by `r` on every face. `r` may be infinite, in which case the
    /// result contains every point.
    pub fn enlarged(&self, r: f64) -> Aabb {
        let d = Vector3::repeat(r);
        Aabb { lo: self.lo - d, hi: self.hi + d }
    }

    /// Corner `i` in bit order: bit 0 selects hi-x, bit 1 hi-y, bit 2 hi-z.
    pub fn corner(&self, i: usize) -> Vector3<f64> {
        debug_assert!(i < 8);
        Vector3::new(
            if i & 1 == 0 { self.lo.x } else { self.hi.x },
            if i & 2 == 0 { self.lo.y } else { self.hi.y },
            if i & 4 == 0 { self.lo.z } else { self.hi.z },
        )
    }

    /// Center of face `i` in 0..6: axis = i/2, low side for even i.
    pub fn face_center(&self, i: usize) -> Vector3<f64> {
        debug_assert!(i < 6);
        let mut c = self.center();
        let axis = i / 2;
        c[axis] = if i % 2 == 0 { self.lo[axis] } else { self.hi[axis] };
        c
    }
}

/// Sparse GP regression model: the posterior over `m` inducing points plus
/// kernel and noise hyperparameters. Values are stored centered; the scalar
/// mean subtracted during fitting is kept in `scalar_mean` and re-added by
/// prediction.
#[derive(Debug, Clone)]
pub struct SparseGpModel {
    pub kernel: KernelParams,
    /// Observation noise variance sigma_y^2.
    pub noise_variance: f64,
    /// Constant mean removed from the training values before fitting.
    pub scalar_mean: f64,
    /// Inducing positions X_M (world coordinates), length m.
    pub inducing_positions: Vec<Vector3<f64>>,
    /// Centered inducing posterior mean mu_M, length m.
    pub inducing_mean: DVector<f64>,
    /// Inducing posterior covariance A_M, m x m.
    pub inducing_cov: DMatrix<f64>,
    pub domain_bounds: Aabb,
}

impl SparseGpModel {
    pub fn num_inducing(&self) -> usize {
        self.inducing_positions.len()
    }

    /// Posterior mean of the field value at inducing point `i` (de-centered).
    pub fn inducing_value_mean(&self, i: usize) -> f64 {
        self.scalar_mean + self.inducing_mean[i]
    }
}

/// Structured grid: `dims` counts grid points per axis, so each axis has
/// `dims[i] - 1` cells. Values are laid out row-major with x fastest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dims: [usize; 3],
    pub origin: [f64; 3],
    pub spacing: [f64; 3],
}

impl GridSpec {
    pub fn new(dims: [usize; 3], origin: [f64; 3], spacing: [f64; 3]) -> Self {
        GridSpec { dims, origin, spacing }
    }

    /// Grid with unit spacing anchored at the origin (index coordinates).
    pub fn index_coords(dims: [usize; 3]) -> Self {
        GridSpec::new(dims, [0.0; 3], [1.0; 3])
    }

    /// Grid whose points span `bounds` exactly with `dims` points per axis.
    pub fn covering(bounds: &Aabb, dims: [usize; 3]) -> Self {
        let mut spacing = [0.0; 3];
        for a in 0..3 {
            spacing[a] = (bounds.hi[a] - bounds.lo[a]) / (dims[a] - 1) as f64;
        }
        GridSpec::new(dims, [bounds.lo.x, bounds.lo.y, bounds.lo.z], spacing)
    }

    pub fn validate(&self) -> Result<()> {
        for a in 0..3 {
            if self.dims[a] < 2 {
                return Err(Error::Config(format!(
                    "grid dims must be at least 2 per axis, got {:?}",
                    self.dims
                )));
            }
            if !(self.spacing[a] > 0.0 && self.spacing[a].is_finite()) {
                return Err(Error::Config(format!(
                    "grid spacing must be positive and finite, got {:?}",
                    self.spacing
                )));
            }
            if !self.origin[a].is_finite() {
                return Err(Error::Config("grid origin must be finite".into()));
            }
        }
        Ok(())
    }

    pub fn point_count(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn cell_dims(&self) -> [usize; 3] {
        [self.dims[0] - 1, self.dims[1] - 1, self.dims[2] - 1]
    }

    pub fn cell_count(&self) -> usize {
        let c = self.cell_dims();
        c[0] * c[1] * c[2]
    }

    pub fn max_cells_per_axis(&self) -> usize {
        let c = self.cell_dims();
        c[0].max(c[1]).max(c[2])
    }

    /// World position of grid point (i, j, k).
    pub fn position(&self, i: usize, j: usize, k: usize) -> Vector3<f64> {
        Vector3::new(
            self.origin[0] + self.spacing[0] * i as f64,
            self.origin[1] + self.spacing[1] * j as f64,
            self.origin[2] + self.spacing[2] * k as f64,
        )
    }

    /// Flat index of grid point (i, j, k), x fastest.
    pub fn point_index(&self, i: usize, j: usize, k: usize) -> usize {
        debug_assert!(i < self.dims[0] && j < self.dims[1] && k < self.dims[2]);
        (k * self.dims[1] + j) * self.dims[0] + i
    }

    /// Flat index of cell (i, j, k), x fastest.
    pub fn cell_index(&self, i: usize, j: usize, k: usize) -> usize {
        let c = self.cell_dims();
        debug_assert!(i < c[0] && j < c[1] && k < c[2]);
        (k * c[1] + j) * c[0] + i
    }

    /// Inverse of `point_index`.
    pub fn point_coords(&self, index: usize) -> [usize; 3] {
        debug_assert!(index < self.point_count());
        let i = index % self.dims[0];
        let j = (index / self.dims[0]) % self.dims[1];
        let k = index / (self.dims[0] * self.dims[1]);
        [i, j, k]
    }

    /// Inverse of `cell_index`.
    pub fn cell_coords(&self, index: usize) -> [usize; 3] {
        let c = self.cell_dims();
        debug_assert!(index < self.cell_count());
        let i = index % c[0];
        let j = (index / c[0]) % c[1];
        let k = index / (c[0] * c[1]);
        [i, j, k]
    }

    /// Bounding box spanned by the grid points.
    pub fn bounds(&self) -> Aabb {
        let d = self.dims;
        Aabb::new(self.position(0, 0, 0), self.position(d[0] - 1, d[1] - 1, d[2] - 1))
    }
}

/// Whether a field's samples live on grid points or cell centers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VolumeKind {
    PointCentered,
    CellCentered,
}

/// A scalar field over a structured grid, x-fastest row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeField {
    pub spec: GridSpec,
    pub kind: VolumeKind,
    pub values: Vec<f64>,
}

impl VolumeField {
    pub fn expected_len(spec: &GridSpec, kind: VolumeKind) -> usize {
        match kind {
            VolumeKind::PointCentered => spec.point_count(),
            VolumeKind::CellCentered => spec.cell_count(),
        }
    }

    pub fn new(spec: GridSpec, kind: VolumeKind, values: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        let expected = Self::expected_len(&spec, kind);
        if values.len() != expected {
            return Err(Error::SizeMismatch(format!(
                "volume has {} values but grid {:?} ({:?}) needs {}",
                values.len(),
                spec.dims,
                kind,
                expected
            )));
        }
        Ok(VolumeField { spec, kind, values })
    }

    pub fn zeros(spec: GridSpec, kind: VolumeKind) -> Self {
        let len = Self::expected_len(&spec, kind);
        VolumeField { spec, kind, values: vec![0.0; len] }
    }

    /// (min, max) over all values; the field is never empty by construction.
    pub fn value_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in &self.values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    pub fn count_nonzero(&self) -> usize {
        self.values.iter().filter(|v| **v != 0.0).count()
    }
}

/// Bounded-minimizer settings shared by every bound evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    /// Iteration cap per start.
    pub max_iters: usize,
    /// Termination threshold on the projected-gradient infinity norm.
    pub grad_tol: f64,
    /// Number of initial points (1..=15): center, corners, face centers.
    pub multistarts: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig { max_iters: 50, grad_tol: 1e-8, multistarts: 5 }
    }
}

/// Full configuration of one LCP query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryConfig {
    /// Iso-value theta the crossing probability refers to.
    pub iso_value: f64,
    /// Pruning threshold; a region is dropped when its crossing-probability
    /// upper bound is at most alpha. Must lie in (0, 0.5).
    pub alpha: f64,
    /// Local-GP truncation distance in multiples of the lengthscale.
    pub beta: f64,
    /// Octree depth at which nodes stop subdividing and emit cells.
    pub max_depth: u32,
    /// Monte Carlo draws per cell.
    pub mc_samples: u32,
    /// Global seed; per-cell seeds are derived from it.
    pub rng_seed: u64,
    pub optimizer: OptimizerConfig,
}

impl QueryConfig {
    /// Smallest depth whose virtual cube (side 2^depth cells) covers `target`.
    pub fn default_max_depth(target: &GridSpec) -> u32 {
        let cells = target.max_cells_per_axis().max(1);
        let mut depth = 0u32;
        while (1usize << depth) < cells {
            depth += 1;
        }
        depth.max(1)
    }

    /// Query with spec defaults (alpha 1e-3, beta 6, 1600 samples) at the
    /// default depth for `target`.
    pub fn for_grid(target: &GridSpec, iso_value: f64) -> Self {
        QueryConfig {
            iso_value,
            alpha: 1e-3,
            beta: 6.0,
            max_depth: Self::default_max_depth(target),
            mc_samples: 1600,
            rng_seed: 0,
            optimizer: OptimizerConfig::default(),
        }
    }

    pub fn validate(&self, target: &GridSpec) -> Result<()> {
        target.validate()?;
        if !(self.iso_value.is_finite()) {
            return Err(Error::Config("iso_value must be finite".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return Err(Error::Config(format!(
                "alpha must lie in (0, 0.5), got {}",
                self.alpha
            )));
        }
        if !(self.beta > 0.0) {
            return Err(Error::Config(format!("beta must be positive, got {}", self.beta)));
        }
        if self.mc_samples == 0 {
            return Err(Error::Config("mc_samples must be at least 1".into()));
        }
        if self.max_depth == 0 || self.max_depth > 40 {
            return Err(Error::Config(format!(
                "max_depth must lie in 1..=40, got {}",
                self.max_depth
            )));
        }
        let cells = target.max_cells_per_axis();
        if (1u64 << self.max_depth.min(63)) < cells as u64 {
            return Err(Error::Config(format!(
                "max_depth {} gives a virtual cube of {} cells per axis, smaller than the target's {}",
                self.max_depth,
                1u64 << self.max_depth,
                cells
            )));
        }
        let o = &self.optimizer;
        if o.multistarts == 0 || o.multistarts > 15 {
            return Err(Error::Config(format!(
                "multistarts must lie in 1..=15, got {}",
                o.multistarts
            )));
        }
        if !(o.grad_tol > 0.0) {
            return Err(Error::Config("grad_tol must be positive".into()));
        }
        Ok(())
    }
}

/// Outcome of `validate_model`: hard invariant violations plus advisory
/// warnings (e.g. a factorization that needed unusually large jitter).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<String>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks every model invariant and returns the report. Reporting only; the
/// caller decides whether violations are fatal.
pub fn validate_model(model: &SparseGpModel) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut violation = |msg: String| report.violations.push(msg);

    if !(model.kernel.lengthscale > 0.0 && model.kernel.lengthscale.is_finite()) {
        violation(format!(
            "lengthscale must be positive and finite, got {}",
            model.kernel.lengthscale
        ));
    }
    if !(model.kernel.variance > 0.0 && model.kernel.variance.is_finite()) {
        violation(format!(
            "variance must be positive and finite, got {}",
            model.kernel.variance
        ));
    }
    if !(model.noise_variance >= 0.0 && model.noise_variance.is_finite()) {
        violation(format!(
            "noise_variance must be nonnegative and finite, got {}",
            model.noise_variance
        ));
    }
    if !model.scalar_mean.is_finite() {
        violation("scalar_mean must be finite".into());
    }

    let m = model.num_inducing();
    if m == 0 {
        violation("at least one inducing point is required".into());
    }
    if model.inducing_mean.len() != m {
        violation(format!(
            "inducing_mean length {} does not match inducing point count {}",
            model.inducing_mean.len(),
            m
        ));
    }
    if model.inducing_cov.nrows() != m || model.inducing_cov.ncols() != m {
        violation(format!(
            "inducing_cov is {}x{} but must be {m}x{m}",
            model.inducing_cov.nrows(),
            model.inducing_cov.ncols()
        ));
    }

    let b = &model.domain_bounds;
    let mut bounds_ok = true;
    for a in 0..3 {
        if !(b.lo[a].is_finite() && b.hi[a].is_finite() && b.lo[a] < b.hi[a]) {
            bounds_ok = false;
        }
    }
    if !bounds_ok {
        violation(format!(
            "domain_bounds must be finite with positive extent, got lo {:?} hi {:?}",
            b.lo.as_slice(),
            b.hi.as_slice()
        ));
    }

    for (i, p) in model.inducing_positions.iter().enumerate() {
        if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
            violation(format!("inducing position {i} is not finite"));
            continue;
        }
        if bounds_ok && !b.contains(p) {
            violation(format!("inducing position {i} lies outside domain_bounds"));
        }
    }
    if model.inducing_mean.iter().any(|v| !v.is_finite()) {
        violation("inducing_mean contains non-finite values".into());
    }
    if model.inducing_cov.iter().any(|v| !v.is_finite()) {
        violation("inducing_cov contains non-finite values".into());
    }

    // Structural checks below need a well-formed square matrix.
    if model.inducing_cov.nrows() == m
        && model.inducing_cov.ncols() == m
        && m > 0
        && model.inducing_cov.iter().all(|v| v.is_finite())
    {
        if linalg::relative_asymmetry(&model.inducing_cov) > 1e-8 {
            report.violations.push("inducing_cov is not symmetric".into());
        }
        if (0..m).any(|i| model.inducing_cov[(i, i)] < 0.0) {
            report.violations.push("inducing_cov has a negative diagonal entry".into());
        } else {
            let trace = model.inducing_cov.trace();
            let base_jitter = 1e-10 * trace / m as f64;
            match linalg::cholesky_with_jitter(
                &model.inducing_cov,
                base_jitter,
                linalg::JITTER_ESCALATIONS,
            ) {
                Ok((_, used)) => {
                    if used > linalg::JITTER_WARN_FRACTION * trace {
                        report.warnings.push(format!(
                            "inducing_cov required jitter {used:.3e}, above {:} of its trace",
                            linalg::JITTER_WARN_FRACTION
                        ));
                    }
                }
                Err(_) => {
                    report
                        .violations
                        .push("inducing_cov is not positive semidefinite".into());
                }
            }
        }
    }

    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_model() -> SparseGpModel {
        SparseGpModel {
            kernel: KernelParams::rbf(1.0, 1.0),
            noise_variance: 0.01,
            scalar_mean: 0.0,
            inducing_positions: vec![Vector3::new(0.5, 0.5, 0.5)],
            inducing_mean: DVector::from_element(1, 2.0),
            inducing_cov: DMatrix::from_element(1, 1, 0.01),
            domain_bounds: Aabb::new(Vector3::zeros(), Vector3::repeat(1.0)),
        }
    }

    #[test]
    fn minimal_model_passes_validation() {
        let report = validate_model(&minimal_model());
        assert!(report.is_valid(), "unexpected violations: {:?}", report.violations);
        assert!(report.warnings.is_empty());
    }

    #[test]
    fn negative_lengthscale_is_reported() {
        let mut model = minimal_model();
        model.kernel.lengthscale = -1.0;
        let report = validate_model(&model);
        assert!(report.violations.iter().any(|v| v.contains("lengthscale must be positive")));
    }

    #[test]
    fn tangle_scale_hyperparameters_validate_cleanly() {
        // Tangle-scale model: 50 inducing points on a 32^3 index-coordinate grid.
        let mut positions = Vec::new();
        for i in 0..50 {
            let t = i as f64 / 49.0;
            positions.push(Vector3::new(31.0 * t, 31.0 * (1.0 - t), 15.5));
        }
        let model = SparseGpModel {
            kernel: KernelParams::rbf(36.33, 187.6 * 187.6),
            noise_variance: 0.0015 * 0.0015,
            scalar_mean: 0.0,
            inducing_positions: positions,
            inducing_mean: DVector::zeros(50),
            inducing_cov: DMatrix::identity(50, 50) * 0.1,
            domain_bounds: Aabb::new(Vector3::zeros(), Vector3::repeat(31.0)),
        };
        let report = validate_model(&model);
        assert!(report.is_valid(), "unexpected violations: {:?}", report.violations);
    }

    #[test]
    fn asymmetric_covariance_is_reported() {
        let mut model = minimal_model();
        model.inducing_positions.push(Vector3::new(0.25, 0.25, 0.25));
        model.inducing_mean = DVector::zeros(2);
        model.inducing_cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.2, 1.0]);
        let report = validate_model(&model);
        assert!(report.violations.iter().any(|v| v.contains("not symmetric")));
    }

    #[test]
    fn indefinite_covariance_is_reported() {
        let mut model = minimal_model();
        model.inducing_cov = DMatrix::from_element(1, 1, -0.5);
        let report = validate_model(&model);
        assert!(report
            .violations
            .iter()
            .any(|v| v.contains("negative diagonal") || v.contains("positive semidefinite")));
    }

    #[test]
    fn out_of_bounds_inducing_point_is_reported() {
        let mut model = minimal_model();
        model.inducing_positions[0] = Vector3::new(2.0, 0.5, 0.5);
        let report = validate_model(&model);
        assert!(report.violations.iter().any(|v| v.contains("outside domain_bounds")));
    }

    #[test]
    fn validation_is_pure() {
        let model = minimal_model();
        assert_eq!(validate_model(&model), validate_model(&model));
    }

    #[test]
    fn grid_indexing_round_trips() {
        let spec = GridSpec::index_coords([4, 5, 6]);
        assert_eq!(spec.point_count(), 120);
        assert_eq!(spec.cell_count(), 3 * 4 * 5);
        let mut seen = vec![false; spec.cell_count()];
        for k in 0..5 {
            for j in 0..4 {
                for i in 0..3 {
                    let idx = spec.cell_index(i, j, k);
                    assert!(!seen[idx]);
                    seen[idx] = true;
                    assert_eq!(spec.cell_coords(idx), [i, j, k]);
                }
            }
        }
        assert!(seen.iter().all(|s| *s));
        // x is fastest.
        assert_eq!(spec.point_index(1, 0, 0), 1);
        assert_eq!(spec.point_index(0, 1, 0), 4);
        assert_eq!(spec.point_index(0, 0, 1), 20);
    }

    #[test]
    fn covering_grid_spans_bounds() {
        let bounds = Aabb::new(Vector3::zeros(), Vector3::new(31.0, 31.0, 31.0));
        let spec = GridSpec::covering(&bounds, [64, 64, 64]);
        let got = spec.bounds();
        assert!((got.hi - bounds.hi).amax() < 1e-12);
        assert_eq!(got.lo, bounds.lo);
    }

    #[test]
    fn volume_length_is_enforced() {
        let spec = GridSpec::index_coords([3, 3, 3]);
        assert!(VolumeField::new(spec, VolumeKind::PointCentered, vec![0.0; 27]).is_ok());
        assert!(VolumeField::new(spec, VolumeKind::CellCentered, vec![0.0; 8]).is_ok());
        let err = VolumeField::new(spec, VolumeKind::CellCentered, vec![0.0; 27]).unwrap_err();
        assert!(matches!(err, Error::SizeMismatch(_)));
    }

    #[test]
    fn query_config_rejects_out_of_range_alpha() {
        let spec = GridSpec::index_coords([5, 5, 5]);
        let mut cfg = QueryConfig::for_grid(&spec, 0.0);
        assert!(cfg.validate(&spec).is_ok());
        cfg.alpha = 0.9;
        assert!(matches!(cfg.validate(&spec), Err(Error::Config(_))));
        cfg.alpha = 0.0;
        assert!(matches!(cfg.validate(&spec), Err(Error::Config(_))));
    }

    #[test]
    fn default_depth_covers_grid() {
        let spec = GridSpec::index_coords([64, 64, 64]);
        assert_eq!(QueryConfig::default_max_depth(&spec), 6);
        let spec = GridSpec::index_coords([116, 115, 134]);
        assert_eq!(QueryConfig::default_max_depth(&spec), 8);
        let spec = GridSpec::index_coords([2, 2, 2]);
        assert_eq!(QueryConfig::default_max_depth(&spec), 1);
    }

    #[test]
    fn max_depth_must_cover_target() {
        let spec = GridSpec::index_coords([64, 64, 64]);
        let mut cfg = QueryConfig::for_grid(&spec, 0.0);
        cfg.max_depth = 5;
        assert!(matches!(cfg.validate(&spec), Err(Error::Config(_))));
        cfg.max_depth = 7;
        assert!(cfg.validate(&spec).is_ok());
    }

    #[test]
    fn aabb_corners_and_faces() {
        let b = Aabb::new(Vector3::zeros(), Vector3::new(2.0, 4.0, 6.0));
        assert_eq!(b.corner(0), Vector3::zeros());
        assert_eq!(b.corner(7), Vector3::new(2.0, 4.0, 6.0));
        assert_eq!(b.corner(1), Vector3::new(2.0, 0.0, 0.0));
        assert_eq!(b.corner(6), Vector3::new(0.0, 4.0, 6.0));
        assert_eq!(b.face_center(0), Vector3::new(0.0, 2.0, 3.0));
        assert_eq!(b.face_center(5), Vector3::new(1.0, 2.0, 6.0));
        assert!(b.contains(&b.center()));
        assert!(!b.contains(&Vector3::new(-0.1, 0.0, 0.0)));
        assert!(b.enlarged(f64::INFINITY).contains(&Vector3::new(1e300, 0.0, 0.0)));
    }
}
