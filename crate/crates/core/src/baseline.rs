//! Dense-reconstruction baseline (every cell evaluated by Monte Carlo) and
//! field-comparison metrics. The dense path shares the adaptive path's cell
//! evaluator, so a cell present in both reconstructions receives identical
//! corner solves and identical MC draws.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference;
use crate::model::{GridSpec, QueryConfig, SparseGpModel, VolumeField, VolumeKind};
use crate::query::{self, QueryStats};

/// Wall-time breakdowns of the two reconstruction methods.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TimeBreakdown {
    pub dense: QueryStats,
    pub adaptive: QueryStats,
}

/// Field-accuracy metrics, optionally extended with method timings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub rmse: f64,
    pub max_abs_error: f64,
    pub nonzero_cells_truth: usize,
    pub nonzero_cells_test: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time_breakdown: Option<TimeBreakdown>,
    /// 100 * adaptive total / dense total; below 100 means adaptive is faster.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub speedup_percent: Option<f64>,
}

impl ComparisonReport {
    pub fn with_timing(mut self, dense: QueryStats, adaptive: QueryStats) -> Self {
        self.speedup_percent =
            Some(100.0 * adaptive.total_seconds() / dense.total_seconds());
        self.time_breakdown = Some(TimeBreakdown { dense, adaptive });
        self
    }
}

/// Dense baseline: Monte Carlo LCP for every cell of the target grid, with
/// the same per-cell seed derivation as the adaptive path.
pub fn lcp_field_dense(
    model: &SparseGpModel,
    target: &GridSpec,
    cfg: &QueryConfig,
) -> Result<(VolumeField, QueryStats)> {
    let t_total = Instant::now();
    target.validate()?;
    cfg.validate(target)?;
    let mut stats = QueryStats::default();
    let t0 = Instant::now();
    let precomp = inference::precompute(model)?;
    stats.time_gp += t0.elapsed().as_secs_f64();
    let cells: Vec<usize> = (0..target.cell_count()).collect();
    let mut lcp = VolumeField::zeros(*target, VolumeKind::CellCentered);
    query::evaluate_cells(model, &precomp, target, cfg, &cells, &mut lcp.values, &mut stats)?;
    stats.leaf_cells = cells.len() as u64;
    let total = t_total.elapsed().as_secs_f64();
    stats.time_overhead = (total - stats.time_gp - stats.time_mc).max(0.0);
    Ok((lcp, stats))
}

fn check_matching(truth: &VolumeField, test: &VolumeField) -> Result<()> {
    if truth.spec != test.spec {
        return Err(Error::SpecMismatch(
            "volume grids differ (dims, origin, or spacing)".into(),
        ));
    }
    if truth.kind != test.kind {
        return Err(Error::SpecMismatch("volume kinds differ".into()));
    }
    Ok(())
}

/// Accuracy metrics between a ground-truth field and a test field on the
/// same grid. Nonzero counts use exact comparison with zero.
pub fn compare_fields(truth: &VolumeField, test: &VolumeField) -> Result<ComparisonReport> {
    check_matching(truth, test)?;
    let n = truth.values.len();
    let mut sq_sum = 0.0f64;
    let mut max_abs = 0.0f64;
    for (a, b) in truth.values.iter().zip(&test.values) {
        let d = a - b;
        sq_sum += d * d;
        max_abs = max_abs.max(d.abs());
    }
    Ok(ComparisonReport {
        rmse: (sq_sum / n as f64).sqrt(),
        max_abs_error: max_abs,
        nonzero_cells_truth: truth.count_nonzero(),
        nonzero_cells_test: test.count_nonzero(),
        time_breakdown: None,
        speedup_percent: None,
    })
}

/// Element-wise |truth - test| for export and external rendering.
pub fn absolute_error_field(truth: &VolumeField, test: &VolumeField) -> Result<VolumeField> {
    check_matching(truth, test)?;
    let values = truth
        .values
        .iter()
        .zip(&test.values)
        .map(|(a, b)| (a - b).abs())
        .collect();
    VolumeField::new(truth.spec, truth.kind, values)
}
