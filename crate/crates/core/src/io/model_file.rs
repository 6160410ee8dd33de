//! JSON model files. The on-disk schema mirrors `SparseGpModel` field by
//! field; `inducing_mean` is stored centered, exactly as held in memory, so a
//! write/read cycle reproduces the model without recentering.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{validate_model, Aabb, KernelKind, KernelParams, SparseGpModel};

const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KernelJson {
    kind: String,
    lengthscale: f64,
    variance: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoundsJson {
    lo: [f64; 3],
    hi: [f64; 3],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelJson {
    format_version: u32,
    kernel: KernelJson,
    noise_variance: f64,
    scalar_mean: f64,
    domain_bounds: BoundsJson,
    /// Rows are parsed as plain vectors so ragged input fails with a message
    /// naming the field instead of a positional serde error.
    inducing_positions: Vec<Vec<f64>>,
    inducing_mean: Vec<f64>,
    /// Row-major m x m.
    inducing_cov: Vec<Vec<f64>>,
}

fn model_from_json(file: ModelJson) -> Result<SparseGpModel> {
    if file.format_version != FORMAT_VERSION {
        return Err(Error::Parse(format!(
            "unsupported format_version {}; this reader understands version {FORMAT_VERSION}",
            file.format_version
        )));
    }
    if file.kernel.kind != "rbf" {
        return Err(Error::Parse(format!(
            "unknown kernel kind \"{}\"; expected \"rbf\"",
            file.kernel.kind
        )));
    }
    let m = file.inducing_positions.len();
    let mut positions = Vec::with_capacity(m);
    for (row, entries) in file.inducing_positions.iter().enumerate() {
        if entries.len() != 3 {
            return Err(Error::Parse(format!(
                "inducing_positions row {row} has {} entries; expected 3",
                entries.len()
            )));
        }
        positions.push(Vector3::new(entries[0], entries[1], entries[2]));
    }
    if file.inducing_cov.len() != m || file.inducing_cov.iter().any(|row| row.len() != m) {
        return Err(Error::Parse(format!(
            "inducing_cov not square: expected {m} x {m} to match inducing_positions",
        )));
    }
    let cov = DMatrix::from_fn(m, m, |i, j| file.inducing_cov[i][j]);
    let model = SparseGpModel {
        kernel: KernelParams {
            kind: KernelKind::Rbf,
            lengthscale: file.kernel.lengthscale,
            variance: file.kernel.variance,
        },
        noise_variance: file.noise_variance,
        scalar_mean: file.scalar_mean,
        inducing_positions: positions,
        inducing_mean: DVector::from_vec(file.inducing_mean),
        inducing_cov: cov,
        domain_bounds: Aabb::new(
            Vector3::from(file.domain_bounds.lo),
            Vector3::from(file.domain_bounds.hi),
        ),
    };
    let report = validate_model(&model);
    if !report.is_valid() {
        return Err(Error::Validation(report.violations));
    }
    Ok(model)
}

fn model_to_json(model: &SparseGpModel) -> ModelJson {
    let m = model.num_inducing();
    ModelJson {
        format_version: FORMAT_VERSION,
        kernel: KernelJson {
            kind: "rbf".to_string(),
            lengthscale: model.kernel.lengthscale,
            variance: model.kernel.variance,
        },
        noise_variance: model.noise_variance,
        scalar_mean: model.scalar_mean,
        domain_bounds: BoundsJson {
            lo: model.domain_bounds.lo.into(),
            hi: model.domain_bounds.hi.into(),
        },
        inducing_positions: model
            .inducing_positions
            .iter()
            .map(|p| vec![p.x, p.y, p.z])
            .collect(),
        inducing_mean: model.inducing_mean.iter().copied().collect(),
        inducing_cov: (0..m)
            .map(|i| (0..m).map(|j| model.inducing_cov[(i, j)]).collect())
            .collect(),
    }
}

/// Parses and validates a model file. Malformed JSON, schema mismatches, and
/// unknown keys surface as parse errors; a well-formed file describing an
/// invalid model surfaces the full validation report.
pub fn read_model(path: &Path) -> Result<SparseGpModel> {
    let text = fs::read_to_string(path)?;
    let file: ModelJson = serde_json::from_str(&text)?;
    model_from_json(file)
}

/// Writes a model as pretty-printed JSON. Numbers use shortest round-trip
/// formatting, so reading the file back reproduces every f64 bit for bit.
pub fn write_model(model: &SparseGpModel, path: &Path) -> Result<()> {
    let file = model_to_json(model);
    let text = serde_json::to_string_pretty(&file)?;
    fs::write(path, text)?;
    Ok(())
}
