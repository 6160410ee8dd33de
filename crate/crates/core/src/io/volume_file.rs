//! Volume file pairs: `<name>.json` sidecar describing the grid plus
//! `<name>.raw` holding the samples little-endian, x varying fastest. The
//! sidecar's element count must match the raw payload exactly; a short or
//! long raw file is a size mismatch, not a silent truncation.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{GridSpec, VolumeField, VolumeKind};

const FORMAT_VERSION: u32 = 1;

/// Raw sample encoding. `F32Le` narrows each f64 once on write; `U8` is for
/// small integer fields such as per-cell refinement levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RawDtype {
    F32Le,
    U8,
}

impl RawDtype {
    fn name(self) -> &'static str {
        match self {
            RawDtype::F32Le => "f32le",
            RawDtype::U8 => "u8",
        }
    }

    fn bytes_per_value(self) -> usize {
        match self {
            RawDtype::F32Le => 4,
            RawDtype::U8 => 1,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SidecarJson {
    format_version: u32,
    dims: [usize; 3],
    origin: [f64; 3],
    spacing: [f64; 3],
    kind: String,
    dtype: String,
}

/// `base` names the pair without extension; `lcp` means `lcp.json` + `lcp.raw`.
fn pair_paths(base: &Path) -> (PathBuf, PathBuf) {
    let mut json = base.as_os_str().to_owned();
    json.push(".json");
    let mut raw = base.as_os_str().to_owned();
    raw.push(".raw");
    (PathBuf::from(json), PathBuf::from(raw))
}

fn kind_name(kind: VolumeKind) -> &'static str {
    match kind {
        VolumeKind::PointCentered => "point",
        VolumeKind::CellCentered => "cell",
    }
}

/// Writes the sidecar and raw payload for `field`. With `RawDtype::U8` every
/// value must already be an integer in 0..=255.
pub fn write_volume(field: &VolumeField, base: &Path, dtype: RawDtype) -> Result<()> {
    let (json_path, raw_path) = pair_paths(base);
    let sidecar = SidecarJson {
        format_version: FORMAT_VERSION,
        dims: field.spec.dims,
        origin: field.spec.origin,
        spacing: field.spec.spacing,
        kind: kind_name(field.kind).to_string(),
        dtype: dtype.name().to_string(),
    };
    let mut bytes = Vec::with_capacity(field.values.len() * dtype.bytes_per_value());
    match dtype {
        RawDtype::F32Le => {
            for &v in &field.values {
                bytes.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        RawDtype::U8 => {
            for &v in &field.values {
                if v.fract() != 0.0 || !(0.0..=255.0).contains(&v) {
                    return Err(Error::Config(format!(
                        "value {v} cannot be stored as u8; expected an integer in 0..=255"
                    )));
                }
                bytes.push(v as u8);
            }
        }
    }
    fs::write(&json_path, serde_json::to_string_pretty(&sidecar)?)?;
    fs::write(&raw_path, bytes)?;
    Ok(())
}

/// Reads a volume pair written by `write_volume`, or by any producer
/// following the same layout.
pub fn read_volume(base: &Path) -> Result<VolumeField> {
    let (json_path, raw_path) = pair_paths(base);
    let sidecar: SidecarJson = serde_json::from_str(&fs::read_to_string(&json_path)?)?;
    if sidecar.format_version != FORMAT_VERSION {
        return Err(Error::Parse(format!(
            "unsupported format_version {}; this reader understands version {FORMAT_VERSION}",
            sidecar.format_version
        )));
    }
    let kind = match sidecar.kind.as_str() {
        "point" => VolumeKind::PointCentered,
        "cell" => VolumeKind::CellCentered,
        other => {
            return Err(Error::Parse(format!(
                "unknown volume kind \"{other}\"; expected \"point\" or \"cell\""
            )))
        }
    };
    let dtype = match sidecar.dtype.as_str() {
        "f32le" => RawDtype::F32Le,
        "u8" => RawDtype::U8,
        other => {
            return Err(Error::Parse(format!(
                "unknown dtype \"{other}\"; expected \"f32le\" or \"u8\""
            )))
        }
    };
    let spec = GridSpec::new(sidecar.dims, sidecar.origin, sidecar.spacing);
    spec.validate()?;
    let expected_values = VolumeField::expected_len(&spec, kind);
    let bytes = fs::read(&raw_path)?;
    let expected_bytes = expected_values * dtype.bytes_per_value();
    if bytes.len() != expected_bytes {
        return Err(Error::SizeMismatch(format!(
            "{} holds {} bytes but the sidecar implies {} ({} values of {})",
            raw_path.display(),
            bytes.len(),
            expected_bytes,
            expected_values,
            dtype.name()
        )));
    }
    let values = match dtype {
        RawDtype::F32Le => bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect(),
        RawDtype::U8 => bytes.iter().map(|&b| b as f64).collect(),
    };
    VolumeField::new(spec, kind, values)
}
