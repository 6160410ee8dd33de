//! Resolved-config echo and provenance sidecars. Every output file gets a
//! `<path>.provenance.json` recording the flags that produced it, the RNG
//! seed where one applies, the SHA-256 of the model file involved, and the
//! tool version, so any artifact can be traced back to its invocation.

use std::fs;
use std::path::{Path, PathBuf};

use gplcp::Result;
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Prints the resolved configuration (defaults applied) as one JSON object
/// on stderr.
pub fn echo_config<T: Serialize>(subcommand: &str, config: &T) {
    let line = serde_json::json!({
        "subcommand": subcommand,
        "config": config,
    });
    eprintln!("{line}");
}

pub fn sha256_hex(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    let digest = Sha256::digest(&bytes);
    let mut hex = String::with_capacity(64);
    for b in digest {
        hex.push_str(&format!("{b:02x}"));
    }
    Ok(hex)
}

pub struct Provenance<'a> {
    pub subcommand: &'a str,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub model_sha256: Option<String>,
}

/// Writes `<target>.provenance.json`. For volume pairs, `target` is the
/// extensionless base, keeping the record beside both halves.
pub fn write_provenance(target: &Path, record: &Provenance) -> Result<()> {
    let mut name = target.as_os_str().to_owned();
    name.push(".provenance.json");
    let payload = serde_json::json!({
        "tool": "gplcp",
        "tool_version": env!("CARGO_PKG_VERSION"),
        "subcommand": record.subcommand,
        "flags": record.config,
        "seed": record.seed,
        "model_sha256": record.model_sha256,
    });
    fs::write(
        PathBuf::from(name),
        serde_json::to_string_pretty(&payload).map_err(gplcp::Error::from)?,
    )?;
    Ok(())
}
