//! Instance loading and parsing of vector-or-scalar flags.

use std::path::Path;

use lbp_core::model::{catalog, validate_with, LbpInstance, ValidateOptions};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Clone, Debug, Serialize)]
pub struct InstanceInfo {
    pub name: String,
    /// File path, or `@name` for a catalog instance.
    pub source: String,
    /// SHA-256 of the file bytes (of the canonical JSON for catalog instances).
    pub sha256: String,
}

/// Reads `arg` as a JSON instance file, or as a catalog instance when it
/// starts with `@` (`@counterexample`, `@counterexample-eps-0.01`, ...).
pub fn load_instance(
    arg: &str,
    allow_coupled: bool,
) -> Result<(LbpInstance, InstanceInfo), CliError> {
    let (inst, bytes) = if let Some(name) = arg.strip_prefix('@') {
        let inst = catalog::by_name(name)
            .ok_or_else(|| CliError::usage(format!("unknown catalog instance `{name}`")))?;
        let text = inst.to_json_string().map_err(CliError::from)?;
        (inst, text.into_bytes())
    } else {
        let bytes =
            std::fs::read(Path::new(arg)).map_err(|e| CliError::bad_file(format!("{arg}: {e}")))?;
        let text =
            std::str::from_utf8(&bytes).map_err(|e| CliError::bad_file(format!("{arg}: {e}")))?;
        let inst = LbpInstance::from_json_str(text)
            .map_err(|e| CliError::bad_file(format!("{arg}: {e}")))?;
        (inst, bytes)
    };
    validate_with(&inst, ValidateOptions { allow_coupled })
        .into_result()
        .map_err(|e| CliError::bad_file(format!("{arg}: {e}")))?;
    let info = InstanceInfo {
        name: inst.name.clone(),
        source: arg.to_string(),
        sha256: hex::encode(Sha256::digest(&bytes)),
    };
    Ok((inst, info))
}

/// Parses `50` or `50,200`; a single value is broadcast to `len` entries.
pub fn parse_vector(flag: &str, text: &str, len: usize) -> Result<Vec<f64>, CliError> {
    let values = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::usage(format!("--{flag} `{text}`: {e}")))?;
    match values.len() {
        1 => Ok(vec![values[0]; len]),
        l if l == len => Ok(values),
        l => Err(CliError::usage(format!(
            "--{flag} has {l} entries, instance needs 1 or {len}"
        ))),
    }
}

/// Parses a comma-separated vector of exactly `len` entries.
pub fn parse_point(flag: &str, text: &str, len: usize) -> Result<Vec<f64>, CliError> {
    let values = parse_vector(flag, text, len)?;
    if text.split(',').count() != len && len != 1 {
        return Err(CliError::usage(format!("--{flag} needs {len} entries")));
    }
    Ok(values)
}
