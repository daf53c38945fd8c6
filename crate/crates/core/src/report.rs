//! Machine-readable run reports.
//!
//! Reports are written as canonical JSON: object keys sorted, floats in
//! shortest round-trip form, absent sections omitted. Parsing a report and
//! writing it again reproduces the same bytes.

use std::collections::BTreeMap;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::certify::HypothesisCertificate;
use crate::config::{ProblemConfig, SCHEMA_VERSION};
use crate::error::Result;
use crate::probe::UniquenessReport;
use crate::solve::SolveReport;
use crate::study::StudyReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Certify,
    Solve,
    Probe,
    Study,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema: u32,
    pub command: Command,
    pub config_digest: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<HypothesisCertificate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solve: Option<SolveReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probe: Option<UniquenessReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub study: Option<StudyReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings_ms: Option<BTreeMap<String, u64>>,
}

impl Report {
    pub fn new(command: Command, config: &ProblemConfig) -> Result<Self> {
        Ok(Report {
            schema: SCHEMA_VERSION,
            command,
            config_digest: config_digest(config)?,
            certificate: None,
            solve: None,
            probe: None,
            study: None,
            timings_ms: None,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        to_canonical_json(self)
    }
}

/// Pretty-printed JSON with sorted keys and a trailing newline.
pub fn to_canonical_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    // `Value` keeps object keys in a sorted map.
    let value = serde_json::to_value(value)?;
    let mut text = serde_json::to_string_pretty(&value)?;
    text.push('\n');
    Ok(text)
}

/// Hex SHA-256 of the canonical compact JSON of the effective configuration.
pub fn config_digest(config: &ProblemConfig) -> Result<String> {
    let value = serde_json::to_value(config)?;
    let bytes = serde_json::to_vec(&value)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}
