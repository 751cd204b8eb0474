//! Report envelope for command-line runs.
//!
//! A report is one JSON document: the command that produced it, the crate
//! version, a `results` value holding the command's typed output, and a
//! `meta` section for everything nondeterministic (timing, seeds actually
//! used). Consumers that need determinism compare everything except `meta`;
//! keys serialize in sorted order, so byte-identical results mean identical
//! documents.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Nondeterministic run metadata, excluded from determinism comparisons.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReportMeta {
    /// Wall-clock duration of the command, milliseconds.
    pub duration_ms: Option<u64>,
    /// Seed actually used (echoed so reruns can reproduce).
    pub seed: Option<u64>,
    /// Worker threads the run was allowed.
    pub threads: Option<usize>,
}

/// One command's output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    /// Subcommand name that produced this report.
    pub command: String,
    /// Crate version string.
    pub version: String,
    /// Typed results, serialized by the command.
    pub results: serde_json::Value,
    #[serde(default)]
    pub meta: ReportMeta,
}

impl Report {
    /// Wrap a serializable result under the current crate version.
    pub fn new(command: &str, results: impl Serialize) -> Result<Report> {
        let results = serde_json::to_value(results)
            .map_err(|e| Error::Codec(format!("results serialize failed: {e}")))?;
        Ok(Report {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            results,
            meta: ReportMeta::default(),
        })
    }

    /// Pretty JSON with sorted keys (the serializer's map is ordered).
    pub fn to_json_pretty(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::Codec(format!("report serialize failed: {e}")))
    }

    /// The document with `meta` cleared — the determinism-comparable part.
    pub fn deterministic_part(&self) -> Report {
        Report {
            meta: ReportMeta::default(),
            ..self.clone()
        }
    }
}

/// Parse a report document (the fuzzable entry point).
pub fn parse_report(text: &str) -> Result<Report> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de)
        .map_err(|e| Error::Codec(format!("report parse failed at {}: {}", e.path(), e.inner())))
}
