//! Instrumented-driver log format: register schema, snapshot blocks and run
//! metadata sidecars.
//!
//! A log is a sequence of blocks of the form
//!
//! ```text
//! function: ohci_irq
//! HcControl: 0x83
//! ...
//! Done.
//! ```
//!
//! Each line may carry a `[seconds.fraction]` timestamp prefix, which is
//! discarded.

mod metadata;
mod parse;
mod schema;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use metadata::{load_metadata, Condition, FieldType, LoadedMetadata, RunMetadata};
pub use parse::{parse_log, ParseMode};
pub use schema::{RegisterSchema, OHCI_ADDRESS_REGISTERS, OHCI_REGISTERS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LogError {
    #[error("line {line}: malformed line: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("line {line}: snapshot block for `{function}` is not terminated by `Done.`")]
    TruncatedSnapshot { line: usize, function: String },
    #[error("line {line}: value {literal} of {register} does not fit in 32 bits")]
    ValueOverflow {
        line: usize,
        register: String,
        literal: String,
    },
    #[error("line {line}: block is missing registers {missing:?}")]
    MissingRegisters { line: usize, missing: Vec<String> },
    #[error("line {line}: first snapshot is missing registers {missing:?}")]
    IncompleteFirstSnapshot { line: usize, missing: Vec<String> },
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("metadata has no condition")]
    MissingCondition,
    #[error("metadata has no run_id")]
    MissingRunId,
    #[error("invalid voltage {0}")]
    InvalidVoltage(String),
    #[error("invalid pulse width {0}")]
    InvalidPulseWidth(String),
    #[error("invalid metadata: {0}")]
    InvalidMetadata(String),
    #[error("duplicate run_id {0}")]
    DuplicateRunId(String),
    #[error("log {run_id} uses a different register schema")]
    SchemaMismatch { run_id: String },
}

/// A non-fatal parse finding, tied to the 1-based line it was raised on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseWarning {
    pub line: usize,
    pub message: String,
}

/// One driver function call and the register values it logged. `values` is
/// indexed by schema position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snapshot {
    pub function_name: String,
    pub values: Vec<u32>,
    pub ordinal: usize,
}

impl Snapshot {
    pub fn value(&self, schema: &RegisterSchema, register: &str) -> Option<u32> {
        schema.index_of(register).map(|i| self.values[i])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawLog {
    pub schema: RegisterSchema,
    pub snapshots: Vec<Snapshot>,
    pub metadata: RunMetadata,
    pub warnings: Vec<ParseWarning>,
}

impl RawLog {
    pub fn with_metadata(mut self, metadata: RunMetadata) -> Self {
        self.metadata = metadata;
        self
    }

    pub fn run_id(&self) -> &str {
        &self.metadata.run_id
    }

    /// Canonical log text: registers in schema order, lowercase hex, no
    /// timestamps.
    pub fn to_log_text(&self) -> String {
        let mut out = String::new();
        for snap in &self.snapshots {
            write_block(&mut out, &self.schema, &snap.function_name, &snap.values);
        }
        out
    }
}

pub(crate) fn write_block(out: &mut String, schema: &RegisterSchema, function: &str, values: &[u32]) {
    use std::fmt::Write;
    let _ = writeln!(out, "function: {function}");
    for (name, v) in schema.names().iter().zip(values) {
        let _ = writeln!(out, "{name}: {v:#x}");
    }
    out.push_str("Done.\n");
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.warnings.is_empty()
    }
}

/// Cross-log consistency checks. Duplicate run ids and schema mismatches are
/// fatal; empty logs are reported as warnings.
pub fn validate_corpus(logs: &[RawLog]) -> Result<ValidationReport, LogError> {
    let mut report = ValidationReport::default();
    let mut seen = BTreeSet::new();
    let first_schema = logs.first().map(|l| &l.schema);
    for log in logs {
        if !seen.insert(log.run_id()) {
            return Err(LogError::DuplicateRunId(log.run_id().to_owned()));
        }
        if Some(&log.schema) != first_schema {
            return Err(LogError::SchemaMismatch {
                run_id: log.run_id().to_owned(),
            });
        }
        if log.snapshots.is_empty() {
            report.warnings.push(format!("{}: empty log", log.run_id()));
        }
    }
    Ok(report)
}
