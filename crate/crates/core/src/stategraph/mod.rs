//! State abstraction, interning and execution graphs.
//!
//! A snapshot becomes a [`StateKey`]: plain registers keep their raw value,
//! address registers are replaced by a token chosen by [`AddressMode`]. Keys
//! are interned by content hash, so per-run traces can be merged into one
//! unified graph without coordinating id assignment.

mod dot;
mod graph;
mod key;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logmodel::{Condition, RawLog, RunMetadata};

pub use dot::{export_dot, Highlight};
pub use graph::{build_graph, reconstruct, unify, Edge, ExecutionGraph, Unified};
pub use key::{AbstractionConfig, AddressMode, KeyEntry, StateId, StateKey, StateTable};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("state id {0} maps to two different keys")]
    IdCollision(StateId),
    #[error("trace {run_id} was abstracted with {found:?}, expected {expected:?}")]
    ModeMismatch {
        run_id: String,
        expected: AbstractionConfig,
        found: AbstractionConfig,
    },
    #[error("duplicate run_id {0}")]
    DuplicateRunId(String),
    #[error("transition {from} -> {to} is not in the graph")]
    EdgeNotInGraph { from: StateId, to: StateId },
    #[error("state {0} is not in the graph")]
    StateNotInGraph(StateId),
    #[error("state {0} is missing from the state table")]
    UnknownState(StateId),
    #[error("invalid trace document: {0}")]
    InvalidTrace(String),
}

/// Map each snapshot of `log` to a state key.
pub fn abstract_trace(log: &RawLog, config: AbstractionConfig) -> Vec<StateKey> {
    let schema = &log.schema;
    let mut prev: Option<&[u32]> = None;
    let mut change_index = vec![0u32; schema.len()];
    let mut keys = Vec::with_capacity(log.snapshots.len());

    for snap in &log.snapshots {
        let mut entries = Vec::with_capacity(schema.len());
        for (i, &value) in snap.values.iter().enumerate() {
            if !schema.is_address(i) {
                entries.push(KeyEntry::Value(value));
                continue;
            }
            let changed = prev.is_some_and(|p| p[i] != value);
            if changed {
                change_index[i] += 1;
            }
            match config.mode {
                AddressMode::Ignore => {}
                AddressMode::Delta => entries.push(if changed {
                    KeyEntry::Changed
                } else {
                    KeyEntry::Same
                }),
                AddressMode::Counter => entries.push(KeyEntry::Index(change_index[i])),
                AddressMode::Unique => entries.push(match change_index[i] {
                    0 => KeyEntry::Index(0),
                    n => KeyEntry::Unique {
                        run_id: log.metadata.run_id.clone(),
                        register: schema.name(i).to_owned(),
                        change_index: n,
                    },
                }),
            }
        }
        keys.push(StateKey {
            entries,
            function: config.include_function.then(|| snap.function_name.clone()),
        });
        prev = Some(&snap.values);
    }
    keys
}

/// One run as a sequence of interned states, carrying the subset of the
/// state table it references.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub run_id: String,
    pub condition: Condition,
    pub metadata: RunMetadata,
    pub config: AbstractionConfig,
    pub table: StateTable,
    pub states: Vec<StateId>,
    pub functions: Vec<String>,
}

impl ExecutionTrace {
    pub fn from_log(log: &RawLog, config: AbstractionConfig) -> Result<Self, GraphError> {
        let keys = abstract_trace(log, config);
        let functions = log
            .snapshots
            .iter()
            .map(|s| s.function_name.clone())
            .collect();
        Self::from_keys(log.metadata.clone(), config, keys, functions)
    }

    pub fn from_keys(
        metadata: RunMetadata,
        config: AbstractionConfig,
        keys: Vec<StateKey>,
        functions: Vec<String>,
    ) -> Result<Self, GraphError> {
        let mut table = StateTable::new();
        let states = keys
            .into_iter()
            .map(|k| table.intern(k))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ExecutionTrace {
            run_id: metadata.run_id.clone(),
            condition: metadata.condition,
            metadata,
            config,
            table,
            states,
            functions,
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn keys(&self) -> Result<Vec<StateKey>, GraphError> {
        self.states
            .iter()
            .map(|id| self.table.get(*id).cloned().ok_or(GraphError::UnknownState(*id)))
            .collect()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("trace serializes");
        s.push('\n');
        s
    }

    /// Parse a trace document and check that every state id matches its key.
    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        let trace: ExecutionTrace =
            serde_json::from_str(text).map_err(|e| GraphError::InvalidTrace(e.to_string()))?;
        for (id, key) in trace.table.iter() {
            if key.id() != id {
                return Err(GraphError::InvalidTrace(format!(
                    "state {id} does not match its key"
                )));
            }
        }
        if let Some(id) = trace.states.iter().find(|id| trace.table.get(**id).is_none()) {
            return Err(GraphError::UnknownState(*id));
        }
        if trace.functions.len() != trace.states.len() {
            return Err(GraphError::InvalidTrace(
                "functions and states differ in length".into(),
            ));
        }
        Ok(trace)
    }
}

/// Abstract a batch of logs, one trace per log, in input order.
pub fn traces_from_logs(
    logs: &[RawLog],
    config: AbstractionConfig,
) -> Result<Vec<ExecutionTrace>, GraphError> {
    crate::par::try_map(logs, |log| ExecutionTrace::from_log(log, config))
}
