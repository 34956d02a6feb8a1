//! Per-state weights and the log score built from them.
//!
//! With `|B|` and `|E|` the number of state occurrences in all baseline and
//! ESD training logs, and `b_i`, `e_i` the occurrences of state `i`, each
//! variant picks a baseline weight `w_b < 0` and an ESD weight `w_e > 0` and
//! normalizes
//!
//! ```text
//! w_i = (w_b * b_i + w_e * e_i) / (|w_b * b_i| + |w_e * e_i|)
//! ```
//!
//! | variant        | w_b          | w_e          | after normalizing |
//! |----------------|--------------|--------------|-------------------|
//! | `plain`        | `-|E|`       | `|B|`        |                   |
//! | `add_delta`    | `-|E| - δ`   | `|B| + δ`    |                   |
//! | `scale_before` | `-|E| * δ`   | `|B| * δ`    |                   |
//! | `scale_after`  | `-|E|`       | `|B|`        | `* δ`             |
//!
//! A log `L` scores `C_L = Σ w_i * s_i / |L|` over its states, where `s_i` is
//! the number of times state `i` occurs and `|L|` the log length. Positive
//! scores classify as ESD-exposed.

mod classify;
mod evaluate;

use std::borrow::Borrow;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diffstats::Partition;
use crate::logmodel::Condition;
use crate::stategraph::{ExecutionTrace, StateId};

pub use classify::{classify, ClassificationResult, Label};
pub use evaluate::{
    evaluate, middle_weight_abs, straightline_deviation, sweep_delta, unique_weights, Metrics,
    Protocol, SweepRow,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WeightError {
    #[error("the {0} group is empty")]
    EmptyGroup(Condition),
    #[error("delta {delta} is not valid for the {variant} variant")]
    InvalidDelta { variant: Variant, delta: f64 },
    #[error("cannot classify an empty trace")]
    EmptyTrace,
    #[error("not enough logs: {0}")]
    InsufficientLogs(String),
    #[error("invalid protocol: {0}")]
    InvalidProtocol(String),
    #[error("invalid weight table: {0}")]
    InvalidTable(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Plain,
    AddDelta,
    ScaleBefore,
    ScaleAfter,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Plain,
        Variant::AddDelta,
        Variant::ScaleBefore,
        Variant::ScaleAfter,
    ];

    /// `add_delta` accepts δ ≥ 0, the scaling variants δ > 0; `plain`
    /// ignores δ.
    pub fn check_delta(self, delta: f64) -> Result<(), WeightError> {
        let ok = match self {
            Variant::Plain => true,
            Variant::AddDelta => delta.is_finite() && delta >= 0.0,
            Variant::ScaleBefore | Variant::ScaleAfter => delta.is_finite() && delta > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(WeightError::InvalidDelta {
                variant: self,
                delta,
            })
        }
    }

    /// Multiplier applied after normalization.
    fn scale(self, delta: f64) -> f64 {
        match self {
            Variant::ScaleAfter => delta,
            _ => 1.0,
        }
    }

    /// `(w_b, w_e)` before normalization.
    fn group_weights(self, total_b: u64, total_e: u64, delta: f64) -> (f64, f64) {
        let (big_b, big_e) = (total_b as f64, total_e as f64);
        match self {
            Variant::Plain | Variant::ScaleAfter => (-big_e, big_b),
            Variant::AddDelta => (-big_e - delta, big_b + delta),
            Variant::ScaleBefore => (-big_e * delta, big_b * delta),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Plain => "plain",
            Variant::AddDelta => "add-delta",
            Variant::ScaleBefore => "scale-before",
            Variant::ScaleAfter => "scale-after",
        })
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('_', "-").as_str() {
            "plain" => Ok(Variant::Plain),
            "add-delta" => Ok(Variant::AddDelta),
            "scale-before" => Ok(Variant::ScaleBefore),
            "scale-after" => Ok(Variant::ScaleAfter),
            _ => Err(format!("unknown variant {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateCounts {
    pub b: u64,
    pub e: u64,
}

/// Occurrence tallies, with multiplicity, over all training logs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TrainingCounts {
    pub states: BTreeMap<StateId, StateCounts>,
    pub total_b: u64,
    pub total_e: u64,
}

pub(crate) fn tally(states: &[StateId]) -> BTreeMap<StateId, u64> {
    let mut out = BTreeMap::new();
    for id in states {
        *out.entry(*id).or_insert(0) += 1;
    }
    out
}

impl TrainingCounts {
    pub fn add(&mut self, trace: &ExecutionTrace) {
        let esd = trace.condition == Condition::Esd;
        for (id, n) in tally(&trace.states) {
            let c = self.states.entry(id).or_default();
            if esd {
                c.e += n;
            } else {
                c.b += n;
            }
        }
        let len = trace.states.len() as u64;
        if esd {
            self.total_e += len;
        } else {
            self.total_b += len;
        }
    }

    /// Undo a previous [`add`](Self::add) of the same trace.
    pub fn remove(&mut self, trace: &ExecutionTrace) {
        let esd = trace.condition == Condition::Esd;
        for (id, n) in tally(&trace.states) {
            let c = self.states.get_mut(&id).expect("trace was added before");
            if esd {
                c.e -= n;
            } else {
                c.b -= n;
            }
            if c.b == 0 && c.e == 0 {
                self.states.remove(&id);
            }
        }
        let len = trace.states.len() as u64;
        if esd {
            self.total_e -= len;
        } else {
            self.total_b -= len;
        }
    }
}

pub fn build_counts<T: Borrow<ExecutionTrace>>(
    partition: &Partition<T>,
) -> Result<TrainingCounts, WeightError> {
    if partition.baseline.is_empty() {
        return Err(WeightError::EmptyGroup(Condition::Baseline));
    }
    if partition.esd.is_empty() {
        return Err(WeightError::EmptyGroup(Condition::Esd));
    }
    let mut counts = TrainingCounts::default();
    for t in partition.baseline.iter().chain(&partition.esd) {
        counts.add(t.borrow());
    }
    Ok(counts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightRow {
    pub b: u64,
    pub e: u64,
    /// Weight before any post-normalization scale, in `[-1, 1]`.
    pub normalized: f64,
}

/// Trained weights. The effective weight of a state is
/// `scale * normalized`; `scale` is δ for `scale_after` and 1 otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightTable {
    pub variant: Variant,
    pub delta: f64,
    pub total_b: u64,
    pub total_e: u64,
    pub scale: f64,
    pub rows: BTreeMap<StateId, WeightRow>,
}

/// Normalized weight of one state. Where both counts are positive the
/// result is kept strictly inside (-1, 1) even if rounding would reach an
/// endpoint.
fn normalized_weight(w_b: f64, w_e: f64, c: StateCounts) -> f64 {
    let base = w_b * c.b as f64;
    let err = w_e * c.e as f64;
    let w = (base + err) / (base.abs() + err.abs());
    if c.b > 0 && c.e > 0 && w.abs() >= 1.0 {
        w.signum() * (1.0 - f64::EPSILON / 2.0)
    } else {
        w
    }
}

pub fn build_weights(
    counts: &TrainingCounts,
    variant: Variant,
    delta: f64,
) -> Result<WeightTable, WeightError> {
    variant.check_delta(delta)?;
    if counts.total_b == 0 {
        return Err(WeightError::EmptyGroup(Condition::Baseline));
    }
    if counts.total_e == 0 {
        return Err(WeightError::EmptyGroup(Condition::Esd));
    }
    let (w_b, w_e) = variant.group_weights(counts.total_b, counts.total_e, delta);
    let rows = counts
        .states
        .iter()
        .map(|(id, &c)| {
            (
                *id,
                WeightRow {
                    b: c.b,
                    e: c.e,
                    normalized: normalized_weight(w_b, w_e, c),
                },
            )
        })
        .collect();
    Ok(WeightTable {
        variant,
        delta,
        total_b: counts.total_b,
        total_e: counts.total_e,
        scale: variant.scale(delta),
        rows,
    })
}

#[derive(Serialize, Deserialize)]
struct TableDoc {
    variant: Variant,
    delta: f64,
    total_b: u64,
    total_e: u64,
    rows: Vec<RowDoc>,
}

#[derive(Serialize, Deserialize)]
struct RowDoc {
    state_id: StateId,
    b: u64,
    e: u64,
    w: f64,
}

impl WeightTable {
    pub fn weight(&self, id: StateId) -> Option<f64> {
        self.rows.get(&id).map(|r| self.scale * r.normalized)
    }

    /// Effective weights in state-id order.
    pub fn weights(&self) -> Vec<f64> {
        self.rows.values().map(|r| self.scale * r.normalized).collect()
    }

    pub fn counts(&self) -> TrainingCounts {
        TrainingCounts {
            states: self
                .rows
                .iter()
                .map(|(id, r)| (*id, StateCounts { b: r.b, e: r.e }))
                .collect(),
            total_b: self.total_b,
            total_e: self.total_e,
        }
    }

    pub fn to_json(&self) -> String {
        let doc = TableDoc {
            variant: self.variant,
            delta: self.delta,
            total_b: self.total_b,
            total_e: self.total_e,
            rows: self
                .rows
                .iter()
                .map(|(id, r)| RowDoc {
                    state_id: *id,
                    b: r.b,
                    e: r.e,
                    w: self.scale * r.normalized,
                })
                .collect(),
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("weight table serializes");
        s.push('\n');
        s
    }

    /// Load a weight document. Weights are recomputed from the stored counts
    /// and must agree with the stored `w` column.
    pub fn from_json(text: &str) -> Result<Self, WeightError> {
        let doc: TableDoc =
            serde_json::from_str(text).map_err(|e| WeightError::InvalidTable(e.to_string()))?;
        let mut counts = TrainingCounts {
            total_b: doc.total_b,
            total_e: doc.total_e,
            ..Default::default()
        };
        for row in &doc.rows {
            if row.b == 0 && row.e == 0 {
                return Err(WeightError::InvalidTable(format!(
                    "state {} has no occurrences",
                    row.state_id
                )));
            }
            counts.states.insert(row.state_id, StateCounts { b: row.b, e: row.e });
        }
        let table = build_weights(&counts, doc.variant, doc.delta)?;
        for row in &doc.rows {
            let w = table.weight(row.state_id).expect("row was inserted");
            if (w - row.w).abs() > 1e-12 {
                return Err(WeightError::InvalidTable(format!(
                    "state {}: stored weight {} disagrees with counts ({w})",
                    row.state_id, row.w
                )));
            }
        }
        Ok(table)
    }
}
