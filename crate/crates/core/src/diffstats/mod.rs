//! Differential analysis between baseline and ESD-exposed runs.

mod distribution;
mod transitions;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::logmodel::{Condition, RawLog};
use crate::stategraph::{ExecutionTrace, StateId};

pub use distribution::{
    compare_distributions, value_column, value_distribution, ComparisonRow, DistColumn,
    Distribution, DistributionRow,
};
pub use transitions::{
    combined_histogram, correlate_metadata, nonbaseline_transition_fraction,
    occurrence_histogram, Correlation, HistogramRow, MetadataField, ScatterRow,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiffError {
    #[error("the {0} group is empty")]
    EmptyGroup(Condition),
    #[error("no traces to summarize")]
    EmptyTraceGroup,
    #[error("register {0} is not in the schema")]
    UnknownRegister(String),
    #[error("trace {0} has fewer than two states")]
    NoTransitions(String),
    #[error("no ESD run carries metadata field {0}")]
    MissingField(MetadataField),
    #[error("duplicate run_id {0}")]
    DuplicateRunId(String),
}

/// Anything that belongs to a single labeled run.
pub trait Run {
    fn run_id(&self) -> &str;
    fn condition(&self) -> Condition;
}

impl<T: Run + ?Sized> Run for &T {
    fn run_id(&self) -> &str {
        (**self).run_id()
    }
    fn condition(&self) -> Condition {
        (**self).condition()
    }
}

impl Run for ExecutionTrace {
    fn run_id(&self) -> &str {
        &self.run_id
    }
    fn condition(&self) -> Condition {
        self.condition
    }
}

impl Run for RawLog {
    fn run_id(&self) -> &str {
        &self.metadata.run_id
    }
    fn condition(&self) -> Condition {
        self.metadata.condition
    }
}

/// Runs split by condition. Run ids are unique across both groups.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition<T> {
    pub baseline: Vec<T>,
    pub esd: Vec<T>,
}

pub type CorpusPartition = Partition<ExecutionTrace>;

impl<T> Default for Partition<T> {
    fn default() -> Self {
        Partition {
            baseline: Vec::new(),
            esd: Vec::new(),
        }
    }
}

impl<T: Run> Partition<T> {
    pub fn split(runs: impl IntoIterator<Item = T>) -> Result<Self, DiffError> {
        let mut part = Partition::default();
        let mut seen = BTreeSet::new();
        for run in runs {
            if !seen.insert(run.run_id().to_owned()) {
                return Err(DiffError::DuplicateRunId(run.run_id().to_owned()));
            }
            match run.condition() {
                Condition::Baseline => part.baseline.push(run),
                Condition::Esd => part.esd.push(run),
            }
        }
        Ok(part)
    }

    pub fn require_both(&self) -> Result<(), DiffError> {
        if self.baseline.is_empty() {
            return Err(DiffError::EmptyGroup(Condition::Baseline));
        }
        if self.esd.is_empty() {
            return Err(DiffError::EmptyGroup(Condition::Esd));
        }
        Ok(())
    }

    pub fn group(&self, condition: Condition) -> &[T] {
        match condition {
            Condition::Baseline => &self.baseline,
            Condition::Esd => &self.esd,
        }
    }
}

/// Kinds of ESD-only transitions, by whether each endpoint was reached in
/// any baseline run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeCategory {
    /// baseline state -> non-baseline state
    ToNonBaseline,
    /// non-baseline -> non-baseline
    BetweenNonBaseline,
    /// both endpoints are baseline states but the transition never occurs in
    /// a baseline run
    NonBaselineEdgeBetweenBaselineStates,
    /// non-baseline -> baseline
    FromNonBaselineToBaseline,
}

impl EdgeCategory {
    pub fn classify(from_in_baseline: bool, to_in_baseline: bool) -> Self {
        match (from_in_baseline, to_in_baseline) {
            (true, false) => EdgeCategory::ToNonBaseline,
            (false, false) => EdgeCategory::BetweenNonBaseline,
            (true, true) => EdgeCategory::NonBaselineEdgeBetweenBaselineStates,
            (false, true) => EdgeCategory::FromNonBaselineToBaseline,
        }
    }

    /// 1-based category number.
    pub fn number(self) -> u8 {
        match self {
            EdgeCategory::ToNonBaseline => 1,
            EdgeCategory::BetweenNonBaseline => 2,
            EdgeCategory::NonBaselineEdgeBetweenBaselineStates => 3,
            EdgeCategory::FromNonBaselineToBaseline => 4,
        }
    }
}

impl fmt::Display for EdgeCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EdgeCategory::ToNonBaseline => "to_non_baseline",
            EdgeCategory::BetweenNonBaseline => "between_non_baseline",
            EdgeCategory::NonBaselineEdgeBetweenBaselineStates => {
                "non_baseline_edge_between_baseline_states"
            }
            EdgeCategory::FromNonBaselineToBaseline => "from_non_baseline_to_baseline",
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DiffReport {
    pub esd_only_states: BTreeSet<StateId>,
    pub baseline_only_states: BTreeSet<StateId>,
    pub shared_states: BTreeSet<StateId>,
    pub esd_only_edges: BTreeMap<(StateId, StateId), EdgeCategory>,
}

impl DiffReport {
    pub fn category_counts(&self) -> [usize; 4] {
        let mut counts = [0; 4];
        for c in self.esd_only_edges.values() {
            counts[usize::from(c.number() - 1)] += 1;
        }
        counts
    }
}

pub fn reached_states<'a>(group: impl IntoIterator<Item = &'a ExecutionTrace>) -> BTreeSet<StateId> {
    group
        .into_iter()
        .flat_map(|t| t.states.iter().copied())
        .collect()
}

pub fn reached_edges<'a>(
    group: impl IntoIterator<Item = &'a ExecutionTrace>,
) -> BTreeSet<(StateId, StateId)> {
    group
        .into_iter()
        .flat_map(|t| t.states.windows(2).map(|w| (w[0], w[1])))
        .collect()
}

pub fn diff_states(partition: &CorpusPartition) -> Result<DiffReport, DiffError> {
    partition.require_both()?;
    let base_states = reached_states(&partition.baseline);
    let esd_states = reached_states(&partition.esd);
    let base_edges = reached_edges(&partition.baseline);

    let esd_only_edges = reached_edges(&partition.esd)
        .into_iter()
        .filter(|e| !base_edges.contains(e))
        .map(|(from, to)| {
            let cat = EdgeCategory::classify(base_states.contains(&from), base_states.contains(&to));
            ((from, to), cat)
        })
        .collect();

    Ok(DiffReport {
        esd_only_states: esd_states.difference(&base_states).copied().collect(),
        baseline_only_states: base_states.difference(&esd_states).copied().collect(),
        shared_states: esd_states.intersection(&base_states).copied().collect(),
        esd_only_edges,
    })
}
