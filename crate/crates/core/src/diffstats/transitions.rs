use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use super::{reached_states, CorpusPartition, DiffError};
use crate::logmodel::RunMetadata;
use crate::stategraph::{ExecutionTrace, StateId};

/// Mean occurrences per log of every state reached in `group`, dividing by
/// the group size (logs where the state is absent count as zero). Sorted by
/// descending mean, ties by id.
pub fn occurrence_histogram(group: &[ExecutionTrace]) -> Result<Vec<(StateId, f64)>, DiffError> {
    if group.is_empty() {
        return Err(DiffError::EmptyTraceGroup);
    }
    let mut totals: BTreeMap<StateId, u64> = BTreeMap::new();
    for trace in group {
        for id in &trace.states {
            *totals.entry(*id).or_insert(0) += 1;
        }
    }
    let n = group.len() as f64;
    let mut rows: Vec<(StateId, f64)> = totals
        .into_iter()
        .map(|(id, total)| (id, total as f64 / n))
        .collect();
    rows.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramRow {
    pub state: StateId,
    pub mean_baseline: f64,
    pub mean_esd: f64,
}

/// Both groups' histograms over the union of reached states, by descending
/// baseline mean, then descending ESD mean, then id. `top` keeps only the
/// first rows.
pub fn combined_histogram(
    partition: &CorpusPartition,
    top: Option<usize>,
) -> Result<Vec<HistogramRow>, DiffError> {
    partition.require_both()?;
    let base: BTreeMap<StateId, f64> = occurrence_histogram(&partition.baseline)?.into_iter().collect();
    let esd: BTreeMap<StateId, f64> = occurrence_histogram(&partition.esd)?.into_iter().collect();
    let ids: BTreeSet<StateId> = base.keys().chain(esd.keys()).copied().collect();
    let mut rows: Vec<HistogramRow> = ids
        .into_iter()
        .map(|state| HistogramRow {
            state,
            mean_baseline: base.get(&state).copied().unwrap_or(0.0),
            mean_esd: esd.get(&state).copied().unwrap_or(0.0),
        })
        .collect();
    rows.sort_by(|a, b| {
        b.mean_baseline
            .total_cmp(&a.mean_baseline)
            .then(b.mean_esd.total_cmp(&a.mean_esd))
            .then(a.state.cmp(&b.state))
    });
    if let Some(n) = top {
        rows.truncate(n);
    }
    Ok(rows)
}

/// Percentage of transitions in `trace` with at least one endpoint outside
/// `baseline_states`.
pub fn nonbaseline_transition_fraction(
    trace: &ExecutionTrace,
    baseline_states: &BTreeSet<StateId>,
) -> Result<f64, DiffError> {
    if trace.states.len() < 2 {
        return Err(DiffError::NoTransitions(trace.run_id.clone()));
    }
    let total = trace.states.len() - 1;
    let outside = trace
        .states
        .windows(2)
        .filter(|w| !baseline_states.contains(&w[0]) || !baseline_states.contains(&w[1]))
        .count();
    Ok(100.0 * outside as f64 / total as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MetadataField {
    Voltage,
    PulseWidth,
}

impl MetadataField {
    pub fn get(self, meta: &RunMetadata) -> Option<f64> {
        match self {
            MetadataField::Voltage => meta.voltage,
            MetadataField::PulseWidth => meta.pulse_width,
        }
    }
}

impl fmt::Display for MetadataField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MetadataField::Voltage => "voltage",
            MetadataField::PulseWidth => "pulse_width",
        })
    }
}

impl FromStr for MetadataField {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "voltage" => Ok(MetadataField::Voltage),
            "pulse_width" | "pulse-width" => Ok(MetadataField::PulseWidth),
            _ => Err(format!("unknown metadata field {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterRow {
    pub value: f64,
    pub run_id: String,
    pub pct_nonbaseline: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Correlation {
    pub rows: Vec<ScatterRow>,
    pub warnings: Vec<String>,
}

/// Pair each ESD run's metadata `field` with its non-baseline transition
/// percentage. Runs without the field or with fewer than two states are
/// left out and reported in `warnings`.
pub fn correlate_metadata(
    partition: &CorpusPartition,
    field: MetadataField,
) -> Result<Correlation, DiffError> {
    let mut out = Correlation::default();
    if partition.esd.is_empty() {
        return Ok(out);
    }
    if partition.esd.iter().all(|t| field.get(&t.metadata).is_none()) {
        return Err(DiffError::MissingField(field));
    }
    let baseline = reached_states(&partition.baseline);
    let results = crate::par::map(&partition.esd, |t| {
        field
            .get(&t.metadata)
            .map(|v| (v, nonbaseline_transition_fraction(t, &baseline)))
    });
    for (trace, result) in partition.esd.iter().zip(results) {
        match result {
            None => out
                .warnings
                .push(format!("{}: no {field}; excluded", trace.run_id)),
            Some((_, Err(_))) => out
                .warnings
                .push(format!("{}: fewer than two states; excluded", trace.run_id)),
            Some((value, Ok(pct))) => out.rows.push(ScatterRow {
                value,
                run_id: trace.run_id.clone(),
                pct_nonbaseline: pct,
            }),
        }
    }
    out.rows
        .sort_by(|a, b| a.value.total_cmp(&b.value).then_with(|| a.run_id.cmp(&b.run_id)));
    Ok(out)
}
