use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use super::{DiffError, Partition};
use crate::logmodel::{Condition, RawLog};

/// Probability of each observed raw value of one register.
pub type DistColumn = BTreeMap<u32, f64>;

/// Pooled value probabilities of one register in both groups.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    pub register: String,
    pub baseline: DistColumn,
    pub esd: DistColumn,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistributionRow {
    pub value: u32,
    pub p_baseline: f64,
    pub p_esd: f64,
    /// `p_esd - p_baseline`
    pub difference: f64,
}

impl Distribution {
    /// Rows over the union of observed values, by descending baseline
    /// probability then ascending value.
    pub fn rows(&self) -> Vec<DistributionRow> {
        let mut rows: Vec<DistributionRow> = compare_distributions(&self.esd, &self.baseline)
            .into_iter()
            .map(|c| DistributionRow {
                value: c.value,
                p_baseline: c.b,
                p_esd: c.a,
                difference: c.difference,
            })
            .collect();
        rows.sort_by(|x, y| {
            y.p_baseline
                .partial_cmp(&x.p_baseline)
                .unwrap_or(Ordering::Equal)
                .then(x.value.cmp(&y.value))
        });
        rows
    }
}

/// Pooled value probabilities of `register` over every snapshot in `logs`:
/// occurrences divided by the total snapshot count.
pub fn value_column(logs: &[RawLog], register: &str) -> Result<Option<DistColumn>, DiffError> {
    let mut counts: BTreeMap<u32, u64> = BTreeMap::new();
    let mut total = 0u64;
    for log in logs {
        let idx = log
            .schema
            .index_of(register)
            .ok_or_else(|| DiffError::UnknownRegister(register.to_owned()))?;
        for snap in &log.snapshots {
            *counts.entry(snap.values[idx]).or_insert(0) += 1;
            total += 1;
        }
    }
    if total == 0 {
        return Ok(None);
    }
    Ok(Some(
        counts
            .into_iter()
            .map(|(v, n)| (v, n as f64 / total as f64))
            .collect(),
    ))
}

pub fn value_distribution(
    partition: &Partition<RawLog>,
    register: &str,
) -> Result<Distribution, DiffError> {
    let baseline = value_column(&partition.baseline, register)?
        .ok_or(DiffError::EmptyGroup(Condition::Baseline))?;
    let esd = value_column(&partition.esd, register)?.ok_or(DiffError::EmptyGroup(Condition::Esd))?;
    Ok(Distribution {
        register: register.to_owned(),
        baseline,
        esd,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonRow {
    pub value: u32,
    pub a: f64,
    pub b: f64,
    /// `a - b`
    pub difference: f64,
    pub differs: bool,
}

/// Per-value signed difference `a - b` over the union of both columns'
/// values; a value missing from a column has probability 0. Rows are in
/// ascending value order.
pub fn compare_distributions(a: &DistColumn, b: &DistColumn) -> Vec<ComparisonRow> {
    let values: BTreeSet<u32> = a.keys().chain(b.keys()).copied().collect();
    values
        .into_iter()
        .map(|value| {
            let pa = a.get(&value).copied().unwrap_or(0.0);
            let pb = b.get(&value).copied().unwrap_or(0.0);
            let difference = pa - pb;
            ComparisonRow {
                value,
                a: pa,
                b: pb,
                difference,
                differs: difference != 0.0,
            }
        })
        .collect()
}
