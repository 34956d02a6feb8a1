use std::borrow::Borrow;
use std::fmt;
use std::str::FromStr;

use super::{build_counts, build_weights, classify, Label, TrainingCounts, Variant, WeightError};
use crate::diffstats::Partition;
use crate::rng::{derive_seed, SeededRng};
use crate::stategraph::ExecutionTrace;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Protocol {
    LeaveOneOut,
    /// Train on `fraction` of each group (at least one log), test on the rest.
    Split { fraction: f64, seed: u64 },
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Protocol::LeaveOneOut => f.write_str("loo"),
            Protocol::Split { fraction, seed } => write!(f, "split:{fraction}:{seed}"),
        }
    }
}

impl FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "loo" {
            return Ok(Protocol::LeaveOneOut);
        }
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["split", frac, seed] => {
                let fraction: f64 = frac
                    .parse()
                    .map_err(|_| format!("bad split fraction {frac:?}"))?;
                if !(fraction > 0.0 && fraction < 1.0) {
                    return Err(format!("split fraction {fraction} must be in (0, 1)"));
                }
                let seed = seed.parse().map_err(|_| format!("bad split seed {seed:?}"))?;
                Ok(Protocol::Split { fraction, seed })
            }
            _ => Err(format!("unknown protocol {s:?}; expected loo or split:<frac>:<seed>")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    /// Correct held-out labels over held-out logs; indeterminate is wrong.
    pub accuracy: f64,
    pub held_out: usize,
    pub correct: usize,
    /// RMS distance of the sorted unique weights from the evenly spaced
    /// line from -1 to 1.
    pub straightline_deviation: f64,
    /// Absolute value of the lower median of the sorted unique weights.
    pub middle_weight_abs: f64,
    /// Sorted unique weights of the table trained on the whole partition.
    pub weights: Vec<f64>,
}

/// Sort and merge weights closer than 1e-12 (relative to max(1, |w|)).
pub fn unique_weights(weights: &[f64]) -> Vec<f64> {
    let mut sorted = weights.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(sorted.len());
    for w in sorted {
        match out.last() {
            Some(&last) if (w - last).abs() <= 1e-12 * last.abs().max(1.0) => {}
            _ => out.push(w),
        }
    }
    out
}

/// `sorted_unique` must be sorted ascending. One weight is measured against
/// 0; none gives 0.
pub fn straightline_deviation(sorted_unique: &[f64]) -> f64 {
    let m = sorted_unique.len();
    match m {
        0 => 0.0,
        1 => sorted_unique[0].abs(),
        _ => {
            let step = 2.0 / (m - 1) as f64;
            let sq: f64 = sorted_unique
                .iter()
                .enumerate()
                .map(|(j, w)| {
                    let r = -1.0 + step * j as f64;
                    (w - r) * (w - r)
                })
                .sum();
            (sq / m as f64).sqrt()
        }
    }
}

pub fn middle_weight_abs(sorted_unique: &[f64]) -> f64 {
    if sorted_unique.is_empty() {
        return 0.0;
    }
    sorted_unique[(sorted_unique.len() - 1) / 2].abs()
}

fn fold_label(
    counts: &TrainingCounts,
    trace: &ExecutionTrace,
    variant: Variant,
    delta: f64,
) -> Result<Label, WeightError> {
    let table = build_weights(counts, variant, delta)?;
    match classify(&table, trace) {
        Ok(r) => Ok(r.label),
        Err(WeightError::EmptyTrace) => Ok(Label::Indeterminate),
        Err(e) => Err(e),
    }
}

pub fn evaluate<T>(
    partition: &Partition<T>,
    variant: Variant,
    delta: f64,
    protocol: Protocol,
) -> Result<Metrics, WeightError>
where
    T: Borrow<ExecutionTrace> + Sync,
{
    variant.check_delta(delta)?;
    let full = build_counts(partition)?;
    let full_table = build_weights(&full, variant, delta)?;
    let weights = unique_weights(&full_table.weights());

    let outcomes: Vec<bool> = match protocol {
        Protocol::LeaveOneOut => {
            if partition.baseline.len() < 2 || partition.esd.len() < 2 {
                return Err(WeightError::InsufficientLogs(
                    "leave-one-out needs at least two logs per group".into(),
                ));
            }
            let all: Vec<&ExecutionTrace> = partition
                .baseline
                .iter()
                .chain(&partition.esd)
                .map(Borrow::borrow)
                .collect();
            let labels = crate::par::map(&all, |t| {
                let mut counts = full.clone();
                counts.remove(t);
                if counts.total_b == 0 || counts.total_e == 0 {
                    return Err(WeightError::InsufficientLogs(format!(
                        "training without {} leaves a group with no states",
                        t.run_id
                    )));
                }
                fold_label(&counts, t, variant, delta).map(|l| l.matches(t.condition))
            });
            labels.into_iter().collect::<Result<_, _>>()?
        }
        Protocol::Split { fraction, seed } => {
            let mut train = TrainingCounts::default();
            let mut test: Vec<&ExecutionTrace> = Vec::new();
            for (g, group) in [&partition.baseline, &partition.esd].into_iter().enumerate() {
                let mut order: Vec<usize> = (0..group.len()).collect();
                SeededRng::new(derive_seed(seed, g as u64)).shuffle(&mut order);
                let n_train = ((fraction * group.len() as f64).round() as usize).clamp(1, group.len());
                for (k, &i) in order.iter().enumerate() {
                    let t: &ExecutionTrace = group[i].borrow();
                    if k < n_train {
                        train.add(t);
                    } else {
                        test.push(t);
                    }
                }
            }
            if test.is_empty() {
                return Err(WeightError::InsufficientLogs(
                    "split leaves no held-out logs".into(),
                ));
            }
            if train.total_b == 0 || train.total_e == 0 {
                return Err(WeightError::InsufficientLogs(
                    "split leaves a training group with no states".into(),
                ));
            }
            let table = build_weights(&train, variant, delta)?;
            test.iter()
                .map(|t| match classify(&table, t) {
                    Ok(r) => Ok(r.label.matches(t.condition)),
                    Err(WeightError::EmptyTrace) => Ok(false),
                    Err(e) => Err(e),
                })
                .collect::<Result<_, _>>()?
        }
    };

    let correct = outcomes.iter().filter(|&&ok| ok).count();
    Ok(Metrics {
        accuracy: correct as f64 / outcomes.len() as f64,
        held_out: outcomes.len(),
        correct,
        straightline_deviation: straightline_deviation(&weights),
        middle_weight_abs: middle_weight_abs(&weights),
        weights,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub delta: f64,
    pub accuracy: f64,
    pub straightline_deviation: f64,
    pub middle_weight_abs: f64,
}

/// One metrics row per δ, in input order.
pub fn sweep_delta<T>(
    partition: &Partition<T>,
    variant: Variant,
    deltas: &[f64],
    protocol: Protocol,
) -> Result<Vec<SweepRow>, WeightError>
where
    T: Borrow<ExecutionTrace> + Sync,
{
    for &d in deltas {
        variant.check_delta(d)?;
    }
    crate::par::try_map(deltas, |&delta| {
        evaluate(partition, variant, delta, protocol).map(|m| SweepRow {
            delta,
            accuracy: m.accuracy,
            straightline_deviation: m.straightline_deviation,
            middle_weight_abs: m.middle_weight_abs,
        })
    })
}
