use std::fmt;

use serde::Serialize;

use super::{tally, WeightError, WeightTable};
use crate::logmodel::Condition;
use crate::stategraph::ExecutionTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Esd,
    Baseline,
    Indeterminate,
}

impl Label {
    pub fn matches(self, condition: Condition) -> bool {
        matches!(
            (self, condition),
            (Label::Esd, Condition::Esd) | (Label::Baseline, Condition::Baseline)
        )
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Esd => "esd",
            Label::Baseline => "baseline",
            Label::Indeterminate => "indeterminate",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationResult {
    pub run_id: String,
    pub score: f64,
    pub label: Label,
    /// Fraction of the trace spent in states the table has never seen.
    pub unseen_state_mass: f64,
}

/// Score `trace` against `table`. States missing from the table weigh 0.
///
/// Terms are summed with Neumaier compensation. A sum whose magnitude is
/// within the accumulated rounding bound is reported as exactly 0, so an
/// exactly cancelling log is labeled indeterminate rather than by the sign
/// of rounding noise.
pub fn classify(table: &WeightTable, trace: &ExecutionTrace) -> Result<ClassificationResult, WeightError> {
    if trace.states.is_empty() {
        return Err(WeightError::EmptyTrace);
    }
    let len = trace.states.len() as f64;
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    let mut magnitude = 0.0f64;
    let mut terms = 0usize;
    let mut unseen = 0u64;

    for (id, n) in tally(&trace.states) {
        let Some(row) = table.rows.get(&id) else {
            unseen += n;
            continue;
        };
        let term = row.normalized * n as f64;
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
        magnitude += term.abs();
        terms += 1;
    }
    let mut total = sum + comp;
    let bound = 4.0 * (terms as f64 + 2.0) * f64::EPSILON * magnitude;
    if total.abs() <= bound {
        total = 0.0;
    }
    let score = table.scale * total / len;
    let label = if score > 0.0 {
        Label::Esd
    } else if score < 0.0 {
        Label::Baseline
    } else {
        Label::Indeterminate
    };
    Ok(ClassificationResult {
        run_id: trace.run_id.clone(),
        score,
        label,
        unseen_state_mass: unseen as f64 / len,
    })
}
