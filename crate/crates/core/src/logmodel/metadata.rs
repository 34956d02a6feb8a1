use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::LogError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Baseline,
    Esd,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Condition::Baseline => "baseline",
            Condition::Esd => "esd",
        })
    }
}

impl FromStr for Condition {
    type Err = LogError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "baseline" => Ok(Condition::Baseline),
            "esd" => Ok(Condition::Esd),
            _ => Err(LogError::InvalidMetadata(format!("unknown condition {s:?}"))),
        }
    }
}

/// Probe field type: electric or magnetic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FieldType {
    E,
    H,
}

impl fmt::Display for FieldType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FieldType::E => "E",
            FieldType::H => "H",
        })
    }
}

impl FromStr for FieldType {
    type Err = LogError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "E" | "e" => Ok(FieldType::E),
            "H" | "h" => Ok(FieldType::H),
            _ => Err(LogError::InvalidMetadata(format!("unknown field type {s:?}"))),
        }
    }
}

/// Description of one recorded run. Voltage is in volts, pulse width in
/// seconds; both must be positive when present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub run_id: String,
    pub condition: Condition,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field_type: Option<FieldType>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orientation: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub voltage: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pulse_width: Option<f64>,
}

impl RunMetadata {
    pub fn new(run_id: impl Into<String>, condition: Condition) -> Self {
        RunMetadata {
            run_id: run_id.into(),
            condition,
            probe: None,
            field_type: None,
            orientation: None,
            voltage: None,
            pulse_width: None,
        }
    }

    pub fn validate(&self) -> Result<(), LogError> {
        if self.run_id.is_empty() {
            return Err(LogError::MissingRunId);
        }
        if let Some(v) = self.voltage {
            if !(v.is_finite() && v > 0.0) {
                return Err(LogError::InvalidVoltage(v.to_string()));
            }
        }
        if let Some(w) = self.pulse_width {
            if !(w.is_finite() && w > 0.0) {
                return Err(LogError::InvalidPulseWidth(w.to_string()));
            }
        }
        Ok(())
    }

    /// Canonical sidecar text, one `key: value` line per present field.
    pub fn to_sidecar(&self) -> String {
        let mut out = format!("run_id: {}\ncondition: {}\n", self.run_id, self.condition);
        if let Some(p) = &self.probe {
            out.push_str(&format!("probe: {p}\n"));
        }
        if let Some(t) = self.field_type {
            out.push_str(&format!("field_type: {t}\n"));
        }
        if let Some(o) = &self.orientation {
            out.push_str(&format!("orientation: {o}\n"));
        }
        if let Some(v) = self.voltage {
            out.push_str(&format!("voltage: {v}\n"));
        }
        if let Some(w) = self.pulse_width {
            out.push_str(&format!("pulse_width: {w}\n"));
        }
        out
    }
}

impl Default for RunMetadata {
    fn default() -> Self {
        RunMetadata::new("", Condition::Baseline)
    }
}

/// Parsed sidecar plus non-fatal findings such as unknown keys.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedMetadata {
    pub metadata: RunMetadata,
    pub warnings: Vec<String>,
}

fn unquote(v: &str) -> &str {
    let v = v.trim();
    if v.len() >= 2 && (v.starts_with('"') && v.ends_with('"') || v.starts_with('\'') && v.ends_with('\'')) {
        &v[1..v.len() - 1]
    } else {
        v
    }
}

/// Parse a `.meta` sidecar: `key: value` lines, `#` comments and blank lines
/// ignored, values optionally quoted.
pub fn load_metadata(text: &str) -> Result<LoadedMetadata, LogError> {
    let mut run_id = None;
    let mut condition = None;
    let mut meta = RunMetadata::default();
    let mut warnings = Vec::new();

    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once(':') else {
            return Err(LogError::InvalidMetadata(format!(
                "line {}: expected `key: value`, got {line:?}",
                n + 1
            )));
        };
        let key = key.trim();
        let value = unquote(value);
        match key {
            "run_id" => run_id = Some(value.to_owned()),
            "condition" => condition = Some(value.parse::<Condition>()?),
            "probe" => meta.probe = Some(value.to_owned()),
            "field_type" => meta.field_type = Some(value.parse()?),
            "orientation" => meta.orientation = Some(value.to_owned()),
            "voltage" => {
                let v: f64 = value
                    .parse()
                    .map_err(|_| LogError::InvalidVoltage(value.to_owned()))?;
                if !(v.is_finite() && v > 0.0) {
                    return Err(LogError::InvalidVoltage(value.to_owned()));
                }
                meta.voltage = Some(v);
            }
            "pulse_width" => {
                let w: f64 = value
                    .parse()
                    .map_err(|_| LogError::InvalidPulseWidth(value.to_owned()))?;
                if !(w.is_finite() && w > 0.0) {
                    return Err(LogError::InvalidPulseWidth(value.to_owned()));
                }
                meta.pulse_width = Some(w);
            }
            other => warnings.push(format!("line {}: unknown key {other:?}", n + 1)),
        }
    }

    meta.run_id = run_id.ok_or(LogError::MissingRunId)?;
    meta.condition = condition.ok_or(LogError::MissingCondition)?;
    meta.validate()?;
    Ok(LoadedMetadata {
        metadata: meta,
        warnings,
    })
}
