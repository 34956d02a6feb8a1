//! Seeded synthetic corpora: a baseline register machine plus a bit-flip
//! fault model for the ESD-exposed runs.
//!
//! Randomness comes from [`crate::rng`]. A log's chain path and its faults
//! are drawn from separate substreams of the log seed, so changing the
//! fault model never changes the path.

mod machine;

use serde::Serialize;
use thiserror::Error;

use crate::logmodel::{write_block, Condition, FieldType, RegisterSchema, RunMetadata};
use crate::rng::{derive_seed, SeededRng};

pub use machine::{make_machine, BaselineMachine};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid generator parameter: {0}")]
    InvalidParameter(String),
}

/// Per-snapshot fault model. Each event picks one eligible register and
/// flips `flips` distinct bits of it, as a single corrupted register read.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbationModel {
    pub probability: f64,
    pub flips: u32,
    /// Schema positions of registers that can be corrupted.
    pub eligible: Vec<usize>,
    /// Keep a corruption until the chain next rewrites the register, instead
    /// of affecting only the one snapshot.
    pub sticky: bool,
}

impl PerturbationModel {
    /// Model over the named registers; `None` selects the schema's address
    /// registers (all registers if it has none).
    pub fn new(
        probability: f64,
        flips: u32,
        eligible: Option<&[String]>,
        schema: &RegisterSchema,
    ) -> Result<Self, SynthError> {
        let eligible = match eligible {
            Some(names) => names
                .iter()
                .map(|n| {
                    schema.index_of(n).ok_or_else(|| {
                        SynthError::InvalidParameter(format!("unknown register {n}"))
                    })
                })
                .collect::<Result<Vec<_>, _>>()?,
            None => {
                let addr: Vec<usize> = schema.address_indices().collect();
                if addr.is_empty() {
                    (0..schema.len()).collect()
                } else {
                    addr
                }
            }
        };
        let model = PerturbationModel {
            probability,
            flips,
            eligible,
            sticky: false,
        };
        model.validate()?;
        Ok(model)
    }

    /// No faults.
    pub fn none() -> Self {
        PerturbationModel {
            probability: 0.0,
            flips: 1,
            eligible: Vec::new(),
            sticky: false,
        }
    }

    pub fn sticky(mut self, sticky: bool) -> Self {
        self.sticky = sticky;
        self
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if !(0.0..=1.0).contains(&self.probability) {
            return Err(SynthError::InvalidParameter(format!(
                "perturbation probability {} is outside [0, 1]",
                self.probability
            )));
        }
        if !(1..=32).contains(&self.flips) {
            return Err(SynthError::InvalidParameter(format!(
                "flips per event must be in 1..=32, got {}",
                self.flips
            )));
        }
        if self.probability > 0.0 && self.eligible.is_empty() {
            return Err(SynthError::InvalidParameter("no eligible registers".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedLog {
    pub text: String,
    /// Ground truth: snapshot differs from the machine state it was taken in.
    pub perturbed: Vec<bool>,
    /// Machine state index behind each snapshot.
    pub path: Vec<usize>,
}

/// Simulate `length` snapshots of `machine` under `model`.
pub fn generate_log(
    machine: &BaselineMachine,
    length: usize,
    model: &PerturbationModel,
    seed: u64,
) -> Result<GeneratedLog, SynthError> {
    model.validate()?;
    if let Some(&bad) = model.eligible.iter().find(|&&i| i >= machine.schema.len()) {
        return Err(SynthError::InvalidParameter(format!(
            "eligible register index {bad} is outside the schema"
        )));
    }
    let mut chain = SeededRng::new(derive_seed(seed, 0));
    let mut faults = SeededRng::new(derive_seed(seed, 1));
    let n_regs = machine.schema.len();

    let mut text = String::new();
    let mut perturbed = Vec::with_capacity(length);
    let mut path = Vec::with_capacity(length);
    let mut state = machine.initial;
    let mut latched = vec![0u32; n_regs];

    for step in 0..length {
        let function = if step == 0 {
            machine.entry_function.as_str()
        } else {
            let next = machine.step(state, chain.unit());
            if model.sticky {
                for (r, mask) in latched.iter_mut().enumerate() {
                    if machine.states[next][r] != machine.states[state][r] {
                        *mask = 0;
                    }
                }
            }
            let f = machine.functions[state][next].as_str();
            state = next;
            f
        };

        let mut values = machine.states[state].clone();
        if model.sticky {
            for (v, m) in values.iter_mut().zip(&latched) {
                *v ^= m;
            }
        }
        if faults.chance(model.probability) {
            let reg = model.eligible[faults.index(model.eligible.len())];
            let mask = faults
                .distinct(32, model.flips as usize)
                .into_iter()
                .fold(0u32, |m, b| m | (1 << b));
            values[reg] ^= mask;
            if model.sticky {
                latched[reg] ^= mask;
            }
        }
        perturbed.push(values != machine.states[state]);
        path.push(state);
        write_block(&mut text, &machine.schema, function, &values);
    }
    Ok(GeneratedLog {
        text,
        perturbed,
        path,
    })
}

fn esd_metadata(run_id: String, rng: &mut SeededRng) -> RunMetadata {
    let mut meta = RunMetadata::new(run_id, Condition::Esd);
    if rng.chance(0.5) {
        meta.field_type = Some(FieldType::E);
        meta.probe = Some("EZ-3".into());
        meta.orientation = Some(["across port", "over controller"][rng.index(2)].into());
        meta.voltage = Some(500.0 * (1 + rng.index(11)) as f64);
        meta.pulse_width = Some([0.1, 0.15, 0.2, 0.25][rng.index(4)]);
    } else {
        meta.field_type = Some(FieldType::H);
        meta.probe = Some(["HX-5", "HX-1T2"][rng.index(2)].into());
        meta.orientation = Some(["parallel", "perpendicular"][rng.index(2)].into());
        meta.voltage = Some(500.0 * (1 + rng.index(16)) as f64);
        meta.pulse_width = Some([0.1, 0.2, 0.3, 0.4, 0.5, 0.6][rng.index(6)]);
    }
    meta
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusRun {
    pub metadata: RunMetadata,
    pub seed: u64,
    #[serde(skip)]
    pub log: GeneratedLog,
    pub perturbed_snapshots: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Corpus {
    pub tool_version: &'static str,
    pub seed: u64,
    pub length: usize,
    pub model: PerturbationModel,
    pub schema: RegisterSchema,
    pub machine: BaselineMachine,
    pub runs: Vec<CorpusRun>,
}

impl Corpus {
    pub fn manifest_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    /// `(file name, contents)` for every log, sidecar and the manifest, in
    /// a fixed order.
    pub fn files(&self) -> Vec<(String, String)> {
        let mut out = Vec::with_capacity(2 * self.runs.len() + 1);
        for run in &self.runs {
            let id = &run.metadata.run_id;
            out.push((format!("{id}.log"), run.log.text.clone()));
            out.push((format!("{id}.meta"), run.metadata.to_sidecar()));
        }
        out.push(("manifest.json".into(), self.manifest_json()));
        out
    }
}

/// `n_baseline` fault-free runs and `n_esd` runs under `model`, all derived
/// from `seed`.
pub fn generate_corpus(
    machine: &BaselineMachine,
    n_baseline: usize,
    n_esd: usize,
    length: usize,
    model: &PerturbationModel,
    seed: u64,
) -> Result<Corpus, SynthError> {
    if n_baseline == 0 || n_esd == 0 {
        return Err(SynthError::InvalidParameter(
            "corpus needs at least one log per group".into(),
        ));
    }
    model.validate()?;
    let clean = PerturbationModel::none();
    let runs = crate::par::map_range(n_baseline + n_esd, |i| {
        let log_seed = derive_seed(seed, 0x1000 + i as u64);
        let (metadata, model) = if i < n_baseline {
            (RunMetadata::new(format!("b{i:03}"), Condition::Baseline), &clean)
        } else {
            let mut meta_rng = SeededRng::new(derive_seed(log_seed, 2));
            (esd_metadata(format!("e{:03}", i - n_baseline), &mut meta_rng), model)
        };
        generate_log(machine, length, model, log_seed).map(|log| CorpusRun {
            perturbed_snapshots: log
                .perturbed
                .iter()
                .enumerate()
                .filter(|(_, p)| **p)
                .map(|(k, _)| k)
                .collect(),
            metadata,
            seed: log_seed,
            log,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;

    Ok(Corpus {
        tool_version: env!("CARGO_PKG_VERSION"),
        seed,
        length,
        model: model.clone(),
        schema: machine.schema.clone(),
        machine: machine.clone(),
        runs,
    })
}
