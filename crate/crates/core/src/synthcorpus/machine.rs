use serde::Serialize;

use super::SynthError;
use crate::logmodel::{RegisterSchema, OHCI_REGISTERS};
use crate::rng::{derive_seed, SeededRng};

/// Register values from a recorded `ohci_irq` snapshot, used as the starting
/// point for OHCI machines.
const OHCI_SAMPLE: [u32; 22] = [
    0x83, 0x4, 0x24, 0x8000005e, 0x8000005e, 0x338b1000, 0x0, 0x339b2000, 0x0, 0x339b2080, 0x0,
    0x0, 0xa7782edf, 0x80002760, 0x921d, 0x2a2f, 0x628, 0x2001202, 0x0, 0x8000, 0x103, 0x100,
];

const DRIVER_FUNCTIONS: [&str; 8] = [
    "ohci_irq",
    "ohci_urb_enqueue",
    "ohci_urb_dequeue",
    "ohci_hub_status_data",
    "ohci_hub_control",
    "ohci_get_frame",
    "ohci_endpoint_disable",
    "ohci_rh_resume",
];

/// Values each plain register may take across machine states.
const POOL_SIZE: usize = 3;

/// A small Markov chain over full register tuples. Address registers hold
/// one value for the whole machine, as they would for one driver load.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineMachine {
    #[serde(skip)]
    pub schema: RegisterSchema,
    pub states: Vec<Vec<u32>>,
    /// Row-stochastic transition matrix.
    pub transitions: Vec<Vec<f64>>,
    /// Driver function logged when taking transition `i -> j`.
    pub functions: Vec<Vec<String>>,
    /// Function logged for the first snapshot.
    pub entry_function: String,
    pub initial: usize,
}

impl BaselineMachine {
    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    /// Sample the successor of `state` from a uniform draw `u` in [0, 1).
    pub fn step(&self, state: usize, u: f64) -> usize {
        let row = &self.transitions[state];
        let mut acc = 0.0;
        for (j, p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                return j;
            }
        }
        // Rounding left the cumulative sum a hair under 1.
        row.iter().rposition(|&p| p > 0.0).expect("row has mass")
    }
}

fn base_values(schema: &RegisterSchema, rng: &mut SeededRng) -> Vec<u32> {
    schema
        .names()
        .iter()
        .map(|name| match OHCI_REGISTERS.iter().position(|r| r == name) {
            Some(i) => OHCI_SAMPLE[i],
            None => rng.next_u32(),
        })
        .collect()
}

/// Deterministic machine with `n_states` distinct tuples and a strongly
/// connected transition structure (a ring plus random extra edges).
pub fn make_machine(
    seed: u64,
    n_states: usize,
    schema: &RegisterSchema,
) -> Result<BaselineMachine, SynthError> {
    if n_states == 0 {
        return Err(SynthError::InvalidParameter("n_states must be at least 1".into()));
    }
    let mut rng = SeededRng::new(derive_seed(seed, 0x6d61_6368));
    let base = base_values(schema, &mut rng);

    let plain: Vec<usize> = (0..schema.len()).filter(|&i| !schema.is_address(i)).collect();
    let capacity = (POOL_SIZE as f64).powi(plain.len().min(64) as i32);
    if (n_states as f64) > capacity {
        return Err(SynthError::InvalidParameter(format!(
            "schema has room for at most {capacity} distinct states"
        )));
    }
    // Each plain register may keep its base value or flip one of two bits.
    let pools: Vec<[u32; POOL_SIZE]> = plain
        .iter()
        .map(|&i| {
            let bits = rng.distinct(32, 2);
            [base[i], base[i] ^ (1 << bits[0]), base[i] ^ (1 << bits[1])]
        })
        .collect();

    let mut states: Vec<Vec<u32>> = vec![base.clone()];
    let mut attempts = 0usize;
    while states.len() < n_states {
        attempts += 1;
        if attempts > 10_000 * n_states {
            return Err(SynthError::InvalidParameter(
                "could not draw enough distinct states".into(),
            ));
        }
        let mut tuple = base.clone();
        for (k, &i) in plain.iter().enumerate() {
            tuple[i] = pools[k][rng.index(POOL_SIZE)];
        }
        if !states.contains(&tuple) {
            states.push(tuple);
        }
    }

    let n = n_states;
    let mut transitions = vec![vec![0.0; n]; n];
    let mut functions = vec![vec![String::new(); n]; n];
    for i in 0..n {
        let mut raw = vec![0.0; n];
        for (j, w) in raw.iter_mut().enumerate() {
            let ring = j == (i + 1) % n;
            let extra = rng.chance(0.5);
            if ring || extra {
                *w = 0.1 + 0.9 * rng.unit();
            }
        }
        let total: f64 = raw.iter().sum();
        for j in 0..n {
            transitions[i][j] = raw[j] / total;
            functions[i][j] = DRIVER_FUNCTIONS[rng.index(DRIVER_FUNCTIONS.len())].to_owned();
        }
    }

    Ok(BaselineMachine {
        schema: schema.clone(),
        states,
        transitions,
        functions,
        entry_function: DRIVER_FUNCTIONS[0].to_owned(),
        initial: 0,
    })
}
