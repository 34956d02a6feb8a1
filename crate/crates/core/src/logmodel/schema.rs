use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::LogError;

/// Register names logged by the instrumented OHCI driver, in log order, with
/// the repeated `HcRhDescriptorA` line collapsed.
pub const OHCI_REGISTERS: [&str; 22] = [
    "HcControl",
    "HcCommandStatus",
    "HcInterruptStatus",
    "HcInterruptEnable",
    "HcInterruptDisable",
    "HcHCCA",
    "HcPeriodCurrentED",
    "HcControlHeadED",
    "HcControlCurrentED",
    "HcBulkHeadED",
    "HcBulkCurrentED",
    "HcDoneHead",
    "HcFmInterval",
    "HcFmRemaining",
    "HcFmNumber",
    "HcPeriodicStart",
    "HcLSThreshold",
    "HcRhDescriptorA",
    "HcRhDescriptorB",
    "HcRhStatus",
    "HcRhPortStatus[0]",
    "HcRhPortStatus[1]",
];

/// Registers whose values are memory addresses or free-running counters that
/// differ every time the driver is loaded.
pub const OHCI_ADDRESS_REGISTERS: [&str; 9] = [
    "HcPeriodCurrentED",
    "HcBulkCurrentED",
    "HcFmRemaining",
    "HcHCCA",
    "HcControlHeadED",
    "HcControlCurrentED",
    "HcBulkHeadED",
    "HcFmNumber",
    "HcDoneHead",
];

/// Ordered register layout of a snapshot. Position in `names` is the
/// position of the register in every state tuple.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SchemaDoc", into = "SchemaDoc")]
pub struct RegisterSchema {
    names: Vec<String>,
    is_address: Vec<bool>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct SchemaDoc {
    registers: Vec<String>,
    #[serde(default)]
    address: Vec<String>,
}

impl TryFrom<SchemaDoc> for RegisterSchema {
    type Error = LogError;

    fn try_from(doc: SchemaDoc) -> Result<Self, Self::Error> {
        RegisterSchema::new(doc.registers, doc.address)
    }
}

impl From<RegisterSchema> for SchemaDoc {
    fn from(schema: RegisterSchema) -> Self {
        let address = schema.address_names().map(str::to_owned).collect();
        SchemaDoc {
            registers: schema.names,
            address,
        }
    }
}

impl RegisterSchema {
    pub fn new<N, A>(names: N, address: A) -> Result<Self, LogError>
    where
        N: IntoIterator,
        N::Item: Into<String>,
        A: IntoIterator,
        A::Item: Into<String>,
    {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(LogError::InvalidSchema("schema has no registers".into()));
        }
        let mut index = HashMap::with_capacity(names.len());
        for (i, name) in names.iter().enumerate() {
            if name.is_empty() || name.contains(char::is_whitespace) || name.contains(':') {
                return Err(LogError::InvalidSchema(format!(
                    "invalid register name {name:?}"
                )));
            }
            if index.insert(name.clone(), i).is_some() {
                return Err(LogError::InvalidSchema(format!(
                    "duplicate register {name}"
                )));
            }
        }
        let mut is_address = vec![false; names.len()];
        let address: BTreeSet<String> = address.into_iter().map(Into::into).collect();
        for name in &address {
            match index.get(name) {
                Some(&i) => is_address[i] = true,
                None => {
                    return Err(LogError::InvalidSchema(format!(
                        "address register {name} is not in the schema"
                    )))
                }
            }
        }
        Ok(RegisterSchema {
            names,
            is_address,
            index,
        })
    }

    /// The built-in OHCI host controller schema.
    pub fn ohci() -> Self {
        RegisterSchema::new(OHCI_REGISTERS, OHCI_ADDRESS_REGISTERS)
            .expect("built-in schema is valid")
    }

    pub fn from_json(text: &str) -> Result<Self, LogError> {
        serde_json::from_str(text).map_err(|e| LogError::InvalidSchema(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serializes")
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, index: usize) -> &str {
        &self.names[index]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn is_address(&self, index: usize) -> bool {
        self.is_address[index]
    }

    pub fn address_names(&self) -> impl Iterator<Item = &str> {
        self.names
            .iter()
            .zip(&self.is_address)
            .filter(|(_, &a)| a)
            .map(|(n, _)| n.as_str())
    }

    pub fn address_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.is_address
            .iter()
            .enumerate()
            .filter(|(_, &a)| a)
            .map(|(i, _)| i)
    }
}

impl Default for RegisterSchema {
    fn default() -> Self {
        RegisterSchema::ohci()
    }
}
