use std::collections::BTreeMap;
use std::fmt::{self, Write};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use super::GraphError;

/// How address-like registers enter a state's identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AddressMode {
    /// Dropped from the key.
    Ignore,
    /// `Same` or `Changed` relative to the previous snapshot.
    #[default]
    Delta,
    /// Number of value changes observed so far in the trace.
    Counter,
    /// A token unique to (run, register, change index); index 0 is shared.
    Unique,
}

impl fmt::Display for AddressMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AddressMode::Ignore => "ignore",
            AddressMode::Delta => "delta",
            AddressMode::Counter => "counter",
            AddressMode::Unique => "unique",
        })
    }
}

impl FromStr for AddressMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ignore" => Ok(AddressMode::Ignore),
            "delta" => Ok(AddressMode::Delta),
            "counter" => Ok(AddressMode::Counter),
            "unique" => Ok(AddressMode::Unique),
            _ => Err(format!("unknown address mode {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct AbstractionConfig {
    pub mode: AddressMode,
    #[serde(default)]
    pub include_function: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyEntry {
    Value(u32),
    Same,
    Changed,
    Index(u32),
    Unique {
        run_id: String,
        register: String,
        change_index: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StateKey {
    pub entries: Vec<KeyEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub function: Option<String>,
}

impl StateKey {
    pub fn new(entries: Vec<KeyEntry>) -> Self {
        StateKey {
            entries,
            function: None,
        }
    }

    /// Unambiguous text form. String fields are length-prefixed.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        for (i, e) in self.entries.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            let _ = match e {
                KeyEntry::Value(v) => write!(out, "v{v:x}"),
                KeyEntry::Same => write!(out, "s"),
                KeyEntry::Changed => write!(out, "c"),
                KeyEntry::Index(n) => write!(out, "i{n}"),
                KeyEntry::Unique {
                    run_id,
                    register,
                    change_index,
                } => write!(
                    out,
                    "u{}:{run_id}{}:{register}{change_index}",
                    run_id.len(),
                    register.len()
                ),
            };
        }
        if let Some(f) = &self.function {
            let _ = write!(out, "|f{}:{f}", f.len());
        }
        out
    }

    pub fn id(&self) -> StateId {
        StateId::of(self)
    }
}

/// Content-derived state identifier: the first eight bytes of the SHA-256 of
/// the key's canonical form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateId(pub u64);

impl StateId {
    pub fn of(key: &StateKey) -> Self {
        let digest = Sha256::digest(key.canonical().as_bytes());
        let mut bytes = [0u8; 8];
        bytes.copy_from_slice(&digest[..8]);
        StateId(u64::from_be_bytes(bytes))
    }

    pub fn short(&self) -> String {
        format!("{:08x}", self.0 >> 32)
    }
}

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

impl FromStr for StateId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() != 16 {
            return Err(format!("state id {s:?} must be 16 hex digits"));
        }
        u64::from_str_radix(s, 16)
            .map(StateId)
            .map_err(|e| format!("state id {s:?}: {e}"))
    }
}

impl Serialize for StateId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for StateId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Bijection between ids and keys. Ids are derived from content, so the
/// mapping does not depend on insertion order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateTable {
    by_id: BTreeMap<StateId, StateKey>,
}

impl StateTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, key: StateKey) -> Result<StateId, GraphError> {
        let id = key.id();
        match self.by_id.get(&id) {
            Some(existing) if *existing != key => Err(GraphError::IdCollision(id)),
            Some(_) => Ok(id),
            None => {
                self.by_id.insert(id, key);
                Ok(id)
            }
        }
    }

    pub fn merge(&mut self, other: &StateTable) -> Result<(), GraphError> {
        for key in other.by_id.values() {
            self.intern(key.clone())?;
        }
        Ok(())
    }

    pub fn get(&self, id: StateId) -> Option<&StateKey> {
        self.by_id.get(&id)
    }

    pub fn len(&self) -> usize {
        self.by_id.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_id.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (StateId, &StateKey)> {
        self.by_id.iter().map(|(id, k)| (*id, k))
    }

    /// Dense 0-based numbering by sorted canonical form, for display.
    pub fn dense_numbering(&self) -> BTreeMap<StateId, usize> {
        let mut forms: Vec<(String, StateId)> =
            self.by_id.iter().map(|(id, k)| (k.canonical(), *id)).collect();
        forms.sort();
        forms.into_iter().enumerate().map(|(i, (_, id))| (id, i)).collect()
    }

    /// Restrict the table to the given ids.
    pub fn subset<'a>(&self, ids: impl IntoIterator<Item = &'a StateId>) -> StateTable {
        let by_id = ids
            .into_iter()
            .filter_map(|id| self.by_id.get(id).map(|k| (*id, k.clone())))
            .collect();
        StateTable { by_id }
    }
}
