//! Parameter checkpoints.
//!
//! The on-disk format is a JSON object mapping each parameter name to
//! `{"shape": [rows, cols], "values": [...]}` with values in row-major order. Keys are
//! written sorted, and floats round-trip exactly.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{AutodiffError, Result};
use crate::tensor::Tensor;

#[derive(Serialize, Deserialize)]
struct Entry {
    shape: [usize; 2],
    values: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Checkpoint {
    params: BTreeMap<String, Tensor>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: String, value: Tensor) {
        self.params.insert(name, value);
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.params.get(name)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(String::as_str)
    }

    pub fn to_json_string(&self) -> String {
        let entries: BTreeMap<&str, Entry> = self
            .params
            .iter()
            .map(|(k, t)| {
                (
                    k.as_str(),
                    Entry {
                        shape: [t.rows, t.cols],
                        values: t.data.clone(),
                    },
                )
            })
            .collect();
        serde_json::to_string(&entries).expect("checkpoint serialization cannot fail")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let entries: BTreeMap<String, Entry> = serde_json::from_str(text)?;
        let mut params = BTreeMap::new();
        for (name, e) in entries {
            let t = Tensor::new(e.shape[0], e.shape[1], e.values)
                .map_err(|err| AutodiffError::Checkpoint(format!("{name}: {err}")))?;
            params.insert(name, t);
        }
        Ok(Self { params })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}
