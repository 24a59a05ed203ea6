//! Versioned JSON checkpoints for trained networks.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nn::{Activation, Mlp};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint<C> {
    pub kind: String,
    pub version: u32,
    pub layer_sizes: Vec<usize>,
    pub activation: Activation,
    pub params: Vec<f64>,
    pub seed: u64,
    pub config_hash: String,
    pub config: C,
}

/// Hex SHA-256 of the canonical JSON encoding of `config`.
pub fn config_hash<C: Serialize>(config: &C) -> String {
    let bytes = serde_json::to_vec(config).expect("config serializes");
    hex::encode(Sha256::digest(&bytes))
}

impl<C: Serialize + DeserializeOwned> Checkpoint<C> {
    pub fn new(kind: &str, net: &Mlp, seed: u64, config: C) -> Self {
        Self {
            kind: kind.to_string(),
            version: CHECKPOINT_VERSION,
            layer_sizes: net.sizes().to_vec(),
            activation: net.activation(),
            params: net.params().to_vec(),
            seed,
            config_hash: config_hash(&config),
            config,
        }
    }

    pub fn network(&self) -> Result<Mlp> {
        Mlp::from_parts(self.layer_sizes.clone(), self.activation, self.params.clone())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string(self)?;
        fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path, expected_kind: &str) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let ckpt: Self = serde_json::from_str(&text)?;
        if ckpt.kind != expected_kind {
            return Err(Error::Checkpoint(format!(
                "{} holds a `{}` checkpoint, expected `{expected_kind}`",
                path.display(),
                ckpt.kind
            )));
        }
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {}",
                ckpt.version
            )));
        }
        if ckpt.config_hash != config_hash(&ckpt.config) {
            return Err(Error::Checkpoint("config hash does not match config".into()));
        }
        Ok(ckpt)
    }
}
