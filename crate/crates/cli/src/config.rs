//! Optional TOML run configuration. Every section is a partial overlay on
//! the command's defaults:
//!
//! ```toml
//! [train]
//! epochs = 1000
//! batch_size = 256
//!
//! [planner]
//! samples = 100
//!
//! [cost.obstacle]
//! epsilon = 0.05
//! ```

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::manifest::sha256_hex;
use crate::CliError;

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub sampling: Option<toml::Table>,
    pub train: Option<toml::Table>,
    pub planner: Option<toml::Table>,
    pub cost: Option<toml::Table>,
    pub timing: Option<toml::Table>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::input(format!("config {}: {e}", path.display())))
    }
}

fn merge(base: &mut toml::Table, patch: &toml::Table) {
    for (k, v) in patch {
        match (base.get_mut(k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(p)) => merge(b, p),
            _ => {
                base.insert(k.clone(), v.clone());
            }
        }
    }
}

/// Applies `patch` on top of `base`, rejecting unknown keys.
pub fn overlay<T: Serialize + DeserializeOwned>(base: T, patch: Option<&toml::Table>, section: &str) -> Result<T, CliError> {
    let Some(patch) = patch else {
        return Ok(base);
    };
    let mut table = toml::Table::try_from(&base).expect("defaults serialize");
    merge(&mut table, patch);
    table
        .try_into()
        .map_err(|e| CliError::input(format!("config section [{section}]: {e}")))
}

/// Hash of the effective configuration of a command.
pub fn config_hash<T: Serialize>(cfg: &T) -> String {
    sha256_hex(serde_json::to_string(cfg).expect("config serializes").as_bytes())
}

/// Seed for a named stage, derived from the run seed so stages draw from
/// independent streams.
pub fn stage_seed(seed: u64, stage: &str) -> u64 {
    let mut bytes = seed.to_le_bytes().to_vec();
    bytes.extend_from_slice(stage.as_bytes());
    let hex = sha256_hex(&bytes);
    u64::from_str_radix(&hex[..16], 16).expect("hex digest")
}
