//! File formats: panel CSV, hyperparameter JSON, chain persistence and run
//! manifests.

mod chains;
mod manifest;
mod panel;

pub use chains::{
    read_chain, write_chain_csv, write_chain_meta, write_chain_ndjson, ChainMeta,
};
pub use manifest::{config_hash, RunManifest};
pub use panel::{ingest_csv, write_panel_csv};

use std::path::Path;

use crate::error::Result;
use crate::model::Hyperparams;

/// Load hyperparameters from JSON; absent fields keep the application
/// defaults.
pub fn read_hyperparams(path: &Path) -> Result<Hyperparams> {
    let h: Hyperparams = serde_json::from_reader(std::fs::File::open(path)?)?;
    h.validate()?;
    Ok(h)
}
