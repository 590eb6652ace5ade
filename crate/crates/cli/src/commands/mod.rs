pub mod bench;
pub mod enhance;
pub mod gradcheck;
pub mod info;
pub mod init;
pub mod mix;

use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use pbsrnn::engine::load_weights;
use pbsrnn::{Engine, ModelConfig};

/// Reference footprint of the published model.
pub const REFERENCE_PARAMS: f64 = 5.97e6;
pub const REFERENCE_MACS_PER_SECOND: f64 = 5.54e9;
pub const REFERENCE_RTF: f64 = 0.41;

/// Version of the JSON documents printed by `info`, `bench` and `gradcheck`.
pub const SCHEMA_VERSION: u32 = 1;

pub fn load_engine(path: &Path) -> Result<(ModelConfig, Engine)> {
    let (config, store) = load_weights(path).with_context(|| format!("loading {}", path.display()))?;
    let engine = Engine::from_store(&config, &store).with_context(|| format!("validating {}", path.display()))?;
    Ok((config, engine))
}

pub fn print_json(value: &impl serde::Serialize) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}
