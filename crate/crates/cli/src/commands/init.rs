use std::process::ExitCode;

use anyhow::{Context, Result};
use pbsrnn::engine::save_weights;
use pbsrnn::{ModelConfig, WeightStore};

use crate::cli::{InitArgs, Preset};

pub fn run(args: InitArgs) -> Result<ExitCode> {
    let base = match args.preset {
        Preset::Default => ModelConfig::default_for(args.sample_rate)?,
        Preset::Tiny => ModelConfig::tiny(),
    };
    let config = ModelConfig {
        band_bidirectional: args.bidirectional,
        ..base
    };
    let mut store = WeightStore::init(&config, args.seed)?;
    if args.identity_mask {
        store.set_identity_mask(&config)?;
    }
    save_weights(&args.out, &config, &store).with_context(|| format!("writing {}", args.out.display()))?;
    println!(
        "wrote {} ({} tensors, {} parameters)",
        args.out.display(),
        store.len(),
        store.total_elements()
    );
    Ok(ExitCode::SUCCESS)
}
