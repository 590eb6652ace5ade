use std::process::ExitCode;

use anyhow::{Context, Result};
use pbsrnn::mixer::{gen_dataset, read_wav_dir, DatasetSources, MixSpec};

use crate::cli::MixArgs;
use crate::UsageError;

pub fn run(args: MixArgs) -> Result<ExitCode> {
    if args.clips == 0 {
        return Err(UsageError("--clips must be positive".into()).into());
    }
    let spec = MixSpec {
        clip_seconds: args.clip_seconds,
        enroll_seconds: args.enroll_seconds,
        seed: args.seed,
        ..MixSpec::default()
    };
    spec.validate()?;
    let sources = DatasetSources {
        clean: read_wav_dir(&args.clean_dir).with_context(|| format!("reading {}", args.clean_dir.display()))?,
        noise: read_wav_dir(&args.noise_dir).with_context(|| format!("reading {}", args.noise_dir.display()))?,
    };
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let manifest = gen_dataset(&args.out, &sources, &spec, args.clips)?;
    println!(
        "mixed {} clip(s) from {} clean and {} noise file(s); manifest {}",
        args.clips,
        sources.clean.len(),
        sources.noise.len(),
        manifest.display()
    );
    Ok(ExitCode::SUCCESS)
}
