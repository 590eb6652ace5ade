use std::path::Path;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use pbsrnn::mixer::stub_embed;
use pbsrnn::wav::{read_wav, write_wav, WavEncoding};
use pbsrnn::SpeakerEmbedding;

use super::load_engine;
use crate::cli::{Encoding, EnhanceArgs};
use crate::UsageError;

/// Raw little-endian float32 values, no header.
fn read_embedding(path: &Path, expected: usize) -> Result<SpeakerEmbedding> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    if bytes.len() != 4 * expected {
        bail!(
            "{}: embedding file has {} bytes, expected {} ({expected} float32 values)",
            path.display(),
            bytes.len(),
            4 * expected
        );
    }
    let values = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
        .collect();
    Ok(SpeakerEmbedding::new(values)?)
}

pub fn run(args: EnhanceArgs) -> Result<ExitCode> {
    let (config, engine) = load_engine(&args.weights)?;
    let embedding = match (&args.enroll, &args.embedding) {
        (Some(enroll), None) => {
            let speech = read_wav(enroll).with_context(|| format!("reading enrollment {}", enroll.display()))?;
            let e = stub_embed(&speech)?;
            if e.len() != config.embed_dim {
                bail!(
                    "the stub extractor yields {} values but the model expects {}; pass --embedding",
                    e.len(),
                    config.embed_dim
                );
            }
            e
        }
        (None, Some(path)) => read_embedding(path, config.embed_dim)?,
        _ => return Err(UsageError("pass exactly one of --enroll and --embedding".into()).into()),
    };
    let input = read_wav(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let output = if args.stream {
        engine.enhance_streaming(&input, &embedding)?
    } else {
        engine.enhance_offline(&input, &embedding)?
    };
    let encoding = match args.encoding {
        Encoding::Float32 => WavEncoding::Float32,
        Encoding::Pcm16 => WavEncoding::Pcm16,
    };
    write_wav(&args.out, &output, encoding).with_context(|| format!("writing {}", args.out.display()))?;
    println!(
        "enhanced {:.2} s ({} path) -> {}",
        input.duration_secs(),
        if args.stream { "streaming" } else { "offline" },
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}
