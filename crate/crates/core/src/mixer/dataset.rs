use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{mix_clip, MixSpec, MixedClip};
use crate::dsp::Waveform;
use crate::error::{Error, Result};
use crate::numerics::SeededRng;
use crate::wav::{read_wav, write_wav, WavEncoding};

pub const MANIFEST_NAME: &str = "manifest.json";

/// Speech and noise pools to draw clips from.
#[derive(Clone, Debug, Default)]
pub struct DatasetSources {
    pub clean: Vec<Waveform>,
    pub noise: Vec<Waveform>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClipPaths {
    pub noisy: String,
    pub target: String,
    pub enroll: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub clip_id: usize,
    pub seed: u64,
    /// `None` when noise is disabled.
    pub snr_db: Option<f64>,
    pub sir_db: Option<f64>,
    pub reverb: bool,
    pub t60: Option<f64>,
    /// Relative to the manifest's directory.
    pub paths: ClipPaths,
}

/// Every `.wav` file in `dir`, sorted by name.
pub fn read_wav_dir(dir: impl AsRef<Path>) -> Result<Vec<Waveform>> {
    let dir = dir.as_ref();
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext.eq_ignore_ascii_case("wav")))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Usage(format!("no .wav files in {}", dir.display())));
    }
    paths.iter().map(read_wav).collect()
}

/// The clip a dataset generator produces for `seed`: the seed picks the
/// target, an interferer (a different clean source when available) and a
/// noise, then drives [`mix_clip`].
pub fn clip_from_seed(sources: &DatasetSources, spec: &MixSpec, seed: u64) -> Result<MixedClip> {
    if sources.clean.is_empty() || sources.noise.is_empty() {
        return Err(Error::Usage("need at least one clean and one noise source".into()));
    }
    let mut rng = SeededRng::new(seed);
    let n_clean = sources.clean.len();
    let target = rng.below(n_clean);
    let interferer = if n_clean > 1 {
        let pick = rng.below(n_clean - 1);
        Some(&sources.clean[if pick >= target { pick + 1 } else { pick }])
    } else {
        None
    };
    let noise = &sources.noise[rng.below(sources.noise.len())];
    mix_clip(&sources.clean[target], interferer, noise, spec, &mut rng)
}

/// Writes `n_clips` (noisy, target, enrollment) float WAV triples and a JSON
/// manifest into `dir_out`; returns the manifest path. Clip `i` uses the
/// seed `derive_seed(spec.seed, i)`.
pub fn gen_dataset(
    dir_out: impl AsRef<Path>,
    sources: &DatasetSources,
    spec: &MixSpec,
    n_clips: usize,
) -> Result<PathBuf> {
    let dir = dir_out.as_ref();
    spec.validate()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = Vec::with_capacity(n_clips);
    for clip_id in 0..n_clips {
        let seed = SeededRng::derive_seed(spec.seed, clip_id as u64);
        let clip = clip_from_seed(sources, spec, seed)?;
        let paths = ClipPaths {
            noisy: format!("clip{clip_id:05}_noisy.wav"),
            target: format!("clip{clip_id:05}_target.wav"),
            enroll: format!("clip{clip_id:05}_enroll.wav"),
        };
        write_wav(dir.join(&paths.noisy), &clip.noisy, WavEncoding::Float32)?;
        write_wav(dir.join(&paths.target), &clip.target_ref, WavEncoding::Float32)?;
        write_wav(dir.join(&paths.enroll), &clip.enrollment, WavEncoding::Float32)?;
        manifest.push(ManifestEntry {
            clip_id,
            seed,
            snr_db: clip.draws.snr_db,
            sir_db: clip.draws.sir_db,
            reverb: clip.draws.reverb,
            t60: clip.draws.t60,
            paths,
        });
    }
    let path = dir.join(MANIFEST_NAME);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wav::read_wav;

    fn sources() -> DatasetSources {
        let wave = |seed: u64, f: f64| {
            let mut rng = SeededRng::new(seed);
            Waveform::new(
                (0..12_000)
                    .map(|i| ((i as f64 * f).sin() * 0.4 + rng.uniform(-0.05, 0.05)) as f32)
                    .collect(),
                16_000,
            )
            .unwrap()
        };
        DatasetSources {
            clean: vec![wave(1, 0.02), wave(2, 0.05)],
            noise: vec![wave(3, 0.3)],
        }
    }

    #[test]
    fn writes_triples_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let spec = MixSpec {
            clip_seconds: 0.5,
            enroll_seconds: 0.5,
            seed: 42,
            ..MixSpec::default()
        };
        let path = gen_dataset(dir.path(), &sources(), &spec, 3).unwrap();
        let wavs = fs::read_dir(dir.path())
            .unwrap()
            .filter(|e| e.as_ref().unwrap().path().extension().unwrap() == "wav")
            .count();
        assert_eq!(wavs, 9);
        let manifest: Vec<ManifestEntry> = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
        assert_eq!(manifest.len(), 3);
        for entry in &manifest {
            let noisy = read_wav(dir.path().join(&entry.paths.noisy)).unwrap();
            assert_eq!(noisy.len(), 8000);
            let again = clip_from_seed(&sources(), &spec, entry.seed).unwrap();
            assert_eq!(again.noisy, noisy);
            assert_eq!(
                again.target_ref,
                read_wav(dir.path().join(&entry.paths.target)).unwrap()
            );
            assert_eq!(
                again.enrollment,
                read_wav(dir.path().join(&entry.paths.enroll)).unwrap()
            );
        }
    }

    #[test]
    fn empty_directory_is_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(read_wav_dir(dir.path()), Err(Error::Usage(_))));
    }
}
