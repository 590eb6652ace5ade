//! Training-data synthesis: enrollment cuts, a stub speaker embedding,
//! synthetic room responses and noisy clip mixing.

mod dataset;
mod embed;
mod rir;

pub use dataset::{clip_from_seed, gen_dataset, read_wav_dir, ClipPaths, DatasetSources, ManifestEntry};
pub use embed::{stub_embed, STUB_EMBED_DIM, STUB_MIN_SECONDS};
pub use rir::{convolve, early_reverb_target, synth_rir, SyntheticRir, EARLY_REVERB_SECONDS};

use serde::{Deserialize, Serialize};

use crate::dsp::Waveform;
use crate::error::{Error, Result};
use crate::numerics::SeededRng;

/// Peak ceiling of a finished mix, -1 dBFS.
pub const PEAK_LIMIT_DBFS: f64 = -1.0;
const SILENCE_RMS: f64 = 1e-6;

/// Mixing distribution. Ranges are `(low, high)` for uniform draws; an SNR
/// range of `(inf, inf)` disables noise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixSpec {
    pub clip_seconds: f64,
    pub snr_db: (f64, f64),
    pub sir_db: (f64, f64),
    pub p_interferer: f64,
    pub p_reverb: f64,
    pub target_level_dbfs: (f64, f64),
    pub t60: (f64, f64),
    pub enroll_seconds: f64,
    pub seed: u64,
}

impl Default for MixSpec {
    fn default() -> Self {
        Self {
            clip_seconds: 4.0,
            snr_db: (-5.0, 15.0),
            sir_db: (-5.0, 15.0),
            p_interferer: 0.5,
            p_reverb: 0.5,
            target_level_dbfs: (-35.0, -15.0),
            t60: (0.2, 0.8),
            enroll_seconds: 2.0,
            seed: 0,
        }
    }
}

impl MixSpec {
    pub fn validate(&self) -> Result<()> {
        let ordered = |(lo, hi): (f64, f64)| !lo.is_nan() && !hi.is_nan() && lo <= hi;
        for (name, r) in [
            ("snr_db", self.snr_db),
            ("sir_db", self.sir_db),
            ("target_level_dbfs", self.target_level_dbfs),
            ("t60", self.t60),
        ] {
            if !ordered(r) {
                return Err(Error::config(format!("{name} range {r:?} is not ordered")));
            }
        }
        let finite = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite();
        if !finite(self.sir_db) || !finite(self.target_level_dbfs) {
            return Err(Error::config("SIR and level ranges must be finite"));
        }
        if self.snr_db.0.is_infinite() != self.snr_db.1.is_infinite() || self.snr_db.0 == f64::NEG_INFINITY {
            return Err(Error::config("SNR range must be finite or (inf, inf)"));
        }
        if self.t60.0 < 0.05 || self.t60.1 > 1.0 {
            return Err(Error::config(format!("T60 range {:?} outside [0.05, 1.0]", self.t60)));
        }
        for (name, p) in [("p_interferer", self.p_interferer), ("p_reverb", self.p_reverb)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::config(format!("{name} = {p} is not a probability")));
            }
        }
        if [self.clip_seconds, self.enroll_seconds]
            .iter()
            .any(|s| s.is_nan() || *s <= 0.0)
        {
            return Err(Error::config("clip and enrollment durations must be positive"));
        }
        Ok(())
    }
}

/// Random draws behind one clip.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixDraws {
    pub level_dbfs: f64,
    /// `None` when noise is disabled.
    pub snr_db: Option<f64>,
    /// `None` without an interferer.
    pub sir_db: Option<f64>,
    pub reverb: bool,
    pub t60: Option<f64>,
    /// Gain applied by the final peak limiter (1 when not needed).
    pub peak_gain: f64,
}

/// A mixed clip, its training reference, and the scaled components that sum
/// to `noisy`.
#[derive(Clone, Debug, PartialEq)]
pub struct MixedClip {
    pub noisy: Waveform,
    pub target_ref: Waveform,
    pub enrollment: Waveform,
    /// Target as it appears in the mix (reverberant when reverb was drawn).
    pub target_mix: Waveform,
    pub interference: Waveform,
    pub noise: Waveform,
    pub draws: MixDraws,
}

/// A random contiguous `seconds`-long segment.
pub fn cut_enrollment(speech: &Waveform, seconds: f64, rng: &mut SeededRng) -> Result<Waveform> {
    let n = (seconds * speech.sample_rate as f64).round() as usize;
    if n == 0 || n > speech.len() {
        return Err(Error::Usage(format!(
            "cannot cut {seconds} s from {:.3} s of audio",
            speech.duration_secs()
        )));
    }
    let offset = rng.below(speech.len() - n + 1);
    Ok(Waveform {
        samples: speech.samples[offset..offset + n].to_vec(),
        sample_rate: speech.sample_rate,
    })
}

/// Random segment of `n` samples, looping the source when it is shorter.
fn fit(source: &Waveform, n: usize, rng: &mut SeededRng) -> Result<Vec<f32>> {
    if source.is_empty() {
        return Err(Error::Usage("empty source signal".into()));
    }
    if source.len() >= n {
        return Ok(cut_enrollment(source, n as f64 / source.sample_rate as f64, rng)?.samples);
    }
    Ok(source.samples.iter().cycle().take(n).copied().collect())
}

pub(crate) fn rms(x: &[f32]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|&v| (v as f64).powi(2)).sum::<f64>() / x.len() as f64).sqrt()
}

fn scaled(x: &[f32], g: f64) -> Vec<f32> {
    x.iter().map(|&v| (v as f64 * g) as f32).collect()
}

fn db_to_gain(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}

/// Mixes one clip. Draw order is fixed, so the clip is a pure function of
/// the inputs and the generator state.
pub fn mix_clip(
    target: &Waveform,
    interferer: Option<&Waveform>,
    noise: &Waveform,
    spec: &MixSpec,
    rng: &mut SeededRng,
) -> Result<MixedClip> {
    spec.validate()?;
    let sr = target.sample_rate;
    for other in interferer.into_iter().chain(std::iter::once(noise)) {
        if other.sample_rate != sr {
            return Err(Error::config(format!(
                "source at {} Hz mixed with a {sr} Hz target",
                other.sample_rate
            )));
        }
    }
    let n = (spec.clip_seconds * sr as f64).round() as usize;

    let segment = fit(target, n, rng)?;
    let seg_rms = rms(&segment);
    if seg_rms < SILENCE_RMS {
        return Err(Error::Usage(format!("target segment is silent (RMS {seg_rms:.2e})")));
    }
    let level_dbfs = rng.uniform(spec.target_level_dbfs.0, spec.target_level_dbfs.1);
    let dry = scaled(&segment, db_to_gain(level_dbfs) / seg_rms);

    let reverb = rng.bernoulli(spec.p_reverb);
    let (target_mix, mut target_ref, t60) = if reverb {
        let t60 = rng.uniform(spec.t60.0, spec.t60.1);
        let rir = synth_rir(t60, sr, rng)?;
        let wet = convolve(&dry, &rir.samples, n);
        let dry_wave = Waveform {
            samples: dry.clone(),
            sample_rate: sr,
        };
        (wet, early_reverb_target(&dry_wave, &rir).samples, Some(t60))
    } else {
        (dry.clone(), dry, None)
    };
    let mix_rms = rms(&target_mix);

    let use_interferer = rng.bernoulli(spec.p_interferer);
    let sir_draw = rng.uniform(spec.sir_db.0, spec.sir_db.1);
    let (mut interference, sir_db) = match interferer {
        Some(src) if use_interferer => {
            let seg = fit(src, n, rng)?;
            let r = rms(&seg);
            if r < SILENCE_RMS {
                return Err(Error::Usage("interferer segment is silent".into()));
            }
            (scaled(&seg, mix_rms / db_to_gain(sir_draw) / r), Some(sir_draw))
        }
        _ => (vec![0.0; n], None),
    };

    let snr_draw = rng.uniform(spec.snr_db.0, spec.snr_db.1);
    let (mut noise_part, snr_db) = if snr_draw.is_finite() {
        let seg = fit(noise, n, rng)?;
        let r = rms(&seg);
        if r < SILENCE_RMS {
            return Err(Error::Usage("noise segment is silent".into()));
        }
        (scaled(&seg, mix_rms / db_to_gain(snr_draw) / r), Some(snr_draw))
    } else {
        (vec![0.0; n], None)
    };

    let mut target_mix = target_mix;
    let mut noisy: Vec<f32> = (0..n)
        .map(|i| target_mix[i] + interference[i] + noise_part[i])
        .collect();
    let peak = noisy.iter().fold(0.0f32, |m, v| m.max(v.abs())) as f64;
    let limit = db_to_gain(PEAK_LIMIT_DBFS);
    let peak_gain = if peak > limit { limit / peak } else { 1.0 };
    if peak_gain != 1.0 {
        for buf in [
            &mut noisy,
            &mut target_ref,
            &mut target_mix,
            &mut interference,
            &mut noise_part,
        ] {
            *buf = scaled(buf, peak_gain);
        }
    }

    let enroll_n = (spec.enroll_seconds * sr as f64).round() as usize;
    let enrollment = fit(target, enroll_n, rng)?;

    let wave = |samples: Vec<f32>| Waveform {
        samples,
        sample_rate: sr,
    };
    Ok(MixedClip {
        noisy: wave(noisy),
        target_ref: wave(target_ref),
        enrollment: wave(enrollment),
        target_mix: wave(target_mix),
        interference: wave(interference),
        noise: wave(noise_part),
        draws: MixDraws {
            level_dbfs,
            snr_db,
            sir_db,
            reverb,
            t60,
            peak_gain,
        },
    })
}
