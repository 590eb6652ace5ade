use crate::attention::SpeakerEmbedding;
use crate::dsp::{default_fft_size, stft, Waveform};
use crate::error::{Error, Result};
use crate::numerics::SeededRng;

pub const STUB_EMBED_DIM: usize = 192;
pub const STUB_MIN_SECONDS: f64 = 0.5;
const PROJECTION_SEED: u64 = 0x0E3B_ED00;
const LOG_FLOOR: f32 = 1e-5;

/// Deterministic stand-in for a speaker-verification network.
///
/// Per-bin mean and standard deviation of the log-magnitude spectrogram are
/// projected to 192 values by a fixed random matrix and L2-normalized.
pub fn stub_embed(speech: &Waveform) -> Result<SpeakerEmbedding> {
    if speech.duration_secs() < STUB_MIN_SECONDS {
        return Err(Error::Usage(format!(
            "enrollment needs at least {STUB_MIN_SECONDS} s of audio, got {:.3} s",
            speech.duration_secs()
        )));
    }
    let fft = default_fft_size(speech.sample_rate);
    let spec = stft(speech, fft, fft / 2)?;
    let (frames, bins) = (spec.frames(), spec.bins());
    let mut mean = vec![0.0f64; bins];
    let mut sq = vec![0.0f64; bins];
    for t in 0..frames {
        for (f, z) in spec.frame(t).iter().enumerate() {
            let v = (z.norm() + LOG_FLOOR).ln() as f64;
            mean[f] += v;
            sq[f] += v * v;
        }
    }
    let n = frames as f64;
    let mut stats = Vec::with_capacity(2 * bins);
    stats.extend(mean.iter().map(|m| m / n));
    stats.extend(
        mean.iter()
            .zip(&sq)
            .map(|(m, s)| (s / n - (m / n).powi(2)).max(0.0).sqrt()),
    );

    let mut rng = SeededRng::new(PROJECTION_SEED ^ bins as u64);
    let scale = 1.0 / (stats.len() as f64).sqrt();
    let mut out = vec![0.0f64; STUB_EMBED_DIM];
    for &s in &stats {
        for o in out.iter_mut() {
            *o += s * rng.normal() * scale;
        }
    }
    let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::Numeric("degenerate enrollment statistics".into()));
    }
    SpeakerEmbedding::new(out.iter().map(|v| (v / norm) as f32).collect())
}
