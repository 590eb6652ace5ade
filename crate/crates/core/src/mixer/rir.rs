use realfft::RealFftPlanner;

use crate::dsp::Waveform;
use crate::error::{Error, Result};
use crate::numerics::SeededRng;

/// Amplitude of the diffuse tail relative to the direct path.
const TAIL_GAIN: f64 = 0.3;
/// Length of the early part kept in the training reference.
pub const EARLY_REVERB_SECONDS: f64 = 0.05;

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticRir {
    pub samples: Vec<f32>,
    pub direct_index: usize,
    pub t60: f64,
    pub sample_rate: u32,
}

impl SyntheticRir {
    /// Taps that make up the early reverberation.
    pub fn early_len(&self) -> usize {
        let window = (EARLY_REVERB_SECONDS * self.sample_rate as f64).round() as usize;
        (self.direct_index + window + 1).min(self.samples.len())
    }
}

/// Unit direct path followed by an exponentially decaying noise tail:
/// `r[n] = delta[n] + 0.3 w[n] exp(-6.9 n / (t60 sr))`, `w ~ U(-1, 1)`.
pub fn synth_rir(t60: f64, sample_rate: u32, rng: &mut SeededRng) -> Result<SyntheticRir> {
    if !(0.05..=1.0).contains(&t60) {
        return Err(Error::config(format!("T60 must be within [0.05, 1.0] s, got {t60}")));
    }
    let decay = t60 * sample_rate as f64;
    let len = decay.round() as usize + 1;
    let mut samples = Vec::with_capacity(len);
    samples.push(1.0);
    for n in 1..len {
        let w = rng.uniform(-1.0, 1.0);
        samples.push((TAIL_GAIN * w * (-6.9 * n as f64 / decay).exp()) as f32);
    }
    Ok(SyntheticRir {
        samples,
        direct_index: 0,
        t60,
        sample_rate,
    })
}

/// Linear convolution truncated to `out_len` samples, via FFT in f64.
pub fn convolve(x: &[f32], h: &[f32], out_len: usize) -> Vec<f32> {
    if x.is_empty() || h.is_empty() {
        return vec![0.0; out_len];
    }
    let n = (x.len() + h.len() - 1).next_power_of_two();
    let mut planner = RealFftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let spectrum = |v: &[f32]| {
        let mut buf = vec![0.0f64; n];
        buf.iter_mut().zip(v).for_each(|(b, &s)| *b = s as f64);
        let mut out = fwd.make_output_vec();
        fwd.process(&mut buf, &mut out).expect("fft sizes");
        out
    };
    let (a, b) = (spectrum(x), spectrum(h));
    let mut prod: Vec<_> = a.iter().zip(&b).map(|(p, q)| p * q).collect();
    let mut time = inv.make_output_vec();
    inv.process(&mut prod, &mut time).expect("fft sizes");
    let scale = 1.0 / n as f64;
    let mut out: Vec<f32> = time.iter().take(out_len).map(|v| (v * scale) as f32).collect();
    out.resize(out_len, 0.0);
    out
}

/// `clean` convolved with the first 50 ms of `rir` after its direct path.
/// Output length equals input length.
pub fn early_reverb_target(clean: &Waveform, rir: &SyntheticRir) -> Waveform {
    Waveform {
        samples: convolve(&clean.samples, &rir.samples[..rir.early_len()], clean.len()),
        sample_rate: clean.sample_rate,
    }
}
