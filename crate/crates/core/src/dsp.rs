//! Causal STFT/iSTFT with a square-root Hann window at 50% overlap, and
//! power-law magnitude compression.
//!
//! Framing: the signal is preceded by `fft_size - hop` zeros and right-padded
//! to whole hops, giving `ceil(len / hop) + 1` frames. Frame `t` ends at
//! sample `t * hop + hop - 1`, so it never sees later input.

use std::sync::Arc;

use num_complex::Complex32;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};

use crate::error::{Error, Result};

pub const SUPPORTED_SAMPLE_RATES: [u32; 2] = [16_000, 48_000];

/// Frame length in samples (20 ms).
pub fn default_fft_size(sample_rate: u32) -> usize {
    (sample_rate as usize) / 50
}

pub fn check_sample_rate(sample_rate: u32) -> Result<()> {
    if SUPPORTED_SAMPLE_RATES.contains(&sample_rate) {
        Ok(())
    } else {
        Err(Error::config(format!(
            "unsupported sample rate {sample_rate} Hz (expected 16000 or 48000)"
        )))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Result<Self> {
        check_sample_rate(sample_rate)?;
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("sample {i} is not finite")));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn silence(len: usize, sample_rate: u32) -> Self {
        Self {
            samples: vec![0.0; len],
            sample_rate,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn rms(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        (self.samples.iter().map(|&v| (v as f64).powi(2)).sum::<f64>() / self.samples.len() as f64).sqrt()
    }
}

/// `frames x bins` complex matrix, frame-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexSpectrogram {
    frames: usize,
    bins: usize,
    pub data: Vec<Complex32>,
    pub sample_rate: u32,
    pub fft_size: usize,
    pub hop: usize,
}

impl ComplexSpectrogram {
    pub fn zeros(frames: usize, sample_rate: u32, fft_size: usize) -> Self {
        let bins = fft_size / 2 + 1;
        Self {
            frames,
            bins,
            data: vec![Complex32::new(0.0, 0.0); frames * bins],
            sample_rate,
            fft_size,
            hop: fft_size / 2,
        }
    }

    pub fn from_data(data: Vec<Complex32>, frames: usize, sample_rate: u32, fft_size: usize) -> Result<Self> {
        let mut s = Self::zeros(frames, sample_rate, fft_size);
        if data.len() != s.data.len() {
            return Err(Error::dim(format!(
                "{} values for a {frames} x {} spectrogram",
                data.len(),
                s.bins
            )));
        }
        s.data = data;
        Ok(s)
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn get(&self, t: usize, f: usize) -> Complex32 {
        self.data[t * self.bins + f]
    }

    pub fn frame(&self, t: usize) -> &[Complex32] {
        &self.data[t * self.bins..(t + 1) * self.bins]
    }

    pub fn frame_mut(&mut self, t: usize) -> &mut [Complex32] {
        &mut self.data[t * self.bins..(t + 1) * self.bins]
    }

    pub fn same_layout(&self, other: &Self) -> bool {
        self.frames == other.frames && self.bins == other.bins
    }
}

/// `sin(pi n / N)`, the square root of the periodic Hann window.
pub fn sqrt_hann(n: usize) -> Vec<f32> {
    (0..n)
        .map(|i| (std::f64::consts::PI * i as f64 / n as f64).sin() as f32)
        .collect()
}

/// Reusable per-frame analysis/synthesis with cached FFT plans.
pub struct FrameTransform {
    fft_size: usize,
    window: Vec<f32>,
    forward: Arc<dyn RealToComplex<f32>>,
    inverse: Arc<dyn ComplexToReal<f32>>,
    time_buf: Vec<f32>,
    freq_buf: Vec<Complex32>,
    fwd_scratch: Vec<Complex32>,
    inv_scratch: Vec<Complex32>,
}

impl FrameTransform {
    pub fn new(fft_size: usize) -> Self {
        let mut planner = RealFftPlanner::<f32>::new();
        let forward = planner.plan_fft_forward(fft_size);
        let inverse = planner.plan_fft_inverse(fft_size);
        Self {
            fft_size,
            window: sqrt_hann(fft_size),
            time_buf: vec![0.0; fft_size],
            freq_buf: vec![Complex32::new(0.0, 0.0); fft_size / 2 + 1],
            fwd_scratch: forward.make_scratch_vec(),
            inv_scratch: inverse.make_scratch_vec(),
            forward,
            inverse,
        }
    }

    pub fn fft_size(&self) -> usize {
        self.fft_size
    }

    /// Windowed forward transform of one `fft_size` frame.
    pub fn analyze(&mut self, frame: &[f32], out: &mut [Complex32]) {
        for ((b, &x), &w) in self.time_buf.iter_mut().zip(frame).zip(&self.window) {
            *b = x * w;
        }
        self.forward
            .process_with_scratch(&mut self.time_buf, out, &mut self.fwd_scratch)
            .expect("forward FFT buffer sizes");
    }

    /// Inverse transform (scaled by `1/N`) followed by the synthesis window.
    /// Imaginary parts at DC and Nyquist are ignored.
    pub fn synthesize(&mut self, spectrum: &[Complex32], out: &mut [f32]) {
        self.freq_buf.copy_from_slice(spectrum);
        let last = self.freq_buf.len() - 1;
        self.freq_buf[0].im = 0.0;
        self.freq_buf[last].im = 0.0;
        self.inverse
            .process_with_scratch(&mut self.freq_buf, out, &mut self.inv_scratch)
            .expect("inverse FFT buffer sizes");
        let scale = 1.0 / self.fft_size as f32;
        for (o, &w) in out.iter_mut().zip(&self.window) {
            *o *= scale * w;
        }
    }
}

fn check_framing(fft_size: usize, hop: usize) -> Result<()> {
    if fft_size < 2 || !fft_size.is_multiple_of(2) {
        return Err(Error::config(format!("fft size must be even, got {fft_size}")));
    }
    if hop != fft_size / 2 {
        return Err(Error::config(format!(
            "hop must be fft_size/2 = {} for overlap-add reconstruction, got {hop}",
            fft_size / 2
        )));
    }
    Ok(())
}

/// Number of frames [`stft`] emits for `len` samples.
pub fn frame_count(len: usize, hop: usize) -> usize {
    len.div_ceil(hop) + 1
}

pub fn stft(x: &Waveform, fft_size: usize, hop: usize) -> Result<ComplexSpectrogram> {
    check_framing(fft_size, hop)?;
    let frames = frame_count(x.len(), hop);
    let lead = fft_size - hop;
    let mut padded = vec![0.0f32; (frames + 1) * hop];
    padded[lead..lead + x.len()].copy_from_slice(&x.samples);
    let mut spec = ComplexSpectrogram::zeros(frames, x.sample_rate, fft_size);
    let mut tf = FrameTransform::new(fft_size);
    for t in 0..frames {
        tf.analyze(&padded[t * hop..t * hop + fft_size], spec.frame_mut(t));
    }
    Ok(spec)
}

/// Overlap-add resynthesis. Returns `(frames - 1) * hop` samples, which covers
/// every input sample of the matching [`stft`]; truncate to the original length.
pub fn istft(s: &ComplexSpectrogram) -> Waveform {
    let (hop, n) = (s.hop, s.fft_size);
    let mut padded = vec![0.0f32; (s.frames() + 1) * hop];
    let mut tf = FrameTransform::new(n);
    let mut frame = vec![0.0f32; n];
    for t in 0..s.frames() {
        tf.synthesize(s.frame(t), &mut frame);
        for (p, &v) in padded[t * hop..t * hop + n].iter_mut().zip(&frame) {
            *p += v;
        }
    }
    let lead = n - hop;
    let len = s.frames().saturating_sub(1) * hop;
    Waveform {
        samples: padded[lead..lead + len].to_vec(),
        sample_rate: s.sample_rate,
    }
}

/// `|z|^c e^{j arg z}`; zero stays zero.
#[inline]
pub fn compress_bin(z: Complex32, c: f32) -> Complex32 {
    let mag = z.norm();
    if mag == 0.0 {
        Complex32::new(0.0, 0.0)
    } else {
        z * mag.powf(c - 1.0)
    }
}

pub fn compress(s: &ComplexSpectrogram, c: f32) -> Result<ComplexSpectrogram> {
    if !(c > 0.0 && c <= 1.0) {
        return Err(Error::config(format!(
            "compression exponent must be in (0, 1], got {c}"
        )));
    }
    let mut out = s.clone();
    out.data.iter_mut().for_each(|z| *z = compress_bin(*z, c));
    Ok(out)
}
