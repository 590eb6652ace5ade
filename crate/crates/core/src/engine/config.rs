use serde::{Deserialize, Serialize};

use crate::bands::BandScheme;
use crate::dsp::{check_sample_rate, default_fft_size};
use crate::error::{Error, Result};

/// Hyper-parameters of the model. Serialized verbatim into weight files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub sample_rate: u32,
    pub fft_size: usize,
    pub hop: usize,
    /// Sub-band widths in bins, low to high.
    pub band_widths: Vec<usize>,
    /// Feature channels `N` (also the SAM channel count `C`).
    pub features: usize,
    /// GRU hidden size `H`.
    pub hidden: usize,
    pub mlp_hidden: usize,
    /// Attention width `C1`.
    pub attn_dim: usize,
    /// Speaker embedding length `C2`.
    pub embed_dim: usize,
    pub n_blocks: usize,
    /// Causal conv kernel extent along time.
    pub kt: usize,
    /// Causal conv kernel extent along bands (odd).
    pub kk: usize,
    pub compression: f32,
    /// Weights of the asymmetric magnitude and complex compressed terms.
    pub loss_weights: [f32; 2],
    /// Run the band-axis GRU in both directions.
    #[serde(default)]
    pub band_bidirectional: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::default_for(48_000).expect("48 kHz is supported")
    }
}

impl ModelConfig {
    /// Full-size model at a supported sample rate with 20 ms frames.
    pub fn default_for(sample_rate: u32) -> Result<Self> {
        check_sample_rate(sample_rate)?;
        let fft_size = default_fft_size(sample_rate);
        let scheme = BandScheme::default_for(sample_rate, fft_size)?;
        Ok(Self {
            sample_rate,
            fft_size,
            hop: fft_size / 2,
            band_widths: scheme.widths().to_vec(),
            features: 128,
            hidden: 128,
            mlp_hidden: 512,
            attn_dim: 128,
            embed_dim: 192,
            n_blocks: 6,
            kt: 3,
            kk: 3,
            compression: 0.3,
            loss_weights: [0.3, 0.7],
            band_bidirectional: false,
        })
    }

    /// A small model for tests: 16 kHz, a handful of bands, narrow layers.
    pub fn tiny() -> Self {
        Self {
            sample_rate: 16_000,
            fft_size: 320,
            hop: 160,
            band_widths: vec![8, 8, 16, 32, 48, 49],
            features: 8,
            hidden: 8,
            mlp_hidden: 16,
            attn_dim: 4,
            embed_dim: 192,
            n_blocks: 2,
            kt: 3,
            kk: 3,
            compression: 0.3,
            loss_weights: [0.3, 0.7],
            band_bidirectional: false,
        }
    }

    pub fn num_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn num_bands(&self) -> usize {
        self.band_widths.len()
    }

    pub fn band_directions(&self) -> usize {
        if self.band_bidirectional {
            2
        } else {
            1
        }
    }

    /// Frames per second of audio.
    pub fn frame_rate(&self) -> f64 {
        self.sample_rate as f64 / self.hop as f64
    }

    /// Algorithmic latency in samples.
    pub fn latency(&self) -> usize {
        self.fft_size - self.hop
    }

    pub fn scheme(&self) -> Result<BandScheme> {
        BandScheme::new(self.band_widths.clone(), self.num_bins())
    }

    pub fn validate(&self) -> Result<()> {
        check_sample_rate(self.sample_rate)?;
        if self.fft_size < 2 || !self.fft_size.is_multiple_of(2) || self.hop != self.fft_size / 2 {
            return Err(Error::config(format!(
                "need an even fft_size and hop = fft_size/2, got fft_size={} hop={}",
                self.fft_size, self.hop
            )));
        }
        for (name, v) in [
            ("features", self.features),
            ("hidden", self.hidden),
            ("mlp_hidden", self.mlp_hidden),
            ("attn_dim", self.attn_dim),
            ("embed_dim", self.embed_dim),
            ("n_blocks", self.n_blocks),
            ("kt", self.kt),
            ("kk", self.kk),
        ] {
            if v == 0 {
                return Err(Error::config(format!("{name} must be positive")));
            }
        }
        if self.kk.is_multiple_of(2) {
            return Err(Error::config(format!("kk must be odd, got {}", self.kk)));
        }
        if !(self.compression > 0.0 && self.compression <= 1.0) {
            return Err(Error::config(format!(
                "compression must be in (0, 1], got {}",
                self.compression
            )));
        }
        if self.loss_weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::config("loss weights must be finite and non-negative"));
        }
        self.scheme().map(|_| ())
    }
}
