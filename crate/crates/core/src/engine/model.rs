use std::time::Instant;

use num_complex::Complex32;

use super::config::ModelConfig;
use super::stream::ModuleTimings;
use super::weights::WeightStore;
use crate::attention::{DepthwiseStage, PointwiseStage, SamWeights, SpeakerEmbedding};
use crate::backbone::{band_frames, temporal_frames, BandRnnWeights, DprnnBlockWeights, TemporalWeights};
use crate::bands::{merge_rows, split_rows, BandMergeWeights, BandScheme, BandSplitWeights, MergeBand, SplitBand};
use crate::dsp::{istft, stft, ComplexSpectrogram, Waveform};
use crate::error::{Error, Result};
use crate::numerics::{BatchNorm, CausalDepthwise, GruWeights, LayerNorm, Linear, NORM_EPS};

/// One DPRNN block and the speaker attention that follows it.
#[derive(Clone, Debug, PartialEq)]
pub struct EngineBlock {
    pub dprnn: DprnnBlockWeights,
    pub sam: SamWeights,
}

/// Immutable inference engine. Share it freely; give each stream its own
/// [`StreamState`](super::StreamState).
#[derive(Clone, Debug)]
pub struct Engine {
    config: ModelConfig,
    scheme: BandScheme,
    split: BandSplitWeights,
    blocks: Vec<EngineBlock>,
    merge: BandMergeWeights,
}

/// Recurrent and convolutional context carried between calls of
/// [`Engine::infer_frames`].
pub(crate) struct FrameContext {
    /// Per block, `K x H` temporal GRU state.
    pub temporal: Vec<Vec<f32>>,
    /// Per block, the last `kt - 1` SAM inputs (`frames x K x N`).
    pub sam_history: Vec<Vec<f32>>,
}

struct Reader<'a>(&'a WeightStore);

impl Reader<'_> {
    fn vec(&self, name: &str) -> Vec<f32> {
        self.0.get(name).expect("validated store").data().to_vec()
    }

    fn linear(&self, prefix: &str) -> Result<Linear> {
        let w = self.0.get(&format!("{prefix}/weight")).expect("validated store");
        Linear::new(
            w.shape()[1],
            w.shape()[0],
            w.data().to_vec(),
            Some(self.vec(&format!("{prefix}/bias"))),
        )
    }

    fn batch_norm(&self, prefix: &str) -> BatchNorm {
        BatchNorm {
            mean: self.vec(&format!("{prefix}/mean")),
            var: self.vec(&format!("{prefix}/var")),
            gamma: self.vec(&format!("{prefix}/weight")),
            beta: self.vec(&format!("{prefix}/bias")),
            eps: NORM_EPS,
        }
    }

    fn layer_norm(&self, prefix: &str) -> LayerNorm {
        LayerNorm {
            gamma: self.vec(&format!("{prefix}/weight")),
            beta: self.vec(&format!("{prefix}/bias")),
            eps: NORM_EPS,
        }
    }

    fn gru(&self, prefix: &str, suffix: &str, input: usize, hidden: usize) -> Result<GruWeights> {
        GruWeights::new(
            input,
            hidden,
            self.vec(&format!("{prefix}/weight_ih{suffix}")),
            self.vec(&format!("{prefix}/weight_hh{suffix}")),
            self.vec(&format!("{prefix}/bias_ih{suffix}")),
            self.vec(&format!("{prefix}/bias_hh{suffix}")),
        )
    }

    fn pointwise(&self, prefix: &str) -> Result<PointwiseStage> {
        Ok(PointwiseStage {
            fc: self.linear(prefix)?,
            norm: self.batch_norm(&format!("{prefix}/norm")),
            prelu: self.vec(&format!("{prefix}/prelu")),
        })
    }
}

impl Engine {
    /// Validates `store` against `config` and assembles the engine.
    pub fn from_store(config: &ModelConfig, store: &WeightStore) -> Result<Self> {
        config.validate()?;
        store.validate(config)?;
        let scheme = config.scheme()?;
        let (n, h) = (config.features, config.hidden);
        let r = Reader(store);

        let split = BandSplitWeights {
            bands: (0..scheme.num_bands())
                .map(|j| {
                    Ok(SplitBand {
                        norm: r.batch_norm(&format!("split/band{j}/norm")),
                        fc: r.linear(&format!("split/band{j}/fc"))?,
                    })
                })
                .collect::<Result<_>>()?,
        };
        split.validate(&scheme, n)?;

        let mut blocks = Vec::with_capacity(config.n_blocks);
        for i in 0..config.n_blocks {
            let p = format!("block{i}");
            let dprnn = DprnnBlockWeights {
                temporal: TemporalWeights {
                    norm: r.layer_norm(&format!("{p}/temporal/norm")),
                    gru: r.gru(&format!("{p}/temporal/gru"), "", n, h)?,
                    fc: r.linear(&format!("{p}/temporal/fc"))?,
                },
                band: BandRnnWeights {
                    norm: r.layer_norm(&format!("{p}/band/norm")),
                    forward: r.gru(&format!("{p}/band/gru"), "", n, h)?,
                    backward: if config.band_bidirectional {
                        Some(r.gru(&format!("{p}/band/gru"), "_reverse", n, h)?)
                    } else {
                        None
                    },
                    fc: r.linear(&format!("{p}/band/fc"))?,
                },
            };
            dprnn.validate(&p)?;
            let dw = store.get(&format!("{p}/sam/conv0_dw/weight")).expect("validated store");
            let sam = SamWeights {
                fc: r.linear(&format!("{p}/sam/fc"))?,
                conv0_dw: DepthwiseStage {
                    conv: CausalDepthwise::new(dw)?,
                    norm: r.batch_norm(&format!("{p}/sam/conv0_dw/norm")),
                    prelu: r.vec(&format!("{p}/sam/conv0_dw/prelu")),
                },
                conv0_pw: r.pointwise(&format!("{p}/sam/conv0_pw"))?,
                conv1: r.pointwise(&format!("{p}/sam/conv1"))?,
            };
            sam.validate(&format!("{p}/sam"))?;
            blocks.push(EngineBlock { dprnn, sam });
        }

        let merge = BandMergeWeights {
            bands: (0..scheme.num_bands())
                .map(|j| {
                    Ok(MergeBand {
                        norm: r.layer_norm(&format!("merge/band{j}/norm")),
                        fc1: r.linear(&format!("merge/band{j}/fc1"))?,
                        fc2: r.linear(&format!("merge/band{j}/fc2"))?,
                    })
                })
                .collect::<Result<_>>()?,
        };
        merge.validate(&scheme, n)?;

        Ok(Self {
            config: config.clone(),
            scheme,
            split,
            blocks,
            merge,
        })
    }

    /// Freshly initialized weights and the engine running them.
    pub fn build(config: &ModelConfig, seed: u64) -> Result<(WeightStore, Self)> {
        let store = WeightStore::init(config, seed)?;
        let engine = Self::from_store(config, &store)?;
        Ok((store, engine))
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn scheme(&self) -> &BandScheme {
        &self.scheme
    }

    pub fn blocks(&self) -> &[EngineBlock] {
        &self.blocks
    }

    pub fn split_weights(&self) -> &BandSplitWeights {
        &self.split
    }

    pub fn merge_weights(&self) -> &BandMergeWeights {
        &self.merge
    }

    pub(crate) fn check_inputs(&self, sample_rate: u32, e: &SpeakerEmbedding) -> Result<()> {
        if sample_rate != self.config.sample_rate {
            return Err(Error::config(format!(
                "input is {sample_rate} Hz but the model runs at {} Hz",
                self.config.sample_rate
            )));
        }
        if e.len() != self.config.embed_dim {
            return Err(Error::dim(format!(
                "speaker embedding has length {}, expected {}",
                e.len(),
                self.config.embed_dim
            )));
        }
        Ok(())
    }

    /// SAM key of every block for one embedding.
    pub(crate) fn keys(&self, e: &SpeakerEmbedding) -> Vec<Vec<f32>> {
        self.blocks.iter().map(|b| b.sam.key(e.as_slice())).collect()
    }

    pub(crate) fn fresh_context(&self) -> FrameContext {
        let (k, n) = (self.scheme.num_bands(), self.config.features);
        FrameContext {
            temporal: vec![vec![0.0; k * self.config.hidden]; self.blocks.len()],
            sam_history: vec![vec![0.0; (self.config.kt - 1) * k * n]; self.blocks.len()],
        }
    }

    /// Complex mask for `rows` consecutive spectrum frames, advancing `ctx`.
    pub(crate) fn infer_frames(
        &self,
        spectrum: &[Complex32],
        rows: usize,
        keys: &[Vec<f32>],
        ctx: &mut FrameContext,
        mask: &mut [Complex32],
        mut timings: Option<&mut ModuleTimings>,
    ) {
        let (k, n) = (self.scheme.num_bands(), self.config.features);
        let mut clock = Instant::now();
        let mut lap = |slot: fn(&mut ModuleTimings) -> &mut std::time::Duration, t: &mut Option<&mut ModuleTimings>| {
            if let Some(t) = t.as_deref_mut() {
                let now = Instant::now();
                *slot(t) += now - clock;
                clock = now;
            }
        };

        let mut x = vec![0.0; rows * k * n];
        split_rows(spectrum, rows, &self.scheme, &self.split, &mut x);
        lap(|t| &mut t.band_split, &mut timings);
        for (i, block) in self.blocks.iter().enumerate() {
            temporal_frames(&mut x, rows, k, &block.dprnn.temporal, &mut ctx.temporal[i]);
            lap(|t| &mut t.temporal, &mut timings);
            band_frames(&mut x, rows, k, &block.dprnn.band);
            lap(|t| &mut t.band, &mut timings);
            let history = &mut ctx.sam_history[i];
            let mut next_history = Vec::new();
            if !history.is_empty() {
                let mut window = Vec::with_capacity(history.len() + x.len());
                window.extend_from_slice(history);
                window.extend_from_slice(&x);
                next_history = window[window.len() - history.len()..].to_vec();
            }
            block.sam.forward_frames(history, &mut x, rows, k, &keys[i]);
            *history = next_history;
            lap(|t| &mut t.sam, &mut timings);
        }
        merge_rows(&x, rows, &self.scheme, &self.merge, mask);
        lap(|t| &mut t.band_merge, &mut timings);
    }

    /// Enhances a whole recording. Output length equals input length.
    pub fn enhance_offline(&self, x: &Waveform, e: &SpeakerEmbedding) -> Result<Waveform> {
        self.check_inputs(x.sample_rate, e)?;
        let spec = stft(x, self.config.fft_size, self.config.hop)?;
        let masked = self.enhance_spectrogram(&spec, e)?;
        let mut y = istft(&masked);
        y.samples.truncate(x.len());
        Ok(y)
    }

    /// Applies the estimated mask to a spectrogram from [`stft`].
    pub fn enhance_spectrogram(&self, spec: &ComplexSpectrogram, e: &SpeakerEmbedding) -> Result<ComplexSpectrogram> {
        self.check_inputs(spec.sample_rate, e)?;
        if spec.bins() != self.scheme.num_bins() || spec.fft_size != self.config.fft_size {
            return Err(Error::dim(format!(
                "spectrogram has {} bins, model expects {}",
                spec.bins(),
                self.scheme.num_bins()
            )));
        }
        let rows = spec.frames();
        let mut mask = vec![Complex32::new(0.0, 0.0); spec.data.len()];
        let mut ctx = self.fresh_context();
        self.infer_frames(&spec.data, rows, &self.keys(e), &mut ctx, &mut mask, None);
        let mut out = spec.clone();
        out.data.iter_mut().zip(&mask).for_each(|(z, m)| *z *= m);
        Ok(out)
    }
}
