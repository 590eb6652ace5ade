use std::time::{Duration, Instant};

use num_complex::Complex32;

use super::model::{Engine, FrameContext};
use crate::attention::SpeakerEmbedding;
use crate::dsp::{FrameTransform, Waveform};
use crate::error::{Error, Result};

/// Wall time spent per stage while streaming.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ModuleTimings {
    pub stft: Duration,
    pub band_split: Duration,
    pub temporal: Duration,
    pub band: Duration,
    pub sam: Duration,
    pub band_merge: Duration,
    pub istft: Duration,
}

impl ModuleTimings {
    pub fn entries(&self) -> [(&'static str, Duration); 7] {
        [
            ("stft", self.stft),
            ("band_split", self.band_split),
            ("temporal_rnn", self.temporal),
            ("band_rnn", self.band),
            ("sam", self.sam),
            ("band_merge", self.band_merge),
            ("istft", self.istft),
        ]
    }

    pub fn total(&self) -> Duration {
        self.entries().iter().map(|(_, d)| *d).sum()
    }
}

/// Per-stream context: recurrent states, SAM conv history, the previous input
/// hop and the overlap-add tail.
pub struct StreamState {
    hop: usize,
    transform: FrameTransform,
    prev_hop: Vec<f32>,
    overlap: Vec<f32>,
    ctx: FrameContext,
    frames: u64,
    keys: Option<(Vec<f32>, Vec<Vec<f32>>)>,
    timings: Option<ModuleTimings>,
    frame: Vec<f32>,
    spectrum: Vec<Complex32>,
    mask: Vec<Complex32>,
    synth: Vec<f32>,
    blocks: usize,
}

impl StreamState {
    /// Zeroes every buffer and recurrent state.
    pub fn reset(&mut self) {
        self.prev_hop.fill(0.0);
        self.overlap.fill(0.0);
        self.ctx.temporal.iter_mut().for_each(|s| s.fill(0.0));
        self.ctx.sam_history.iter_mut().for_each(|s| s.fill(0.0));
        self.frames = 0;
        if let Some(t) = &mut self.timings {
            *t = ModuleTimings::default();
        }
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn frames_processed(&self) -> u64 {
        self.frames
    }

    pub fn enable_profiling(&mut self) {
        self.timings.get_or_insert_with(ModuleTimings::default);
    }

    pub fn timings(&self) -> Option<&ModuleTimings> {
        self.timings.as_ref()
    }
}

impl Engine {
    pub fn new_stream(&self) -> StreamState {
        let c = self.config();
        let bins = c.num_bins();
        StreamState {
            hop: c.hop,
            transform: FrameTransform::new(c.fft_size),
            prev_hop: vec![0.0; c.fft_size - c.hop],
            overlap: vec![0.0; c.fft_size - c.hop],
            ctx: self.fresh_context(),
            frames: 0,
            keys: None,
            timings: None,
            frame: vec![0.0; c.fft_size],
            spectrum: vec![Complex32::new(0.0, 0.0); bins],
            mask: vec![Complex32::new(0.0, 0.0); bins],
            synth: vec![0.0; c.fft_size],
            blocks: self.blocks().len(),
        }
    }

    /// Consumes exactly one hop and returns one hop of output, delayed by
    /// [`ModelConfig::latency`](super::ModelConfig::latency) samples relative
    /// to [`Engine::enhance_offline`]. The first call emits the pre-roll as zeros.
    pub fn stream_push(&self, state: &mut StreamState, hop: &[f32], e: &SpeakerEmbedding) -> Result<Vec<f32>> {
        let c = self.config();
        if hop.len() != c.hop {
            return Err(Error::Usage(format!(
                "stream_push takes exactly {} samples, got {}",
                c.hop,
                hop.len()
            )));
        }
        if state.hop != c.hop || state.blocks != self.blocks().len() {
            return Err(Error::Usage("stream state belongs to a different model".into()));
        }
        self.check_inputs(c.sample_rate, e)?;
        if state
            .keys
            .as_ref()
            .is_none_or(|(emb, _)| emb.as_slice() != e.as_slice())
        {
            state.keys = Some((e.as_slice().to_vec(), self.keys(e)));
        }

        let start = Instant::now();
        let lead = state.prev_hop.len();
        state.frame[..lead].copy_from_slice(&state.prev_hop);
        state.frame[lead..].copy_from_slice(hop);
        state.prev_hop.copy_from_slice(&state.frame[c.fft_size - lead..]);
        state.transform.analyze(&state.frame, &mut state.spectrum);
        if let Some(t) = &mut state.timings {
            t.stft += start.elapsed();
        }

        let keys = &state.keys.as_ref().expect("keys set above").1;
        self.infer_frames(
            &state.spectrum,
            1,
            keys,
            &mut state.ctx,
            &mut state.mask,
            state.timings.as_mut(),
        );

        let start = Instant::now();
        state.spectrum.iter_mut().zip(&state.mask).for_each(|(z, m)| *z *= m);
        state.transform.synthesize(&state.spectrum, &mut state.synth);
        let mut out: Vec<f32> = state.overlap.iter().zip(&state.synth).map(|(a, b)| a + b).collect();
        state.overlap.copy_from_slice(&state.synth[c.hop..]);
        if state.frames == 0 {
            out.fill(0.0);
        }
        state.frames += 1;
        if let Some(t) = &mut state.timings {
            t.istft += start.elapsed();
        }
        Ok(out)
    }

    /// Runs a whole recording through [`Engine::stream_push`], flushes the
    /// latency with zeros and trims the result to align with the input.
    pub fn enhance_streaming(&self, x: &Waveform, e: &SpeakerEmbedding) -> Result<Waveform> {
        self.check_inputs(x.sample_rate, e)?;
        let hop = self.config().hop;
        let pushes = x.len().div_ceil(hop) + 1;
        let mut padded = x.samples.clone();
        padded.resize(pushes * hop, 0.0);
        let mut state = self.new_stream();
        let mut out = Vec::with_capacity(padded.len());
        for chunk in padded.chunks_exact(hop) {
            out.extend(self.stream_push(&mut state, chunk, e)?);
        }
        Ok(Waveform {
            samples: out[hop..hop + x.len()].to_vec(),
            sample_rate: x.sample_rate,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::ModelConfig;
    use crate::numerics::SeededRng;

    fn setup(seed: u64) -> (Engine, SpeakerEmbedding, Vec<f32>) {
        let c = ModelConfig::tiny();
        let (_, engine) = Engine::build(&c, seed).unwrap();
        let mut rng = SeededRng::new(seed + 100);
        let e = SpeakerEmbedding::new((0..c.embed_dim).map(|_| rng.uniform(-1.0, 1.0) as f32).collect()).unwrap();
        let x = (0..30 * c.hop).map(|_| rng.uniform(-0.5, 0.5) as f32).collect();
        (engine, e, x)
    }

    #[test]
    fn stream_matches_offline_with_one_hop_delay() {
        let (engine, e, x) = setup(1);
        let hop = engine.config().hop;
        let offline = engine
            .enhance_offline(&Waveform::new(x.clone(), 16_000).unwrap(), &e)
            .unwrap();
        let mut state = engine.new_stream();
        let mut out = Vec::new();
        for chunk in x.chunks_exact(hop) {
            out.extend(engine.stream_push(&mut state, chunk, &e).unwrap());
        }
        assert!(out[..hop].iter().all(|&v| v == 0.0));
        let err = out[hop..]
            .iter()
            .zip(&offline.samples)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f32::max);
        assert!(err <= 1e-5, "{err}");
        let whole = engine
            .enhance_streaming(&Waveform::new(x, 16_000).unwrap(), &e)
            .unwrap();
        let err = whole
            .samples
            .iter()
            .zip(&offline.samples)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f32::max);
        assert_eq!(whole.len(), offline.len());
        assert!(err <= 1e-5, "{err}");
    }

    #[test]
    fn reset_reproduces_output() {
        let (engine, e, x) = setup(2);
        let hop = engine.config().hop;
        let mut state = engine.new_stream();
        let run = |state: &mut StreamState| -> Vec<f32> {
            x.chunks_exact(hop)
                .flat_map(|c| engine.stream_push(state, c, &e).unwrap())
                .collect()
        };
        let first = run(&mut state);
        assert_eq!(state.frames_processed(), 30);
        state.reset();
        assert_eq!(run(&mut state), first);
    }

    #[test]
    fn wrong_chunk_is_usage_error() {
        let (engine, e, _) = setup(3);
        let mut state = engine.new_stream();
        assert!(matches!(
            engine.stream_push(&mut state, &[0.0; 7], &e),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn profiling_accumulates() {
        let (engine, e, x) = setup(4);
        let mut state = engine.new_stream();
        state.enable_profiling();
        for chunk in x.chunks_exact(engine.config().hop).take(5) {
            engine.stream_push(&mut state, chunk, &e).unwrap();
        }
        let t = state.timings().unwrap();
        assert!(t.total() > Duration::ZERO);
        assert!(t.temporal > Duration::ZERO);
    }
}
