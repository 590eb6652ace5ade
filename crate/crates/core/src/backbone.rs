//! Dual-path GRU blocks: a causal GRU over time for every band, then a GRU
//! across bands inside every frame. Both halves are residual.

use crate::bands::FeatureTensor;
use crate::error::{Error, Result};
use crate::numerics::{GruWeights, LayerNorm, Linear};

#[derive(Clone, Debug, PartialEq)]
pub struct TemporalWeights {
    pub norm: LayerNorm,
    pub gru: GruWeights,
    /// `H -> N`.
    pub fc: Linear,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BandRnnWeights {
    pub norm: LayerNorm,
    /// Scans bands low to high.
    pub forward: GruWeights,
    /// Scans bands high to low; present for a bidirectional band RNN.
    pub backward: Option<GruWeights>,
    /// `D*H -> N` with `D` the number of directions.
    pub fc: Linear,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DprnnBlockWeights {
    pub temporal: TemporalWeights,
    pub band: BandRnnWeights,
}

fn check_gru(name: &str, gru: &GruWeights, input: usize) -> Result<()> {
    if gru.input_size() != input {
        return Err(Error::tensor(
            format!("{name}/weight_ih"),
            format!("expects input {input}, has {}", gru.input_size()),
        ));
    }
    Ok(())
}

impl DprnnBlockWeights {
    pub fn features(&self) -> usize {
        self.temporal.norm.channels()
    }

    pub fn validate(&self, prefix: &str) -> Result<()> {
        let n = self.features();
        let t = &self.temporal;
        check_gru(&format!("{prefix}/temporal/gru"), &t.gru, n)?;
        if t.fc.in_dim != t.gru.hidden_size() || t.fc.out_dim != n {
            return Err(Error::tensor(
                format!("{prefix}/temporal/fc/weight"),
                "must map the GRU state back to N",
            ));
        }
        let b = &self.band;
        if b.norm.channels() != n {
            return Err(Error::tensor(
                format!("{prefix}/band/norm/weight"),
                format!("expected {n} channels"),
            ));
        }
        check_gru(&format!("{prefix}/band/gru"), &b.forward, n)?;
        let mut hidden = b.forward.hidden_size();
        if let Some(bw) = &b.backward {
            check_gru(&format!("{prefix}/band/gru"), bw, n)?;
            if bw.hidden_size() != b.forward.hidden_size() {
                return Err(Error::tensor(
                    format!("{prefix}/band/gru/weight_hh_reverse"),
                    "direction sizes differ",
                ));
            }
            hidden += bw.hidden_size();
        }
        if b.fc.in_dim != hidden || b.fc.out_dim != n {
            return Err(Error::tensor(
                format!("{prefix}/band/fc/weight"),
                format!("expected [{n}, {hidden}]"),
            ));
        }
        Ok(())
    }
}

/// Runs the temporal half over `frames` consecutive frames of a channels-last
/// `frames x bands x N` buffer, carrying the `bands x H` GRU state.
pub(crate) fn temporal_frames(x: &mut [f32], frames: usize, bands: usize, w: &TemporalWeights, state: &mut [f32]) {
    let n = w.norm.channels();
    let hs = w.gru.hidden_size();
    let rows = frames * bands;
    let mut normed = vec![0.0; rows * n];
    w.norm.apply(x, &mut normed);
    let mut gi = vec![0.0; rows * 3 * hs];
    w.gru.input.forward(&normed, rows, &mut gi);
    let mut gh = vec![0.0; bands * 3 * hs];
    let mut y = vec![0.0; rows * hs];
    for t in 0..frames {
        w.gru
            .step_rows(&gi[t * bands * 3 * hs..(t + 1) * bands * 3 * hs], state, &mut gh);
        y[t * bands * hs..(t + 1) * bands * hs].copy_from_slice(state);
    }
    let mut out = vec![0.0; rows * n];
    w.fc.forward(&y, rows, &mut out);
    x.iter_mut().zip(&out).for_each(|(a, b)| *a += b);
}

/// Band half over `frames` independent frames (`frames x bands x N`).
pub(crate) fn band_frames(x: &mut [f32], frames: usize, bands: usize, w: &BandRnnWeights) {
    let n = w.norm.channels();
    let hs = w.forward.hidden_size();
    let dirs = if w.backward.is_some() { 2 } else { 1 };
    let rows = frames * bands;
    let mut normed = vec![0.0; rows * n];
    w.norm.apply(x, &mut normed);
    let mut y = vec![0.0; rows * dirs * hs];
    let grus = std::iter::once(&w.forward).chain(w.backward.as_ref());
    for (d, gru) in grus.enumerate() {
        let mut gi = vec![0.0; rows * 3 * hs];
        gru.input.forward(&normed, rows, &mut gi);
        let mut h = vec![0.0; frames * hs];
        let mut gi_k = vec![0.0; frames * 3 * hs];
        let mut gh = vec![0.0; frames * 3 * hs];
        for step in 0..bands {
            let k = if d == 0 { step } else { bands - 1 - step };
            for t in 0..frames {
                let src = (t * bands + k) * 3 * hs;
                gi_k[t * 3 * hs..(t + 1) * 3 * hs].copy_from_slice(&gi[src..src + 3 * hs]);
            }
            gru.step_rows(&gi_k, &mut h, &mut gh);
            for t in 0..frames {
                let dst = ((t * bands + k) * dirs + d) * hs;
                y[dst..dst + hs].copy_from_slice(&h[t * hs..(t + 1) * hs]);
            }
        }
    }
    let mut out = vec![0.0; rows * n];
    w.fc.forward(&y, rows, &mut out);
    x.iter_mut().zip(&out).for_each(|(a, b)| *a += b);
}

fn check_features(h: &FeatureTensor, w: &DprnnBlockWeights) -> Result<()> {
    if h.channels() != w.features() {
        return Err(Error::dim(format!(
            "block expects {} channels, features are {:?}",
            w.features(),
            h.shape()
        )));
    }
    Ok(())
}

fn map_items(h: &FeatureTensor, mut f: impl FnMut(&mut Vec<f32>)) -> FeatureTensor {
    let items: Vec<Vec<f32>> = (0..h.batch())
        .map(|b| {
            let mut x = h.channels_last(b);
            f(&mut x);
            x
        })
        .collect();
    FeatureTensor::from_channels_last(&items, h.channels(), h.frames(), h.bands())
}

/// Causal GRU over time for each band, with a zero initial state.
pub fn temporal_pass(h: &FeatureTensor, w: &DprnnBlockWeights) -> Result<FeatureTensor> {
    check_features(h, w)?;
    let (t, k) = (h.frames(), h.bands());
    let hs = w.temporal.gru.hidden_size();
    Ok(map_items(h, |x| {
        let mut state = vec![0.0; k * hs];
        temporal_frames(x, t, k, &w.temporal, &mut state);
    }))
}

/// GRU across the band axis of every frame.
pub fn band_pass(h: &FeatureTensor, w: &DprnnBlockWeights) -> Result<FeatureTensor> {
    check_features(h, w)?;
    let (t, k) = (h.frames(), h.bands());
    Ok(map_items(h, |x| band_frames(x, t, k, &w.band)))
}

pub fn dprnn_block(h: &FeatureTensor, w: &DprnnBlockWeights) -> Result<FeatureTensor> {
    band_pass(&temporal_pass(h, w)?, w)
}
