//! Speaker attentive module (SAM).
//!
//! The speaker embedding acts as an attractor: it is projected to a key of
//! width `C1`, every (frame, band) feature is projected to a query of the same
//! width by a causal depth-separable convolution, and a softmax across bands
//! of `q . k / sqrt(C1 K / 2)` gives one score per band. Features are scaled
//! by their band's score, passed through a pointwise convolution and added
//! back to the input:
//!
//! ```text
//! k   = FC(e)                                 B x T x C1 x 1 (shared over T)
//! q   = permute(PW(DW(h)))                    B x T x K x C1
//! s   = softmax_K(sum_c q[..,c] k[c] / sqrt(C1 K / 2))    B x T x K x 1
//! h_o = Conv1(s * h) + h
//! ```
//!
//! Every convolution is followed by inference batch norm and PReLU.

use crate::bands::FeatureTensor;
use crate::error::{Error, Result};
use crate::numerics::{prelu_channels_last, softmax, softmax_in_place, BatchNorm, CausalDepthwise, DenseArray, Linear};

/// Fixed-length speaker identity vector.
#[derive(Clone, Debug, PartialEq)]
pub struct SpeakerEmbedding(Vec<f32>);

impl SpeakerEmbedding {
    pub fn new(values: Vec<f32>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::dim("empty speaker embedding"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("speaker embedding has non-finite values".into()));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn cosine(&self, other: &Self) -> f32 {
        let dot: f32 = self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum();
        let na: f32 = self.0.iter().map(|v| v * v).sum::<f32>().sqrt();
        let nb: f32 = other.0.iter().map(|v| v * v).sum::<f32>().sqrt();
        dot / (na * nb)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DepthwiseStage {
    pub conv: CausalDepthwise,
    pub norm: BatchNorm,
    pub prelu: Vec<f32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointwiseStage {
    pub fc: Linear,
    pub norm: BatchNorm,
    pub prelu: Vec<f32>,
}

impl PointwiseStage {
    fn forward(&self, x: &[f32], rows: usize) -> Vec<f32> {
        let mut y = vec![0.0; rows * self.fc.out_dim];
        self.fc.forward(x, rows, &mut y);
        self.norm.apply_channels_last(&mut y);
        prelu_channels_last(&mut y, &self.prelu);
        y
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SamWeights {
    /// `C2 -> C1`.
    pub fc: Linear,
    pub conv0_dw: DepthwiseStage,
    /// `C -> C1`.
    pub conv0_pw: PointwiseStage,
    /// `C -> C`.
    pub conv1: PointwiseStage,
}

/// Softmax scores over bands, `B x T x K x 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionScores(pub DenseArray);

impl AttentionScores {
    pub fn shape(&self) -> &[usize] {
        self.0.shape()
    }

    pub fn get(&self, b: usize, t: usize, k: usize) -> f32 {
        self.0.get(&[b, t, k, 0])
    }
}

/// `sqrt(C1 * K / 2)`.
pub fn score_scale(attn_dim: usize, bands: usize) -> f32 {
    ((attn_dim * bands) as f32 / 2.0).sqrt()
}

impl SamWeights {
    pub fn channels(&self) -> usize {
        self.conv1.fc.out_dim
    }

    pub fn attn_dim(&self) -> usize {
        self.fc.out_dim
    }

    pub fn embed_dim(&self) -> usize {
        self.fc.in_dim
    }

    pub fn history(&self) -> usize {
        self.conv0_dw.conv.history()
    }

    pub fn validate(&self, prefix: &str) -> Result<()> {
        let (c, c1) = (self.channels(), self.attn_dim());
        let bad = |t: &str, why: String| Err(Error::tensor(format!("{prefix}/{t}"), why));
        if self.conv0_dw.conv.channels() != c {
            return bad("conv0_dw/weight", format!("expected {c} channels"));
        }
        if self.conv0_pw.fc.in_dim != c || self.conv0_pw.fc.out_dim != c1 {
            return bad("conv0_pw/weight", format!("expected [{c1}, {c}]"));
        }
        if self.conv1.fc.in_dim != c {
            return bad("conv1/weight", format!("expected [{c}, {c}]"));
        }
        for (name, norm, prelu, width) in [
            ("conv0_dw", &self.conv0_dw.norm, &self.conv0_dw.prelu, c),
            ("conv0_pw", &self.conv0_pw.norm, &self.conv0_pw.prelu, c1),
            ("conv1", &self.conv1.norm, &self.conv1.prelu, c),
        ] {
            norm.validate(&format!("{prefix}/{name}/norm"))?;
            if norm.channels() != width {
                return bad(&format!("{name}/norm/mean"), format!("expected {width} channels"));
            }
            if prelu.len() != width {
                return bad(&format!("{name}/prelu"), format!("expected {width} slopes"));
            }
        }
        Ok(())
    }

    /// `FC(e)`, length `C1`.
    pub(crate) fn key(&self, e: &[f32]) -> Vec<f32> {
        self.fc.forward_vec(e)
    }

    /// Queries for `rows` frames; `history` holds the preceding
    /// `kt - 1` frames (zeros at the start of a signal).
    pub(crate) fn query_frames(&self, history: &[f32], x: &[f32], rows: usize, bands: usize) -> Vec<f32> {
        let c = self.channels();
        let mut input = Vec::with_capacity(history.len() + x.len());
        input.extend_from_slice(history);
        input.extend_from_slice(x);
        let mut d = vec![0.0; rows * bands * c];
        self.conv0_dw.conv.apply(&input, bands, &mut d);
        self.conv0_dw.norm.apply_channels_last(&mut d);
        prelu_channels_last(&mut d, &self.conv0_dw.prelu);
        self.conv0_pw.forward(&d, rows * bands)
    }

    /// Band-softmax scores (`rows x bands`) from queries and a key.
    pub(crate) fn scores_frames(&self, q: &[f32], key: &[f32], bands: usize) -> Vec<f32> {
        let c1 = key.len();
        let scale = score_scale(c1, bands);
        let mut s: Vec<f32> = q
            .chunks_exact(c1)
            .map(|qv| qv.iter().zip(key).map(|(a, b)| a * b).sum())
            .collect();
        s.chunks_exact_mut(bands).for_each(|row| softmax_in_place(row, scale));
        s
    }

    /// `x <- Conv1(s * x) + x` for `rows x bands x C`.
    pub(crate) fn rescale_residual(&self, x: &mut [f32], scores: &[f32]) {
        let c = self.channels();
        let mut u = x.to_vec();
        for (row, &s) in u.chunks_exact_mut(c).zip(scores) {
            row.iter_mut().for_each(|v| *v *= s);
        }
        let v = self.conv1.forward(&u, scores.len());
        x.iter_mut().zip(&v).for_each(|(a, b)| *a += b);
    }

    /// Full module on `rows` frames in place.
    pub(crate) fn forward_frames(&self, history: &[f32], x: &mut [f32], rows: usize, bands: usize, key: &[f32]) {
        let q = self.query_frames(history, x, rows, bands);
        let s = self.scores_frames(&q, key, bands);
        self.rescale_residual(x, &s);
    }
}

fn check_embeddings(e: &[SpeakerEmbedding], w: &SamWeights, batch: usize) -> Result<()> {
    if e.len() != batch {
        return Err(Error::dim(format!("{} embeddings for a batch of {batch}", e.len())));
    }
    if let Some(bad) = e.iter().find(|v| v.len() != w.embed_dim()) {
        return Err(Error::dim(format!(
            "speaker embedding has length {}, expected {}",
            bad.len(),
            w.embed_dim()
        )));
    }
    Ok(())
}

fn check_channels(h: &FeatureTensor, w: &SamWeights) -> Result<()> {
    if h.channels() != w.channels() {
        return Err(Error::dim(format!(
            "attention over {} channels given features {:?}",
            w.channels(),
            h.shape()
        )));
    }
    Ok(())
}

/// Keys `B x T x C1 x 1`, one per embedding, repeated over `frames`.
pub fn compute_key(e: &[SpeakerEmbedding], w: &SamWeights, frames: usize) -> Result<DenseArray> {
    if frames == 0 || e.is_empty() {
        return Err(Error::dim("keys need at least one frame and one embedding"));
    }
    check_embeddings(e, w, e.len())?;
    let c1 = w.attn_dim();
    let mut data = Vec::with_capacity(e.len() * frames * c1);
    for emb in e {
        let k = w.key(emb.as_slice());
        for _ in 0..frames {
            data.extend_from_slice(&k);
        }
    }
    DenseArray::new(&[e.len(), frames, c1, 1], data)
}

/// Queries `B x T x K x C1`.
pub fn compute_query(h: &FeatureTensor, w: &SamWeights) -> Result<DenseArray> {
    check_channels(h, w)?;
    let (t, k) = (h.frames(), h.bands());
    let history = vec![0.0; w.history() * k * w.channels()];
    let mut data = Vec::with_capacity(h.batch() * t * k * w.attn_dim());
    for b in 0..h.batch() {
        data.extend(w.query_frames(&history, &h.channels_last(b), t, k));
    }
    DenseArray::new(&[h.batch(), t, k, w.attn_dim()], data)
}

/// Scores `B x T x K x 1` from queries `B x T x K x C1` and keys `B x T x C1 x 1`.
pub fn attention_scores(q: &DenseArray, k: &DenseArray) -> Result<AttentionScores> {
    if q.rank() != 4
        || k.rank() != 4
        || k.shape()[3] != 1
        || q.shape()[0] != k.shape()[0]
        || q.shape()[1] != k.shape()[1]
        || q.shape()[3] != k.shape()[2]
    {
        return Err(Error::dim(format!(
            "queries {:?} and keys {:?} are not B x T x K x C1 and B x T x C1 x 1",
            q.shape(),
            k.shape()
        )));
    }
    let (b, t, bands, c1) = (q.shape()[0], q.shape()[1], q.shape()[2], q.shape()[3]);
    let scale = score_scale(c1, bands);
    let mut data = Vec::with_capacity(b * t * bands);
    for bt in 0..b * t {
        let key = &k.data()[bt * c1..(bt + 1) * c1];
        let logits: Vec<f32> = q.data()[bt * bands * c1..(bt + 1) * bands * c1]
            .chunks_exact(c1)
            .map(|qv| qv.iter().zip(key).map(|(a, b)| a * b).sum())
            .collect();
        data.extend(softmax(&logits, scale)?);
    }
    Ok(AttentionScores(DenseArray::new(&[b, t, bands, 1], data)?))
}

/// `Conv1(s * h) + h`, returned in the `B x C x T x K` layout.
pub fn sam_forward(h: &FeatureTensor, e: &[SpeakerEmbedding], w: &SamWeights) -> Result<FeatureTensor> {
    check_channels(h, w)?;
    check_embeddings(e, w, h.batch())?;
    let (t, k, c) = (h.frames(), h.bands(), h.channels());
    let history = vec![0.0; w.history() * k * c];
    let items: Vec<Vec<f32>> = e
        .iter()
        .enumerate()
        .map(|(b, emb)| {
            let mut x = h.channels_last(b);
            let key = w.key(emb.as_slice());
            w.forward_frames(&history, &mut x, t, k, &key);
            x
        })
        .collect();
    Ok(FeatureTensor::from_channels_last(&items, c, t, k))
}
