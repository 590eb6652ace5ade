//! Sub-band partition of the spectrum, the per-band projection into feature
//! space (band split) and the mirrored mask estimator (band merge).

use std::ops::Range;

use num_complex::Complex32;

use crate::dsp::ComplexSpectrogram;
use crate::error::{Error, Result};
use crate::numerics::{BatchNorm, DenseArray, LayerNorm, Linear};

/// Contiguous band widths covering every frequency bin exactly once.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BandScheme {
    widths: Vec<usize>,
}

impl BandScheme {
    pub fn new(widths: Vec<usize>, num_bins: usize) -> Result<Self> {
        if widths.is_empty() || widths.contains(&0) {
            return Err(Error::config(format!("band widths must be positive, got {widths:?}")));
        }
        let total: usize = widths.iter().sum();
        if total != num_bins {
            return Err(Error::config(format!(
                "band widths sum to {total} but the spectrum has {num_bins} bins"
            )));
        }
        Ok(Self { widths })
    }

    /// Default partition, finer at low frequencies.
    ///
    /// | rate  | bins | layout                                              |
    /// |-------|------|-----------------------------------------------------|
    /// | 48 k  | 481  | 20 x 2, 8 x 10, 6 x 20, 5 x 40, then 20 and 21      |
    /// | 16 k  | 161  | 20 x 2, 12 x 5, 8 x 7, 1 x 5                        |
    ///
    /// Both have 41 bands.
    pub fn default_for(sample_rate: u32, fft_size: usize) -> Result<Self> {
        let bins = fft_size / 2 + 1;
        let widths: Vec<usize> = match (sample_rate, bins) {
            (48_000, 481) => [vec![2; 20], vec![10; 8], vec![20; 6], vec![40; 5], vec![20, 21]].concat(),
            (16_000, 161) => [vec![2; 20], vec![5; 12], vec![7; 8], vec![5]].concat(),
            _ => {
                return Err(Error::config(format!(
                    "no default band scheme for {sample_rate} Hz with {bins} bins; supply widths explicitly"
                )))
            }
        };
        Self::new(widths, bins)
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn num_bands(&self) -> usize {
        self.widths.len()
    }

    pub fn num_bins(&self) -> usize {
        self.widths.iter().sum()
    }

    pub fn ranges(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        self.widths.iter().scan(0, |start, &w| {
            let r = *start..*start + w;
            *start += w;
            Some(r)
        })
    }
}

/// `B x C x T x K` real features.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureTensor(DenseArray);

impl FeatureTensor {
    pub fn new(array: DenseArray) -> Result<Self> {
        if array.rank() != 4 {
            return Err(Error::dim(format!(
                "feature tensors are B x C x T x K, got {:?}",
                array.shape()
            )));
        }
        Ok(Self(array))
    }

    pub fn zeros(batch: usize, channels: usize, frames: usize, bands: usize) -> Self {
        Self(DenseArray::zeros(&[batch, channels, frames, bands]))
    }

    pub fn batch(&self) -> usize {
        self.0.shape()[0]
    }

    pub fn channels(&self) -> usize {
        self.0.shape()[1]
    }

    pub fn frames(&self) -> usize {
        self.0.shape()[2]
    }

    pub fn bands(&self) -> usize {
        self.0.shape()[3]
    }

    pub fn shape(&self) -> &[usize] {
        self.0.shape()
    }

    pub fn array(&self) -> &DenseArray {
        &self.0
    }

    pub fn array_mut(&mut self) -> &mut DenseArray {
        &mut self.0
    }

    pub fn into_array(self) -> DenseArray {
        self.0
    }

    pub fn get(&self, b: usize, c: usize, t: usize, k: usize) -> f32 {
        self.0.get(&[b, c, t, k])
    }

    /// Batch item `b` as a `T x K x C` buffer.
    pub(crate) fn channels_last(&self, b: usize) -> Vec<f32> {
        let (c, t, k) = (self.channels(), self.frames(), self.bands());
        let item = &self.0.data()[b * c * t * k..(b + 1) * c * t * k];
        let mut out = vec![0.0; item.len()];
        for ch in 0..c {
            for tt in 0..t {
                for kk in 0..k {
                    out[(tt * k + kk) * c + ch] = item[(ch * t + tt) * k + kk];
                }
            }
        }
        out
    }

    /// Inverse of [`channels_last`](Self::channels_last) for every batch item.
    pub(crate) fn from_channels_last(items: &[Vec<f32>], channels: usize, frames: usize, bands: usize) -> Self {
        let mut out = Self::zeros(items.len(), channels, frames, bands);
        let per = channels * frames * bands;
        for (b, item) in items.iter().enumerate() {
            let dst = &mut out.0.data_mut()[b * per..(b + 1) * per];
            for ch in 0..channels {
                for tt in 0..frames {
                    for kk in 0..bands {
                        dst[(ch * frames + tt) * bands + kk] = item[(tt * bands + kk) * channels + ch];
                    }
                }
            }
        }
        out
    }
}

/// Complex multiplicative mask, `frames x bins`.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMask {
    pub frames: usize,
    pub bins: usize,
    pub data: Vec<Complex32>,
}

impl ComplexMask {
    pub fn unit(frames: usize, bins: usize) -> Self {
        Self {
            frames,
            bins,
            data: vec![Complex32::new(1.0, 0.0); frames * bins],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SplitBand {
    /// Over the `2w` interleaved `(re, im)` values.
    pub norm: BatchNorm,
    /// `2w -> N`.
    pub fc: Linear,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BandSplitWeights {
    pub bands: Vec<SplitBand>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MergeBand {
    pub norm: LayerNorm,
    /// `N -> hidden`, followed by tanh.
    pub fc1: Linear,
    /// `hidden -> 2w`, interleaved `(re, im)` mask values.
    pub fc2: Linear,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BandMergeWeights {
    pub bands: Vec<MergeBand>,
}

impl BandSplitWeights {
    pub fn validate(&self, scheme: &BandScheme, features: usize) -> Result<()> {
        if self.bands.len() != scheme.num_bands() {
            return Err(Error::tensor(
                "split",
                format!(
                    "{} bands of weights for a {}-band scheme",
                    self.bands.len(),
                    scheme.num_bands()
                ),
            ));
        }
        for (j, (band, &w)) in self.bands.iter().zip(scheme.widths()).enumerate() {
            band.norm.validate(&format!("split/band{j}/norm"))?;
            if band.norm.channels() != 2 * w {
                return Err(Error::tensor(
                    format!("split/band{j}/norm/mean"),
                    format!("expected {} channels", 2 * w),
                ));
            }
            if band.fc.in_dim != 2 * w || band.fc.out_dim != features {
                return Err(Error::tensor(
                    format!("split/band{j}/fc/weight"),
                    format!("expected [{features}, {}]", 2 * w),
                ));
            }
        }
        Ok(())
    }
}

impl BandMergeWeights {
    pub fn validate(&self, scheme: &BandScheme, features: usize) -> Result<()> {
        if self.bands.len() != scheme.num_bands() {
            return Err(Error::tensor(
                "merge",
                format!(
                    "{} bands of weights for a {}-band scheme",
                    self.bands.len(),
                    scheme.num_bands()
                ),
            ));
        }
        for (j, (band, &w)) in self.bands.iter().zip(scheme.widths()).enumerate() {
            if band.norm.channels() != features {
                return Err(Error::tensor(
                    format!("merge/band{j}/norm/weight"),
                    format!("expected {features} channels"),
                ));
            }
            if band.fc1.in_dim != features || band.fc2.in_dim != band.fc1.out_dim || band.fc2.out_dim != 2 * w {
                return Err(Error::tensor(
                    format!("merge/band{j}/fc2/weight"),
                    format!("MLP must map {features} -> {} -> {}", band.fc1.out_dim, 2 * w),
                ));
            }
        }
        Ok(())
    }
}

/// Projects `rows` spectrum frames (`rows x F`) into `rows x K x N` features.
pub(crate) fn split_rows(
    frames: &[Complex32],
    rows: usize,
    scheme: &BandScheme,
    w: &BandSplitWeights,
    out: &mut [f32],
) {
    let bins = scheme.num_bins();
    let k_total = scheme.num_bands();
    let n = w.bands[0].fc.out_dim;
    let mut proj = vec![0.0; rows * n];
    for (j, (range, band)) in scheme.ranges().zip(&w.bands).enumerate() {
        let width = 2 * range.len();
        let mut buf = Vec::with_capacity(rows * width);
        for r in 0..rows {
            for z in &frames[r * bins + range.start..r * bins + range.end] {
                buf.push(z.re);
                buf.push(z.im);
            }
        }
        band.norm.apply_channels_last(&mut buf);
        band.fc.forward(&buf, rows, &mut proj);
        for r in 0..rows {
            out[(r * k_total + j) * n..(r * k_total + j + 1) * n].copy_from_slice(&proj[r * n..(r + 1) * n]);
        }
    }
}

/// Maps `rows x K x N` features to a `rows x F` complex mask.
pub(crate) fn merge_rows(h: &[f32], rows: usize, scheme: &BandScheme, w: &BandMergeWeights, mask: &mut [Complex32]) {
    let bins = scheme.num_bins();
    let k_total = scheme.num_bands();
    let n = w.bands[0].norm.channels();
    let hidden = w.bands[0].fc1.out_dim;
    let mut x = vec![0.0; rows * n];
    let mut normed = vec![0.0; rows * n];
    let mut mid = vec![0.0; rows * hidden];
    for (j, (range, band)) in scheme.ranges().zip(&w.bands).enumerate() {
        for r in 0..rows {
            x[r * n..(r + 1) * n].copy_from_slice(&h[(r * k_total + j) * n..(r * k_total + j + 1) * n]);
        }
        band.norm.apply(&x, &mut normed);
        band.fc1.forward(&normed, rows, &mut mid);
        mid.iter_mut().for_each(|v| *v = v.tanh());
        let width = 2 * range.len();
        let mut o = vec![0.0; rows * width];
        band.fc2.forward(&mid, rows, &mut o);
        for r in 0..rows {
            let dst = &mut mask[r * bins + range.start..r * bins + range.end];
            for (i, m) in dst.iter_mut().enumerate() {
                *m = Complex32::new(o[r * width + 2 * i], o[r * width + 2 * i + 1]);
            }
        }
    }
}

/// Band-split projection of a spectrogram into a `1 x N x T x K` feature tensor.
pub fn band_split(x: &ComplexSpectrogram, scheme: &BandScheme, w: &BandSplitWeights) -> Result<FeatureTensor> {
    if scheme.num_bins() != x.bins() {
        return Err(Error::dim(format!(
            "scheme covers {} bins but the spectrogram has {}",
            scheme.num_bins(),
            x.bins()
        )));
    }
    let n = w.bands.first().map_or(0, |b| b.fc.out_dim);
    w.validate(scheme, n)?;
    let (t, k) = (x.frames(), scheme.num_bands());
    let mut out = vec![0.0; t * k * n];
    split_rows(&x.data, t, scheme, w, &mut out);
    Ok(FeatureTensor::from_channels_last(&[out], n, t, k))
}

/// Band-merge mask estimation for a single-item (`B = 1`) feature tensor.
pub fn band_merge(h: &FeatureTensor, scheme: &BandScheme, w: &BandMergeWeights) -> Result<ComplexMask> {
    if h.batch() != 1 || h.bands() != scheme.num_bands() {
        return Err(Error::tensor(
            "merge",
            format!(
                "features {:?} do not match a single item with {} bands",
                h.shape(),
                scheme.num_bands()
            ),
        ));
    }
    w.validate(scheme, h.channels())?;
    let t = h.frames();
    let mut mask = ComplexMask::unit(t, scheme.num_bins());
    merge_rows(&h.channels_last(0), t, scheme, w, &mut mask.data);
    Ok(mask)
}

/// Complex product `m * X` per bin.
pub fn apply_mask(x: &ComplexSpectrogram, m: &ComplexMask) -> Result<ComplexSpectrogram> {
    if x.frames() != m.frames || x.bins() != m.bins {
        return Err(Error::dim(format!(
            "mask is {} x {} but spectrogram is {} x {}",
            m.frames,
            m.bins,
            x.frames(),
            x.bins()
        )));
    }
    let mut out = x.clone();
    out.data.iter_mut().zip(&m.data).for_each(|(z, mz)| *z *= mz);
    Ok(out)
}
