use super::linear::affine_rows;
use super::DenseArray;
use crate::error::{Error, Result};

/// Depthwise 2-D convolution over (time, band) that only looks at the past.
///
/// Tap `(i, j)` of channel `c` multiplies frame `t - (kt - 1) + i` and band
/// `k - (kk - 1)/2 + j`; `i = kt - 1` is the current frame. Bands are
/// zero-padded on both sides, time only on the past side.
#[derive(Clone, Debug, PartialEq)]
pub struct CausalDepthwise {
    channels: usize,
    kt: usize,
    kk: usize,
    /// Channels-last taps, `kt x kk x C`.
    taps: Vec<f32>,
}

impl CausalDepthwise {
    /// `kernel` is `C x kt x kk`.
    pub fn new(kernel: &DenseArray) -> Result<Self> {
        if kernel.rank() != 3 {
            return Err(Error::dim(format!(
                "depthwise kernel must be C x kt x kk, got {:?}",
                kernel.shape()
            )));
        }
        let (c, kt, kk) = (kernel.shape()[0], kernel.shape()[1], kernel.shape()[2]);
        if kk % 2 == 0 {
            return Err(Error::config(format!("band kernel width must be odd, got {kk}")));
        }
        let mut taps = vec![0.0; kt * kk * c];
        for ch in 0..c {
            for i in 0..kt {
                for j in 0..kk {
                    taps[(i * kk + j) * c + ch] = kernel.get(&[ch, i, j]);
                }
            }
        }
        Ok(Self {
            channels: c,
            kt,
            kk,
            taps,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// `(kt, kk)`.
    pub fn kernel_size(&self) -> (usize, usize) {
        (self.kt, self.kk)
    }

    pub fn tap(&self, channel: usize, i: usize, j: usize) -> f32 {
        self.taps[(i * self.kk + j) * self.channels + channel]
    }

    /// The kernel back in `C x kt x kk` layout.
    pub fn kernel(&self) -> DenseArray {
        DenseArray::from_fn(&[self.channels, self.kt, self.kk], |i| self.tap(i[0], i[1], i[2]))
    }

    /// Frames of history needed before the first output frame.
    pub fn history(&self) -> usize {
        self.kt - 1
    }

    /// `input` is `(history + rows) x bands x C` channels-last; writes
    /// `rows x bands x C` into `out`.
    pub(crate) fn apply(&self, input: &[f32], bands: usize, out: &mut [f32]) {
        let c = self.channels;
        let frame = bands * c;
        let rows = input.len() / frame - self.history();
        assert_eq!(out.len(), rows * frame);
        let pad = (self.kk - 1) / 2;
        out.fill(0.0);
        for r in 0..rows {
            for k in 0..bands {
                let o = &mut out[r * frame + k * c..r * frame + (k + 1) * c];
                for i in 0..self.kt {
                    let src = &input[(r + i) * frame..(r + i + 1) * frame];
                    for j in 0..self.kk {
                        let kb = k + j;
                        if kb < pad || kb - pad >= bands {
                            continue;
                        }
                        let xs = &src[(kb - pad) * c..(kb - pad + 1) * c];
                        let ws = &self.taps[(i * self.kk + j) * c..(i * self.kk + j + 1) * c];
                        for ((ov, &xv), &wv) in o.iter_mut().zip(xs).zip(ws) {
                            *ov += wv * xv;
                        }
                    }
                }
            }
        }
    }
}

/// Causal depthwise convolution of `x` (`C x T x K`) with `kernel` (`C x kt x kk`).
pub fn conv2d_depthwise_causal(x: &DenseArray, kernel: &DenseArray) -> Result<DenseArray> {
    let conv = CausalDepthwise::new(kernel)?;
    if x.rank() != 3 || x.shape()[0] != conv.channels {
        return Err(Error::dim(format!(
            "depthwise conv over {} channels given input {:?}",
            conv.channels,
            x.shape()
        )));
    }
    let (c, t, k) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let mut input = vec![0.0; conv.history() * k * c];
    input.extend_from_slice(x.permute(&[1, 2, 0])?.data());
    let mut out = vec![0.0; t * k * c];
    conv.apply(&input, k, &mut out);
    DenseArray::new(&[t, k, c], out)?.permute(&[2, 0, 1])
}

/// 1x1 convolution: `out[c,t,k] = b[c] + sum_i w[c,i] x[i,t,k]`.
pub fn pointwise_conv(x: &DenseArray, w: &DenseArray, b: &[f32]) -> Result<DenseArray> {
    if x.rank() != 3 || w.rank() != 2 || w.shape()[1] != x.shape()[0] || b.len() != w.shape()[0] {
        return Err(Error::dim(format!(
            "pointwise conv weight {:?} / bias {} incompatible with input {:?}",
            w.shape(),
            b.len(),
            x.shape()
        )));
    }
    let (c_in, t, k) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let c_out = w.shape()[0];
    let xl = x.permute(&[1, 2, 0])?;
    let mut out = vec![0.0; t * k * c_out];
    affine_rows(xl.data(), t * k, c_in, w.data(), Some(b), c_out, &mut out);
    DenseArray::new(&[t, k, c_out], out)?.permute(&[2, 0, 1])
}
