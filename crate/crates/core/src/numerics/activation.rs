use super::DenseArray;
use crate::error::{Error, Result};

/// `exp(x_i/scale - m) / sum_j exp(x_j/scale - m)` with `m = max(x)/scale`.
pub fn softmax(x: &[f32], scale: f32) -> Result<Vec<f32>> {
    if x.is_empty() {
        return Err(Error::dim("softmax of an empty vector"));
    }
    if scale <= 0.0 || !scale.is_finite() {
        return Err(Error::config(format!("softmax scale must be positive, got {scale}")));
    }
    if let Some(v) = x.iter().find(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("non-finite softmax input {v}")));
    }
    let mut out = x.to_vec();
    softmax_in_place(&mut out, scale);
    Ok(out)
}

/// Unchecked variant of [`softmax`] for finite inputs.
pub(crate) fn softmax_in_place(x: &mut [f32], scale: f32) {
    let inv = 1.0 / scale;
    let m = x.iter().fold(f32::NEG_INFINITY, |a, &b| a.max(b)) * inv;
    let mut sum = 0.0f32;
    for v in x.iter_mut() {
        *v = (*v * inv - m).exp();
        sum += *v;
    }
    let norm = 1.0 / sum;
    x.iter_mut().for_each(|v| *v *= norm);
}

/// Channel-wise PReLU along axis 0.
pub fn prelu(x: &DenseArray, alpha: &[f32]) -> Result<DenseArray> {
    if x.shape()[0] != alpha.len() {
        return Err(Error::dim(format!(
            "prelu with {} slopes applied to shape {:?}",
            alpha.len(),
            x.shape()
        )));
    }
    let inner = x.len() / alpha.len();
    let mut out = x.clone();
    for (chunk, &a) in out.data_mut().chunks_exact_mut(inner).zip(alpha) {
        for v in chunk {
            if *v < 0.0 {
                *v *= a;
            }
        }
    }
    Ok(out)
}

/// PReLU on a buffer whose last axis is the channel axis.
pub(crate) fn prelu_channels_last(x: &mut [f32], alpha: &[f32]) {
    for row in x.chunks_exact_mut(alpha.len()) {
        for (v, &a) in row.iter_mut().zip(alpha) {
            if *v < 0.0 {
                *v *= a;
            }
        }
    }
}

#[inline]
pub(crate) fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + (-x).exp())
}
