use super::DenseArray;
use crate::error::{Error, Result};

pub const NORM_EPS: f32 = 1e-5;

/// Inference-mode batch normalization with stored statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchNorm {
    pub mean: Vec<f32>,
    pub var: Vec<f32>,
    pub gamma: Vec<f32>,
    pub beta: Vec<f32>,
    pub eps: f32,
}

impl BatchNorm {
    /// Pass-through statistics: mean 0, var 1, gamma 1, beta 0.
    pub fn identity(channels: usize) -> Self {
        Self {
            mean: vec![0.0; channels],
            var: vec![1.0; channels],
            gamma: vec![1.0; channels],
            beta: vec![0.0; channels],
            eps: NORM_EPS,
        }
    }

    pub fn channels(&self) -> usize {
        self.mean.len()
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        let c = self.channels();
        if self.var.len() != c || self.gamma.len() != c || self.beta.len() != c {
            return Err(Error::tensor(name, "batch-norm vectors differ in length"));
        }
        if let Some(i) = self.var.iter().position(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::tensor(
                format!("{name}/var"),
                format!(
                    "variance at channel {i} is {}; must be finite and non-negative",
                    self.var[i]
                ),
            ));
        }
        if self.eps.is_nan() || self.eps <= 0.0 {
            return Err(Error::config(format!("{name}: eps must be positive")));
        }
        Ok(())
    }

    fn scale(&self) -> impl Iterator<Item = f32> + '_ {
        self.var
            .iter()
            .zip(&self.gamma)
            .map(move |(&v, &g)| g / (v + self.eps).sqrt())
    }

    /// Normalizes a buffer whose last axis is the channel axis.
    pub fn apply_channels_last(&self, x: &mut [f32]) {
        let c = self.channels();
        let scale: Vec<f32> = self.scale().collect();
        for row in x.chunks_exact_mut(c) {
            for i in 0..c {
                row[i] = (row[i] - self.mean[i]) * scale[i] + self.beta[i];
            }
        }
    }
}

/// `(x - mean) / sqrt(var + eps) * gamma + beta` along axis 0 of `x`.
pub fn batch_norm_infer(x: &DenseArray, bn: &BatchNorm) -> Result<DenseArray> {
    bn.validate("batch_norm")?;
    if x.shape()[0] != bn.channels() {
        return Err(Error::dim(format!(
            "batch norm over {} channels applied to shape {:?}",
            bn.channels(),
            x.shape()
        )));
    }
    let inner = x.len() / x.shape()[0];
    let mut out = x.clone();
    for ((chunk, s), (&m, &b)) in out
        .data_mut()
        .chunks_exact_mut(inner)
        .zip(bn.scale())
        .zip(bn.mean.iter().zip(&bn.beta))
    {
        for v in chunk {
            *v = (*v - m) * s + b;
        }
    }
    Ok(out)
}

/// Per-position normalization over the channel (last) axis.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerNorm {
    pub gamma: Vec<f32>,
    pub beta: Vec<f32>,
    pub eps: f32,
}

impl LayerNorm {
    pub fn identity(channels: usize) -> Self {
        Self {
            gamma: vec![1.0; channels],
            beta: vec![0.0; channels],
            eps: NORM_EPS,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    pub fn apply(&self, x: &[f32], y: &mut [f32]) {
        let c = self.channels();
        for (xr, yr) in x.chunks_exact(c).zip(y.chunks_exact_mut(c)) {
            let mean = xr.iter().sum::<f32>() / c as f32;
            let var = xr.iter().map(|v| (v - mean) * (v - mean)).sum::<f32>() / c as f32;
            let inv = 1.0 / (var + self.eps).sqrt();
            for i in 0..c {
                yr[i] = (xr[i] - mean) * inv * self.gamma[i] + self.beta[i];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{init_uniform, SeededRng};

    #[test]
    fn identity_with_zero_eps() {
        let x = init_uniform(&mut SeededRng::new(2), &[3, 4, 5], 1, 1);
        let bn = BatchNorm {
            eps: f32::MIN_POSITIVE,
            ..BatchNorm::identity(3)
        };
        assert!(batch_norm_infer(&x, &bn).unwrap().max_abs_diff(&x) <= 1e-6);
    }

    #[test]
    fn zero_gamma_gives_beta() {
        let x = init_uniform(&mut SeededRng::new(3), &[2, 3, 3], 1, 1);
        let bn = BatchNorm {
            gamma: vec![0.0; 2],
            beta: vec![0.5, -1.5],
            ..BatchNorm::identity(2)
        };
        let y = batch_norm_infer(&x, &bn).unwrap();
        assert!(y.data()[..9].iter().all(|&v| v == 0.5));
        assert!(y.data()[9..].iter().all(|&v| v == -1.5));
    }

    #[test]
    fn matches_scalar_formula() {
        let mut rng = SeededRng::new(4);
        let x = init_uniform(&mut rng, &[4, 6, 3], 1, 1);
        let bn = BatchNorm {
            mean: (0..4).map(|_| rng.uniform(-1.0, 1.0) as f32).collect(),
            var: (0..4).map(|_| rng.uniform(0.1, 2.0) as f32).collect(),
            gamma: (0..4).map(|_| rng.uniform(-2.0, 2.0) as f32).collect(),
            beta: (0..4).map(|_| rng.uniform(-1.0, 1.0) as f32).collect(),
            eps: NORM_EPS,
        };
        let y = batch_norm_infer(&x, &bn).unwrap();
        for c in 0..4 {
            for t in 0..6 {
                for k in 0..3 {
                    let v = x.get(&[c, t, k]) as f64;
                    let e = (v - bn.mean[c] as f64) / (bn.var[c] as f64 + NORM_EPS as f64).sqrt() * bn.gamma[c] as f64
                        + bn.beta[c] as f64;
                    assert!((y.get(&[c, t, k]) as f64 - e).abs() <= 1e-6);
                }
            }
        }
        let mut cl = x.permute(&[1, 2, 0]).unwrap();
        bn.apply_channels_last(cl.data_mut());
        assert!(cl.permute(&[2, 0, 1]).unwrap().max_abs_diff(&y) <= 1e-6);
    }

    #[test]
    fn negative_variance_rejected() {
        let bn = BatchNorm {
            var: vec![1.0, -0.1],
            ..BatchNorm::identity(2)
        };
        let err = batch_norm_infer(&DenseArray::zeros(&[2, 1, 1]), &bn).unwrap_err();
        assert!(matches!(err, Error::WeightValidation { .. }), "{err}");
    }

    #[test]
    fn layer_norm_standardizes_rows() {
        let x = init_uniform(&mut SeededRng::new(8), &[5, 16], 1, 1);
        let mut y = vec![0.0; 80];
        LayerNorm::identity(16).apply(x.data(), &mut y);
        for row in y.chunks(16) {
            let mean: f32 = row.iter().sum::<f32>() / 16.0;
            let var: f32 = row.iter().map(|v| (v - mean).powi(2)).sum::<f32>() / 16.0;
            assert!(mean.abs() < 1e-5);
            assert!((var - 1.0).abs() < 1e-3);
        }
    }
}
