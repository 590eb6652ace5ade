//! Training objective: a weighted sum of an asymmetric compressed-magnitude
//! MSE and a complex compressed MSE, with analytic gradients.
//!
//! With `A = |S|^c`, `Â = |Ŝ|^c` and `P(z) = |z|^(c-1) z`:
//!
//! ```text
//! mse_a = mean(max(A - Â, 0)^2)      only under-estimated magnitudes count
//! mse_c = mean(|P(S) - P(Ŝ)|^2)
//! total = 0.3 mse_a + 0.7 mse_c
//! ```
//!
//! Everything is accumulated in f64.

use num_complex::{Complex32, Complex64};
use serde::Serialize;

use crate::dsp::ComplexSpectrogram;
use crate::error::{Error, Result};
use crate::numerics::SeededRng;

/// Weights of `(mse_a, mse_c)`.
pub const LOSS_WEIGHTS: [f64; 2] = [0.3, 0.7];

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LossReport {
    pub mse_a: f64,
    pub mse_c: f64,
    pub total: f64,
    pub compression: f64,
    pub weights: [f64; 2],
}

/// `d total / d Re Ŝ` and `d total / d Im Ŝ` per bin, packed as re/im.
#[derive(Clone, Debug, PartialEq)]
pub struct LossGradient {
    pub grad: Vec<Complex64>,
    /// Bins where `Ŝ = 0`; their gradient is reported as 0.
    pub zero_magnitude_bins: Vec<usize>,
}

fn check(s: &ComplexSpectrogram, s_hat: &ComplexSpectrogram, c: f64) -> Result<()> {
    if s.frames() != s_hat.frames() || s.bins() != s_hat.bins() {
        return Err(Error::dim(format!(
            "spectrograms are {} x {} and {} x {}",
            s.frames(),
            s.bins(),
            s_hat.frames(),
            s_hat.bins()
        )));
    }
    if !(c > 0.0 && c <= 1.0) {
        return Err(Error::config(format!(
            "compression exponent must be in (0, 1], got {c}"
        )));
    }
    if s.data.is_empty() {
        return Err(Error::dim("empty spectrogram"));
    }
    Ok(())
}

fn widen(z: Complex32) -> Complex64 {
    Complex64::new(z.re as f64, z.im as f64)
}

fn compressed(z: Complex64, c: f64) -> Complex64 {
    let a = z.norm();
    if a == 0.0 {
        Complex64::new(0.0, 0.0)
    } else {
        z * a.powf(c - 1.0)
    }
}

fn mean_over(s: &ComplexSpectrogram, s_hat: &ComplexSpectrogram, f: impl Fn(Complex64, Complex64) -> f64) -> f64 {
    let sum: f64 = s
        .data
        .iter()
        .zip(&s_hat.data)
        .map(|(&a, &b)| f(widen(a), widen(b)))
        .sum();
    sum / s.data.len() as f64
}

pub fn mse_asym(s: &ComplexSpectrogram, s_hat: &ComplexSpectrogram, c: f64) -> Result<f64> {
    check(s, s_hat, c)?;
    Ok(mean_over(s, s_hat, |a, b| {
        let d = (a.norm().powf(c) - b.norm().powf(c)).max(0.0);
        d * d
    }))
}

pub fn mse_complex(s: &ComplexSpectrogram, s_hat: &ComplexSpectrogram, c: f64) -> Result<f64> {
    check(s, s_hat, c)?;
    Ok(mean_over(s, s_hat, |a, b| {
        (compressed(a, c) - compressed(b, c)).norm_sqr()
    }))
}

pub fn loss_total(s: &ComplexSpectrogram, s_hat: &ComplexSpectrogram, c: f64) -> Result<LossReport> {
    loss_total_weighted(s, s_hat, c, LOSS_WEIGHTS)
}

pub fn loss_total_weighted(
    s: &ComplexSpectrogram,
    s_hat: &ComplexSpectrogram,
    c: f64,
    weights: [f64; 2],
) -> Result<LossReport> {
    let mse_a = mse_asym(s, s_hat, c)?;
    let mse_c = mse_complex(s, s_hat, c)?;
    Ok(LossReport {
        mse_a,
        mse_c,
        total: weights[0] * mse_a + weights[1] * mse_c,
        compression: c,
        weights,
    })
}

/// Analytic gradient of [`loss_total`] with respect to `Ŝ`.
pub fn loss_grad(s: &ComplexSpectrogram, s_hat: &ComplexSpectrogram, c: f64) -> Result<LossGradient> {
    loss_grad_weighted(s, s_hat, c, LOSS_WEIGHTS)
}

pub fn loss_grad_weighted(
    s: &ComplexSpectrogram,
    s_hat: &ComplexSpectrogram,
    c: f64,
    weights: [f64; 2],
) -> Result<LossGradient> {
    check(s, s_hat, c)?;
    let inv_n = 1.0 / s.data.len() as f64;
    let mut zero_magnitude_bins = Vec::new();
    let grad = s
        .data
        .iter()
        .zip(&s_hat.data)
        .enumerate()
        .map(|(i, (&target, &est))| {
            let (t, e) = (widen(target), widen(est));
            let a = e.norm();
            if a == 0.0 {
                zero_magnitude_bins.push(i);
                return Complex64::new(0.0, 0.0);
            }
            let (x, y) = (e.re, e.im);
            let a_c1 = a.powf(c - 1.0);
            let a_c3 = a.powf(c - 3.0);

            // asymmetric magnitude term
            let under = (t.norm().powf(c) - a.powf(c)).max(0.0);
            let dmag = c * a.powf(c - 2.0);
            let g_a = Complex64::new(-2.0 * under * dmag * x, -2.0 * under * dmag * y);

            // complex compressed term
            let r = compressed(t, c) - compressed(e, c);
            let dpr_dx = a_c1 + (c - 1.0) * a_c3 * x * x;
            let dpi_dy = a_c1 + (c - 1.0) * a_c3 * y * y;
            let cross = (c - 1.0) * a_c3 * x * y;
            let g_c = Complex64::new(
                -2.0 * (r.re * dpr_dx + r.im * cross),
                -2.0 * (r.re * cross + r.im * dpi_dy),
            );
            (g_a * weights[0] + g_c * weights[1]) * inv_n
        })
        .collect();
    Ok(LossGradient {
        grad,
        zero_magnitude_bins,
    })
}

/// Outcome of comparing [`loss_grad`] with central finite differences.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GradCheck {
    pub seed: u64,
    pub compression: f64,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
}

fn part_mut(z: &mut Complex32, part: usize) -> &mut f32 {
    if part == 0 {
        &mut z.re
    } else {
        &mut z.im
    }
}

/// Relative error floor for gradient components that are essentially zero.
const REL_FLOOR: f64 = 1e-8;

/// Central-difference check on a random `frames x bins` pair with `|Ŝ| >= 0.2`.
pub fn gradcheck(seed: u64, c: f64, frames: usize, bins: usize, step: f32) -> Result<GradCheck> {
    if bins < 2 || frames == 0 {
        return Err(Error::dim("gradcheck needs at least one frame and two bins"));
    }
    let fft = 2 * (bins - 1);
    let mut rng = SeededRng::new(seed);
    let mut draw = |lo: f64, hi: f64| -> Vec<Complex32> {
        (0..frames * bins)
            .map(|_| {
                let mag = rng.uniform(lo, hi);
                let phase = rng.uniform(-std::f64::consts::PI, std::f64::consts::PI);
                Complex32::new((mag * phase.cos()) as f32, (mag * phase.sin()) as f32)
            })
            .collect()
    };
    let s = ComplexSpectrogram::from_data(draw(0.0, 2.0), frames, 16_000, fft)?;
    let mut s_hat = ComplexSpectrogram::from_data(draw(0.2, 2.0), frames, 16_000, fft)?;
    let analytic = loss_grad(&s, &s_hat, c)?;

    let mut max_rel: f64 = 0.0;
    let mut max_abs: f64 = 0.0;
    for i in 0..s_hat.data.len() {
        for part in 0..2 {
            let orig = s_hat.data[i];
            let x0 = *part_mut(&mut s_hat.data[i], part);
            let (plus, minus) = (x0 + step, x0 - step);
            *part_mut(&mut s_hat.data[i], part) = plus;
            let lp = loss_total(&s, &s_hat, c)?.total;
            *part_mut(&mut s_hat.data[i], part) = minus;
            let lm = loss_total(&s, &s_hat, c)?.total;
            s_hat.data[i] = orig;
            // the f32-representable step, not the nominal one
            let numeric = (lp - lm) / (plus as f64 - minus as f64);
            let g = analytic.grad[i];
            let exact = if part == 0 { g.re } else { g.im };
            let abs = (exact - numeric).abs();
            max_abs = max_abs.max(abs);
            max_rel = max_rel.max(abs / exact.abs().max(numeric.abs()).max(REL_FLOOR));
        }
    }
    Ok(GradCheck {
        seed,
        compression: c,
        max_rel_error: max_rel,
        max_abs_error: max_abs,
    })
}
