//! Affine maps over batches of rows. Weights use the `out x in` row-major
//! layout of the weight file, so `y = x W^T + b`.

use super::DenseArray;
use crate::error::{Error, Result};

/// Below this many rows the packed GEMM path costs more than it saves.
const GEMM_MIN_ROWS: usize = 8;

/// `C = A B` for rank-2 arrays.
pub fn matmul(a: &DenseArray, b: &DenseArray) -> Result<DenseArray> {
    if a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0] {
        return Err(Error::dim(format!(
            "matmul needs m x p times p x n, got {:?} x {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let (m, p, n) = (a.shape()[0], a.shape()[1], b.shape()[1]);
    let mut c = vec![0.0f32; m * n];
    // SAFETY: the pointers and strides describe the full extents of `a`, `b` and `c`.
    unsafe {
        matrixmultiply::sgemm(
            m,
            p,
            n,
            1.0,
            a.data().as_ptr(),
            p as isize,
            1,
            b.data().as_ptr(),
            n as isize,
            1,
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
    DenseArray::new(&[m, n], c)
}

/// Dense layer with `weight: out x in` and optional bias.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weight: Vec<f32>,
    pub bias: Option<Vec<f32>>,
}

impl Linear {
    pub fn new(in_dim: usize, out_dim: usize, weight: Vec<f32>, bias: Option<Vec<f32>>) -> Result<Self> {
        if weight.len() != in_dim * out_dim {
            return Err(Error::dim(format!(
                "linear weight has {} values, expected {out_dim} x {in_dim}",
                weight.len()
            )));
        }
        if let Some(b) = &bias {
            if b.len() != out_dim {
                return Err(Error::dim(format!(
                    "linear bias has {} values, expected {out_dim}",
                    b.len()
                )));
            }
        }
        Ok(Self {
            in_dim,
            out_dim,
            weight,
            bias,
        })
    }

    pub fn zeros(in_dim: usize, out_dim: usize, with_bias: bool) -> Self {
        Self {
            in_dim,
            out_dim,
            weight: vec![0.0; in_dim * out_dim],
            bias: with_bias.then(|| vec![0.0; out_dim]),
        }
    }

    /// `y[r] = W x[r] + b` for `rows` contiguous input rows.
    pub fn forward(&self, x: &[f32], rows: usize, y: &mut [f32]) {
        affine_rows(
            x,
            rows,
            self.in_dim,
            &self.weight,
            self.bias.as_deref(),
            self.out_dim,
            y,
        );
    }

    pub fn forward_vec(&self, x: &[f32]) -> Vec<f32> {
        let rows = x.len() / self.in_dim;
        let mut y = vec![0.0; rows * self.out_dim];
        self.forward(x, rows, &mut y);
        y
    }
}

/// Overwrites `y` (`rows x out_dim`) with `x W^T + b`.
pub fn affine_rows(
    x: &[f32],
    rows: usize,
    in_dim: usize,
    weight: &[f32],
    bias: Option<&[f32]>,
    out_dim: usize,
    y: &mut [f32],
) {
    assert_eq!(x.len(), rows * in_dim, "input rows");
    assert_eq!(y.len(), rows * out_dim, "output rows");
    assert_eq!(weight.len(), in_dim * out_dim, "weight extent");
    if rows == 0 {
        return;
    }
    if rows >= GEMM_MIN_ROWS {
        match bias {
            Some(b) => y.chunks_exact_mut(out_dim).for_each(|r| r.copy_from_slice(b)),
            None => y.fill(0.0),
        }
        // SAFETY: extents checked above; B = W^T is addressed through its strides.
        unsafe {
            matrixmultiply::sgemm(
                rows,
                in_dim,
                out_dim,
                1.0,
                x.as_ptr(),
                in_dim as isize,
                1,
                weight.as_ptr(),
                1,
                in_dim as isize,
                1.0,
                y.as_mut_ptr(),
                out_dim as isize,
                1,
            );
        }
    } else {
        for (xr, yr) in x.chunks_exact(in_dim).zip(y.chunks_exact_mut(out_dim)) {
            matvec(xr, weight, bias, yr);
        }
    }
}

fn matvec(x: &[f32], weight: &[f32], bias: Option<&[f32]>, y: &mut [f32]) {
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx2") && std::arch::is_x86_feature_detected!("fma") {
            // SAFETY: the required CPU features were detected at run time.
            unsafe { matvec_avx2(x, weight, bias, y) };
            return;
        }
    }
    matvec_portable(x, weight, bias, y);
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn matvec_avx2(x: &[f32], weight: &[f32], bias: Option<&[f32]>, y: &mut [f32]) {
    use std::arch::x86_64::*;

    #[inline(always)]
    unsafe fn hsum256(v: __m256) -> f32 {
        let s = _mm_add_ps(_mm256_castps256_ps128(v), _mm256_extractf128_ps(v, 1));
        let s = _mm_add_ps(s, _mm_movehl_ps(s, s));
        let s = _mm_add_ss(s, _mm_shuffle_ps(s, s, 1));
        _mm_cvtss_f32(s)
    }

    let n = x.len();
    let full = n / 8 * 8;
    let xp = x.as_ptr();
    let out_dim = y.len();
    let mut j = 0;
    while j + 4 <= out_dim {
        let w = weight.as_ptr().add(j * n);
        let (mut a0, mut a1, mut a2, mut a3) = (
            _mm256_setzero_ps(),
            _mm256_setzero_ps(),
            _mm256_setzero_ps(),
            _mm256_setzero_ps(),
        );
        let mut i = 0;
        while i < full {
            let xv = _mm256_loadu_ps(xp.add(i));
            a0 = _mm256_fmadd_ps(xv, _mm256_loadu_ps(w.add(i)), a0);
            a1 = _mm256_fmadd_ps(xv, _mm256_loadu_ps(w.add(n + i)), a1);
            a2 = _mm256_fmadd_ps(xv, _mm256_loadu_ps(w.add(2 * n + i)), a2);
            a3 = _mm256_fmadd_ps(xv, _mm256_loadu_ps(w.add(3 * n + i)), a3);
            i += 8;
        }
        let mut sums = [hsum256(a0), hsum256(a1), hsum256(a2), hsum256(a3)];
        for i in full..n {
            for (r, s) in sums.iter_mut().enumerate() {
                *s += x[i] * weight[(j + r) * n + i];
            }
        }
        for (r, s) in sums.into_iter().enumerate() {
            y[j + r] = s + bias.map_or(0.0, |b| b[j + r]);
        }
        j += 4;
    }
    for (jj, yj) in y.iter_mut().enumerate().skip(j) {
        *yj = dot(x, &weight[jj * n..(jj + 1) * n]) + bias.map_or(0.0, |b| b[jj]);
    }
}

#[inline(always)]
fn matvec_portable(x: &[f32], weight: &[f32], bias: Option<&[f32]>, y: &mut [f32]) {
    let n = x.len();
    let mut rows = weight.chunks_exact(n);
    let mut out = y.iter_mut().enumerate();
    // four output rows per pass share each load of `x`
    while let (Some(w0), Some(w1), Some(w2), Some(w3)) = (rows.next(), rows.next(), rows.next(), rows.next()) {
        let d = dot4(x, w0, w1, w2, w3);
        for dv in d {
            let (j, yj) = out.next().unwrap();
            *yj = dv + bias.map_or(0.0, |b| b[j]);
        }
    }
    for (j, yj) in out {
        let w = &weight[j * n..(j + 1) * n];
        *yj = dot(x, w) + bias.map_or(0.0, |b| b[j]);
    }
}

#[inline(always)]
fn dot4(x: &[f32], w0: &[f32], w1: &[f32], w2: &[f32], w3: &[f32]) -> [f32; 4] {
    const L: usize = 8;
    let mut acc = [[0.0f32; L]; 4];
    let chunks = x.len() / L;
    for c in 0..chunks {
        let xs = &x[c * L..c * L + L];
        let ws = [
            &w0[c * L..c * L + L],
            &w1[c * L..c * L + L],
            &w2[c * L..c * L + L],
            &w3[c * L..c * L + L],
        ];
        for (a, w) in acc.iter_mut().zip(ws) {
            for l in 0..L {
                a[l] += xs[l] * w[l];
            }
        }
    }
    let mut out = [0.0f32; 4];
    for (o, a) in out.iter_mut().zip(&acc) {
        *o = hsum(a);
    }
    for i in chunks * L..x.len() {
        out[0] += x[i] * w0[i];
        out[1] += x[i] * w1[i];
        out[2] += x[i] * w2[i];
        out[3] += x[i] * w3[i];
    }
    out
}

#[inline(always)]
fn dot(x: &[f32], w: &[f32]) -> f32 {
    const L: usize = 8;
    let mut acc = [0.0f32; L];
    let chunks = x.len() / L;
    for c in 0..chunks {
        for l in 0..L {
            acc[l] += x[c * L + l] * w[c * L + l];
        }
    }
    let mut s = hsum(&acc);
    for i in chunks * L..x.len() {
        s += x[i] * w[i];
    }
    s
}

#[inline(always)]
fn hsum(a: &[f32; 8]) -> f32 {
    ((a[0] + a[4]) + (a[1] + a[5])) + ((a[2] + a[6]) + (a[3] + a[7]))
}
