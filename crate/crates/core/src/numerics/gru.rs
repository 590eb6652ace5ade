use super::activation::sigmoid;
use super::linear::Linear;
use super::DenseArray;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// GRU parameters with gates stacked in `(r, z, n)` order:
///
/// ```text
/// r  = sigmoid(W_ir x + b_ir + W_hr h + b_hr)
/// z  = sigmoid(W_iz x + b_iz + W_hz h + b_hz)
/// n  = tanh(W_in x + b_in + r * (W_hn h + b_hn))
/// h' = (1 - z) * n + z * h
/// ```
#[derive(Clone, Debug, PartialEq)]
pub struct GruWeights {
    /// `3H x I` input weights with `b_ih`.
    pub input: Linear,
    /// `3H x H` recurrent weights with `b_hh`.
    pub hidden: Linear,
}

impl GruWeights {
    pub fn new(
        input_size: usize,
        hidden_size: usize,
        weight_ih: Vec<f32>,
        weight_hh: Vec<f32>,
        bias_ih: Vec<f32>,
        bias_hh: Vec<f32>,
    ) -> Result<Self> {
        Ok(Self {
            input: Linear::new(input_size, 3 * hidden_size, weight_ih, Some(bias_ih))?,
            hidden: Linear::new(hidden_size, 3 * hidden_size, weight_hh, Some(bias_hh))?,
        })
    }

    pub fn zeros(input_size: usize, hidden_size: usize) -> Self {
        Self {
            input: Linear::zeros(input_size, 3 * hidden_size, true),
            hidden: Linear::zeros(hidden_size, 3 * hidden_size, true),
        }
    }

    pub fn input_size(&self) -> usize {
        self.input.in_dim
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden.in_dim
    }

    /// Advances `rows` independent hidden states by one step.
    ///
    /// `gi` holds the input projections `W_i x + b_i` (`rows x 3H`); `gh` is
    /// scratch of the same size.
    pub(crate) fn step_rows(&self, gi: &[f32], h: &mut [f32], gh: &mut [f32]) {
        let hs = self.hidden_size();
        let rows = h.len() / hs;
        self.hidden.forward(h, rows, gh);
        for ((hr, gir), ghr) in h
            .chunks_exact_mut(hs)
            .zip(gi.chunks_exact(3 * hs))
            .zip(gh.chunks_exact(3 * hs))
        {
            gate_update(hr, gir, ghr);
        }
    }
}

#[inline]
fn gate_update(h: &mut [f32], gi: &[f32], gh: &[f32]) {
    let hs = h.len();
    let (gi_r, rest) = gi.split_at(hs);
    let (gi_z, gi_n) = rest.split_at(hs);
    let (gh_r, rest) = gh.split_at(hs);
    let (gh_z, gh_n) = rest.split_at(hs);
    for j in 0..hs {
        let r = sigmoid(gi_r[j] + gh_r[j]);
        let z = sigmoid(gi_z[j] + gh_z[j]);
        let n = (gi_n[j] + r * gh_n[j]).tanh();
        h[j] = (1.0 - z) * n + z * h[j];
    }
}

/// Single GRU step for one input vector.
pub fn gru_cell(x: &[f32], h: &[f32], w: &GruWeights) -> Vec<f32> {
    let gi = w.input.forward_vec(x);
    let mut h = h.to_vec();
    let mut gh = vec![0.0; gi.len()];
    w.step_rows(&gi, &mut h, &mut gh);
    h
}

/// Runs a GRU over `x` (`T x I`). Row `t` of the output is the hidden state
/// right after consuming input `t`, so the backward direction is the forward
/// recurrence over the time-reversed input, reversed back.
pub fn gru_sequence(x: &DenseArray, h0: &[f32], w: &GruWeights, direction: Direction) -> Result<DenseArray> {
    let hs = w.hidden_size();
    if x.rank() != 2 || x.shape()[1] != w.input_size() || h0.len() != hs {
        return Err(Error::dim(format!(
            "gru with input {} / hidden {hs} given sequence {:?} and h0 of length {}",
            w.input_size(),
            x.shape(),
            h0.len()
        )));
    }
    let t_len = x.shape()[0];
    let mut gi = vec![0.0; t_len * 3 * hs];
    w.input.forward(x.data(), t_len, &mut gi);
    let mut out = vec![0.0; t_len * hs];
    let mut h = h0.to_vec();
    let mut gh = vec![0.0; 3 * hs];
    let order: Box<dyn Iterator<Item = usize>> = match direction {
        Direction::Forward => Box::new(0..t_len),
        Direction::Backward => Box::new((0..t_len).rev()),
    };
    for t in order {
        w.step_rows(&gi[t * 3 * hs..(t + 1) * 3 * hs], &mut h, &mut gh);
        out[t * hs..(t + 1) * hs].copy_from_slice(&h);
    }
    DenseArray::new(&[t_len, hs], out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{init_uniform, SeededRng};

    fn random_gru(rng: &mut SeededRng, i: usize, h: usize) -> GruWeights {
        GruWeights::new(
            i,
            h,
            init_uniform(rng, &[3 * h, i], i, 3 * h).into_data(),
            init_uniform(rng, &[3 * h, h], h, 3 * h).into_data(),
            init_uniform(rng, &[3 * h], 1, 1).into_data(),
            init_uniform(rng, &[3 * h], 1, 1).into_data(),
        )
        .unwrap()
    }

    /// Per-gate scalar evaluation in f64.
    fn oracle(x: &DenseArray, h0: &[f32], w: &GruWeights) -> Vec<Vec<f64>> {
        let (i_sz, h_sz) = (w.input_size(), w.hidden_size());
        let wi = |g: usize, j: usize, k: usize| w.input.weight[(g * h_sz + j) * i_sz + k] as f64;
        let wh = |g: usize, j: usize, k: usize| w.hidden.weight[(g * h_sz + j) * h_sz + k] as f64;
        let bi = |g: usize, j: usize| w.input.bias.as_ref().unwrap()[g * h_sz + j] as f64;
        let bh = |g: usize, j: usize| w.hidden.bias.as_ref().unwrap()[g * h_sz + j] as f64;
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let mut h: Vec<f64> = h0.iter().map(|&v| v as f64).collect();
        let mut outs = vec![];
        for t in 0..x.shape()[0] {
            let xt: Vec<f64> = (0..i_sz).map(|k| x.get(&[t, k]) as f64).collect();
            let mut next = vec![0.0; h_sz];
            for j in 0..h_sz {
                let a = |g: usize| (0..i_sz).map(|k| wi(g, j, k) * xt[k]).sum::<f64>() + bi(g, j);
                let b = |g: usize| (0..h_sz).map(|k| wh(g, j, k) * h[k]).sum::<f64>() + bh(g, j);
                let r = sig(a(0) + b(0));
                let z = sig(a(1) + b(1));
                let n = (a(2) + r * b(2)).tanh();
                next[j] = (1.0 - z) * n + z * h[j];
            }
            h = next;
            outs.push(h.clone());
        }
        outs
    }

    #[test]
    fn zero_weights_halve_state() {
        let w = GruWeights::zeros(3, 4);
        let x = init_uniform(&mut SeededRng::new(1), &[1, 3], 1, 1);
        let y = gru_sequence(&x, &[1.0; 4], &w, Direction::Forward).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn single_step_equals_cell() {
        let mut rng = SeededRng::new(2);
        let w = random_gru(&mut rng, 5, 3);
        let x = init_uniform(&mut rng, &[1, 5], 1, 1);
        let h0 = init_uniform(&mut rng, &[3], 1, 1).into_data();
        let seq = gru_sequence(&x, &h0, &w, Direction::Forward).unwrap();
        assert_eq!(seq.data(), gru_cell(x.data(), &h0, &w).as_slice());
    }

    #[test]
    fn sequence_matches_scalar_oracle() {
        let mut rng = SeededRng::new(3);
        let w = random_gru(&mut rng, 6, 4);
        let x = init_uniform(&mut rng, &[5, 6], 1, 1);
        let h0 = init_uniform(&mut rng, &[4], 1, 1).into_data();
        let y = gru_sequence(&x, &h0, &w, Direction::Forward).unwrap();
        for (t, row) in oracle(&x, &h0, &w).iter().enumerate() {
            for (j, &e) in row.iter().enumerate() {
                assert!((y.get(&[t, j]) as f64 - e).abs() <= 1e-6, "t={t} j={j}");
            }
        }
    }

    #[test]
    fn backward_is_reversed_forward() {
        let mut rng = SeededRng::new(4);
        let w = random_gru(&mut rng, 3, 5);
        let x = init_uniform(&mut rng, &[7, 3], 1, 1);
        let h0 = init_uniform(&mut rng, &[5], 1, 1).into_data();
        let rev = DenseArray::from_fn(&[7, 3], |i| x.get(&[6 - i[0], i[1]]));
        let fwd_rev = gru_sequence(&rev, &h0, &w, Direction::Forward).unwrap();
        let bwd = gru_sequence(&x, &h0, &w, Direction::Backward).unwrap();
        let bwd_rev = DenseArray::from_fn(&[7, 5], |i| bwd.get(&[6 - i[0], i[1]]));
        assert!(fwd_rev.max_abs_diff(&bwd_rev) <= 1e-6);
    }

    #[test]
    fn shape_errors() {
        let w = GruWeights::zeros(3, 4);
        assert!(gru_sequence(&DenseArray::zeros(&[2, 2]), &[0.0; 4], &w, Direction::Forward).is_err());
        assert!(gru_sequence(&DenseArray::zeros(&[2, 3]), &[0.0; 3], &w, Direction::Forward).is_err());
    }
}
