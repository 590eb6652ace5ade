//! Parameter and multiply-accumulate counts.
//!
//! Parameters are every stored element, including batch-norm statistics.
//! MACs cover matrix products, convolutions, GRUs (`3 H (I + H)` per step and
//! direction), the attention dot products and rescaling, and the complex mask
//! multiply (4 per bin). Norms and activations are not counted.

use indexmap::IndexMap;
use serde::Serialize;

use super::config::ModelConfig;
use super::weights::WeightStore;

/// Parameter counts per group, in model order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ParamBreakdown {
    pub groups: IndexMap<String, u64>,
    pub total: u64,
}

/// MAC counts per group for a stretch of audio.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MacBreakdown {
    pub seconds: f64,
    pub groups: IndexMap<String, f64>,
    pub total: f64,
}

/// Collapses `block{i}/<part>` groups into `<part>`.
pub fn by_module<V: Copy + std::ops::AddAssign + Default>(groups: &IndexMap<String, V>) -> IndexMap<String, V> {
    let mut out: IndexMap<String, V> = IndexMap::new();
    for (name, &v) in groups {
        let key = match name.split_once('/') {
            Some((block, part)) if block.starts_with("block") => part.to_string(),
            _ => name.clone(),
        };
        *out.entry(key).or_default() += v;
    }
    out
}

fn group_of(tensor: &str) -> String {
    let mut parts = tensor.split('/');
    match (parts.next(), parts.next()) {
        (Some("split"), _) => "band_split".into(),
        (Some("merge"), _) => "band_merge".into(),
        (Some(block), Some(part)) => format!("{block}/{part}"),
        _ => tensor.to_string(),
    }
}

fn finish(groups: IndexMap<String, u64>) -> ParamBreakdown {
    let total = groups.values().sum();
    ParamBreakdown { groups, total }
}

/// Closed-form parameter count from the configuration alone.
pub fn count_params(config: &ModelConfig) -> ParamBreakdown {
    let (n, h, m) = (config.features as u64, config.hidden as u64, config.mlp_hidden as u64);
    let (c1, c2) = (config.attn_dim as u64, config.embed_dim as u64);
    let d = config.band_directions() as u64;
    let taps = (config.kt * config.kk) as u64;
    let widths = || config.band_widths.iter().map(|&w| 2 * w as u64);

    let gru = 3 * h * (n + h) + 6 * h;
    let bn = |c: u64| 4 * c;
    let mut groups = IndexMap::new();
    groups.insert("band_split".into(), widths().map(|w2| bn(w2) + w2 * n + n).sum());
    for i in 0..config.n_blocks {
        groups.insert(format!("block{i}/temporal"), 2 * n + gru + h * n + n);
        groups.insert(format!("block{i}/band"), 2 * n + d * gru + d * h * n + n);
        let fc = c2 * c1 + c1;
        let dw = n * taps + bn(n) + n;
        let pw = n * c1 + c1 + bn(c1) + c1;
        let conv1 = n * n + n + bn(n) + n;
        groups.insert(format!("block{i}/sam"), fc + dw + pw + conv1);
    }
    groups.insert(
        "band_merge".into(),
        widths().map(|w2| 2 * n + n * m + m + m * w2 + w2).sum(),
    );
    finish(groups)
}

/// Parameter count by walking the tensors of a store.
pub fn count_params_store(store: &WeightStore) -> ParamBreakdown {
    let mut groups = IndexMap::new();
    for (name, t) in store.iter() {
        *groups.entry(group_of(name)).or_insert(0u64) += t.len() as u64;
    }
    // keep model order: split, blocks, merge
    if let Some(merge) = groups.shift_remove("band_merge") {
        groups.insert("band_merge".into(), merge);
    }
    finish(groups)
}

/// MACs of a 1x1 convolution over a `frames x bands` grid.
pub fn pointwise_conv_macs(c_in: usize, c_out: usize, frames: usize, bands: usize) -> u64 {
    (c_in * c_out * frames * bands) as u64
}

/// MACs per processed frame, by group.
pub fn count_macs_per_frame(config: &ModelConfig) -> IndexMap<String, u64> {
    let (n, h, m) = (config.features as u64, config.hidden as u64, config.mlp_hidden as u64);
    let (c1, c2) = (config.attn_dim as u64, config.embed_dim as u64);
    let k = config.num_bands() as u64;
    let d = config.band_directions() as u64;
    let taps = (config.kt * config.kk) as u64;
    let widths = || config.band_widths.iter().map(|&w| 2 * w as u64);
    let gru_step = 3 * h * (n + h);

    let mut groups = IndexMap::new();
    groups.insert("band_split".into(), widths().map(|w2| w2 * n).sum());
    for i in 0..config.n_blocks {
        groups.insert(format!("block{i}/temporal"), k * gru_step + k * h * n);
        groups.insert(format!("block{i}/band"), d * k * gru_step + k * d * h * n);
        let sam = c2 * c1
            + n * k * taps
            + pointwise_conv_macs(config.features, config.attn_dim, 1, config.num_bands())
            + k * c1
            + n * k
            + pointwise_conv_macs(config.features, config.features, 1, config.num_bands());
        groups.insert(format!("block{i}/sam"), sam);
    }
    groups.insert("band_merge".into(), widths().map(|w2| n * m + m * w2).sum());
    groups.insert("mask".into(), 4 * config.num_bins() as u64);
    groups
}

/// MACs for `seconds` of audio at `sample_rate / hop` frames per second.
pub fn count_macs(config: &ModelConfig, seconds: f64) -> MacBreakdown {
    let frames = config.frame_rate() * seconds;
    let groups: IndexMap<String, f64> = count_macs_per_frame(config)
        .into_iter()
        .map(|(g, v)| (g, v as f64 * frames))
        .collect();
    let total = groups.values().sum();
    MacBreakdown { seconds, groups, total }
}
