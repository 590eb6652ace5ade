//! Named tensor container, canonical initialization and the `.pbw` file format.
//!
//! File layout:
//!
//! ```text
//! "PBW1" | u64 LE manifest length | JSON manifest (space padded) | blob
//! ```
//!
//! The manifest is `{format_version, config, tensors: [{name, shape, dtype,
//! offset, nbytes}]}` with `dtype = "f32le"` and offsets relative to the blob
//! start, each a multiple of 16. The blob itself starts on a 16-byte boundary.

use std::fs;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use crate::error::{Error, Result};
use crate::numerics::{init_uniform, DenseArray, SeededRng};

pub const MAGIC: &[u8; 4] = b"PBW1";
pub const FORMAT_VERSION: u32 = 1;
const ALIGN: usize = 16;
const HEADER: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Init {
    Glorot { fan_in: usize, fan_out: usize },
    Const(f32),
}

/// Name, shape and initializer of one tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub init: Init,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

struct SpecList(Vec<TensorSpec>);

impl SpecList {
    fn push(&mut self, name: String, shape: &[usize], init: Init) {
        self.0.push(TensorSpec {
            name,
            shape: shape.to_vec(),
            init,
        });
    }

    fn glorot(&mut self, name: String, out: usize, inp: usize) {
        self.push(
            name,
            &[out, inp],
            Init::Glorot {
                fan_in: inp,
                fan_out: out,
            },
        );
    }

    fn linear(&mut self, prefix: &str, out: usize, inp: usize) {
        self.glorot(format!("{prefix}/weight"), out, inp);
        self.push(format!("{prefix}/bias"), &[out], Init::Const(0.0));
    }

    fn batch_norm(&mut self, prefix: &str, c: usize) {
        for (stat, v) in [("mean", 0.0), ("var", 1.0), ("weight", 1.0), ("bias", 0.0)] {
            self.push(format!("{prefix}/{stat}"), &[c], Init::Const(v));
        }
    }

    fn layer_norm(&mut self, prefix: &str, c: usize) {
        self.push(format!("{prefix}/weight"), &[c], Init::Const(1.0));
        self.push(format!("{prefix}/bias"), &[c], Init::Const(0.0));
    }

    fn gru(&mut self, prefix: &str, input: usize, hidden: usize, suffix: &str) {
        self.glorot(format!("{prefix}/weight_ih{suffix}"), 3 * hidden, input);
        self.glorot(format!("{prefix}/weight_hh{suffix}"), 3 * hidden, hidden);
        self.push(format!("{prefix}/bias_ih{suffix}"), &[3 * hidden], Init::Const(0.0));
        self.push(format!("{prefix}/bias_hh{suffix}"), &[3 * hidden], Init::Const(0.0));
    }
}

/// Every tensor of a model in canonical order.
pub fn tensor_specs(config: &ModelConfig) -> Vec<TensorSpec> {
    let (n, h, m) = (config.features, config.hidden, config.mlp_hidden);
    let (c1, c2) = (config.attn_dim, config.embed_dim);
    let mut s = SpecList(Vec::new());
    for (j, &w) in config.band_widths.iter().enumerate() {
        s.batch_norm(&format!("split/band{j}/norm"), 2 * w);
        s.linear(&format!("split/band{j}/fc"), n, 2 * w);
    }
    for i in 0..config.n_blocks {
        let p = format!("block{i}");
        s.layer_norm(&format!("{p}/temporal/norm"), n);
        s.gru(&format!("{p}/temporal/gru"), n, h, "");
        s.linear(&format!("{p}/temporal/fc"), n, h);
        s.layer_norm(&format!("{p}/band/norm"), n);
        s.gru(&format!("{p}/band/gru"), n, h, "");
        if config.band_bidirectional {
            s.gru(&format!("{p}/band/gru"), n, h, "_reverse");
        }
        s.linear(&format!("{p}/band/fc"), n, config.band_directions() * h);
        s.linear(&format!("{p}/sam/fc"), c1, c2);
        let taps = config.kt * config.kk;
        s.push(
            format!("{p}/sam/conv0_dw/weight"),
            &[n, config.kt, config.kk],
            Init::Glorot {
                fan_in: taps,
                fan_out: taps,
            },
        );
        s.batch_norm(&format!("{p}/sam/conv0_dw/norm"), n);
        s.push(format!("{p}/sam/conv0_dw/prelu"), &[n], Init::Const(0.25));
        s.linear(&format!("{p}/sam/conv0_pw"), c1, n);
        s.batch_norm(&format!("{p}/sam/conv0_pw/norm"), c1);
        s.push(format!("{p}/sam/conv0_pw/prelu"), &[c1], Init::Const(0.25));
        s.linear(&format!("{p}/sam/conv1"), n, n);
        s.batch_norm(&format!("{p}/sam/conv1/norm"), n);
        s.push(format!("{p}/sam/conv1/prelu"), &[n], Init::Const(0.25));
    }
    for (j, &w) in config.band_widths.iter().enumerate() {
        s.layer_norm(&format!("merge/band{j}/norm"), n);
        s.linear(&format!("merge/band{j}/fc1"), m, n);
        s.linear(&format!("merge/band{j}/fc2"), 2 * w, m);
    }
    s.0
}

/// Ordered map from tensor name to array.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WeightStore {
    tensors: IndexMap<String, DenseArray>,
}

impl WeightStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Glorot-uniform weights, zero biases, identity norms and PReLU slope
    /// 0.25, drawn from one stream in canonical order.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = SeededRng::new(seed);
        let mut store = Self::new();
        for spec in tensor_specs(config) {
            let arr = match spec.init {
                Init::Glorot { fan_in, fan_out } => init_uniform(&mut rng, &spec.shape, fan_in, fan_out),
                Init::Const(v) => DenseArray::filled(&spec.shape, v),
            };
            store.insert(spec.name, arr);
        }
        Ok(store)
    }

    pub fn insert(&mut self, name: impl Into<String>, value: DenseArray) -> Option<DenseArray> {
        self.tensors.insert(name.into(), value)
    }

    pub fn get(&self, name: &str) -> Option<&DenseArray> {
        self.tensors.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut DenseArray> {
        self.tensors.get_mut(name)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &DenseArray)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn total_elements(&self) -> usize {
        self.tensors.values().map(DenseArray::len).sum()
    }

    /// The tensor `name`, checked against `shape`.
    pub fn expect(&self, name: &str, shape: &[usize]) -> Result<&DenseArray> {
        let t = self
            .get(name)
            .ok_or_else(|| Error::tensor(name, "missing from weight store"))?;
        if t.shape() != shape {
            return Err(Error::tensor(
                name,
                format!("shape {:?} does not match expected {:?}", t.shape(), shape),
            ));
        }
        Ok(t)
    }

    /// Checks names, shapes and finiteness against `config`.
    pub fn validate(&self, config: &ModelConfig) -> Result<()> {
        let specs = tensor_specs(config);
        for spec in &specs {
            let t = self.expect(&spec.name, &spec.shape)?;
            if !t.all_finite() {
                return Err(Error::tensor(&spec.name, "contains non-finite values"));
            }
        }
        if self.len() != specs.len() {
            let known: std::collections::HashSet<&str> = specs.iter().map(|s| s.name.as_str()).collect();
            let extra = self
                .tensors
                .keys()
                .find(|k| !known.contains(k.as_str()))
                .expect("extra tensor");
            return Err(Error::tensor(extra, "not part of this model configuration"));
        }
        Ok(())
    }

    /// Zeroes every band-merge output layer and sets its bias so the mask is
    /// exactly `1 + 0j` in every bin.
    pub fn set_identity_mask(&mut self, config: &ModelConfig) -> Result<()> {
        for (j, &w) in config.band_widths.iter().enumerate() {
            let weight = format!("merge/band{j}/fc2/weight");
            let bias = format!("merge/band{j}/fc2/bias");
            self.expect(&weight, &[2 * w, config.mlp_hidden])?;
            self.expect(&bias, &[2 * w])?;
            self.insert(weight, DenseArray::zeros(&[2 * w, config.mlp_hidden]));
            self.insert(
                bias,
                DenseArray::from_fn(&[2 * w], |i| if i[0] % 2 == 0 { 1.0 } else { 0.0 }),
            );
        }
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    config: ModelConfig,
    tensors: Vec<TensorEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    dtype: String,
    offset: u64,
    nbytes: u64,
}

fn align_up(x: usize) -> usize {
    x.div_ceil(ALIGN) * ALIGN
}

/// Serializes `store` after validating it against `config`.
pub fn to_bytes(config: &ModelConfig, store: &WeightStore) -> Result<Vec<u8>> {
    config.validate()?;
    store.validate(config)?;
    let mut entries = Vec::with_capacity(store.len());
    let mut offset = 0usize;
    for (name, t) in store.iter() {
        offset = align_up(offset);
        let nbytes = 4 * t.len();
        entries.push(TensorEntry {
            name: name.to_string(),
            shape: t.shape().to_vec(),
            dtype: "f32le".into(),
            offset: offset as u64,
            nbytes: nbytes as u64,
        });
        offset += nbytes;
    }
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        config: config.clone(),
        tensors: entries,
    };
    let mut json = serde_json::to_vec(&manifest).map_err(|e| Error::Load(format!("cannot encode manifest: {e}")))?;
    json.resize(align_up(HEADER + json.len()) - HEADER, b' ');

    let mut out = Vec::with_capacity(HEADER + json.len() + offset);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    let blob_start = out.len();
    for (entry, (_, t)) in manifest.tensors.iter().zip(store.iter()) {
        out.resize(blob_start + entry.offset as usize, 0);
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

/// Parses and validates a weight file image.
pub fn from_bytes(bytes: &[u8]) -> Result<(ModelConfig, WeightStore)> {
    if bytes.len() < HEADER {
        return Err(Error::Load(format!(
            "file is {} bytes, shorter than the 12-byte header",
            bytes.len()
        )));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Load(format!("bad magic {:?}, expected \"PBW1\"", &bytes[..4])));
    }
    let manifest_len = u64::from_le_bytes(bytes[4..12].try_into().expect("8 bytes"));
    let available = (bytes.len() - HEADER) as u64;
    if manifest_len > available {
        return Err(Error::Load(format!(
            "manifest length {manifest_len} exceeds the {available} bytes after the header"
        )));
    }
    let manifest_end = HEADER + manifest_len as usize;
    let manifest: Manifest = serde_json::from_slice(&bytes[HEADER..manifest_end])
        .map_err(|e| Error::Load(format!("malformed manifest: {e}")))?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::Load(format!(
            "unsupported format version {}, expected {FORMAT_VERSION}",
            manifest.format_version
        )));
    }
    let config = manifest.config;
    config.validate()?;
    let blob = &bytes[manifest_end..];

    let specs = tensor_specs(&config);
    let expected: IndexMap<&str, &TensorSpec> = specs.iter().map(|s| (s.name.as_str(), s)).collect();
    let mut store = WeightStore::new();
    let mut prev_end = 0u64;
    for entry in &manifest.tensors {
        let name = entry.name.as_str();
        let bad = |why: String| Error::tensor(name, why);
        let spec = expected
            .get(name)
            .ok_or_else(|| bad("not part of this model configuration".into()))?;
        if entry.dtype != "f32le" {
            return Err(bad(format!("dtype {:?} is not f32le", entry.dtype)));
        }
        if entry.shape != spec.shape {
            return Err(bad(format!(
                "shape {:?} does not match expected {:?}",
                entry.shape, spec.shape
            )));
        }
        let count: usize = entry.shape.iter().product();
        if entry.nbytes != 4 * count as u64 {
            return Err(bad(format!(
                "nbytes {} does not match {count} f32 values",
                entry.nbytes
            )));
        }
        if entry.offset % ALIGN as u64 != 0 {
            return Err(bad(format!("offset {} is not {ALIGN}-byte aligned", entry.offset)));
        }
        if entry.offset < prev_end {
            return Err(bad(format!("offset {} overlaps the previous tensor", entry.offset)));
        }
        let end = entry
            .offset
            .checked_add(entry.nbytes)
            .ok_or_else(|| bad("offset overflow".into()))?;
        if end > blob.len() as u64 {
            return Err(bad(format!(
                "bytes {}..{end} extend past the {}-byte blob (file truncated?)",
                entry.offset,
                blob.len()
            )));
        }
        let raw = &blob[entry.offset as usize..end as usize];
        let data: Vec<f32> = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
            .collect();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(bad("contains non-finite values".into()));
        }
        if store.insert(name, DenseArray::new(&entry.shape, data)?).is_some() {
            return Err(bad("listed twice in the manifest".into()));
        }
        prev_end = end;
    }
    if (blob.len() as u64) > prev_end {
        return Err(Error::Load(format!(
            "blob is {} bytes but tensors end at {prev_end}",
            blob.len()
        )));
    }
    if let Some(missing) = specs.iter().find(|s| store.get(&s.name).is_none()) {
        return Err(Error::tensor(&missing.name, "missing from manifest"));
    }
    Ok((config, store))
}

pub fn save_weights(path: impl AsRef<Path>, config: &ModelConfig, store: &WeightStore) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_bytes(config, store)?).map_err(|e| Error::io(path, e))
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<(ModelConfig, WeightStore)> {
    let path = path.as_ref();
    from_bytes(&fs::read(path).map_err(|e| Error::io(path, e))?)
}
