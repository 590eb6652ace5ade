//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed.

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use num_complex::Complex32;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use serde_json::Value;

use pbsrnn::attention::{attention_scores, compute_key, compute_query, sam_forward};
use pbsrnn::dsp::{istft, stft};
use pbsrnn::engine::weights::{from_bytes, to_bytes};
use pbsrnn::engine::{count_macs, count_params, count_params_store, load_weights, save_weights};
use pbsrnn::mixer::{clip_from_seed, gen_dataset, mix_clip, DatasetSources, ManifestEntry, MixSpec};
use pbsrnn::objectives::{gradcheck, loss_total, mse_asym, LOSS_WEIGHTS};
use pbsrnn::wav::read_wav;
use pbsrnn::{
    ComplexSpectrogram, DenseArray, Engine, Error, FeatureTensor, ModelConfig, SamWeights, SeededRng, SpeakerEmbedding,
    Waveform, WeightStore,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if $cond {
        } else {
            return Err(format!($($fmt)+));
        }
    };
}

fn ctx<T, E: std::fmt::Display>(r: std::result::Result<T, E>, what: &str) -> Result<T, String> {
    r.map_err(|e| format!("{what}: {e}"))
}

fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn normals(rng: &mut SeededRng, n: usize, scale: f64) -> Vec<f32> {
    (0..n).map(|_| (scale * rng.normal()) as f32).collect()
}

fn embedding(rng: &mut SeededRng, dim: usize) -> SpeakerEmbedding {
    SpeakerEmbedding::new(normals(rng, dim, 1.0)).unwrap()
}

fn noise(rng: &mut SeededRng, seconds: f64, sample_rate: u32) -> Waveform {
    let n = (seconds * sample_rate as f64) as usize;
    Waveform::new(normals(rng, n, 0.1), sample_rate).unwrap()
}

/// Harmonic source with a random pitch and syllable-rate envelope.
fn voiced(rng: &mut SeededRng, seconds: f64, sample_rate: u32) -> Waveform {
    let f0 = rng.uniform(90.0, 250.0);
    let rate = rng.uniform(2.0, 6.0);
    let sr = sample_rate as f64;
    let n = (seconds * sr) as usize;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / sr;
            let env = (std::f64::consts::PI * rate * t).sin().abs();
            let v: f64 = (1..8)
                .map(|h| (2.0 * std::f64::consts::PI * f0 * h as f64 * t).sin() / h as f64)
                .sum();
            (0.2 * env * v + 0.002 * rng.normal()) as f32
        })
        .collect();
    Waveform::new(samples, sample_rate).unwrap()
}

/// Model whose SAM has `c` channels, `c1` attention dims and `k` bands.
fn small_config(c: usize, c1: usize, k: usize) -> ModelConfig {
    let bins = 9;
    let mut band_widths = vec![1; k - 1];
    band_widths.push(bins - (k - 1));
    ModelConfig {
        sample_rate: 16_000,
        fft_size: 2 * (bins - 1),
        hop: bins - 1,
        band_widths,
        features: c,
        hidden: 4,
        mlp_hidden: 4,
        attn_dim: c1,
        embed_dim: 6,
        n_blocks: 1,
        ..ModelConfig::tiny()
    }
}

/// SAM weights with randomized normalization statistics.
fn random_sam(c: usize, c1: usize, k: usize, seed: u64) -> SamWeights {
    let (_, engine) = Engine::build(&small_config(c, c1, k), seed).unwrap();
    let mut sam = engine.blocks()[0].sam.clone();
    let mut rng = SeededRng::new(seed ^ 0x5a5a);
    for norm in [&mut sam.conv0_dw.norm, &mut sam.conv0_pw.norm, &mut sam.conv1.norm] {
        norm.mean.iter_mut().for_each(|v| *v = (0.3 * rng.normal()) as f32);
        norm.var.iter_mut().for_each(|v| *v = rng.uniform(0.5, 2.0) as f32);
        norm.gamma.iter_mut().for_each(|v| *v = rng.uniform(0.5, 1.5) as f32);
        norm.beta.iter_mut().for_each(|v| *v = (0.1 * rng.normal()) as f32);
    }
    sam
}

fn features(rng: &mut SeededRng, b: usize, c: usize, t: usize, k: usize) -> FeatureTensor {
    FeatureTensor::new(DenseArray::new(&[b, c, t, k], normals(rng, b * c * t * k, 1.0)).unwrap()).unwrap()
}

fn shape_contract() -> Outcome {
    let strategy = (
        1usize..=2,
        1usize..=16,
        1usize..=12,
        1usize..=8,
        1usize..=8,
        any::<u64>(),
    );
    let cases = std::cell::Cell::new(0);
    runner(96)
        .run(&strategy, |(b, c, t, k, c1, seed)| {
            let sam = random_sam(c, c1, k, seed);
            let mut rng = SeededRng::new(seed);
            let h = features(&mut rng, b, c, t, k);
            let e: Vec<_> = (0..b).map(|_| embedding(&mut rng, 6)).collect();
            let key = compute_key(&e, &sam, t).unwrap();
            let q = compute_query(&h, &sam).unwrap();
            let s = attention_scores(&q, &key).unwrap();
            let out = sam_forward(&h, &e, &sam).unwrap();
            prop_assert_eq!(key.shape(), &[b, t, c1, 1]);
            prop_assert_eq!(q.shape(), &[b, t, k, c1]);
            prop_assert_eq!(s.shape(), &[b, t, k, 1]);
            prop_assert_eq!(out.shape(), &[b, c, t, k]);
            prop_assert!(out.array().all_finite());
            cases.set(cases.get() + 1);
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(format!("{} random configurations", cases.get()))
}

fn attention_normalization() -> Outcome {
    let mut rng = SeededRng::new(2);
    let mut worst = 0.0f64;
    for draw in 0..1000 {
        let (b, t, k, c1) = (1 + rng.below(2), 1 + rng.below(12), 1 + rng.below(8), 1 + rng.below(8));
        let scale = [0.1, 1.0, 10.0][draw % 3];
        let q = DenseArray::new(&[b, t, k, c1], normals(&mut rng, b * t * k * c1, scale)).unwrap();
        let key = DenseArray::new(&[b, t, c1, 1], normals(&mut rng, b * t * c1, scale)).unwrap();
        let s = ctx(attention_scores(&q, &key), "scores")?;
        for row in s.0.data().chunks_exact(k) {
            ensure!(
                row.iter().all(|&p| (0.0..=1.0).contains(&p)),
                "score outside [0, 1]: {row:?}"
            );
            worst = worst.max((row.iter().map(|&p| p as f64).sum::<f64>() - 1.0).abs());
        }
    }
    ensure!(worst <= 1e-6, "max |sum - 1| = {worst:e}");
    for k in 1..=8 {
        let q = DenseArray::filled(&[2, 3, k, 4], 0.7);
        let key = DenseArray::new(&[2, 3, 4, 1], normals(&mut rng, 24, 3.0)).unwrap();
        let s = ctx(attention_scores(&q, &key), "scores")?;
        let dev =
            s.0.data()
                .iter()
                .map(|&p| (p as f64 - 1.0 / k as f64).abs())
                .fold(0.0, f64::max);
        ensure!(dev <= 1e-7, "constant logits with K={k} deviate from 1/K by {dev:e}");
    }
    Ok(format!(
        "1000 draws, max |sum - 1| = {worst:.1e}; constant logits uniform"
    ))
}

fn sam_skip_identity() -> Outcome {
    let mut rng = SeededRng::new(3);
    for trial in 0..20u64 {
        let (b, c, t, k, c1) = (
            1 + rng.below(2),
            1 + rng.below(16),
            1 + rng.below(12),
            1 + rng.below(8),
            1 + rng.below(8),
        );
        let mut sam = random_sam(c, c1, k, trial);
        sam.conv1.fc.weight.fill(0.0);
        if let Some(bias) = &mut sam.conv1.fc.bias {
            bias.fill(0.0);
        }
        sam.conv1.norm.gamma.fill(0.0);
        sam.conv1.norm.beta.fill(0.0);
        let h = features(&mut rng, b, c, t, k);
        let e: Vec<_> = (0..b).map(|_| embedding(&mut rng, 6)).collect();
        let out = ctx(sam_forward(&h, &e, &sam), "sam")?;
        let same = out
            .array()
            .data()
            .iter()
            .zip(h.array().data())
            .all(|(a, b)| a.to_bits() == b.to_bits());
        ensure!(same, "trial {trial}: output differs from input");
    }
    Ok("20 random shapes, bit-exact".into())
}

fn causality() -> Outcome {
    let config = ModelConfig::default();
    let (_, engine) = ctx(Engine::build(&config, 4), "build")?;
    let mut rng = SeededRng::new(4);
    let x = voiced(&mut rng, 2.0, config.sample_rate);
    let e = embedding(&mut rng, config.embed_dim);
    let spec = ctx(stft(&x, config.fft_size, config.hop), "stft")?;
    let full = ctx(engine.enhance_spectrogram(&spec, &e), "enhance")?;
    let frames = spec.frames();
    let mut cuts = Vec::new();
    let mut worst = 0.0f32;
    for _ in 0..5 {
        let cut = 1 + rng.below(frames - 2);
        let mut truncated = spec.clone();
        for t in cut + 1..frames {
            truncated.frame_mut(t).fill(Complex32::new(0.0, 0.0));
        }
        let out = ctx(engine.enhance_spectrogram(&truncated, &e), "enhance")?;
        for t in 0..=cut {
            for (a, b) in out.frame(t).iter().zip(full.frame(t)) {
                worst = worst.max((a - b).norm());
            }
        }
        cuts.push(cut);
    }
    ensure!(
        worst <= 1e-5,
        "frames before the cut moved by {worst:e} (cuts {cuts:?})"
    );
    Ok(format!(
        "2 s audio, cuts at frames {cuts:?} of {frames}, max change {worst:.1e}"
    ))
}

fn streaming_equals_offline() -> Outcome {
    let fixtures: [(ModelConfig, f64, u64); 3] = [
        (ModelConfig::default(), 1.0, 51),
        (ModelConfig::default(), 0.73, 52),
        (ctx(ModelConfig::default_for(16_000), "config")?, 1.21, 53),
    ];
    let mut worst = 0.0f32;
    for (config, seconds, seed) in fixtures {
        let (_, engine) = ctx(Engine::build(&config, seed), "build")?;
        let mut rng = SeededRng::new(seed);
        let x = voiced(&mut rng, seconds, config.sample_rate);
        let e = embedding(&mut rng, config.embed_dim);
        let offline = ctx(engine.enhance_offline(&x, &e), "offline")?;
        let hop = config.hop;
        let mut padded = x.samples.clone();
        padded.resize((x.len().div_ceil(hop) + 1) * hop, 0.0);
        let mut state = engine.new_stream();
        let mut streamed = Vec::with_capacity(padded.len());
        for chunk in padded.chunks_exact(hop) {
            streamed.extend(ctx(engine.stream_push(&mut state, chunk, &e), "push")?);
        }
        for (j, &y) in offline.samples.iter().enumerate() {
            worst = worst.max((y - streamed[j + hop]).abs());
        }
    }
    ensure!(worst <= 1e-5, "max difference {worst:e}");
    Ok(format!(
        "3 fixtures, max difference {worst:.1e} after the one-hop latency"
    ))
}

fn dsp_round_trip() -> Outcome {
    let mut rng = SeededRng::new(6);
    let mut worst_rt = 0.0f32;
    for (sr, fft) in [(48_000, 960), (16_000, 320)] {
        let x = noise(&mut rng, 1.0, sr);
        let y = istft(&ctx(stft(&x, fft, fft / 2), "stft")?);
        ensure!(y.len() >= x.len(), "resynthesis is shorter than the input");
        for j in fft..x.len() - fft {
            worst_rt = worst_rt.max((x.samples[j] - y.samples[j]).abs());
        }
    }
    ensure!(worst_rt <= 1e-6, "round-trip error {worst_rt:e}");

    let config = ModelConfig::default();
    let mut store = ctx(WeightStore::init(&config, 6), "init")?;
    ctx(store.set_identity_mask(&config), "identity mask")?;
    let engine = ctx(Engine::from_store(&config, &store), "engine")?;
    let x = voiced(&mut rng, 0.5, config.sample_rate);
    let y = ctx(
        engine.enhance_offline(&x, &embedding(&mut rng, config.embed_dim)),
        "enhance",
    )?;
    let worst_id = x
        .samples
        .iter()
        .zip(&y.samples)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f32::max);
    ensure!(worst_id <= 1e-5, "identity mask changed the signal by {worst_id:e}");
    Ok(format!("round trip {worst_rt:.1e}, identity mask {worst_id:.1e}"))
}

fn spectrogram(values: &[(f32, f32)]) -> ComplexSpectrogram {
    let data = values.iter().map(|&(r, i)| Complex32::new(r, i)).collect();
    ComplexSpectrogram::from_data(data, 1, 16_000, 2 * (values.len() - 1)).unwrap()
}

fn loss_suite() -> Outcome {
    let mut rng = SeededRng::new(7);
    let draw = |rng: &mut SeededRng| -> Vec<(f32, f32)> {
        (0..2 * 9).map(|_| (rng.normal() as f32, rng.normal() as f32)).collect()
    };
    let to_spec = |v: &[(f32, f32)]| {
        let data = v.iter().map(|&(r, i)| Complex32::new(r, i)).collect();
        ComplexSpectrogram::from_data(data, 2, 16_000, 16).unwrap()
    };
    for c in [0.3, 0.5, 1.0] {
        let s = to_spec(&draw(&mut rng));
        let r = ctx(loss_total(&s, &s, c), "loss")?;
        ensure!(
            r.total == 0.0 && r.mse_a == 0.0 && r.mse_c == 0.0,
            "non-zero loss at identity: {r:?}"
        );
        let s_hat = to_spec(&draw(&mut rng));
        let r = ctx(loss_total(&s, &s_hat, c), "loss")?;
        let expected = 0.3 * r.mse_a + 0.7 * r.mse_c;
        ensure!(
            (r.total - expected).abs() <= 1e-12 * expected.max(1.0),
            "total {} != 0.3a + 0.7c = {expected}",
            r.total
        );
    }
    ensure!(LOSS_WEIGHTS == [0.3, 0.7], "loss weights are {LOSS_WEIGHTS:?}");

    let hand = ctx(
        mse_asym(
            &spectrogram(&[(1.0, 0.0), (0.5, 0.0)]),
            &spectrogram(&[(0.5, 0.0), (1.0, 0.0)]),
            1.0,
        ),
        "mse_asym",
    )?;
    ensure!(
        (hand - 0.125).abs() <= 1e-12,
        "hand example gives {hand}, expected 0.125"
    );

    let mut worst = 0.0f64;
    for seed in 0..3 {
        for c in [0.3, 0.5, 1.0] {
            let g = ctx(gradcheck(seed, c, 4, 6, 1e-4), "gradcheck")?;
            worst = worst.max(g.max_rel_error);
        }
    }
    ensure!(worst <= 1e-4, "gradient relative error {worst:e}");
    Ok(format!(
        "identity, weights, hand example 0.125, gradient rel error {worst:.1e}"
    ))
}

fn footprint() -> Outcome {
    let config = ModelConfig::default();
    let closed = count_params(&config);
    let walked = count_params_store(&ctx(WeightStore::init(&config, 0), "init")?);
    ensure!(
        closed.total == walked.total,
        "closed form {} vs store walk {}",
        closed.total,
        walked.total
    );
    ensure!(closed.groups == walked.groups, "per-group counts disagree");
    let params_dev = closed.total as f64 / 5.97e6 - 1.0;
    ensure!(
        params_dev.abs() <= 0.20,
        "params {} deviate {:+.1}% from 5.97M",
        closed.total,
        100.0 * params_dev
    );
    let macs = count_macs(&config, 1.0).total;
    let macs_dev = macs / 5.54e9 - 1.0;
    ensure!(
        macs_dev.abs() <= 0.50,
        "MACs/s {macs:.3e} deviate {:+.1}% from 5.54G",
        100.0 * macs_dev
    );
    Ok(format!(
        "params {} ({:+.1}% vs 5.97M), MACs/s {:.2}G ({:+.1}% vs 5.54G)",
        closed.total,
        100.0 * params_dev,
        macs / 1e9,
        100.0 * macs_dev
    ))
}

fn bench_rtf() -> Outcome {
    let config = ModelConfig::default();
    let (_, engine) = ctx(Engine::build(&config, 0), "build")?;
    let mut rng = SeededRng::new(9);
    let x = voiced(&mut rng, 10.0, config.sample_rate);
    let e = embedding(&mut rng, config.embed_dim);
    let mut state = engine.new_stream();
    let start = Instant::now();
    for chunk in x.samples.chunks_exact(config.hop) {
        ctx(engine.stream_push(&mut state, chunk, &e), "push")?;
    }
    let rtf = start.elapsed().as_secs_f64() / x.duration_secs();
    ensure!(rtf.is_finite() && rtf > 0.0, "invalid RTF {rtf}");
    let verdict = if rtf < 1.0 { "meets" } else { "misses" };
    Ok(format!(
        "single-thread RTF {rtf:.3} on 10 s, {verdict} the < 1.0 target (published 0.41 on a 2.4 GHz Core i5)"
    ))
}

fn snr_db(clip: &pbsrnn::mixer::MixedClip) -> f64 {
    20.0 * (clip.target_mix.rms() / clip.noise.rms()).log10()
}

fn mixer() -> Outcome {
    let sr = 16_000;
    let mut rng = SeededRng::new(10);
    let sources = DatasetSources {
        clean: (0..4).map(|_| voiced(&mut rng, 3.0, sr)).collect(),
        noise: (0..2).map(|_| noise(&mut rng, 3.0, sr)).collect(),
    };

    let spec = MixSpec::default();
    let mut worst = 0.0f64;
    for i in 0..100 {
        let clip = ctx(clip_from_seed(&sources, &spec, SeededRng::derive_seed(1, i)), "mix")?;
        let drawn = clip.draws.snr_db.ok_or("noise disabled under the default spec")?;
        worst = worst.max((snr_db(&clip) - drawn).abs());
    }
    ensure!(worst <= 0.1, "measured SNR off by {worst:.3} dB");

    let dir = ctx(tempfile::tempdir(), "tempdir")?;
    let small = MixSpec {
        clip_seconds: 1.0,
        seed: 77,
        ..MixSpec::default()
    };
    let manifest = ctx(gen_dataset(dir.path(), &sources, &small, 6), "gen_dataset")?;
    let entries: Vec<ManifestEntry> = ctx(
        serde_json::from_slice(&ctx(std::fs::read(&manifest), "manifest")?),
        "manifest",
    )?;
    ensure!(entries.len() == 6, "manifest lists {} clips", entries.len());
    for entry in &entries {
        let clip = ctx(clip_from_seed(&sources, &small, entry.seed), "regenerate")?;
        for (file, wave) in [
            (&entry.paths.noisy, &clip.noisy),
            (&entry.paths.target, &clip.target_ref),
            (&entry.paths.enroll, &clip.enrollment),
        ] {
            let stored = ctx(read_wav(dir.path().join(file)), "read")?;
            let same = stored.len() == wave.len()
                && stored
                    .samples
                    .iter()
                    .zip(&wave.samples)
                    .all(|(a, b)| a.to_bits() == b.to_bits());
            ensure!(same, "{file} differs from its regeneration");
        }
    }

    let short = MixSpec {
        clip_seconds: 0.25,
        enroll_seconds: 0.5,
        ..MixSpec::default()
    };
    let n = 1000;
    let mut u: Vec<f64> = Vec::with_capacity(n);
    let mut mix_rng = SeededRng::new(11);
    for i in 0..n {
        let target = &sources.clean[i % sources.clean.len()];
        let clip = ctx(
            mix_clip(target, None, &sources.noise[i % 2], &short, &mut mix_rng),
            "mix",
        )?;
        u.push((snr_db(&clip) - short.snr_db.0) / (short.snr_db.1 - short.snr_db.0));
    }
    u.sort_by(f64::total_cmp);
    let d = u
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            (v - i as f64 / n as f64)
                .abs()
                .max(((i + 1) as f64 / n as f64 - v).abs())
        })
        .fold(0.0, f64::max);
    let critical = 1.63 / (n as f64).sqrt();
    ensure!(d <= critical, "KS statistic {d:.4} exceeds {critical:.4}");
    Ok(format!(
        "SNR error {worst:.1e} dB, 6 clips regenerated bit-exact, KS D = {d:.4} (critical {critical:.4})"
    ))
}

const HEADER: usize = 12;

fn split_file(bytes: &[u8]) -> (Value, Vec<u8>) {
    let len = u64::from_le_bytes(bytes[4..HEADER].try_into().unwrap()) as usize;
    let manifest = serde_json::from_slice(&bytes[HEADER..HEADER + len]).unwrap();
    (manifest, bytes[HEADER + len..].to_vec())
}

fn join_file(manifest: &Value, blob: &[u8]) -> Vec<u8> {
    let mut json = serde_json::to_vec(manifest).unwrap();
    json.resize((HEADER + json.len()).div_ceil(16) * 16 - HEADER, b' ');
    let mut out = b"PBW1".to_vec();
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(blob);
    out
}

fn tensor_name(m: &Value, i: usize) -> String {
    m["tensors"][i]["name"].as_str().unwrap().to_string()
}

fn weight_format() -> Outcome {
    let dir = ctx(tempfile::tempdir(), "tempdir")?;
    for (label, config) in [("tiny", ModelConfig::tiny()), ("default", ModelConfig::default())] {
        let store = ctx(WeightStore::init(&config, 12), "init")?;
        let path = dir.path().join(format!("{label}.pbw"));
        ctx(save_weights(&path, &config, &store), "save")?;
        let (config2, store2) = ctx(load_weights(&path), "load")?;
        ensure!(config2 == config, "{label}: config changed in the round trip");
        ensure!(store2.len() == store.len(), "{label}: tensor count changed");
        for ((n1, a), (n2, b)) in store.iter().zip(store2.iter()) {
            let same = n1 == n2
                && a.shape() == b.shape()
                && a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits());
            ensure!(same, "{label}: tensor {n1} changed in the round trip");
        }
    }

    let config = ModelConfig::tiny();
    let good = ctx(
        to_bytes(&config, &ctx(WeightStore::init(&config, 13), "init")?),
        "to_bytes",
    )?;
    let (manifest, blob) = split_file(&good);
    ensure!(
        from_bytes(&join_file(&manifest, &blob)).is_ok(),
        "re-assembled file does not load"
    );
    let count = manifest["tensors"].as_array().unwrap().len();
    let mid = count / 2;

    let edit = |f: &dyn Fn(&mut Value)| {
        let mut m = manifest.clone();
        f(&mut m);
        join_file(&m, &blob)
    };
    let mut named: Vec<(&str, Vec<u8>, String)> = vec![
        (
            "shape",
            edit(&|m| m["tensors"][mid]["shape"][0] = 1000.into()),
            tensor_name(&manifest, mid),
        ),
        (
            "dtype",
            edit(&|m| m["tensors"][mid]["dtype"] = "f16le".into()),
            tensor_name(&manifest, mid),
        ),
        (
            "nbytes",
            edit(&|m| {
                let v = m["tensors"][mid]["nbytes"].as_u64().unwrap();
                m["tensors"][mid]["nbytes"] = (v + 4).into();
            }),
            tensor_name(&manifest, mid),
        ),
        (
            "alignment",
            edit(&|m| {
                let v = m["tensors"][mid]["offset"].as_u64().unwrap();
                m["tensors"][mid]["offset"] = (v + 4).into();
            }),
            tensor_name(&manifest, mid),
        ),
        (
            "overlap",
            edit(&|m| m["tensors"][mid]["offset"] = m["tensors"][mid - 1]["offset"].clone()),
            tensor_name(&manifest, mid),
        ),
        (
            "unknown",
            edit(&|m| m["tensors"][mid]["name"] = "block9/ghost/weight".into()),
            "block9/ghost/weight".into(),
        ),
        (
            "missing",
            edit(&|m| {
                m["tensors"].as_array_mut().unwrap().remove(mid);
            }),
            tensor_name(&manifest, mid),
        ),
    ];
    let var = (0..count)
        .find(|&i| tensor_name(&manifest, i).ends_with("/norm/var"))
        .unwrap();
    ensure!(
        tensor_name(&manifest, var - 1).ends_with("/norm/mean"),
        "unexpected tensor order"
    );
    named.push((
        "duplicate",
        edit(&|m| m["tensors"][var]["name"] = m["tensors"][var - 1]["name"].clone()),
        tensor_name(&manifest, var - 1),
    ));
    let mut nan = blob.clone();
    let off = manifest["tensors"][mid]["offset"].as_u64().unwrap() as usize;
    nan[off..off + 4].copy_from_slice(&f32::NAN.to_le_bytes());
    named.push(("non-finite", join_file(&manifest, &nan), tensor_name(&manifest, mid)));
    named.push((
        "truncated",
        good[..good.len() - 8].to_vec(),
        tensor_name(&manifest, count - 1),
    ));

    let mut structural: Vec<(&str, Vec<u8>)> = vec![
        ("empty", Vec::new()),
        ("short header", good[..8].to_vec()),
        ("magic", [b"PBW2", &good[4..]].concat()),
        (
            "manifest length",
            [&good[..4], &u64::MAX.to_le_bytes()[..], &good[HEADER..]].concat(),
        ),
        ("malformed json", {
            let mut b = good.clone();
            b[HEADER] = b'#';
            b
        }),
        ("version", edit(&|m| m["format_version"] = 2.into())),
        ("trailing bytes", [&good[..], &[0u8; 16][..]].concat()),
    ];
    let mut bad_config = manifest.clone();
    bad_config["config"]["hop"] = 7.into();
    structural.push(("config", join_file(&bad_config, &blob)));

    for (label, bytes, tensor) in &named {
        match from_bytes(bytes) {
            Err(Error::WeightValidation { tensor: t, .. }) if &t == tensor => {}
            Err(e) => return Err(format!("{label}: error does not name `{tensor}`: {e}")),
            Ok(_) => return Err(format!("{label}: corrupted file accepted")),
        }
    }
    for (label, bytes) in &structural {
        match from_bytes(bytes) {
            Err(Error::Load(_) | Error::Config(_)) => {}
            Err(e) => return Err(format!("{label}: unexpected error kind: {e}")),
            Ok(_) => return Err(format!("{label}: corrupted file accepted")),
        }
    }
    let missing = from_bytes(b"").is_err() && load_weights(Path::new("/nonexistent/w.pbw")).is_err();
    ensure!(missing, "missing input accepted");
    Ok(format!(
        "tiny and default round trips bit-exact; {} named-tensor and {} structural corruptions rejected",
        named.len(),
        structural.len()
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("shape contract", shape_contract),
        ("attention normalization", attention_normalization),
        ("SAM skip identity", sam_skip_identity),
        ("causality", causality),
        ("streaming equals offline", streaming_equals_offline),
        ("DSP round trip", dsp_round_trip),
        ("loss suite", loss_suite),
        ("footprint", footprint),
        ("real-time factor", bench_rtf),
        ("mixer", mixer),
        ("weight format", weight_format),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {:>2} {name} ({secs:.1} s): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {:>2} {name} ({secs:.1} s): {why}", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}
