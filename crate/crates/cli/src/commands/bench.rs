use std::process::ExitCode;
use std::time::Instant;

use anyhow::Result;
use pbsrnn::engine::ModuleTimings;
use pbsrnn::{Engine, ModelConfig, SeededRng, SpeakerEmbedding, Waveform};
use serde::Serialize;

use super::{load_engine, print_json, REFERENCE_RTF, SCHEMA_VERSION};
use crate::cli::BenchArgs;
use crate::UsageError;

#[derive(Debug, Serialize)]
struct ModuleShare {
    module: &'static str,
    seconds: f64,
    share: f64,
}

#[derive(Debug, Serialize)]
struct BenchReport {
    schema_version: u32,
    sample_rate: u32,
    audio_seconds: f64,
    repeat: usize,
    threads: usize,
    /// One wall-time / audio-time ratio per repeat (slowest stream when threaded).
    rtf_samples: Vec<f64>,
    rtf_median: f64,
    module_shares: Vec<ModuleShare>,
    reference_rtf: f64,
}

/// Harmonic tone with a slow envelope plus light noise.
fn synthetic_audio(sample_rate: u32, seconds: f64) -> Waveform {
    let mut rng = SeededRng::new(7);
    let n = (seconds * sample_rate as f64) as usize;
    let sr = sample_rate as f64;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / sr;
            let env = 0.5 + 0.5 * (2.0 * std::f64::consts::PI * 3.0 * t).sin();
            let voice: f64 = (1..6)
                .map(|h| (2.0 * std::f64::consts::PI * 140.0 * h as f64 * t).sin() / h as f64)
                .sum();
            (0.1 * env * voice + 0.01 * rng.normal()) as f32
        })
        .collect();
    Waveform { samples, sample_rate }
}

fn random_embedding(dim: usize) -> Result<SpeakerEmbedding> {
    let mut rng = SeededRng::new(11);
    let v: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok(SpeakerEmbedding::new(v.iter().map(|x| (x / norm) as f32).collect())?)
}

fn run_stream(engine: &Engine, audio: &Waveform, e: &SpeakerEmbedding) -> Result<(f64, ModuleTimings)> {
    let mut state = engine.new_stream();
    state.enable_profiling();
    let start = Instant::now();
    for chunk in audio.samples.chunks_exact(engine.config().hop) {
        engine.stream_push(&mut state, chunk, e)?;
    }
    let wall = start.elapsed().as_secs_f64();
    Ok((
        wall / audio.duration_secs(),
        *state.timings().expect("profiling enabled"),
    ))
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len().is_multiple_of(2) {
        (v[mid - 1] + v[mid]) / 2.0
    } else {
        v[mid]
    }
}

pub fn run(args: BenchArgs) -> Result<ExitCode> {
    if args.seconds.is_nan() || args.seconds < 1.0 {
        return Err(UsageError(format!("--seconds must be at least 1, got {}", args.seconds)).into());
    }
    if args.repeat == 0 || args.threads == 0 {
        return Err(UsageError("--repeat and --threads must be positive".into()).into());
    }
    let engine = match &args.weights {
        Some(path) => load_engine(path)?.1,
        None => Engine::build(&ModelConfig::default(), 0)?.1,
    };
    let config = engine.config().clone();
    let audio = synthetic_audio(config.sample_rate, args.seconds);
    let embedding = random_embedding(config.embed_dim)?;

    let mut samples = Vec::with_capacity(args.repeat);
    let mut totals = ModuleTimings::default();
    for _ in 0..args.repeat {
        let runs: Vec<Result<(f64, ModuleTimings)>> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..args.threads)
                .map(|_| s.spawn(|| run_stream(&engine, &audio, &embedding)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("bench thread panicked"))
                .collect()
        });
        let mut worst: f64 = 0.0;
        for r in runs {
            let (rtf, t) = r?;
            worst = worst.max(rtf);
            totals.stft += t.stft;
            totals.band_split += t.band_split;
            totals.temporal += t.temporal;
            totals.band += t.band;
            totals.sam += t.sam;
            totals.band_merge += t.band_merge;
            totals.istft += t.istft;
        }
        samples.push(worst);
    }

    let all = totals.total().as_secs_f64().max(f64::MIN_POSITIVE);
    let report = BenchReport {
        schema_version: SCHEMA_VERSION,
        sample_rate: config.sample_rate,
        audio_seconds: audio.duration_secs(),
        repeat: args.repeat,
        threads: args.threads,
        rtf_median: median(&samples),
        rtf_samples: samples,
        module_shares: totals
            .entries()
            .iter()
            .map(|&(module, d)| ModuleShare {
                module,
                seconds: d.as_secs_f64(),
                share: d.as_secs_f64() / all,
            })
            .collect(),
        reference_rtf: REFERENCE_RTF,
    };

    if args.json {
        print_json(&report)?;
    } else {
        println!(
            "streaming {:.1} s at {} Hz, {} repeat(s), {} thread(s)",
            report.audio_seconds, report.sample_rate, report.repeat, report.threads
        );
        let list: Vec<String> = report.rtf_samples.iter().map(|r| format!("{r:.3}")).collect();
        println!("RTF samples: {}", list.join(" "));
        println!("RTF median:  {:.3}", report.rtf_median);
        println!("reference:   RTF {REFERENCE_RTF} published (single thread, Core i5 2.4 GHz)");
        println!("time shares:");
        for m in &report.module_shares {
            println!("  {:<14}{:>6.1}%", m.module, 100.0 * m.share);
        }
    }
    Ok(ExitCode::SUCCESS)
}
