use std::process::ExitCode;

use anyhow::Result;
use pbsrnn::engine::footprint::by_module;
use pbsrnn::engine::{count_macs, count_params};
use pbsrnn::ModelConfig;
use serde::Serialize;

use super::{load_engine, print_json, REFERENCE_MACS_PER_SECOND, REFERENCE_PARAMS, REFERENCE_RTF, SCHEMA_VERSION};
use crate::cli::InfoArgs;

#[derive(Debug, Serialize)]
struct Row<T> {
    name: String,
    value: T,
}

fn rows<'a, T: Copy + 'a>(entries: impl IntoIterator<Item = (&'a String, &'a T)>) -> Vec<Row<T>> {
    entries
        .into_iter()
        .map(|(k, &v)| Row {
            name: k.clone(),
            value: v,
        })
        .collect()
}

#[derive(Debug, Serialize)]
struct Reference {
    params: f64,
    macs_per_second: f64,
    rtf: f64,
}

/// JSON document printed by `info --json`.
#[derive(Debug, Serialize)]
struct InfoReport {
    schema_version: u32,
    config: ModelConfig,
    num_bands: usize,
    params_total: u64,
    params_by_module: Vec<Row<u64>>,
    params_by_group: Vec<Row<u64>>,
    macs_per_second_total: f64,
    macs_per_second_by_module: Vec<Row<f64>>,
    reference: Reference,
}

pub fn run(args: InfoArgs) -> Result<ExitCode> {
    let config = match &args.weights {
        Some(path) => load_engine(path)?.0,
        None => ModelConfig::default_for(args.sample_rate)?,
    };
    let params = count_params(&config);
    let macs = count_macs(&config, 1.0);
    let params_by_module = by_module(&params.groups);
    let macs_by_module = by_module(&macs.groups);

    let report = InfoReport {
        schema_version: SCHEMA_VERSION,
        num_bands: config.num_bands(),
        params_total: params.total,
        params_by_module: rows(&params_by_module),
        params_by_group: rows(&params.groups),
        macs_per_second_total: macs.total,
        macs_per_second_by_module: rows(&macs_by_module),
        reference: Reference {
            params: REFERENCE_PARAMS,
            macs_per_second: REFERENCE_MACS_PER_SECOND,
            rtf: REFERENCE_RTF,
        },
        config,
    };
    if args.json {
        print_json(&report)?;
        return Ok(ExitCode::SUCCESS);
    }

    let c = &report.config;
    println!("config");
    println!("  sample rate      {} Hz", c.sample_rate);
    println!("  fft / hop        {} / {}", c.fft_size, c.hop);
    println!("  bands K          {}", report.num_bands);
    println!("  band widths      {:?}", c.band_widths);
    println!("  N / H / MLP      {} / {} / {}", c.features, c.hidden, c.mlp_hidden);
    println!("  C1 / C2          {} / {}", c.attn_dim, c.embed_dim);
    println!("  blocks           {}", c.n_blocks);
    println!(
        "  band GRU         {}",
        if c.band_bidirectional {
            "bidirectional"
        } else {
            "unidirectional"
        }
    );
    println!("  latency          {} samples", c.latency());
    println!();
    println!("{:<16}{:>14}{:>16}", "module", "params", "MACs/s");
    for m in &report.macs_per_second_by_module {
        let params = match report.params_by_module.iter().find(|p| p.name == m.name) {
            Some(p) => p.value.to_string(),
            None => "-".to_string(),
        };
        println!("{:<16}{:>14}{:>16.3e}", m.name, params, m.value);
    }
    println!(
        "{:<16}{:>14}{:>16.3e}",
        "total", report.params_total, report.macs_per_second_total
    );
    println!(
        "{:<16}{:>14}{:>16.3e}",
        "published",
        format!("{:.2}M", REFERENCE_PARAMS / 1e6),
        REFERENCE_MACS_PER_SECOND
    );
    Ok(ExitCode::SUCCESS)
}
