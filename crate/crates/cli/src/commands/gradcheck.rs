use std::process::ExitCode;

use anyhow::Result;
use pbsrnn::objectives::{gradcheck, GradCheck};
use serde::Serialize;

use super::{print_json, SCHEMA_VERSION};
use crate::cli::GradcheckArgs;

const COMPRESSIONS: [f64; 3] = [0.3, 0.5, 1.0];
const FRAMES: usize = 4;
const BINS: usize = 6;
const STEP: f32 = 1e-4;
const TOLERANCE: f64 = 1e-4;

#[derive(Debug, Serialize)]
struct GradcheckReport {
    schema_version: u32,
    tolerance: f64,
    passed: bool,
    checks: Vec<GradCheck>,
}

pub fn run(args: GradcheckArgs) -> Result<ExitCode> {
    let checks = COMPRESSIONS
        .iter()
        .map(|&c| gradcheck(args.seed, c, FRAMES, BINS, STEP))
        .collect::<pbsrnn::Result<Vec<_>>>()?;
    let passed = checks.iter().all(|g| g.max_rel_error <= TOLERANCE);
    if args.json {
        print_json(&GradcheckReport {
            schema_version: SCHEMA_VERSION,
            tolerance: TOLERANCE,
            passed,
            checks,
        })?;
    } else {
        for g in &checks {
            println!(
                "seed {} c={:.1}: max rel {:.2e}, max abs {:.2e} {}",
                g.seed,
                g.compression,
                g.max_rel_error,
                g.max_abs_error,
                if g.max_rel_error <= TOLERANCE { "ok" } else { "FAIL" }
            );
        }
    }
    Ok(if passed { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}
