use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "pbsrnn",
    version,
    about = "Personalized speech enhancement with a band-split RNN"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a freshly initialized weight file.
    Init(InitArgs),
    /// Enhance a WAV file for an enrolled speaker.
    Enhance(EnhanceArgs),
    /// Measure the single-thread real-time factor of the streaming path.
    Bench(BenchArgs),
    /// Print parameter and MAC breakdowns.
    Info(InfoArgs),
    /// Synthesize a noisy/target/enrollment dataset.
    Mix(MixArgs),
    /// Compare analytic loss gradients with finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Full-size model.
    Default,
    /// Small 16 kHz model for smoke tests.
    Tiny,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Encoding {
    Float32,
    Pcm16,
}

#[derive(Debug, Args)]
pub struct InitArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Preset::Default)]
    pub preset: Preset,
    /// Sample rate of the default preset.
    #[arg(long, default_value_t = 48_000)]
    pub sample_rate: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Run the band GRU in both directions.
    #[arg(long)]
    pub bidirectional: bool,
    /// Force a unit mask so the model passes audio through unchanged.
    #[arg(long)]
    pub identity_mask: bool,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("speaker").required(true).args(["enroll", "embedding"])))]
pub struct EnhanceArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub weights: PathBuf,
    /// Enrollment WAV; the embedding is computed with the built-in stub extractor.
    #[arg(long)]
    pub enroll: Option<PathBuf>,
    /// Raw little-endian float32 embedding file.
    #[arg(long)]
    pub embedding: Option<PathBuf>,
    /// Process hop by hop through the streaming path.
    #[arg(long)]
    pub stream: bool,
    #[arg(long, value_enum, default_value_t = Encoding::Float32)]
    pub encoding: Encoding,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Weight file; a seeded default model is used when omitted.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long, default_value_t = 10.0)]
    pub seconds: f64,
    #[arg(long, default_value_t = 3)]
    pub repeat: usize,
    /// Concurrent independent streams, one per thread.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("model").required(true).args(["weights", "default_config"])))]
pub struct InfoArgs {
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long)]
    pub default_config: bool,
    /// Sample rate used with --default-config.
    #[arg(long, default_value_t = 48_000)]
    pub sample_rate: u32,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct MixArgs {
    #[arg(long)]
    pub clean_dir: PathBuf,
    #[arg(long)]
    pub noise_dir: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub clips: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 4.0)]
    pub clip_seconds: f64,
    #[arg(long, default_value_t = 2.0)]
    pub enroll_seconds: f64,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub json: bool,
}
