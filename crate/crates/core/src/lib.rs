//! Personalized speech enhancement with a band-split recurrent backbone.
//!
//! The model splits a noisy spectrogram into sub-bands, projects each band into
//! a shared feature space, runs a stack of dual-path GRU blocks (time per band,
//! then bands per frame), and after every block rescales the sub-band features
//! by their attention score against an enrolled speaker embedding. A band-merge
//! head produces a complex ratio mask that is applied to the noisy spectrum.
//!
//! Everything is causal, so the same weights run offline ([`Engine::enhance_offline`])
//! or hop by hop ([`Engine::stream_push`]) with a fixed latency of one hop.
//!
//! ```text
//! waveform -> STFT -> band split -> N x (DPRNN block -> speaker attention)
//!          -> band merge -> complex mask * STFT -> iSTFT -> waveform
//! ```

pub mod attention;
pub mod backbone;
pub mod bands;
pub mod dsp;
pub mod engine;
mod error;
pub mod mixer;
pub mod numerics;
pub mod objectives;
pub mod wav;

pub use attention::{AttentionScores, SamWeights, SpeakerEmbedding};
pub use bands::{BandScheme, ComplexMask, FeatureTensor};
pub use dsp::{ComplexSpectrogram, Waveform};
pub use engine::{Engine, ModelConfig, StreamState, WeightStore};
pub use error::{Error, Result};
pub use numerics::{DenseArray, SeededRng};
