//! Model assembly: configuration, weight storage, offline and streaming
//! inference, and footprint counters.

mod config;
pub mod footprint;
mod model;
mod stream;
pub mod weights;

pub use config::ModelConfig;
pub use footprint::{count_macs, count_params, count_params_store, MacBreakdown, ParamBreakdown};
pub use model::{Engine, EngineBlock};
pub use stream::{ModuleTimings, StreamState};
pub use weights::{load_weights, save_weights, WeightStore};
