//! Toy block-stack runtime around the mixing layer: pre-norm residual
//! blocks, seeded initialization, weight-container I/O, streaming
//! generation, and a quadratic attention baseline for scaling comparisons.

mod config;
mod container;
mod forward;
mod generate;
pub mod rng;
mod weights;

pub use config::{MixerKind, ModelConfig};
pub use container::{
    load_cache_state, load_weights, load_weights_any, save_cache_state, save_weights, LoadedModel,
};
pub use forward::{block_forward, model_forward, naive_attention_forward};
pub use generate::{
    stream_generate, stream_generate_ids, BenchReport, DecodeOut, GenerateResult, StreamSession,
};
pub use weights::{init_random, BlockWeights, FfnWeights, ModelWeights, ParamCounts};
