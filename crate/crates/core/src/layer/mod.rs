//! The frequency-domain mixing head.
//!
//! One head projects tokens to queries and values, transforms the values to
//! the half spectrum, builds a complex gate per frequency bin from a pooled
//! query descriptor, applies the gate, and transforms back. An optional
//! wavelet refinement branch restores local detail.

mod config;
mod gate;
mod mix;
mod weights;
mod wrm;

pub use config::{ControllerMode, LayerConfig};
pub use gate::{
    apply_gate, apply_positional_phase, gate_from_descriptor, gated_inverse, global_descriptor,
    streaming_descriptor, Descriptor, GateVector,
};
pub use mix::{mix_head_forward, project_qv, spectre_mix_forward};
pub use weights::{gelu, Dense, HeadWeights, LayerNormParams, LayerWeights, Mlp};
pub use wrm::{wrm_controller, wrm_forward};

pub(crate) use gate::gate_with_hidden;
pub(crate) use mix::finish_mix;
