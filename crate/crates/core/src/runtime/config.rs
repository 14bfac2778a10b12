use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layer::{ControllerMode, LayerConfig};

/// Which token mixer the blocks use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MixerKind {
    /// Frequency-domain mixing with the streaming cache.
    Spectre,
    /// Causal softmax attention; the quadratic baseline.
    NaiveAttention,
}

/// Whole-model configuration. `d_model = heads * head_dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n_layers: usize,
    pub heads: usize,
    pub head_dim: usize,
    pub d_ffn: usize,
    /// Sliding-window / FFT length for the cached mixer.
    pub n_max: usize,
    /// 0 = raw-embedding generation (no vocabulary).
    pub vocab_size: usize,
    /// Persistent memory rows per head; 0 disables the bank.
    pub memory_tokens: usize,
    pub toeplitz_enabled: bool,
    pub toeplitz_radius: usize,
    pub wrm_enabled: bool,
    pub wrm_levels: usize,
    pub wrm_controller: ControllerMode,
    /// Hidden width of the descriptor MLPs; defaults keep this narrow since
    /// the gate output layer scales with `n_max`.
    pub gate_hidden: usize,
    /// One set of gate/refinement weights shared by all heads of a layer
    /// (heads still produce distinct gates through their own descriptors).
    /// Roughly halves the added parameters.
    #[serde(default)]
    pub share_gates: bool,
    pub mixer: MixerKind,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let head_dim = 32;
        let heads = 4;
        ModelConfig {
            n_layers: 4,
            heads,
            head_dim,
            d_ffn: 4 * heads * head_dim,
            n_max: 512,
            vocab_size: 0,
            memory_tokens: 0,
            toeplitz_enabled: true,
            toeplitz_radius: 2,
            wrm_enabled: true,
            wrm_levels: 2,
            wrm_controller: ControllerMode::LearnedStub,
            gate_hidden: default_gate_hidden(head_dim),
            share_gates: false,
            mixer: MixerKind::Spectre,
            seed: 42,
        }
    }
}

/// Narrow descriptor bottleneck; the gate output layer dominates the added
/// parameter count, so the hidden width stays small.
fn default_gate_hidden(head_dim: usize) -> usize {
    (head_dim / 16).max(2)
}

impl ModelConfig {
    pub fn d_model(&self) -> usize {
        self.heads * self.head_dim
    }

    /// Default descriptor-MLP width for a given head dimension.
    pub fn default_gate_hidden_for(head_dim: usize) -> usize {
        default_gate_hidden(head_dim)
    }

    pub fn layer_config(&self) -> LayerConfig {
        LayerConfig {
            head_dim: self.head_dim,
            heads: self.heads,
            n_fft: self.n_max,
            gate_hidden: self.gate_hidden,
            toeplitz_enabled: self.toeplitz_enabled,
            toeplitz_radius: self.toeplitz_radius,
            wrm_enabled: self.wrm_enabled,
            wrm_levels: self.wrm_levels,
            wrm_controller: self.wrm_controller,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_layers == 0 {
            return Err(Error::Config("n_layers must be positive".into()));
        }
        if self.d_ffn == 0 {
            return Err(Error::Config("d_ffn must be positive".into()));
        }
        if self.memory_tokens > 0 {
            if !self.memory_tokens.is_power_of_two() || self.memory_tokens < 2 {
                return Err(Error::Config(format!(
                    "memory_tokens must be a power of two >= 2, got {}",
                    self.memory_tokens
                )));
            }
            if self.memory_tokens * 4 > self.n_max {
                return Err(Error::Config(format!(
                    "memory_tokens {} too large for n_max {} (needs <= n_max/4)",
                    self.memory_tokens, self.n_max
                )));
            }
        }
        self.layer_config().validate()
    }

    /// Human label of the mixer variant, used in reports and CSV rows.
    pub fn kernel_label(&self) -> &'static str {
        match self.mixer {
            MixerKind::NaiveAttention => "naive-attention",
            MixerKind::Spectre => {
                if !self.toeplitz_enabled {
                    "spectre-no-lr"
                } else if !self.wrm_enabled {
                    "spectre-no-wrm"
                } else {
                    "spectre"
                }
            }
        }
    }
}
