use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Decides whether the wavelet refinement branch runs for a given input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControllerMode {
    /// Refinement always runs.
    Always,
    /// Refinement never runs.
    Never,
    /// Deterministic stand-in for a trained binary controller: refine when
    /// `dot(descriptor, first row of the refinement MLP) + logit > 0`.
    LearnedStub,
}

/// Per-head mixing configuration. `n_fft` doubles as the sliding-window size
/// in streaming mode, so gate shapes stay fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerConfig {
    /// Per-head embedding width `d`.
    pub head_dim: usize,
    /// Head count `H`.
    pub heads: usize,
    /// FFT length (power of two); inputs are zero-padded up to it.
    pub n_fft: usize,
    /// Hidden width of the descriptor-to-gate MLP. Kept narrow: the gate
    /// output layer scales with `n_fft` and dominates the added parameters.
    pub gate_hidden: usize,
    pub toeplitz_enabled: bool,
    /// Half-bandwidth `r` of the spectral Toeplitz update (kernel `2r+1`).
    pub toeplitz_radius: usize,
    pub wrm_enabled: bool,
    /// Wavelet decomposition depth `J`.
    pub wrm_levels: usize,
    pub wrm_controller: ControllerMode,
}

impl LayerConfig {
    /// Number of retained frequency bins, `n_fft/2 + 1`.
    pub fn bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.head_dim == 0 || self.heads == 0 {
            return Err(Error::Config("head_dim and heads must be positive".into()));
        }
        if !self.n_fft.is_power_of_two() || self.n_fft < 2 {
            return Err(Error::Config(format!(
                "n_fft must be a power of two >= 2, got {}",
                self.n_fft
            )));
        }
        if self.gate_hidden == 0 {
            return Err(Error::Config("gate_hidden must be positive".into()));
        }
        if self.wrm_enabled {
            if self.wrm_levels == 0 {
                return Err(Error::Config("wrm_levels must be >= 1 when enabled".into()));
            }
            if !self.n_fft.is_multiple_of(1usize << self.wrm_levels) {
                return Err(Error::Config(format!(
                    "n_fft {} not divisible by 2^{}",
                    self.n_fft, self.wrm_levels
                )));
            }
        }
        Ok(())
    }
}
