//! Model weights: per-block mixing layer + feed-forward + norms, optional
//! embedding table and persistent memory rows. Initialization is a single
//! SplitMix64 stream, so a seed pins every tensor bit-for-bit.

use num_complex::Complex;

use super::config::ModelConfig;
use super::rng::SplitMix64;
use crate::error::Result;
use crate::layer::{Dense, HeadWeights, LayerNormParams, LayerWeights, Mlp};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Feed-forward block, `d_model -> d_ffn -> d_model` with GELU between.
#[derive(Debug, Clone, PartialEq)]
pub struct FfnWeights<T> {
    pub w1: Dense<T>,
    pub w2: Dense<T>,
}

impl<T: Scalar> FfnWeights<T> {
    pub fn zeros(d_model: usize, d_ffn: usize) -> Self {
        FfnWeights {
            w1: Dense::zeros(d_model, d_ffn),
            w2: Dense::zeros(d_ffn, d_model),
        }
    }

    pub fn param_count(&self) -> u64 {
        self.w1.param_count() + self.w2.param_count()
    }
}

/// One pre-norm residual block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockWeights<T: Scalar> {
    pub mix: LayerWeights<T>,
    pub ffn: FfnWeights<T>,
    pub norm1: LayerNormParams<T>,
    pub norm2: LayerNormParams<T>,
    /// Persistent memory rows, one `n_mem x d` matrix per head; empty when
    /// the bank is disabled.
    pub memory: Vec<Matrix<T>>,
}

/// Full model state.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights<T: Scalar> {
    pub config: ModelConfig,
    pub blocks: Vec<BlockWeights<T>>,
    /// Closing LayerNorm of the pre-norm stack. Keeps emitted rows bounded,
    /// which matters when generation feeds outputs back as inputs.
    pub final_norm: LayerNormParams<T>,
    /// `vocab_size x d_model`, present only in vocabulary mode. Also serves
    /// as the (tied) output head.
    pub embedding: Option<Matrix<T>>,
}

/// Exact tensor-shape-derived parameter tallies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamCounts {
    pub total: u64,
    /// Parameters the spectral mixer adds on top of a plain attention block:
    /// gate MLPs, modReLU biases, Toeplitz kernels, refinement MLPs,
    /// controller logits, memory-gate extensions and memory rows.
    pub spectre_added: u64,
}

impl ParamCounts {
    pub fn added_ratio(&self) -> f64 {
        self.spectre_added as f64 / self.total as f64
    }
}

fn fill_normal<T: Scalar>(rng: &mut SplitMix64, out: &mut [T], scale: f64) {
    for v in out {
        *v = T::from_real(rng.next_normal() * scale);
    }
}

fn random_dense<T: Scalar>(rng: &mut SplitMix64, input: usize, output: usize) -> Dense<T> {
    let mut d = Dense::zeros(input, output);
    fill_normal(rng, d.w.data_mut(), 1.0 / (input as f64).sqrt());
    d
}

fn random_mlp<T: Scalar>(
    rng: &mut SplitMix64,
    input: usize,
    hidden: usize,
    output: usize,
) -> Mlp<T> {
    Mlp {
        hidden: random_dense(rng, input, hidden),
        out: random_dense(rng, hidden, output),
    }
}

/// Deterministic weights from `cfg.seed`: every tensor is drawn in a fixed
/// order from one SplitMix64 stream, normal with scale `1/sqrt(fan_in)`,
/// biases zero, norms identity.
pub fn init_random<T: Scalar>(cfg: &ModelConfig) -> Result<ModelWeights<T>> {
    cfg.validate()?;
    let mut rng = SplitMix64::new(cfg.seed);
    let lcfg = cfg.layer_config();
    let d = cfg.head_dim;
    let d_model = cfg.d_model();
    let inv_sqrt_d = 1.0 / (d as f64).sqrt();

    let mut blocks = Vec::with_capacity(cfg.n_layers);
    for _ in 0..cfg.n_layers {
        let mut heads = Vec::with_capacity(cfg.heads);
        for _ in 0..cfg.heads {
            let mut head = HeadWeights::zeros(&lcfg);
            fill_normal(&mut rng, head.w_q.data_mut(), inv_sqrt_d);
            fill_normal(&mut rng, head.w_v.data_mut(), inv_sqrt_d);
            head.gate_mlp = random_mlp(&mut rng, d, cfg.gate_hidden, 2 * lcfg.bins());
            fill_normal(&mut rng, &mut head.modrelu_bias, 0.01);
            let kernel_scale = 0.1 / ((2 * cfg.toeplitz_radius + 1) as f64).sqrt();
            for v in &mut head.toeplitz_kernel {
                let re = rng.next_normal() * kernel_scale;
                let im = rng.next_normal() * kernel_scale;
                *v = Complex::new(T::from_real(re), T::from_real(im));
            }
            head.wrm_mlp = random_mlp(&mut rng, d, cfg.gate_hidden, (cfg.wrm_levels + 1) * d);
            head.wrm_controller_logit = T::from_real(rng.next_normal());
            if cfg.memory_tokens > 0 {
                head.mem_gate_ext = Some(random_dense(
                    &mut rng,
                    cfg.gate_hidden,
                    2 * (cfg.memory_tokens / 2 + 1),
                ));
            }
            heads.push(head);
        }
        if cfg.share_gates {
            // heads share one set of gate/refinement weights; copies keep
            // the per-head forward paths unchanged
            let first = heads[0].clone();
            for head in heads.iter_mut().skip(1) {
                head.gate_mlp = first.gate_mlp.clone();
                head.modrelu_bias = first.modrelu_bias.clone();
                head.toeplitz_kernel = first.toeplitz_kernel.clone();
                head.wrm_mlp = first.wrm_mlp.clone();
                head.wrm_controller_logit = first.wrm_controller_logit;
                head.mem_gate_ext = first.mem_gate_ext.clone();
            }
        }
        let mut w_o = Matrix::zeros(d_model, d_model);
        fill_normal(&mut rng, w_o.data_mut(), 1.0 / (d_model as f64).sqrt());

        let mut ffn = FfnWeights::zeros(d_model, cfg.d_ffn);
        fill_normal(&mut rng, ffn.w1.w.data_mut(), 1.0 / (d_model as f64).sqrt());
        fill_normal(
            &mut rng,
            ffn.w2.w.data_mut(),
            1.0 / (cfg.d_ffn as f64).sqrt(),
        );

        let mut memory = Vec::new();
        if cfg.memory_tokens > 0 {
            for _ in 0..cfg.heads {
                let mut m = Matrix::zeros(cfg.memory_tokens, d);
                fill_normal(&mut rng, m.data_mut(), inv_sqrt_d);
                memory.push(m);
            }
        }

        blocks.push(BlockWeights {
            mix: LayerWeights { heads, w_o },
            ffn,
            norm1: LayerNormParams::identity(d_model),
            norm2: LayerNormParams::identity(d_model),
            memory,
        });
    }

    let embedding = (cfg.vocab_size > 0).then(|| {
        let mut e = Matrix::zeros(cfg.vocab_size, d_model);
        fill_normal(&mut rng, e.data_mut(), 1.0 / (d_model as f64).sqrt());
        e
    });

    Ok(ModelWeights {
        config: cfg.clone(),
        blocks,
        final_norm: LayerNormParams::identity(d_model),
        embedding,
    })
}

impl<T: Scalar> ModelWeights<T> {
    pub fn param_counts(&self) -> ParamCounts {
        let mut total = 0u64;
        let mut added = 0u64;
        for block in &self.blocks {
            total += block.mix.param_count();
            added += block.mix.spectre_param_count();
            if self.config.share_gates {
                // duplicated copies of head 0's gate weights are one
                // parameter set, not H of them
                let dup = (self.config.heads as u64 - 1) * block.mix.heads[0].spectre_param_count();
                total -= dup;
                added -= dup;
            }
            total += block.ffn.param_count();
            total += block.norm1.param_count() + block.norm2.param_count();
            for m in &block.memory {
                total += m.data().len() as u64;
                added += m.data().len() as u64;
            }
        }
        total += self.final_norm.param_count();
        if let Some(e) = &self.embedding {
            total += e.data().len() as u64;
        }
        ParamCounts {
            total,
            spectre_added: added,
        }
    }
}
