//! Batch forwards: pre-norm residual blocks around either mixer, and the
//! causal softmax attention baseline.

use super::config::{MixerKind, ModelConfig};
use super::weights::{BlockWeights, ModelWeights};
use crate::error::{Error, Result};
use crate::layer::{gelu, spectre_mix_forward, LayerConfig, LayerWeights};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Causal softmax attention over one layer's heads. Queries and keys share
/// the projection `W_q` (the baseline exists for scaling comparisons, and
/// the mixing layer carries no separate key weights); values use `W_v`.
pub fn naive_attention_forward<T: Scalar>(
    x: &Matrix<T>,
    w: &LayerWeights<T>,
    cfg: &LayerConfig,
) -> Result<Matrix<T>> {
    let d_model = cfg.heads * cfg.head_dim;
    if x.cols() != d_model {
        return Err(Error::Shape(format!(
            "input width {} != heads*head_dim = {}",
            x.cols(),
            d_model
        )));
    }
    let n = x.rows();
    let d = cfg.head_dim;
    let scale = T::one() / T::from_real((d as f64).sqrt());

    let mut parts = Vec::with_capacity(cfg.heads);
    for (h, head) in w.heads.iter().enumerate() {
        let slice = x.col_slice(h * d, d);
        let q = slice.matmul(&head.w_q)?;
        let k = slice.matmul(&head.w_q)?;
        let v = slice.matmul(&head.w_v)?;

        let mut out = Matrix::zeros(n, d);
        let mut scores = vec![T::zero(); n];
        for i in 0..n {
            let qi = q.row(i);
            let mut max = T::neg_infinity();
            for (j, s) in scores.iter_mut().enumerate().take(i + 1) {
                let mut dot = T::zero();
                for (a, b) in qi.iter().zip(k.row(j)) {
                    dot += *a * *b;
                }
                *s = dot * scale;
                if *s > max {
                    max = *s;
                }
            }
            let mut denom = T::zero();
            for s in scores.iter_mut().take(i + 1) {
                *s = (*s - max).exp();
                denom += *s;
            }
            let inv = T::one() / denom;
            let out_row = out.row_mut(i);
            for (j, s) in scores.iter().enumerate().take(i + 1) {
                let p = *s * inv;
                for (o, &vv) in out_row.iter_mut().zip(v.row(j)) {
                    *o += p * vv;
                }
            }
        }
        parts.push(out);
    }
    let refs: Vec<&Matrix<T>> = parts.iter().collect();
    Matrix::concat_cols(&refs).matmul(&w.w_o)
}

fn ffn_forward<T: Scalar>(x: &Matrix<T>, block: &BlockWeights<T>) -> Matrix<T> {
    let mut out = Matrix::zeros(x.rows(), x.cols());
    for r in 0..x.rows() {
        let mut h = block.ffn.w1.forward(x.row(r));
        for v in &mut h {
            *v = gelu(*v);
        }
        out.row_mut(r).copy_from_slice(&block.ffn.w2.forward(&h));
    }
    out
}

/// One pre-norm residual block: `x + Mix(LN1(x))`, then `x + FFN(LN2(x))`.
pub fn block_forward<T: Scalar>(
    x: &Matrix<T>,
    block: &BlockWeights<T>,
    cfg: &ModelConfig,
) -> Result<Matrix<T>> {
    let lcfg = cfg.layer_config();
    let normed = block.norm1.apply_rows(x);
    let mixed = match cfg.mixer {
        MixerKind::Spectre => spectre_mix_forward(&normed, &block.mix, &lcfg)?,
        MixerKind::NaiveAttention => naive_attention_forward(&normed, &block.mix, &lcfg)?,
    };
    let x = x.add(&mixed)?;
    let ff = ffn_forward(&block.norm2.apply_rows(&x), block);
    x.add(&ff)
}

/// Runs the whole block stack, including the closing norm.
pub fn model_forward<T: Scalar>(x: &Matrix<T>, w: &ModelWeights<T>) -> Result<Matrix<T>> {
    let mut cur = x.clone();
    for block in &w.blocks {
        cur = block_forward(&cur, block, &w.config)?;
    }
    Ok(w.final_norm.apply_rows(&cur))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layer::{ControllerMode, HeadWeights, LayerNormParams};
    use crate::runtime::rng::SplitMix64;
    use crate::runtime::weights::FfnWeights;

    fn lcfg(heads: usize, d: usize, n_fft: usize) -> LayerConfig {
        LayerConfig {
            head_dim: d,
            heads,
            n_fft,
            gate_hidden: 2,
            toeplitz_enabled: false,
            toeplitz_radius: 1,
            wrm_enabled: false,
            wrm_levels: 1,
            wrm_controller: ControllerMode::Never,
        }
    }

    fn mcfg(heads: usize, d: usize, n_max: usize, layers: usize) -> ModelConfig {
        ModelConfig {
            n_layers: layers,
            heads,
            head_dim: d,
            d_ffn: 2 * heads * d,
            n_max,
            vocab_size: 0,
            memory_tokens: 0,
            toeplitz_enabled: false,
            toeplitz_radius: 1,
            wrm_enabled: false,
            wrm_levels: 1,
            wrm_controller: ControllerMode::Never,
            gate_hidden: 2,
            share_gates: false,
            mixer: MixerKind::Spectre,
            seed: 0,
        }
    }

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix<f64> {
        let mut rng = SplitMix64::new(seed);
        let mut m = Matrix::zeros(rows, cols);
        for v in m.data_mut() {
            *v = rng.next_normal();
        }
        m
    }

    #[test]
    fn attention_single_token_returns_its_value_row() {
        let c = lcfg(1, 3, 8);
        let mut w = LayerWeights::<f64>::zeros(&c);
        w.heads[0] = HeadWeights::transparent(&c);
        w.w_o = Matrix::identity(3);
        let x = random_matrix(1, 3, 1);
        let y = naive_attention_forward(&x, &w, &c).unwrap();
        assert!(y.max_abs_diff(&x) < 1e-12);
    }

    #[test]
    fn attention_uniform_scores_give_causal_running_mean() {
        let c = lcfg(1, 2, 8);
        let mut w = LayerWeights::<f64>::zeros(&c);
        // W_q = 0 makes every score equal; values pass through untouched
        w.heads[0].w_v = Matrix::identity(2);
        w.w_o = Matrix::identity(2);
        let x = random_matrix(6, 2, 3);
        let y = naive_attention_forward(&x, &w, &c).unwrap();
        for i in 0..6 {
            for c2 in 0..2 {
                let mean: f64 = (0..=i).map(|j| x.get(j, c2)).sum::<f64>() / (i + 1) as f64;
                assert!((y.get(i, c2) - mean).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn attention_matches_triple_loop_reference() {
        let c = lcfg(2, 2, 8);
        let mut rng = SplitMix64::new(5);
        let mut w = LayerWeights::<f64>::zeros(&c);
        for head in &mut w.heads {
            for v in head.w_q.data_mut() {
                *v = rng.next_normal();
            }
            for v in head.w_v.data_mut() {
                *v = rng.next_normal();
            }
        }
        for v in w.w_o.data_mut() {
            *v = rng.next_normal();
        }
        let x = random_matrix(8, 4, 7);
        let y = naive_attention_forward(&x, &w, &c).unwrap();

        // direct reference with explicit loops
        let mut concat = Matrix::<f64>::zeros(8, 4);
        for (h, head) in w.heads.iter().enumerate() {
            let slice = x.col_slice(h * 2, 2);
            let q = slice.matmul(&head.w_q).unwrap();
            let k = slice.matmul(&head.w_q).unwrap();
            let v = slice.matmul(&head.w_v).unwrap();
            for i in 0..8 {
                let mut weights = vec![0.0f64; i + 1];
                for j in 0..=i {
                    let mut dot = 0.0;
                    for a in 0..2 {
                        dot += q.get(i, a) * k.get(j, a);
                    }
                    weights[j] = (dot / (2.0f64).sqrt()).exp();
                }
                let z: f64 = weights.iter().sum();
                for a in 0..2 {
                    let mut acc = 0.0;
                    for j in 0..=i {
                        acc += weights[j] / z * v.get(j, a);
                    }
                    concat.set(i, h * 2 + a, acc);
                }
            }
        }
        let expect = concat.matmul(&w.w_o).unwrap();
        assert!(y.max_abs_diff(&expect) < 1e-6);
    }

    #[test]
    fn zero_weights_make_blocks_the_identity() {
        let cfg = mcfg(2, 3, 8, 3);
        let block = BlockWeights::<f64> {
            mix: LayerWeights::zeros(&cfg.layer_config()),
            ffn: FfnWeights::zeros(cfg.d_model(), cfg.d_ffn),
            norm1: LayerNormParams::identity(cfg.d_model()),
            norm2: LayerNormParams::identity(cfg.d_model()),
            memory: vec![],
        };
        let w = ModelWeights {
            config: cfg.clone(),
            blocks: vec![block.clone(), block.clone(), block.clone()],
            final_norm: LayerNormParams::identity(cfg.d_model()),
            embedding: None,
        };
        let x = random_matrix(8, 6, 9);
        // each block is exactly the identity
        let mut cur = x.clone();
        for b in &w.blocks {
            let next = block_forward(&cur, b, &cfg).unwrap();
            assert_eq!(next, cur);
            cur = next;
        }
        // the stack output is just the closing norm of the input
        let y = model_forward(&x, &w).unwrap();
        assert_eq!(y, w.final_norm.apply_rows(&x));
    }

    #[test]
    fn single_token_runs_and_is_finite() {
        let cfg = mcfg(1, 4, 16, 1);
        let w = crate::runtime::init_random::<f64>(&cfg).unwrap();
        let x = random_matrix(1, 4, 11);
        let y = model_forward(&x, &w).unwrap();
        assert!(y.is_finite());
        assert_eq!(y.rows(), 1);
    }

    #[test]
    fn transparent_single_head_block_matches_hand_composition() {
        let cfg = mcfg(1, 4, 8, 1);
        let lc = cfg.layer_config();
        let block = BlockWeights::<f64> {
            mix: LayerWeights::transparent(&lc),
            ffn: FfnWeights::zeros(4, 8),
            norm1: LayerNormParams::identity(4),
            norm2: LayerNormParams::identity(4),
            memory: vec![],
        };
        let x = random_matrix(8, 4, 13);
        let y = block_forward(&x, &block, &cfg).unwrap();
        // transparent mixer returns LN1(x); zero FFN adds nothing
        let expect = x.add(&block.norm1.apply_rows(&x)).unwrap();
        assert!(y.max_abs_diff(&expect) < 1e-5);
    }
}
