//! Streaming generation: one-shot prefill over the prompt, then per-token
//! decode steps against per-layer, per-head caches. Wall-clock timings are
//! collected into a report (prefill latency, mean per-token latency,
//! end-to-end throughput, state footprint).

use std::sync::Arc;
use std::time::Instant;

use super::config::MixerKind;
use super::forward::block_forward;
use super::weights::ModelWeights;
use crate::cache::{attach_memory, decode_step, memory_precompute, prefill, CacheState};
use crate::error::{Error, Result};
use crate::layer::gelu;
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Timing and footprint summary of one generation run.
#[derive(Debug, Clone)]
pub struct BenchReport {
    /// Prefill wall time (time to first token).
    pub ttft_ms: f64,
    /// Mean decode-step wall time (time per output token).
    pub tpot_ms: f64,
    /// `(prompt + generated) / (prefill + decode)` tokens per second.
    pub throughput_tok_per_s: f64,
    /// Prompt length the run started from.
    pub seq_len: usize,
    pub kernel_name: String,
    /// Bytes held by all per-layer/per-head decode states.
    pub peak_state_bytes: u64,
}

/// Per-token growing key/value cache for the attention baseline.
#[derive(Debug, Clone)]
struct AttnKvCache<T> {
    k_rows: Vec<Vec<T>>,
    v_rows: Vec<Vec<T>>,
}

impl<T: Scalar> AttnKvCache<T> {
    fn new() -> Self {
        AttnKvCache {
            k_rows: Vec::new(),
            v_rows: Vec::new(),
        }
    }

    fn bytes(&self) -> u64 {
        let per_row = |rows: &Vec<Vec<T>>| -> u64 {
            rows.iter()
                .map(|r| (r.len() * T::DTYPE.size_bytes()) as u64)
                .sum()
        };
        per_row(&self.k_rows) + per_row(&self.v_rows)
    }
}

enum MixerSession<T: Scalar> {
    Spectre(Vec<Vec<CacheState<T>>>),
    Attn(Vec<Vec<AttnKvCache<T>>>),
}

/// Decode-side state of one generation stream. Owns every per-layer,
/// per-head cache; weights are passed per call so the session holds no
/// borrow.
pub struct StreamSession<T: Scalar> {
    mixer: MixerSession<T>,
}

/// Output of one decode step.
pub struct DecodeOut<T> {
    /// Final block-stack output row for the new token.
    pub row: Vec<T>,
    /// Rows in the reconstructed window emitted by the first cache (memory
    /// rows included when a bank is attached).
    pub window_rows: usize,
}

fn project_row<T: Scalar>(x: &[T], w: &Matrix<T>) -> Vec<T> {
    let mut out = vec![T::zero(); w.cols()];
    for (i, &xi) in x.iter().enumerate() {
        for (o, &wv) in out.iter_mut().zip(w.row(i)) {
            *o += xi * wv;
        }
    }
    out
}

impl<T: Scalar> StreamSession<T> {
    /// Runs the prompt through the stack in batch mode while initializing
    /// every cache. Returns the session and the prompt outputs.
    pub fn prefill(weights: &ModelWeights<T>, prompt: &Matrix<T>) -> Result<(Self, Matrix<T>)> {
        let cfg = &weights.config;
        cfg.validate()?;
        if prompt.rows() > cfg.n_max {
            return Err(Error::Capacity(format!(
                "prompt of {} tokens exceeds the window {}",
                prompt.rows(),
                cfg.n_max
            )));
        }
        if prompt.cols() != cfg.d_model() {
            return Err(Error::Shape(format!(
                "prompt width {} != d_model {}",
                prompt.cols(),
                cfg.d_model()
            )));
        }
        match cfg.mixer {
            MixerKind::Spectre => Self::prefill_spectre(weights, prompt),
            MixerKind::NaiveAttention => Self::prefill_attn(weights, prompt),
        }
    }

    fn prefill_spectre(weights: &ModelWeights<T>, prompt: &Matrix<T>) -> Result<(Self, Matrix<T>)> {
        let cfg = &weights.config;
        let lcfg = cfg.layer_config();
        let d = cfg.head_dim;
        let mut caches = Vec::with_capacity(cfg.n_layers);
        let mut x = prompt.clone();
        for block in &weights.blocks {
            let normed = block.norm1.apply_rows(&x);
            let mut layer_caches = Vec::with_capacity(cfg.heads);
            let mut parts = Vec::with_capacity(cfg.heads);
            for (h, head) in block.mix.heads.iter().enumerate() {
                let slice = normed.col_slice(h * d, d);
                let (mut state, out) = prefill(&slice, head, &lcfg)?;
                if cfg.memory_tokens > 0 {
                    let mut bank = memory_precompute(&block.memory[h])?;
                    if let Some(ext) = &head.mem_gate_ext {
                        bank = bank.with_gate_extension(ext.clone())?;
                    }
                    attach_memory(&mut state, Arc::new(bank))?;
                }
                layer_caches.push(state);
                parts.push(out);
            }
            caches.push(layer_caches);
            if prompt.rows() > 0 {
                let refs: Vec<&Matrix<T>> = parts.iter().collect();
                let mixed = Matrix::concat_cols(&refs).matmul(&block.mix.w_o)?;
                x = x.add(&mixed)?;
                let ff = ffn_rows(&block.norm2.apply_rows(&x), block);
                x = x.add(&ff)?;
            }
        }
        Ok((
            StreamSession {
                mixer: MixerSession::Spectre(caches),
            },
            weights.final_norm.apply_rows(&x),
        ))
    }

    fn prefill_attn(weights: &ModelWeights<T>, prompt: &Matrix<T>) -> Result<(Self, Matrix<T>)> {
        let cfg = &weights.config;
        let d = cfg.head_dim;
        let mut caches = Vec::with_capacity(cfg.n_layers);
        // fill KV rows layer by layer from the batch activations
        let mut x = prompt.clone();
        for block in &weights.blocks {
            let normed = block.norm1.apply_rows(&x);
            let mut layer_caches = Vec::with_capacity(cfg.heads);
            for (h, head) in block.mix.heads.iter().enumerate() {
                let slice = normed.col_slice(h * d, d);
                let k = slice.matmul(&head.w_q)?;
                let v = slice.matmul(&head.w_v)?;
                let mut cache = AttnKvCache::new();
                for r in 0..slice.rows() {
                    cache.k_rows.push(k.row(r).to_vec());
                    cache.v_rows.push(v.row(r).to_vec());
                }
                layer_caches.push(cache);
            }
            caches.push(layer_caches);
            if prompt.rows() > 0 {
                x = block_forward(&x, block, cfg)?;
            }
        }
        Ok((
            StreamSession {
                mixer: MixerSession::Attn(caches),
            },
            weights.final_norm.apply_rows(&x),
        ))
    }

    /// Consumes one `d_model` input row and returns the stack output row.
    pub fn decode(&mut self, weights: &ModelWeights<T>, x_row: &[T]) -> Result<DecodeOut<T>> {
        let cfg = &weights.config;
        let d = cfg.head_dim;
        if x_row.len() != cfg.d_model() {
            return Err(Error::Shape(format!(
                "token width {} != d_model {}",
                x_row.len(),
                cfg.d_model()
            )));
        }
        let lcfg = cfg.layer_config();
        let mut x = x_row.to_vec();
        let mut window_rows = 0usize;

        match &mut self.mixer {
            MixerSession::Spectre(caches) => {
                for (block, layer_caches) in weights.blocks.iter().zip(caches.iter_mut()) {
                    let normed = block.norm1.apply(&x);
                    let mut mixed = vec![T::zero(); cfg.d_model()];
                    for (h, (head, state)) in block
                        .mix
                        .heads
                        .iter()
                        .zip(layer_caches.iter_mut())
                        .enumerate()
                    {
                        let window = decode_step(state, &normed[h * d..(h + 1) * d], head, &lcfg)?;
                        if h == 0 {
                            window_rows = window.rows();
                        }
                        let newest = window.row(window.rows() - 1);
                        mixed[h * d..(h + 1) * d].copy_from_slice(newest);
                    }
                    let mixed = project_row(&mixed, &block.mix.w_o);
                    for (a, b) in x.iter_mut().zip(&mixed) {
                        *a += *b;
                    }
                    let ff = ffn_row(&block.norm2.apply(&x), block);
                    for (a, b) in x.iter_mut().zip(&ff) {
                        *a += *b;
                    }
                }
            }
            MixerSession::Attn(caches) => {
                for (block, layer_caches) in weights.blocks.iter().zip(caches.iter_mut()) {
                    let normed = block.norm1.apply(&x);
                    let mut mixed = vec![T::zero(); cfg.d_model()];
                    for (h, (head, cache)) in block
                        .mix
                        .heads
                        .iter()
                        .zip(layer_caches.iter_mut())
                        .enumerate()
                    {
                        let slice = &normed[h * d..(h + 1) * d];
                        let q = project_row(slice, &head.w_q);
                        let k = project_row(slice, &head.w_q);
                        let v = project_row(slice, &head.w_v);
                        cache.k_rows.push(k);
                        cache.v_rows.push(v);
                        if h == 0 {
                            window_rows = cache.k_rows.len();
                        }
                        let scale = T::one() / T::from_real((d as f64).sqrt());
                        let mut scores: Vec<T> = cache
                            .k_rows
                            .iter()
                            .map(|kr| {
                                let mut dot = T::zero();
                                for (a, b) in q.iter().zip(kr) {
                                    dot += *a * *b;
                                }
                                dot * scale
                            })
                            .collect();
                        let max = scores.iter().fold(T::neg_infinity(), |m, &s| m.max(s));
                        let mut denom = T::zero();
                        for s in &mut scores {
                            *s = (*s - max).exp();
                            denom += *s;
                        }
                        let inv = T::one() / denom;
                        let out = &mut mixed[h * d..(h + 1) * d];
                        for (s, vr) in scores.iter().zip(&cache.v_rows) {
                            let p = *s * inv;
                            for (o, &vv) in out.iter_mut().zip(vr) {
                                *o += p * vv;
                            }
                        }
                    }
                    let mixed = project_row(&mixed, &block.mix.w_o);
                    for (a, b) in x.iter_mut().zip(&mixed) {
                        *a += *b;
                    }
                    let ff = ffn_row(&block.norm2.apply(&x), block);
                    for (a, b) in x.iter_mut().zip(&ff) {
                        *a += *b;
                    }
                }
            }
        }
        Ok(DecodeOut {
            row: weights.final_norm.apply(&x),
            window_rows,
        })
    }

    /// Total bytes held by decode state across layers and heads.
    pub fn state_bytes(&self) -> u64 {
        match &self.mixer {
            MixerSession::Spectre(caches) => caches
                .iter()
                .flat_map(|l| l.iter())
                .map(CacheState::state_bytes)
                .sum(),
            MixerSession::Attn(caches) => caches
                .iter()
                .flat_map(|l| l.iter())
                .map(AttnKvCache::bytes)
                .sum(),
        }
    }
}

fn ffn_row<T: Scalar>(x: &[T], block: &super::weights::BlockWeights<T>) -> Vec<T> {
    let mut h = block.ffn.w1.forward(x);
    for v in &mut h {
        *v = gelu(*v);
    }
    block.ffn.w2.forward(&h)
}

fn ffn_rows<T: Scalar>(x: &Matrix<T>, block: &super::weights::BlockWeights<T>) -> Matrix<T> {
    let mut out = Matrix::zeros(x.rows(), x.cols());
    for r in 0..x.rows() {
        out.row_mut(r).copy_from_slice(&ffn_row(x.row(r), block));
    }
    out
}

/// Everything a generation run produces.
pub struct GenerateResult<T: Scalar> {
    /// One row per emitted token: the prompt's final output row (when the
    /// prompt is non-empty) followed by each decode output.
    pub outputs: Matrix<T>,
    /// Per-decode-step wall times.
    pub step_times_ms: Vec<f64>,
    /// Emitted window row counts per decode step.
    pub window_rows: Vec<usize>,
    pub report: BenchReport,
}

/// Raw-embedding generation: prefill on the prompt, then `steps` decode
/// steps, each feeding the previous output row back as the next input.
pub fn stream_generate<T: Scalar>(
    weights: &ModelWeights<T>,
    prompt: &Matrix<T>,
    steps: usize,
) -> Result<GenerateResult<T>> {
    let cfg = &weights.config;
    let t0 = Instant::now();
    let (mut session, prompt_out) = StreamSession::prefill(weights, prompt)?;
    let ttft_ms = t0.elapsed().as_secs_f64() * 1e3;

    let mut outputs: Vec<Vec<T>> = Vec::with_capacity(steps + 1);
    let mut feedback: Vec<T> = if prompt_out.rows() > 0 {
        let last = prompt_out.row(prompt_out.rows() - 1).to_vec();
        outputs.push(last.clone());
        last
    } else {
        vec![T::zero(); cfg.d_model()]
    };

    let mut step_times_ms = Vec::with_capacity(steps);
    let mut window_rows = Vec::with_capacity(steps);
    let decode_start = Instant::now();
    for _ in 0..steps {
        let s0 = Instant::now();
        let out = session.decode(weights, &feedback)?;
        step_times_ms.push(s0.elapsed().as_secs_f64() * 1e3);
        window_rows.push(out.window_rows);
        feedback = out.row.clone();
        outputs.push(out.row);
    }
    let decode_total_s = decode_start.elapsed().as_secs_f64();

    let tpot_ms = if steps > 0 {
        step_times_ms.iter().sum::<f64>() / steps as f64
    } else {
        0.0
    };
    let total_s = ttft_ms / 1e3 + decode_total_s;
    let throughput = if total_s > 0.0 {
        (prompt.rows() + steps) as f64 / total_s
    } else {
        0.0
    };

    let rows = outputs.len();
    let flat: Vec<T> = outputs.into_iter().flatten().collect();
    Ok(GenerateResult {
        outputs: Matrix::from_vec(rows, cfg.d_model(), flat),
        step_times_ms,
        window_rows,
        report: BenchReport {
            ttft_ms,
            tpot_ms,
            throughput_tok_per_s: throughput,
            seq_len: prompt.rows(),
            kernel_name: cfg.kernel_label().to_string(),
            peak_state_bytes: session.state_bytes(),
        },
    })
}

/// Vocabulary-mode generation: embeds prompt ids, decodes with argmax over
/// the tied embedding head, and returns the generated ids alongside the raw
/// result.
pub fn stream_generate_ids<T: Scalar>(
    weights: &ModelWeights<T>,
    prompt_ids: &[usize],
    steps: usize,
) -> Result<(Vec<usize>, GenerateResult<T>)> {
    let cfg = &weights.config;
    let emb = weights
        .embedding
        .as_ref()
        .ok_or_else(|| Error::Config("vocabulary mode needs an embedding table".into()))?;
    for &id in prompt_ids {
        if id >= cfg.vocab_size {
            return Err(Error::Input(format!(
                "token id {id} out of range (vocab {})",
                cfg.vocab_size
            )));
        }
    }
    let mut prompt = Matrix::zeros(prompt_ids.len(), cfg.d_model());
    for (r, &id) in prompt_ids.iter().enumerate() {
        prompt.row_mut(r).copy_from_slice(emb.row(id));
    }

    let t0 = Instant::now();
    let (mut session, prompt_out) = StreamSession::prefill(weights, &prompt)?;
    let ttft_ms = t0.elapsed().as_secs_f64() * 1e3;

    let argmax_id = |row: &[T]| -> usize {
        let mut best = 0usize;
        let mut best_score = T::neg_infinity();
        for v in 0..cfg.vocab_size {
            let mut dot = T::zero();
            for (a, b) in row.iter().zip(emb.row(v)) {
                dot += *a * *b;
            }
            if dot > best_score {
                best_score = dot;
                best = v;
            }
        }
        best
    };

    let mut ids = Vec::with_capacity(steps);
    let mut outputs: Vec<Vec<T>> = Vec::new();
    let mut feedback_row: Vec<T> = if prompt_out.rows() > 0 {
        let last = prompt_out.row(prompt_out.rows() - 1).to_vec();
        outputs.push(last.clone());
        let id = argmax_id(&last);
        ids.push(id);
        emb.row(id).to_vec()
    } else {
        vec![T::zero(); cfg.d_model()]
    };

    let mut step_times_ms = Vec::with_capacity(steps);
    let mut window_rows = Vec::with_capacity(steps);
    let decode_start = Instant::now();
    for _ in 0..steps {
        let s0 = Instant::now();
        let out = session.decode(weights, &feedback_row)?;
        step_times_ms.push(s0.elapsed().as_secs_f64() * 1e3);
        window_rows.push(out.window_rows);
        let id = argmax_id(&out.row);
        ids.push(id);
        feedback_row = emb.row(id).to_vec();
        outputs.push(out.row);
    }
    let decode_total_s = decode_start.elapsed().as_secs_f64();

    let tpot_ms = if steps > 0 {
        step_times_ms.iter().sum::<f64>() / steps as f64
    } else {
        0.0
    };
    let total_s = ttft_ms / 1e3 + decode_total_s;
    let throughput = if total_s > 0.0 {
        (prompt_ids.len() + steps) as f64 / total_s
    } else {
        0.0
    };

    let rows = outputs.len();
    let flat: Vec<T> = outputs.into_iter().flatten().collect();
    let result = GenerateResult {
        outputs: Matrix::from_vec(rows, cfg.d_model(), flat),
        step_times_ms,
        window_rows,
        report: BenchReport {
            ttft_ms,
            tpot_ms,
            throughput_tok_per_s: throughput,
            seq_len: prompt_ids.len(),
            kernel_name: cfg.kernel_label().to_string(),
            peak_state_bytes: session.state_bytes(),
        },
    };
    Ok((ids, result))
}

/// Sanity check used by reports: the mean step time times the step count
/// reconstructs the decode wall time.
#[cfg(test)]
pub(crate) fn tpot_consistent(report: &BenchReport, step_times_ms: &[f64]) -> bool {
    if step_times_ms.is_empty() {
        return true;
    }
    let total: f64 = step_times_ms.iter().sum();
    let reconstructed = report.tpot_ms * step_times_ms.len() as f64;
    (reconstructed - total).abs() <= 0.05 * total.max(1e-9)
}
