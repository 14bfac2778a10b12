//! Streaming decode cache.
//!
//! The state keeps the half spectrum of the current token window coherent
//! under one-token updates: when token `t` arrives, the contribution of the
//! token leaving the window is subtracted from every bin and the new token's
//! contribution is added, using pre-cached twiddle factors. The same state
//! carries ring buffers of raw values/queries and a running query sum for
//! the gate descriptor, so a decode step never re-transforms the window.
//!
//! Memory is constant in the step counter: one half spectrum, two ring
//! buffers, the query sum, and the twiddle table.

mod memory;

pub use memory::{attach_memory, memory_precompute, MemoryBank};

use std::sync::Arc;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::layer::{
    apply_gate, apply_positional_phase, gate_with_hidden, gated_inverse, global_descriptor,
    project_qv, streaming_descriptor, wrm_forward, GateVector, HeadWeights, LayerConfig,
};
use crate::matrix::Matrix;
use crate::scalar::Scalar;
use crate::spectral::{irfft, rfft, twiddle_table, HalfSpectrum, TwiddleTable};

/// Per-head streaming state. Single-writer: decode steps mutate it and must
/// not run concurrently on one instance; distinct states may advance in
/// parallel.
#[derive(Debug, Clone)]
pub struct CacheState<T: Scalar> {
    prefix_fft: HalfSpectrum<T>,
    v_buf: Matrix<T>,
    q_buf: Matrix<T>,
    sum_q: Vec<T>,
    /// Tokens consumed so far; unbounded, the ring index is `t mod n_max`.
    t: u64,
    n_max: usize,
    twiddles: TwiddleTable<T>,
    memory: Option<Arc<MemoryBank<T>>>,
}

impl<T: Scalar> CacheState<T> {
    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn head_dim(&self) -> usize {
        self.v_buf.cols()
    }

    pub fn step(&self) -> u64 {
        self.t
    }

    /// Occupied window length, `min(t, n_max)`.
    pub fn live_len(&self) -> usize {
        (self.t.min(self.n_max as u64)) as usize
    }

    pub fn prefix_fft(&self) -> &HalfSpectrum<T> {
        &self.prefix_fft
    }

    pub fn v_buf(&self) -> &Matrix<T> {
        &self.v_buf
    }

    pub fn q_buf(&self) -> &Matrix<T> {
        &self.q_buf
    }

    pub fn sum_q(&self) -> &[T] {
        &self.sum_q
    }

    pub fn memory(&self) -> Option<&Arc<MemoryBank<T>>> {
        self.memory.as_ref()
    }

    pub(crate) fn memory_mut(&mut self) -> &mut Option<Arc<MemoryBank<T>>> {
        &mut self.memory
    }

    /// Scalars held by the mutable state: spectrum (2 per coefficient), both
    /// ring buffers, and the running query sum. The immutable twiddle table
    /// is reported separately by [`CacheState::twiddle_scalar_count`].
    pub fn state_scalar_count(&self) -> usize {
        self.prefix_fft.scalar_count()
            + self.v_buf.data().len()
            + self.q_buf.data().len()
            + self.sum_q.len()
    }

    pub fn twiddle_scalar_count(&self) -> usize {
        self.twiddles.scalar_count()
    }

    pub fn state_bytes(&self) -> u64 {
        ((self.state_scalar_count() + self.twiddle_scalar_count()) * T::DTYPE.size_bytes()) as u64
    }

    /// Re-derives the window spectrum with a fresh FFT of the ring buffer
    /// (slot order). Used by coherence checks; the decode path never calls
    /// this.
    pub fn fresh_spectrum(&self) -> Result<HalfSpectrum<T>> {
        rfft(&self.v_buf, self.n_max)
    }

    /// Column sums over the occupied query slots.
    pub fn q_column_sums(&self) -> Vec<T> {
        let mut sums = vec![T::zero(); self.q_buf.cols()];
        for r in 0..self.q_buf.rows() {
            for (s, &v) in sums.iter_mut().zip(self.q_buf.row(r)) {
                *s += v;
            }
        }
        sums
    }

    /// Test hook: damages the twiddle table so coherence checks have a
    /// negative control.
    pub(crate) fn corrupt_twiddles_for_test(&mut self, factor: T) {
        self.twiddles.corrupt_entry(1, factor);
    }

    pub(crate) fn restore_state(
        prefix_fft: HalfSpectrum<T>,
        v_buf: Matrix<T>,
        q_buf: Matrix<T>,
        sum_q: Vec<T>,
        t: u64,
    ) -> Result<Self> {
        let n_max = v_buf.rows();
        Ok(CacheState {
            twiddles: twiddle_table(n_max)?,
            prefix_fft,
            v_buf,
            q_buf,
            sum_q,
            t,
            n_max,
            memory: None,
        })
    }
}

/// One-bin window update: subtract the departing token's phase-weighted
/// contribution (when the window is full) and add the new token's. The stale
/// twiddle `exp(-j 2 pi k (t - N)/N)` equals the fresh `exp(-j 2 pi k t/N)`
/// by periodicity, so a single factor serves both terms.
pub fn evict_update_bin<T: Scalar>(
    row: &mut [Complex<T>],
    v_old: &[T],
    v_new: &[T],
    t: u64,
    k: usize,
    twiddles: &TwiddleTable<T>,
) {
    let w = twiddles.entry(k, t);
    let evict = t >= twiddles.n() as u64;
    for (c, slot) in row.iter_mut().enumerate() {
        let delta = if evict { v_new[c] - v_old[c] } else { v_new[c] };
        *slot += w * delta;
    }
}

/// One-shot window initialization over a prompt of length `L <= n_fft`.
/// Returns the state plus the mixed output for the prompt (batch mode over
/// the padded window, descriptor pooled over the `L` real tokens).
pub fn prefill<T: Scalar>(
    x: &Matrix<T>,
    head: &HeadWeights<T>,
    cfg: &LayerConfig,
) -> Result<(CacheState<T>, Matrix<T>)> {
    cfg.validate()?;
    let n_max = cfg.n_fft;
    let d = cfg.head_dim;
    let l = x.rows();
    if l > n_max {
        return Err(Error::Capacity(format!(
            "prompt of {l} tokens exceeds the window {n_max}"
        )));
    }
    let (q, v) = project_qv(x, head)?;
    let prefix_fft = rfft(&v, n_max)?;

    let mut v_buf = Matrix::zeros(n_max, d);
    let mut q_buf = Matrix::zeros(n_max, d);
    for r in 0..l {
        v_buf.row_mut(r).copy_from_slice(v.row(r));
        q_buf.row_mut(r).copy_from_slice(q.row(r));
    }
    let mut sum_q = vec![T::zero(); d];
    for r in 0..l {
        for (s, &val) in sum_q.iter_mut().zip(q.row(r)) {
            *s += val;
        }
    }

    // the prompt output is the batch-mode mix over the whole padded window
    // (refinement included), truncated to the prompt afterwards, so any
    // prompt length works regardless of the wavelet depth
    let output = if l == 0 {
        Matrix::zeros(0, d)
    } else {
        let q_bar = global_descriptor(&q, &head.descriptor_norm);
        crate::layer::finish_mix(&prefix_fft, &q_bar, head, cfg, n_max)?.first_rows(l)
    };

    let state = CacheState {
        twiddles: twiddle_table(n_max)?,
        prefix_fft,
        v_buf,
        q_buf,
        sum_q,
        t: l as u64,
        n_max,
        memory: None,
    };
    Ok((state, output))
}

/// Consumes one token: updates every spectrum bin, refreshes the ring
/// buffers and the running query sum, rebuilds the gate with positional
/// phase, and inverts. Returns the live window — the last `min(t+1, n_max)`
/// reconstructed rows, prefixed by the persistent-memory rows when a bank is
/// attached.
pub fn decode_step<T: Scalar>(
    state: &mut CacheState<T>,
    x_t: &[T],
    head: &HeadWeights<T>,
    cfg: &LayerConfig,
) -> Result<Matrix<T>> {
    let d = state.head_dim();
    if x_t.len() != d {
        return Err(Error::Shape(format!(
            "token has {} channels, cache holds {}",
            x_t.len(),
            d
        )));
    }
    let n_max = state.n_max;
    let t = state.t;
    let slot = (t % n_max as u64) as usize;

    // project the single token
    let mut q_t = vec![T::zero(); d];
    let mut v_t = vec![T::zero(); d];
    for (i, &xi) in x_t.iter().enumerate() {
        for j in 0..d {
            q_t[j] += xi * head.w_q.get(i, j);
            v_t[j] += xi * head.w_v.get(i, j);
        }
    }

    // evict & update every bin
    {
        let v_old = state.v_buf.row(slot).to_vec();
        for k in 0..=n_max / 2 {
            evict_update_bin(
                state.prefix_fft.row_mut(k),
                &v_old,
                &v_t,
                t,
                k,
                &state.twiddles,
            );
        }
    }

    // refresh ring buffers and the running descriptor
    let evict = t >= n_max as u64;
    if evict {
        let q_old = state.q_buf.row(slot).to_vec();
        for (s, old) in state.sum_q.iter_mut().zip(q_old) {
            *s -= old;
        }
    }
    for (s, &new) in state.sum_q.iter_mut().zip(&q_t) {
        *s += new;
    }
    state.v_buf.row_mut(slot).copy_from_slice(&v_t);
    state.q_buf.row_mut(slot).copy_from_slice(&q_t);

    // gate with positional phase, then invert in one pass
    let q_bar = streaming_descriptor(&state.sum_q, n_max, &head.descriptor_norm);
    let (gate, hidden) = gate_with_hidden(&q_bar, head, cfg);
    let gate = apply_positional_phase(&gate, t, n_max);
    let mut window = gated_inverse(&state.prefix_fft, &gate)?;
    if cfg.wrm_enabled {
        window = wrm_forward(&window, &q_bar, head, cfg)?;
    }

    let live = (t + 1).min(n_max as u64) as usize;
    let window_tail = window.into_last_rows(live);

    let out = match &state.memory {
        None => window_tail,
        Some(bank) => {
            let mem_gate = memory_gate(bank, &hidden);
            let mem_gated = apply_gate(bank.spectrum(), &mem_gate)?;
            let mem_out = irfft(&mem_gated)?;
            Matrix::vstack(&mem_out, &window_tail)
        }
    };

    state.t += 1;
    Ok(out)
}

/// Gate values for the memory bins, produced by the extension head on the
/// gate MLP's hidden activation. No positional phase: the bank is static
/// context. Banks without an extension contribute nothing.
fn memory_gate<T: Scalar>(bank: &MemoryBank<T>, hidden: &[T]) -> GateVector<T> {
    let bins = bank.n_mem() / 2 + 1;
    match bank.gate_ext() {
        None => GateVector(vec![Complex::default(); bins]),
        Some(ext) => {
            let raw = ext.forward(hidden);
            GateVector(
                raw.chunks_exact(2)
                    .map(|p| Complex::new(p[0], p[1]))
                    .collect(),
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layer::ControllerMode;
    use crate::runtime::rng::SplitMix64;
    use crate::spectral::naive_dft;

    fn cfg(d: usize, n_max: usize) -> LayerConfig {
        LayerConfig {
            head_dim: d,
            heads: 1,
            n_fft: n_max,
            gate_hidden: 2,
            toeplitz_enabled: true,
            toeplitz_radius: 2,
            wrm_enabled: false,
            wrm_levels: 1,
            wrm_controller: ControllerMode::Never,
        }
    }

    fn random_head(cfg: &LayerConfig, seed: u64) -> HeadWeights<f64> {
        let mut rng = SplitMix64::new(seed);
        let mut head = HeadWeights::zeros(cfg);
        for m in [&mut head.w_q, &mut head.w_v] {
            for v in m.data_mut() {
                *v = rng.next_normal() * 0.5;
            }
        }
        for mlp in [&mut head.gate_mlp] {
            for v in mlp.hidden.w.data_mut() {
                *v = rng.next_normal();
            }
            for v in mlp.out.w.data_mut() {
                *v = rng.next_normal() * 0.2;
            }
            for v in &mut mlp.out.b {
                *v = rng.next_normal() * 0.2;
            }
        }
        for v in &mut head.toeplitz_kernel {
            *v = Complex::new(rng.next_normal() * 0.1, rng.next_normal() * 0.1);
        }
        head
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
    fn empty_prompt_yields_zero_state() {
        let c = cfg(4, 16);
        let head = random_head(&c, 1);
        let (state, out) = prefill(&Matrix::zeros(0, 4), &head, &c).unwrap();
        assert_eq!(out.rows(), 0);
        assert_eq!(state.step(), 0);
        assert!(state.sum_q().iter().all(|v| *v == 0.0));
        for v in state.prefix_fft().data() {
            assert_eq!(*v, Complex::default());
        }
    }

    #[test]
    fn full_constant_prompt_concentrates_energy_in_dc() {
        let c = cfg(3, 16);
        let mut head = HeadWeights::<f64>::zeros(&c);
        head.w_q = Matrix::identity(3);
        head.w_v = Matrix::identity(3);
        let mut x = Matrix::zeros(16, 3);
        for r in 0..16 {
            x.row_mut(r).copy_from_slice(&[0.5, -1.0, 2.0]);
        }
        let (state, _) = prefill(&x, &head, &c).unwrap();
        let dc = state.prefix_fft().row(0);
        assert!((dc[0].re - 8.0).abs() < 1e-10);
        assert!((dc[1].re + 16.0).abs() < 1e-10);
        assert!((dc[2].re - 32.0).abs() < 1e-10);
        for k in 1..=8 {
            for v in state.prefix_fft().row(k) {
                assert!(v.norm() < 1e-9);
            }
        }
    }

    #[test]
    fn prefill_spectrum_matches_fresh_transform() {
        let c = cfg(4, 32);
        let head = random_head(&c, 3);
        let x = random_matrix(13, 4, 5);
        let (state, _) = prefill(&x, &head, &c).unwrap();
        let fresh = state.fresh_spectrum().unwrap();
        assert!(state.prefix_fft().max_abs_diff(&fresh) < 1e-10);
    }

    #[test]
    fn oversized_prompt_is_capacity_error() {
        let c = cfg(2, 8);
        let head = random_head(&c, 7);
        let r = prefill(&random_matrix(9, 2, 9), &head, &c);
        assert!(matches!(r, Err(crate::Error::Capacity(_))));
    }

    #[test]
    fn zero_token_before_wraparound_leaves_spectrum_unchanged() {
        let c = cfg(4, 16);
        let head = random_head(&c, 11);
        let x = random_matrix(5, 4, 13);
        let (mut state, _) = prefill(&x, &head, &c).unwrap();
        let before = state.prefix_fft().clone();
        decode_step(&mut state, &[0.0; 4], &head, &c).unwrap();
        assert!(state.prefix_fft().max_abs_diff(&before) < 1e-15);
    }

    #[test]
    fn window_of_identical_tokens_is_dc_only() {
        let c = cfg(3, 16);
        let mut head = HeadWeights::<f64>::zeros(&c);
        head.w_q = Matrix::identity(3);
        head.w_v = Matrix::identity(3);
        // give the gate something nonzero so decode output is exercised too
        head.gate_mlp.out.b[0] = 1.0;
        let (mut state, _) = prefill(&random_matrix(7, 3, 17), &head, &c).unwrap();
        let token = [1.25, -0.5, 0.75];
        for _ in 0..16 {
            decode_step(&mut state, &token, &head, &c).unwrap();
        }
        for r in 0..16 {
            for (a, b) in state.v_buf().row(r).iter().zip(&token) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        for k in 1..=8 {
            for v in state.prefix_fft().row(k) {
                assert!(v.norm() < 1e-6);
            }
        }
    }

    #[test]
    fn prefill_and_decode_paths_agree_f32() {
        let c = LayerConfig {
            head_dim: 4,
            heads: 1,
            n_fft: 32,
            gate_hidden: 2,
            toeplitz_enabled: true,
            toeplitz_radius: 2,
            wrm_enabled: false,
            wrm_levels: 1,
            wrm_controller: ControllerMode::Never,
        };
        let mut rng = SplitMix64::new(19);
        let mut head = HeadWeights::<f32>::zeros(&c);
        for m in [&mut head.w_q, &mut head.w_v] {
            for v in m.data_mut() {
                *v = rng.next_normal() as f32 * 0.5;
            }
        }
        for v in head.gate_mlp.out.w.data_mut() {
            *v = rng.next_normal() as f32 * 0.2;
        }
        let mut x = Matrix::<f32>::zeros(32, 4);
        for v in x.data_mut() {
            *v = rng.next_normal() as f32;
        }

        let (full, _) = prefill(&x, &head, &c).unwrap();

        let (mut inc, _) = prefill(&x.first_rows(1), &head, &c).unwrap();
        for r in 1..32 {
            decode_step(&mut inc, x.row(r), &head, &c).unwrap();
        }

        assert!(full.prefix_fft().max_abs_diff(inc.prefix_fft()) < 1e-4);
        assert!(full.v_buf().max_abs_diff(inc.v_buf()) < 1e-4);
        for (a, b) in full.sum_q().iter().zip(inc.sum_q()) {
            assert!((a - b).abs() < 1e-4);
        }
        assert_eq!(full.step(), inc.step());
    }

    #[test]
    fn single_bin_update_equal_tokens_cancel() {
        let tw = twiddle_table::<f64>(16).unwrap();
        let mut row = vec![Complex::new(0.3, -0.8); 4];
        let before = row.clone();
        let v = [0.1, 0.2, 0.3, 0.4];
        evict_update_bin(&mut row, &v, &v, 21, 3, &tw);
        for (a, b) in row.iter().zip(&before) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn single_bin_update_dc_adds_plain_difference() {
        let tw = twiddle_table::<f64>(16).unwrap();
        let mut row = vec![Complex::new(1.0, 0.0); 2];
        evict_update_bin(&mut row, &[0.25, -0.5], &[1.25, 0.5], 20, 0, &tw);
        assert!((row[0] - Complex::new(2.0, 0.0)).norm() < 1e-15);
        assert!((row[1] - Complex::new(2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn single_bin_update_matches_naive_dft_of_updated_ring() {
        let n = 16usize;
        let k = 3usize;
        let t = 21u64;
        let d = 4usize;
        let tw = twiddle_table::<f64>(n).unwrap();
        let ring = random_matrix(n, d, 23);
        let v_new: Vec<f64> = (0..d).map(|i| 0.3 * i as f64 - 0.7).collect();
        let slot = (t % n as u64) as usize;

        // bin k of the current ring, per channel, via the quadratic oracle
        let mut row: Vec<Complex<f64>> = (0..d)
            .map(|c| {
                let col: Vec<f64> = (0..n).map(|r| ring.get(r, c)).collect();
                naive_dft(&col).coeffs[k]
            })
            .collect();

        let v_old = ring.row(slot).to_vec();
        evict_update_bin(&mut row, &v_old, &v_new, t, k, &tw);

        let mut updated = ring.clone();
        updated.row_mut(slot).copy_from_slice(&v_new);
        for c in 0..d {
            let col: Vec<f64> = (0..n).map(|r| updated.get(r, c)).collect();
            let expect = naive_dft(&col).coeffs[k];
            assert!((row[c] - expect).norm() < 1e-10);
        }
    }

    #[test]
    fn descriptor_sum_tracks_ring_buffer() {
        let c = cfg(4, 8);
        let head = random_head(&c, 29);
        let (mut state, _) = prefill(&random_matrix(3, 4, 31), &head, &c).unwrap();
        let mut rng = SplitMix64::new(37);
        for _ in 0..30 {
            let x: Vec<f64> = (0..4).map(|_| rng.next_normal()).collect();
            decode_step(&mut state, &x, &head, &c).unwrap();
            let direct = state.q_column_sums();
            for (a, b) in state.sum_q().iter().zip(&direct) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn emitted_window_grows_then_saturates() {
        let c = cfg(2, 8);
        let head = random_head(&c, 41);
        let (mut state, _) = prefill(&random_matrix(2, 2, 43), &head, &c).unwrap();
        for step in 0..12u64 {
            let out = decode_step(&mut state, &[0.5, -0.5], &head, &c).unwrap();
            let expect = (2 + step + 1).min(8) as usize;
            assert_eq!(out.rows(), expect);
        }
    }

    #[test]
    fn state_scalar_count_is_closed_form() {
        let c = cfg(16, 32);
        let head = random_head(&c, 47);
        let (state, _) = prefill(&random_matrix(5, 16, 53), &head, &c).unwrap();
        let expect = (32 / 2 + 1) * 16 * 2 + 2 * 32 * 16 + 16;
        assert_eq!(state.state_scalar_count(), expect);
        assert_eq!(state.twiddle_scalar_count(), 2 * 32);
    }
}
