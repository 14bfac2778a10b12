//! Descriptor pooling and the spectral gate pipeline.
//!
//! The gate is built in four stages: pool queries into a normalized
//! descriptor, expand it through a small MLP into interleaved re/im values
//! per frequency bin, optionally add a short complex convolution along the
//! frequency axis (the Toeplitz update), then pass every bin through modReLU.

use num_complex::Complex;

use super::config::LayerConfig;
use super::weights::{HeadWeights, LayerNormParams};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;
use crate::spectral::{mod_relu, HalfSpectrum};

/// Pooled, normalized query summary of the whole window.
#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor<T>(pub Vec<T>);

/// One complex gate value per retained frequency bin.
#[derive(Debug, Clone, PartialEq)]
pub struct GateVector<T>(pub Vec<Complex<T>>);

impl<T> GateVector<T> {
    pub fn bins(&self) -> usize {
        self.0.len()
    }
}

/// Mean over query rows followed by LayerNorm. An empty matrix pools to the
/// zero vector before normalization.
pub fn global_descriptor<T: Scalar>(q: &Matrix<T>, norm: &LayerNormParams<T>) -> Descriptor<T> {
    let d = q.cols();
    let mut mean = vec![T::zero(); d];
    if q.rows() > 0 {
        for r in 0..q.rows() {
            for (m, &v) in mean.iter_mut().zip(q.row(r)) {
                *m += v;
            }
        }
        let inv = T::one() / T::from_real(q.rows() as f64);
        for m in &mut mean {
            *m *= inv;
        }
    }
    Descriptor(norm.apply(&mean))
}

/// Descriptor suitable for streaming mode: the running query sum divided by
/// the full window size (not the number of occupied slots), then normalized.
pub fn streaming_descriptor<T: Scalar>(
    sum_q: &[T],
    window: usize,
    norm: &LayerNormParams<T>,
) -> Descriptor<T> {
    let inv = T::one() / T::from_real(window as f64);
    let scaled: Vec<T> = sum_q.iter().map(|&v| v * inv).collect();
    Descriptor(norm.apply(&scaled))
}

fn assemble_complex<T: Scalar>(interleaved: &[T]) -> Vec<Complex<T>> {
    interleaved
        .chunks_exact(2)
        .map(|p| Complex::new(p[0], p[1]))
        .collect()
}

/// Zero-padded complex convolution along the frequency axis with the kernel
/// centered at radius `r`: `(t * g)_k = sum_j t[j] g[k + r - j]`.
fn toeplitz_convolve<T: Scalar>(kernel: &[Complex<T>], g: &[Complex<T>]) -> Vec<Complex<T>> {
    let r = kernel.len() / 2;
    let mut out = vec![Complex::default(); g.len()];
    for (k, o) in out.iter_mut().enumerate() {
        let mut acc = Complex::default();
        for (j, &t) in kernel.iter().enumerate() {
            let idx = k as isize + r as isize - j as isize;
            if idx >= 0 && (idx as usize) < g.len() {
                acc += t * g[idx as usize];
            }
        }
        *o = acc;
    }
    out
}

pub(crate) fn gate_with_hidden<T: Scalar>(
    q_bar: &Descriptor<T>,
    head: &HeadWeights<T>,
    cfg: &LayerConfig,
) -> (GateVector<T>, Vec<T>) {
    let (raw, hidden) = head.gate_mlp.forward_with_hidden(&q_bar.0);
    let mut g = assemble_complex(&raw);
    debug_assert_eq!(g.len(), cfg.bins());
    if cfg.toeplitz_enabled {
        let update = toeplitz_convolve(&head.toeplitz_kernel, &g);
        for (gk, u) in g.iter_mut().zip(update) {
            *gk += u;
        }
    }
    for (gk, &b) in g.iter_mut().zip(&head.modrelu_bias) {
        *gk = mod_relu(*gk, b);
    }
    (GateVector(g), hidden)
}

/// Full gate pipeline: MLP, optional Toeplitz update, modReLU.
pub fn gate_from_descriptor<T: Scalar>(
    q_bar: &Descriptor<T>,
    head: &HeadWeights<T>,
    cfg: &LayerConfig,
) -> GateVector<T> {
    gate_with_hidden(q_bar, head, cfg).0
}

/// Rotates each bin by `exp(+j 2 pi k p / n)`. Leaves magnitudes untouched;
/// `p = 0` and `p = n` are both the identity.
pub fn apply_positional_phase<T: Scalar>(g: &GateVector<T>, p: u64, n: usize) -> GateVector<T> {
    let out =
        g.0.iter()
            .enumerate()
            .map(|(k, &gk)| {
                let idx = (k as u64 * (p % n as u64)) % n as u64;
                let angle = std::f64::consts::TAU * idx as f64 / n as f64;
                let rot = Complex::new(T::from_real(angle.cos()), T::from_real(angle.sin()));
                gk * rot
            })
            .collect();
    GateVector(out)
}

/// Scales spectrum row `k` by `g_k`, broadcast over channels. The DC and
/// Nyquist rows use only the real part of the gate so they stay real.
pub fn apply_gate<T: Scalar>(s: &HalfSpectrum<T>, g: &GateVector<T>) -> Result<HalfSpectrum<T>> {
    if g.bins() != s.bins() {
        return Err(Error::Shape(format!(
            "gate has {} bins, spectrum has {}",
            g.bins(),
            s.bins()
        )));
    }
    let mut out = s.clone();
    let last = s.bins() - 1;
    for (k, &gk) in g.0.iter().enumerate() {
        let factor = if k == 0 || k == last {
            Complex::new(gk.re, T::zero())
        } else {
            gk
        };
        for v in out.row_mut(k) {
            *v *= factor;
        }
    }
    Ok(out)
}

/// `irfft(diag(g) . S)` without materializing the gated spectrum; the decode
/// hot path calls this every token. Matches `apply_gate` + `irfft` exactly,
/// including the real DC/Nyquist handling.
pub fn gated_inverse<T: Scalar>(s: &HalfSpectrum<T>, g: &GateVector<T>) -> Result<Matrix<T>> {
    if g.bins() != s.bins() {
        return Err(Error::Shape(format!(
            "gate has {} bins, spectrum has {}",
            g.bins(),
            s.bins()
        )));
    }
    let last = s.bins() - 1;
    crate::spectral::irfft_mapped(s, |k, v| {
        if k == 0 || k == last {
            Complex::new(v.re * g.0[k].re, T::zero())
        } else {
            v * g.0[k]
        }
    })
}
