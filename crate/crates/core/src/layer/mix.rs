//! The full mixing forward: project, transform, gate, inverse, refine.

use super::config::LayerConfig;
use super::gate::{gate_from_descriptor, gated_inverse, global_descriptor, Descriptor};
use super::weights::{HeadWeights, LayerWeights};
use super::wrm::wrm_forward;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;
use crate::spectral::{rfft, HalfSpectrum};

/// `Q = X W_q`, `V = X W_v`.
pub fn project_qv<T: Scalar>(
    x: &Matrix<T>,
    head: &HeadWeights<T>,
) -> Result<(Matrix<T>, Matrix<T>)> {
    let q = x.matmul(&head.w_q)?;
    let v = x.matmul(&head.w_v)?;
    Ok((q, v))
}

/// Gate the value spectrum, invert, keep the first `n_out` rows, and run the
/// optional refinement branch. Shared by the batch forward and the streaming
/// pre-fill, which build the spectrum themselves.
pub(crate) fn finish_mix<T: Scalar>(
    spectrum: &HalfSpectrum<T>,
    q_bar: &Descriptor<T>,
    head: &HeadWeights<T>,
    cfg: &LayerConfig,
    n_out: usize,
) -> Result<Matrix<T>> {
    let gate = gate_from_descriptor(q_bar, head, cfg);
    let mut v_tilde = gated_inverse(spectrum, &gate)?.first_rows(n_out);
    if cfg.wrm_enabled {
        v_tilde = wrm_forward(&v_tilde, q_bar, head, cfg)?;
    }
    Ok(v_tilde)
}

/// Single-head forward over an `n x d` slice (no positional phase; that is a
/// streaming-only concern).
pub fn mix_head_forward<T: Scalar>(
    x: &Matrix<T>,
    head: &HeadWeights<T>,
    cfg: &LayerConfig,
) -> Result<Matrix<T>> {
    if x.rows() > cfg.n_fft {
        return Err(Error::Shape(format!(
            "{} tokens exceed the FFT window {}",
            x.rows(),
            cfg.n_fft
        )));
    }
    let (q, v) = project_qv(x, head)?;
    let spectrum = rfft(&v, cfg.n_fft)?;
    let q_bar = global_descriptor(&q, &head.descriptor_norm);
    finish_mix(&spectrum, &q_bar, head, cfg, x.rows())
}

/// Multi-head forward over an `n x (H*d)` input: split into head slices, mix
/// each, concatenate, and apply the output projection.
pub fn spectre_mix_forward<T: Scalar>(
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
    if w.heads.len() != cfg.heads {
        return Err(Error::Shape(format!(
            "weights hold {} heads, config says {}",
            w.heads.len(),
            cfg.heads
        )));
    }
    let mut parts = Vec::with_capacity(cfg.heads);
    for (h, head) in w.heads.iter().enumerate() {
        let slice = x.col_slice(h * cfg.head_dim, cfg.head_dim);
        parts.push(mix_head_forward(&slice, head, cfg)?);
    }
    let refs: Vec<&Matrix<T>> = parts.iter().collect();
    Matrix::concat_cols(&refs).matmul(&w.w_o)
}
