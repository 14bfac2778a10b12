//! Wavelet refinement: a residual branch that re-weights Haar bands of the
//! mixed values with descriptor-conditioned per-band, per-channel gains.

use super::config::{ControllerMode, LayerConfig};
use super::gate::Descriptor;
use super::weights::HeadWeights;
use crate::error::Result;
use crate::matrix::Matrix;
use crate::scalar::Scalar;
use crate::spectral::{dwt_haar, idwt_haar};

/// Deterministic skip decision for the refinement branch.
pub fn wrm_controller<T: Scalar>(
    q_bar: &Descriptor<T>,
    head: &HeadWeights<T>,
    cfg: &LayerConfig,
) -> bool {
    match cfg.wrm_controller {
        ControllerMode::Always => true,
        ControllerMode::Never => false,
        ControllerMode::LearnedStub => {
            let first_row = head.wrm_mlp.hidden.w.row(0);
            let dot: T = q_bar
                .0
                .iter()
                .zip(first_row)
                .map(|(&a, &b)| a * b)
                .fold(T::zero(), |acc, v| acc + v);
            dot + head.wrm_controller_logit > T::zero()
        }
    }
}

/// Residual wavelet refinement. When the controller skips, the input is
/// returned unchanged; otherwise the Haar bands of `v_tilde` are scaled by
/// the `(J+1) x d` gains emitted from the descriptor and the reconstruction
/// is added back.
pub fn wrm_forward<T: Scalar>(
    v_tilde: &Matrix<T>,
    q_bar: &Descriptor<T>,
    head: &HeadWeights<T>,
    cfg: &LayerConfig,
) -> Result<Matrix<T>> {
    if !wrm_controller(q_bar, head, cfg) {
        return Ok(v_tilde.clone());
    }
    let d = v_tilde.cols();
    let mut w = dwt_haar(v_tilde, cfg.wrm_levels)?;
    let gains = head.wrm_mlp.forward(&q_bar.0); // (J+1) * d, band-major
    let bands = w.band_ranges();
    debug_assert_eq!(gains.len(), bands.len() * d);
    for (band_idx, range) in bands.iter().enumerate() {
        let band_gains = &gains[band_idx * d..(band_idx + 1) * d];
        for r in range.clone() {
            for (v, &s) in w.coeffs_mut().row_mut(r).iter_mut().zip(band_gains) {
                *v *= s;
            }
        }
    }
    let refined = idwt_haar(&w)?;
    v_tilde.add(&refined)
}
