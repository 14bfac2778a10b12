//! Spectral primitives: half-spectrum real FFT, a quadratic reference DFT,
//! twiddle tables, orthonormal Haar wavelets, and the modReLU activation.

mod fft;
mod twiddle;
mod wavelet;

pub use fft::{
    irfft, irfft_mapped, irfft_seq, naive_dft, rfft, rfft_seq, FullSpectrum, HalfSpectrum,
};
pub use twiddle::{twiddle_table, TwiddleTable};
pub use wavelet::{dwt_haar, idwt_haar, WaveletCoeffs};

use num_complex::Complex;

use crate::scalar::Scalar;

/// modReLU: scales `z` by `ReLU(|z| + b) / |z|`; zero when `z = 0` or the
/// biased modulus is non-positive.
pub fn mod_relu<T: Scalar>(z: Complex<T>, b: T) -> Complex<T> {
    let m = z.norm();
    if m == T::zero() {
        return Complex::default();
    }
    let biased = m + b;
    if biased > T::zero() {
        z * (biased / m)
    } else {
        Complex::default()
    }
}
