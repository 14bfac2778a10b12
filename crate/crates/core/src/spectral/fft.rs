//! Real FFT on the non-redundant half spectrum, plus the quadratic
//! reference DFT used as the correctness oracle.
//!
//! For a real length-N input only the first `N/2 + 1` DFT coefficients carry
//! information; the rest follow from `X_{N-k} = conj(X_k)`. Forward
//! transforms are unnormalized sums; the inverse applies the `1/N` factor so
//! `irfft(rfft(x)) == x`.

use std::sync::Arc;

use num_complex::Complex;
use realfft::{ComplexToReal, RealToComplex};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// The `(n_fft/2 + 1) x channels` non-redundant coefficients of a real FFT,
/// stored bin-major (row = frequency bin).
#[derive(Debug, Clone, PartialEq)]
pub struct HalfSpectrum<T> {
    n_fft: usize,
    channels: usize,
    data: Vec<Complex<T>>,
}

impl<T: Scalar> HalfSpectrum<T> {
    pub fn zeros(n_fft: usize, channels: usize) -> Result<Self> {
        if n_fft < 2 || !n_fft.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "half spectrum needs an even FFT length >= 2, got {n_fft}"
            )));
        }
        Ok(HalfSpectrum {
            n_fft,
            channels,
            data: vec![Complex::default(); (n_fft / 2 + 1) * channels],
        })
    }

    /// Builds from raw rows; `data.len()` must equal `(n_fft/2+1) * channels`.
    pub fn from_parts(n_fft: usize, channels: usize, data: Vec<Complex<T>>) -> Result<Self> {
        let mut s = Self::zeros(n_fft, channels)?;
        if data.len() != s.data.len() {
            return Err(Error::Shape(format!(
                "half spectrum of length {} holds {} rows of {} channels, got {} values",
                n_fft,
                n_fft / 2 + 1,
                channels,
                data.len()
            )));
        }
        s.data = data;
        Ok(s)
    }

    pub fn n_fft(&self) -> usize {
        self.n_fft
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    #[inline]
    pub fn row(&self, k: usize) -> &[Complex<T>] {
        &self.data[k * self.channels..(k + 1) * self.channels]
    }

    #[inline]
    pub fn row_mut(&mut self, k: usize) -> &mut [Complex<T>] {
        &mut self.data[k * self.channels..(k + 1) * self.channels]
    }

    pub fn data(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn max_abs_diff(&self, other: &HalfSpectrum<T>) -> f64 {
        assert_eq!(self.n_fft, other.n_fft);
        assert_eq!(self.channels, other.channels);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| {
                let dr = a.re.to_f64_lossy() - b.re.to_f64_lossy();
                let di = a.im.to_f64_lossy() - b.im.to_f64_lossy();
                (dr * dr + di * di).sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// Scalar count of the backing storage (two reals per coefficient).
    pub fn scalar_count(&self) -> usize {
        self.data.len() * 2
    }
}

fn forward_plan<T: Scalar>(n: usize) -> Arc<dyn RealToComplex<T>> {
    T::with_planner(|p| p.plan_fft_forward(n))
}

fn inverse_plan<T: Scalar>(n: usize) -> Arc<dyn ComplexToReal<T>> {
    T::with_planner(|p| p.plan_fft_inverse(n))
}

/// Cache-blocked transpose of a `rows x cols` complex buffer into
/// `cols x rows`.
fn transpose_cpx<T: Scalar>(src: &[Complex<T>], rows: usize, cols: usize, dst: &mut [Complex<T>]) {
    const TILE: usize = 32;
    debug_assert_eq!(src.len(), rows * cols);
    debug_assert_eq!(dst.len(), rows * cols);
    for r0 in (0..rows).step_by(TILE) {
        let r1 = (r0 + TILE).min(rows);
        for c0 in (0..cols).step_by(TILE) {
            let c1 = (c0 + TILE).min(cols);
            for r in r0..r1 {
                for c in c0..c1 {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

/// Forward real FFT along the sequence axis, per channel. Input rows are
/// zero-padded to `n_fft`. The matrix is transposed once so every channel
/// is gathered and scattered contiguously.
pub fn rfft<T: Scalar>(x: &Matrix<T>, n_fft: usize) -> Result<HalfSpectrum<T>> {
    if !n_fft.is_power_of_two() || n_fft < 2 {
        return Err(Error::Config(format!(
            "FFT length must be a power of two >= 2, got {n_fft}"
        )));
    }
    if x.rows() > n_fft {
        return Err(Error::Shape(format!(
            "input has {} rows but the FFT window is {}",
            x.rows(),
            n_fft
        )));
    }
    if !x.is_finite() {
        return Err(Error::Input("non-finite value in FFT input".into()));
    }

    let channels = x.cols();
    let bins = n_fft / 2 + 1;
    let plan = forward_plan::<T>(n_fft);
    let xt = x.transposed(); // channels x rows, channel-contiguous
    let mut by_channel = vec![Complex::default(); channels * bins];
    let mut time = vec![T::zero(); n_fft];
    for c in 0..channels {
        time[..x.rows()].copy_from_slice(xt.row(c));
        time[x.rows()..].fill(T::zero());
        plan.process(&mut time, &mut by_channel[c * bins..(c + 1) * bins])
            .map_err(|e| Error::Config(format!("forward FFT failed: {e}")))?;
    }
    let mut data = vec![Complex::default(); channels * bins];
    transpose_cpx(&by_channel, channels, bins, &mut data);
    HalfSpectrum::from_parts(n_fft, channels, data)
}

/// Convenience wrapper for a single real sequence.
pub fn rfft_seq<T: Scalar>(x: &[T], n_fft: usize) -> Result<Vec<Complex<T>>> {
    let m = Matrix::from_vec(x.len(), 1, x.to_vec());
    let s = rfft(&m, n_fft)?;
    Ok(s.data().to_vec())
}

/// Inverse real FFT; returns the full `n_fft x channels` time-domain matrix.
///
/// The imaginary parts of the DC and Nyquist rows are ignored — a half
/// spectrum of a real signal has none.
pub fn irfft<T: Scalar>(s: &HalfSpectrum<T>) -> Result<Matrix<T>> {
    irfft_mapped(s, |_, v| v)
}

pub fn irfft_seq<T: Scalar>(coeffs: &[Complex<T>], n_fft: usize) -> Result<Vec<T>> {
    let s = HalfSpectrum::from_parts(n_fft, 1, coeffs.to_vec())?;
    Ok(irfft(&s)?.into_data())
}

/// Inverse real FFT with a per-bin map applied while gathering each
/// channel, so callers can scale bins without materializing a second
/// spectrum. `f(k, value)` must keep the DC and Nyquist rows real.
/// Transposes once on each side so channel work stays contiguous.
pub fn irfft_mapped<T: Scalar>(
    s: &HalfSpectrum<T>,
    mut f: impl FnMut(usize, Complex<T>) -> Complex<T>,
) -> Result<Matrix<T>> {
    let n = s.n_fft();
    let bins = s.bins();
    let channels = s.channels();
    let plan = inverse_plan::<T>(n);
    let scale = T::one() / T::from_real(n as f64);

    let mut by_channel = vec![Complex::default(); channels * bins];
    transpose_cpx(s.data(), bins, channels, &mut by_channel);

    let mut out_t = Matrix::zeros(channels, n);
    let mut freq = vec![Complex::default(); bins];
    for c in 0..channels {
        let src = &by_channel[c * bins..(c + 1) * bins];
        for (k, (dst, &v)) in freq.iter_mut().zip(src).enumerate() {
            *dst = f(k, v);
        }
        freq[0].im = T::zero();
        freq[bins - 1].im = T::zero();
        plan.process(&mut freq, out_t.row_mut(c))
            .map_err(|e| Error::Config(format!("inverse FFT failed: {e}")))?;
        for v in out_t.row_mut(c) {
            *v *= scale;
        }
    }
    Ok(out_t.transposed())
}

/// Full N-point spectrum produced by the quadratic oracle.
#[derive(Debug, Clone)]
pub struct FullSpectrum {
    pub coeffs: Vec<Complex<f64>>,
}

impl FullSpectrum {
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Max deviation from `X_{N-k} = conj(X_k)` over `k = 1..N-1`.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.coeffs.len();
        let mut worst = 0.0f64;
        for k in 1..n {
            let d = (self.coeffs[n - k] - self.coeffs[k].conj()).norm();
            worst = worst.max(d);
        }
        worst
    }
}

/// Direct O(N^2) DFT, always evaluated in f64. This is the oracle the fast
/// transform is checked against; it must stay independent of the FFT path.
pub fn naive_dft<T: Scalar>(x: &[T]) -> FullSpectrum {
    let n = x.len();
    let mut coeffs = vec![Complex::new(0.0f64, 0.0); n];
    for (k, out) in coeffs.iter_mut().enumerate() {
        let mut acc = Complex::new(0.0, 0.0);
        for (m, &v) in x.iter().enumerate() {
            // reduce k*m mod n before forming the angle to keep precision
            let idx = (k * m) % n.max(1);
            let angle = -std::f64::consts::TAU * idx as f64 / n as f64;
            acc += Complex::from_polar(v.to_f64_lossy(), angle);
        }
        *out = acc;
    }
    FullSpectrum { coeffs }
}
