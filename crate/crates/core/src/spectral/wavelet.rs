//! Orthonormal Haar analysis/synthesis along the sequence axis.
//!
//! Analysis filters are `[1/sqrt2, 1/sqrt2]` and `[1/sqrt2, -1/sqrt2]`,
//! applied recursively to the approximation band. Coefficients for an
//! `n x d` input are laid out per channel as
//! `[approx_J | detail_J | detail_{J-1} | ... | detail_1]`, which together
//! occupy exactly `n` rows. The transform is energy-preserving and inverts
//! exactly up to floating-point error.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Wavelet coefficients of an `n x d` matrix, stored as an `n x d` matrix in
/// the band layout described in the module docs.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletCoeffs<T> {
    coeffs: Matrix<T>,
    levels: usize,
}

impl<T: Scalar> WaveletCoeffs<T> {
    pub fn from_parts(coeffs: Matrix<T>, levels: usize) -> Result<Self> {
        check_dims(coeffs.rows(), levels)?;
        Ok(WaveletCoeffs { coeffs, levels })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn rows(&self) -> usize {
        self.coeffs.rows()
    }

    pub fn cols(&self) -> usize {
        self.coeffs.cols()
    }

    pub fn coeffs(&self) -> &Matrix<T> {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut Matrix<T> {
        &mut self.coeffs
    }

    /// Row ranges of the `levels + 1` bands, ordered
    /// `[approx_J, detail_J, detail_{J-1}, ..., detail_1]`.
    pub fn band_ranges(&self) -> Vec<Range<usize>> {
        let n = self.rows();
        let j = self.levels;
        let mut bands = vec![0..(n >> j)];
        for level in (1..=j).rev() {
            bands.push((n >> level)..(n >> (level - 1)));
        }
        bands
    }
}

fn check_dims(n: usize, levels: usize) -> Result<()> {
    if levels == 0 {
        return Err(Error::Config("wavelet levels must be >= 1".into()));
    }
    if levels >= usize::BITS as usize || n == 0 || !n.is_multiple_of(1 << levels) {
        return Err(Error::Shape(format!(
            "row count {n} is not divisible by 2^{levels}"
        )));
    }
    Ok(())
}

/// Multi-level orthonormal Haar analysis per channel. Works on a transposed
/// copy so each channel's filtering runs over contiguous memory.
pub fn dwt_haar<T: Scalar>(v: &Matrix<T>, levels: usize) -> Result<WaveletCoeffs<T>> {
    check_dims(v.rows(), levels)?;
    let n = v.rows();
    let half = T::from_real(std::f64::consts::FRAC_1_SQRT_2);
    let mut vt = v.transposed();
    let mut tmp = vec![T::zero(); n];
    for c in 0..v.cols() {
        let col = vt.row_mut(c);
        let mut len = n;
        for _ in 0..levels {
            let h = len / 2;
            for i in 0..h {
                let a = col[2 * i];
                let b = col[2 * i + 1];
                tmp[i] = (a + b) * half;
                tmp[h + i] = (a - b) * half;
            }
            col[..len].copy_from_slice(&tmp[..len]);
            len = h;
        }
    }
    WaveletCoeffs::from_parts(vt.transposed(), levels)
}

/// Inverse of [`dwt_haar`]; exact reconstruction up to rounding.
pub fn idwt_haar<T: Scalar>(w: &WaveletCoeffs<T>) -> Result<Matrix<T>> {
    let n = w.rows();
    let levels = w.levels();
    let half = T::from_real(std::f64::consts::FRAC_1_SQRT_2);
    let mut wt = w.coeffs().transposed();
    let mut tmp = vec![T::zero(); n];
    for c in 0..w.cols() {
        let col = wt.row_mut(c);
        let mut len = n >> levels;
        for _ in 0..levels {
            let h = len;
            len *= 2;
            for i in 0..h {
                let a = col[i];
                let d = col[h + i];
                tmp[2 * i] = (a + d) * half;
                tmp[2 * i + 1] = (a - d) * half;
            }
            col[..len].copy_from_slice(&tmp[..len]);
        }
    }
    Ok(wt.transposed())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runtime::rng::SplitMix64;
    use proptest::prelude::*;

    fn column(values: &[f64]) -> Matrix<f64> {
        Matrix::from_vec(values.len(), 1, values.to_vec())
    }

    #[test]
    fn constant_input_has_no_detail() {
        let a = 2.5f64;
        let w = dwt_haar(&column(&[a, a, a, a]), 2).unwrap();
        let c = w.coeffs();
        assert!((c.get(0, 0) - 2.0 * a).abs() < 1e-12);
        for r in 1..4 {
            assert!(c.get(r, 0).abs() < 1e-12);
        }
    }

    #[test]
    fn alternating_input_is_pure_detail() {
        let w = dwt_haar(&column(&[1.0, -1.0, 1.0, -1.0]), 1).unwrap();
        let c = w.coeffs();
        let s2 = std::f64::consts::SQRT_2;
        assert!(c.get(0, 0).abs() < 1e-12);
        assert!(c.get(1, 0).abs() < 1e-12);
        assert!((c.get(2, 0) - s2).abs() < 1e-12);
        assert!((c.get(3, 0) - s2).abs() < 1e-12);
    }

    #[test]
    fn alternating_round_trip() {
        let v = column(&[1.0, -1.0, 1.0, -1.0]);
        let back = idwt_haar(&dwt_haar(&v, 1).unwrap()).unwrap();
        assert!(back.max_abs_diff(&v) < 1e-12);
    }

    #[test]
    fn zero_coeffs_reconstruct_zero() {
        let w = WaveletCoeffs::from_parts(Matrix::<f64>::zeros(8, 3), 2).unwrap();
        let x = idwt_haar(&w).unwrap();
        assert_eq!(x, Matrix::zeros(8, 3));
    }

    #[test]
    fn random_matrix_round_trip() {
        let mut rng = SplitMix64::new(21);
        let mut v = Matrix::<f64>::zeros(256, 16);
        for x in v.data_mut() {
            *x = rng.next_f64() * 4.0 - 2.0;
        }
        let back = idwt_haar(&dwt_haar(&v, 3).unwrap()).unwrap();
        assert!(back.max_abs_diff(&v) < 1e-12);
    }

    #[test]
    fn indivisible_length_is_shape_error() {
        let v = Matrix::<f64>::zeros(6, 1);
        assert!(matches!(dwt_haar(&v, 2), Err(crate::Error::Shape(_))));
    }

    #[test]
    fn band_ranges_cover_all_rows_in_order() {
        let w = dwt_haar(&Matrix::<f64>::zeros(16, 1), 3).unwrap();
        let bands = w.band_ranges();
        assert_eq!(bands, vec![0..2, 2..4, 4..8, 8..16]);
    }

    proptest! {
        #[test]
        fn energy_is_preserved(values in proptest::collection::vec(-5.0f64..5.0, 16)) {
            let v = column(&values);
            let w = dwt_haar(&v, 2).unwrap();
            let before = v.frobenius_sq();
            let after = w.coeffs().frobenius_sq();
            prop_assert!((before - after).abs() < 1e-10 * (1.0 + before));
        }
    }
}
