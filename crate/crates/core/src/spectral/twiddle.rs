//! Pre-cached twiddle factors.
//!
//! Entry `(k, t)` is `exp(-j 2 pi k t / N)`. Since the exponent only depends
//! on `k*t mod N`, the table stores the `N` base powers and reduces indices,
//! so lookups stay exact for unbounded step counters.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct TwiddleTable<T> {
    n: usize,
    powers: Vec<Complex<T>>,
}

/// Builds the table for a power-of-two transform length.
pub fn twiddle_table<T: Scalar>(n: usize) -> Result<TwiddleTable<T>> {
    if !n.is_power_of_two() || n < 2 {
        return Err(Error::Config(format!(
            "twiddle table length must be a power of two >= 2, got {n}"
        )));
    }
    let powers = (0..n)
        .map(|m| {
            let z = Complex::from_polar(1.0, -std::f64::consts::TAU * m as f64 / n as f64);
            Complex::new(T::from_real(z.re), T::from_real(z.im))
        })
        .collect();
    Ok(TwiddleTable { n, powers })
}

impl<T: Scalar> TwiddleTable<T> {
    pub fn n(&self) -> usize {
        self.n
    }

    /// `exp(-j 2 pi k t / N)`; `t` may exceed `N` arbitrarily.
    #[inline]
    pub fn entry(&self, k: usize, t: u64) -> Complex<T> {
        let tm = (t % self.n as u64) as usize;
        self.powers[(k * tm) % self.n]
    }

    /// `exp(+j 2 pi k t / N)`, the conjugate direction used for positional
    /// phase injection.
    #[inline]
    pub fn entry_conj(&self, k: usize, t: u64) -> Complex<T> {
        self.entry(k, t).conj()
    }

    /// Real scalars held by the table (two per factor).
    pub fn scalar_count(&self) -> usize {
        self.powers.len() * 2
    }

    /// Test hook: damages one stored factor so coherence checks have a
    /// negative control.
    pub(crate) fn corrupt_entry(&mut self, m: usize, factor: T) {
        let idx = m % self.n;
        self.powers[idx] *= factor;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quarter_turn_at_n4() {
        let tw = twiddle_table::<f64>(4).unwrap();
        let e = tw.entry(1, 1);
        assert!((e.re).abs() < 1e-15);
        assert!((e.im + 1.0).abs() < 1e-15);
    }

    #[test]
    fn t_zero_is_unity_for_all_k() {
        let tw = twiddle_table::<f64>(4).unwrap();
        for k in 0..=2 {
            let e = tw.entry(k, 0);
            assert!((e - Complex::new(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn periodic_in_t() {
        let tw = twiddle_table::<f64>(16).unwrap();
        for k in 0..=8 {
            for t in 0..40u64 {
                let a = tw.entry(k, t);
                let b = tw.entry(k, t + 16);
                assert!((a - b).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn eviction_phase_identity() {
        // exp(-j 2 pi k (t - N)/N) == exp(-j 2 pi k t / N) for integer k, t
        let n = 32u64;
        let tw = twiddle_table::<f64>(32).unwrap();
        for k in 0..=16usize {
            for t in n..(n + 80) {
                let stale = tw.entry(k, t - n);
                let fresh = tw.entry(k, t);
                assert!((stale - fresh).norm() <= 1e-15);
            }
        }
    }

    #[test]
    fn entries_have_unit_modulus() {
        let tw = twiddle_table::<f64>(256).unwrap();
        for k in 0..=128 {
            for t in [0u64, 1, 7, 255, 256, 100_000] {
                assert!((tw.entry(k, t).norm() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert!(matches!(
            twiddle_table::<f64>(12),
            Err(crate::Error::Config(_))
        ));
    }
}
