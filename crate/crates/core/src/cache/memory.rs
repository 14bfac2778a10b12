//! Persistent memory bank: a small block of never-evicted rows whose
//! spectrum is computed once per session and prepended to every decode
//! output. Window updates never touch it.

use std::sync::Arc;

use super::CacheState;
use crate::error::{Error, Result};
use crate::layer::Dense;
use crate::matrix::Matrix;
use crate::scalar::Scalar;
use crate::spectral::{rfft, HalfSpectrum};

/// Immutable memory rows plus their precomputed half spectrum. Shareable
/// across any number of cache states.
#[derive(Debug, Clone)]
pub struct MemoryBank<T: Scalar> {
    rows: Matrix<T>,
    spectrum: HalfSpectrum<T>,
    gate_ext: Option<Dense<T>>,
}

impl<T: Scalar> MemoryBank<T> {
    pub fn n_mem(&self) -> usize {
        self.rows.rows()
    }

    pub fn channels(&self) -> usize {
        self.rows.cols()
    }

    pub fn rows(&self) -> &Matrix<T> {
        &self.rows
    }

    pub fn spectrum(&self) -> &HalfSpectrum<T> {
        &self.spectrum
    }

    pub fn gate_ext(&self) -> Option<&Dense<T>> {
        self.gate_ext.as_ref()
    }

    /// Installs the dense head that emits gate values for the memory bins
    /// (`2 * (n_mem/2 + 1)` interleaved reals) from the gate MLP's hidden
    /// activation.
    pub fn with_gate_extension(mut self, ext: Dense<T>) -> Result<Self> {
        let want = 2 * (self.n_mem() / 2 + 1);
        if ext.out_dim() != want {
            return Err(Error::Shape(format!(
                "memory gate extension emits {}, bank needs {}",
                ext.out_dim(),
                want
            )));
        }
        self.gate_ext = Some(ext);
        Ok(self)
    }
}

/// Transforms the memory rows once. The row count must be a power of two;
/// the result never changes during a session.
pub fn memory_precompute<T: Scalar>(m: &Matrix<T>) -> Result<MemoryBank<T>> {
    let n_mem = m.rows();
    if !n_mem.is_power_of_two() || n_mem < 2 {
        return Err(Error::Config(format!(
            "memory rows must be a power of two >= 2, got {n_mem}"
        )));
    }
    let spectrum = rfft(m, n_mem)?;
    Ok(MemoryBank {
        rows: m.clone(),
        spectrum,
        gate_ext: None,
    })
}

/// Attaches a bank to a prefilled state. At most one bank per state, and the
/// bank must stay small next to the window (`n_mem <= n_max / 4`).
pub fn attach_memory<T: Scalar>(state: &mut CacheState<T>, bank: Arc<MemoryBank<T>>) -> Result<()> {
    if state.memory().is_some() {
        return Err(Error::State("memory bank already attached".into()));
    }
    if bank.n_mem() * 4 > state.n_max() {
        return Err(Error::Config(format!(
            "memory of {} rows too large for window {} (needs n_mem <= n_max/4)",
            bank.n_mem(),
            state.n_max()
        )));
    }
    if bank.channels() != state.head_dim() {
        return Err(Error::Shape(format!(
            "memory has {} channels, cache holds {}",
            bank.channels(),
            state.head_dim()
        )));
    }
    *state.memory_mut() = Some(bank);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cache::{decode_step, prefill};
    use crate::layer::{ControllerMode, HeadWeights, LayerConfig};
    use crate::runtime::rng::SplitMix64;
    use crate::spectral::naive_dft;
    use num_complex::Complex;

    fn cfg(d: usize, n_max: usize) -> LayerConfig {
        LayerConfig {
            head_dim: d,
            heads: 1,
            n_fft: n_max,
            gate_hidden: 2,
            toeplitz_enabled: false,
            toeplitz_radius: 1,
            wrm_enabled: false,
            wrm_levels: 1,
            wrm_controller: ControllerMode::Never,
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

    fn random_head(cfg: &LayerConfig, seed: u64) -> HeadWeights<f64> {
        let mut rng = SplitMix64::new(seed);
        let mut head = HeadWeights::zeros(cfg);
        for m in [&mut head.w_q, &mut head.w_v] {
            for v in m.data_mut() {
                *v = rng.next_normal() * 0.5;
            }
        }
        for v in head.gate_mlp.out.w.data_mut() {
            *v = rng.next_normal() * 0.3;
        }
        for v in &mut head.gate_mlp.out.b {
            *v = rng.next_normal() * 0.3;
        }
        head
    }

    #[test]
    fn zero_memory_has_zero_spectrum() {
        let bank = memory_precompute(&Matrix::<f64>::zeros(8, 4)).unwrap();
        for v in bank.spectrum().data() {
            assert_eq!(*v, Complex::default());
        }
    }

    #[test]
    fn constant_memory_rows_are_dc_only() {
        let mut m = Matrix::<f64>::zeros(16, 2);
        for r in 0..16 {
            m.row_mut(r).copy_from_slice(&[0.5, -2.0]);
        }
        let bank = memory_precompute(&m).unwrap();
        let dc = bank.spectrum().row(0);
        assert!((dc[0].re - 8.0).abs() < 1e-10);
        assert!((dc[1].re + 32.0).abs() < 1e-10);
        for k in 1..=8 {
            for v in bank.spectrum().row(k) {
                assert!(v.norm() < 1e-10);
            }
        }
    }

    #[test]
    fn spectrum_matches_naive_oracle() {
        let m = random_matrix(16, 8, 3);
        let bank = memory_precompute(&m).unwrap();
        for c in 0..8 {
            let col: Vec<f64> = (0..16).map(|r| m.get(r, c)).collect();
            let oracle = naive_dft(&col);
            for k in 0..=8 {
                let got = bank.spectrum().row(k)[c];
                assert!((got - oracle.coeffs[k]).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn non_power_of_two_memory_is_config_error() {
        let r = memory_precompute(&Matrix::<f64>::zeros(12, 2));
        assert!(matches!(r, Err(crate::Error::Config(_))));
    }

    #[test]
    fn double_attach_is_state_error() {
        let c = cfg(4, 32);
        let head = random_head(&c, 5);
        let (mut state, _) = prefill(&random_matrix(4, 4, 7), &head, &c).unwrap();
        let bank = Arc::new(memory_precompute(&random_matrix(8, 4, 9)).unwrap());
        attach_memory(&mut state, bank.clone()).unwrap();
        assert!(matches!(
            attach_memory(&mut state, bank),
            Err(crate::Error::State(_))
        ));
    }

    #[test]
    fn oversized_bank_is_config_error() {
        let c = cfg(4, 16);
        let head = random_head(&c, 11);
        let (mut state, _) = prefill(&random_matrix(4, 4, 13), &head, &c).unwrap();
        let bank = Arc::new(memory_precompute(&random_matrix(8, 4, 15)).unwrap());
        assert!(matches!(
            attach_memory(&mut state, bank),
            Err(crate::Error::Config(_))
        ));
    }

    #[test]
    fn zero_bank_matches_memory_free_window_segment() {
        let c = cfg(4, 32);
        let head = random_head(&c, 17);
        let prompt = random_matrix(6, 4, 19);

        let (mut plain, _) = prefill(&prompt, &head, &c).unwrap();
        let (mut with_mem, _) = prefill(&prompt, &head, &c).unwrap();
        let bank = Arc::new(memory_precompute(&Matrix::<f64>::zeros(8, 4)).unwrap());
        attach_memory(&mut with_mem, bank).unwrap();

        let mut rng = SplitMix64::new(21);
        for _ in 0..10 {
            let x: Vec<f64> = (0..4).map(|_| rng.next_normal()).collect();
            let a = decode_step(&mut plain, &x, &head, &c).unwrap();
            let b = decode_step(&mut with_mem, &x, &head, &c).unwrap();
            assert_eq!(b.rows(), a.rows() + 8);
            // memory segment is identically zero for a zero bank
            assert!(b.first_rows(8).max_abs() < 1e-12);
            let window = b.last_rows(a.rows());
            assert!(window.max_abs_diff(&a) < 1e-7);
        }
    }

    #[test]
    fn memory_segment_constant_when_its_gate_is_frozen() {
        let c = cfg(4, 32);
        // zero hidden layer keeps the hidden activation constant regardless
        // of the descriptor, so the extension output is frozen at its bias
        let mut head = random_head(&c, 23);
        for v in head.gate_mlp.hidden.w.data_mut() {
            *v = 0.0;
        }
        for v in &mut head.gate_mlp.hidden.b {
            *v = 0.0;
        }

        let mut rng = SplitMix64::new(25);
        let mut ext = Dense::<f64>::zeros(2, 2 * (8 / 2 + 1));
        for v in &mut ext.b {
            *v = rng.next_normal();
        }
        let bank = memory_precompute(&random_matrix(8, 4, 27))
            .unwrap()
            .with_gate_extension(ext)
            .unwrap();

        let (mut state, _) = prefill(&random_matrix(5, 4, 29), &head, &c).unwrap();
        attach_memory(&mut state, Arc::new(bank)).unwrap();

        let x1: Vec<f64> = (0..4).map(|_| rng.next_normal()).collect();
        let x2: Vec<f64> = (0..4).map(|_| rng.next_normal()).collect();
        let out1 = decode_step(&mut state, &x1, &head, &c).unwrap();
        let out2 = decode_step(&mut state, &x2, &head, &c).unwrap();
        let seg1 = out1.first_rows(8);
        let seg2 = out2.first_rows(8);
        assert!(seg1.max_abs_diff(&seg2) < 1e-12);
        assert!(seg1.max_abs() > 0.0);
    }

    #[test]
    fn extension_width_is_validated() {
        let bank = memory_precompute(&random_matrix(8, 4, 31)).unwrap();
        let bad = Dense::<f64>::zeros(2, 7);
        assert!(matches!(
            bank.with_gate_extension(bad),
            Err(crate::Error::Shape(_))
        ));
    }
}
