//! Oracle verification suite: every check compares a fast path against an
//! independent reference and reports the worst observed error.

use num_complex::Complex;

use crate::cache::{decode_step, prefill};
use crate::layer::{ControllerMode, HeadWeights, LayerConfig, LayerWeights};
use crate::matrix::Matrix;
use crate::runtime::rng::SplitMix64;
use crate::scalar::{DType, Scalar};
use crate::spectral::{dwt_haar, idwt_haar, irfft, naive_dft, rfft, rfft_seq};

/// Sizes the cache-oriented checks run at.
#[derive(Debug, Clone, Copy)]
pub struct VerifyConfig {
    pub n_max: usize,
    pub d: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { n_max: 256, d: 16 }
    }
}

/// Outcome of one check.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub max_err: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckResult {
    fn new(name: &'static str, max_err: f64, tolerance: f64) -> Self {
        CheckResult {
            name,
            max_err,
            tolerance,
            passed: max_err <= tolerance && max_err.is_finite(),
        }
    }
}

fn tol<T: Scalar>(f64_tol: f64, f32_tol: f64) -> f64 {
    match T::DTYPE {
        DType::F64 => f64_tol,
        DType::F32 => f32_tol,
    }
}

fn random_matrix<T: Scalar>(rows: usize, cols: usize, rng: &mut SplitMix64) -> Matrix<T> {
    let mut m = Matrix::zeros(rows, cols);
    for v in m.data_mut() {
        *v = T::from_real(rng.next_normal());
    }
    m
}

fn layer_cfg(d: usize, n_fft: usize) -> LayerConfig {
    LayerConfig {
        head_dim: d,
        heads: 1,
        n_fft,
        gate_hidden: 2,
        toeplitz_enabled: true,
        toeplitz_radius: 2,
        wrm_enabled: false,
        wrm_levels: 1,
        wrm_controller: ControllerMode::Never,
    }
}

fn random_head<T: Scalar>(cfg: &LayerConfig, rng: &mut SplitMix64) -> HeadWeights<T> {
    let mut head = HeadWeights::zeros(cfg);
    for m in [&mut head.w_q, &mut head.w_v] {
        for v in m.data_mut() {
            *v = T::from_real(rng.next_normal() * 0.5);
        }
    }
    for mlp in [&mut head.gate_mlp] {
        for v in mlp.hidden.w.data_mut() {
            *v = T::from_real(rng.next_normal());
        }
        for v in mlp.out.w.data_mut() {
            *v = T::from_real(rng.next_normal() * 0.2);
        }
        for v in &mut mlp.out.b {
            *v = T::from_real(rng.next_normal() * 0.2);
        }
    }
    for v in &mut head.toeplitz_kernel {
        *v = Complex::new(
            T::from_real(rng.next_normal() * 0.1),
            T::from_real(rng.next_normal() * 0.1),
        );
    }
    head
}

fn check_rfft_vs_naive<T: Scalar>(trials: usize) -> CheckResult {
    let mut rng = SplitMix64::new(101);
    let mut worst = 0.0f64;
    for &n in &[8usize, 64, 256] {
        for _ in 0..trials {
            let x: Vec<T> = (0..n).map(|_| T::from_real(rng.next_normal())).collect();
            let fast = rfft_seq(&x, n).unwrap();
            let slow = naive_dft(&x);
            for k in 0..=n / 2 {
                let f = Complex::new(fast[k].re.to_f64_lossy(), fast[k].im.to_f64_lossy());
                worst = worst.max((f - slow.coeffs[k]).norm());
            }
        }
    }
    CheckResult::new("rfft-vs-naive-dft", worst, tol::<T>(1e-10, 1e-3))
}

fn check_hermitian_symmetry(trials: usize) -> CheckResult {
    let mut rng = SplitMix64::new(103);
    let mut worst = 0.0f64;
    for &n in &[8usize, 64, 256] {
        for _ in 0..trials {
            let x: Vec<f64> = (0..n).map(|_| rng.next_normal()).collect();
            worst = worst.max(naive_dft(&x).hermitian_defect());
        }
    }
    CheckResult::new("hermitian-symmetry", worst, 1e-10)
}

fn check_fft_round_trip<T: Scalar>() -> CheckResult {
    let mut rng = SplitMix64::new(107);
    let mut worst = 0.0f64;
    for &n in &[8usize, 64, 1024] {
        for &d in &[1usize, 16] {
            let x = random_matrix::<T>(n, d, &mut rng);
            let back = irfft(&rfft(&x, n).unwrap()).unwrap();
            worst = worst.max(back.max_abs_diff(&x));
        }
    }
    CheckResult::new("rfft-irfft-round-trip", worst, tol::<T>(1e-10, 1e-5))
}

fn check_dwt_round_trip<T: Scalar>() -> CheckResult {
    let mut rng = SplitMix64::new(109);
    let mut worst = 0.0f64;
    for &n in &[8usize, 64, 1024] {
        for &d in &[1usize, 16] {
            let x = random_matrix::<T>(n, d, &mut rng);
            let back = idwt_haar(&dwt_haar(&x, 3).unwrap()).unwrap();
            worst = worst.max(back.max_abs_diff(&x));
        }
    }
    CheckResult::new("dwt-idwt-round-trip", worst, tol::<T>(1e-10, 1e-5))
}

/// Master coherence: after a prefill and `steps` random decode steps, the
/// incrementally maintained spectrum must match a fresh transform of the
/// ring buffer, and the running query sum must match the buffer's column
/// sums. `corrupt_twiddles` exists as a negative control for this check.
pub fn verify_cache_coherence<T: Scalar>(
    cfg: &VerifyConfig,
    steps: usize,
    corrupt_twiddles: bool,
) -> (CheckResult, CheckResult) {
    let lcfg = layer_cfg(cfg.d, cfg.n_max);
    let mut rng = SplitMix64::new(113);
    let head = random_head::<T>(&lcfg, &mut rng);
    let prompt_len = 17.min(cfg.n_max);
    let prompt = random_matrix::<T>(prompt_len, cfg.d, &mut rng);
    let (mut state, _) = prefill(&prompt, &head, &lcfg).unwrap();
    if corrupt_twiddles {
        state.corrupt_twiddles_for_test(T::from_real(1.5));
    }

    let mut worst_spec = 0.0f64;
    let mut worst_sum = 0.0f64;
    let probe_every = (steps / 20).max(1);
    for step in 0..steps {
        // moderate magnitudes: the check targets the update algebra, and
        // the f32 running-sum rounding walk scales with token size
        let x: Vec<T> = (0..cfg.d)
            .map(|_| T::from_real(rng.next_normal() * 0.2))
            .collect();
        decode_step(&mut state, &x, &head, &lcfg).unwrap();
        if step % probe_every == 0 || step + 1 == steps {
            let fresh = state.fresh_spectrum().unwrap();
            worst_spec = worst_spec.max(state.prefix_fft().max_abs_diff(&fresh));
            let sums = state.q_column_sums();
            for (a, b) in state.sum_q().iter().zip(&sums) {
                worst_sum = worst_sum.max((a.to_f64_lossy() - b.to_f64_lossy()).abs());
            }
        }
    }
    (
        CheckResult::new("cache-master-coherence", worst_spec, tol::<T>(1e-9, 1e-3)),
        CheckResult::new("descriptor-coherence", worst_sum, tol::<T>(1e-10, 1e-4)),
    )
}

fn check_path_independence<T: Scalar>(cfg: &VerifyConfig) -> CheckResult {
    let mut worst = 0.0f64;
    let mut rng = SplitMix64::new(127);
    for &n_max in &[32usize, cfg.n_max] {
        let lcfg = layer_cfg(cfg.d, n_max);
        let head = random_head::<T>(&lcfg, &mut rng);
        let x = random_matrix::<T>(n_max, cfg.d, &mut rng);

        let (full, _) = prefill(&x, &head, &lcfg).unwrap();
        let (mut inc, _) = prefill(&x.first_rows(1), &head, &lcfg).unwrap();
        for r in 1..n_max {
            decode_step(&mut inc, x.row(r), &head, &lcfg).unwrap();
        }

        worst = worst.max(full.prefix_fft().max_abs_diff(inc.prefix_fft()));
        worst = worst.max(full.v_buf().max_abs_diff(inc.v_buf()));
        worst = worst.max(full.q_buf().max_abs_diff(inc.q_buf()));
        for (a, b) in full.sum_q().iter().zip(inc.sum_q()) {
            worst = worst.max((a.to_f64_lossy() - b.to_f64_lossy()).abs());
        }
    }
    CheckResult::new("path-independence", worst, tol::<T>(1e-9, 1e-4))
}

fn check_identity_gate<T: Scalar>(cfg: &VerifyConfig) -> CheckResult {
    let n = cfg.n_max.min(64);
    let lcfg = LayerConfig {
        heads: 1,
        toeplitz_enabled: false,
        ..layer_cfg(cfg.d, n)
    };
    let w = LayerWeights::<T>::transparent(&lcfg);
    let mut rng = SplitMix64::new(131);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let x = random_matrix::<T>(n, cfg.d, &mut rng);
        let y = crate::layer::spectre_mix_forward(&x, &w, &lcfg).unwrap();
        worst = worst.max(y.max_abs_diff(&x));
    }
    CheckResult::new("identity-gate-transparency", worst, 1e-5)
}

/// Runs the whole suite. Intended for the CLI `verify` subcommand; each
/// result carries the worst observed error and its tolerance.
pub fn run_verify<T: Scalar>(cfg: &VerifyConfig) -> Vec<CheckResult> {
    let mut results = vec![
        check_rfft_vs_naive::<T>(20),
        check_hermitian_symmetry(20),
        check_fft_round_trip::<T>(),
        check_dwt_round_trip::<T>(),
    ];
    let (coherence, descriptor) = verify_cache_coherence::<T>(cfg, 10_000, false);
    results.push(coherence);
    results.push(descriptor);
    results.push(check_path_independence::<T>(cfg));
    results.push(check_identity_gate::<T>(cfg));
    results
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_suite_passes_in_f64() {
        let cfg = VerifyConfig::default();
        for r in run_verify::<f64>(&cfg) {
            assert!(
                r.passed,
                "{} failed: {} > {}",
                r.name, r.max_err, r.tolerance
            );
        }
    }

    #[test]
    fn minimum_sizes_pass_in_f32() {
        let cfg = VerifyConfig { n_max: 8, d: 2 };
        for r in run_verify::<f32>(&cfg) {
            assert!(
                r.passed,
                "{} failed: {} > {}",
                r.name, r.max_err, r.tolerance
            );
        }
    }

    #[test]
    fn corrupted_twiddles_fail_coherence() {
        let cfg = VerifyConfig { n_max: 64, d: 4 };
        let (coherence, _) = verify_cache_coherence::<f64>(&cfg, 200, true);
        assert!(!coherence.passed, "negative control unexpectedly passed");
    }
}
