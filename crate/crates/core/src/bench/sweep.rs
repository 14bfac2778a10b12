//! Latency/throughput sweeps across sequence lengths and mixer kernels.
//!
//! Each (kernel, length) cell builds its own seeded model with the window
//! sized to that length, times a single mixing-layer forward (median over
//! repeats, warmups discarded), and runs one streaming generation for
//! prefill/decode timings. Timing is single-threaded per cell; the
//! parallel entry point distributes whole cells and warns that cross-cell
//! interference can distort numbers.

use std::str::FromStr;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::runtime::rng::SplitMix64;
use crate::runtime::{
    init_random, naive_attention_forward, stream_generate, MixerKind, ModelConfig,
};
use crate::scalar::Scalar;

/// Mixer variants a sweep can compare.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    Spectre,
    SpectreNoLr,
    SpectreNoWrm,
    NaiveAttention,
}

impl KernelKind {
    pub fn label(self) -> &'static str {
        match self {
            KernelKind::Spectre => "spectre",
            KernelKind::SpectreNoLr => "spectre-no-lr",
            KernelKind::SpectreNoWrm => "spectre-no-wrm",
            KernelKind::NaiveAttention => "naive-attention",
        }
    }

    /// Applies the variant to a base configuration. The full variant pins
    /// the refinement controller to `Always` so every cell pays the same
    /// per-step cost.
    pub fn configure(self, base: &ModelConfig) -> ModelConfig {
        let mut cfg = base.clone();
        match self {
            KernelKind::Spectre => {
                cfg.mixer = MixerKind::Spectre;
                if cfg.wrm_enabled {
                    cfg.wrm_controller = crate::layer::ControllerMode::Always;
                }
            }
            KernelKind::SpectreNoLr => {
                cfg.mixer = MixerKind::Spectre;
                cfg.toeplitz_enabled = false;
            }
            KernelKind::SpectreNoWrm => {
                cfg.mixer = MixerKind::Spectre;
                cfg.wrm_enabled = false;
            }
            KernelKind::NaiveAttention => {
                cfg.mixer = MixerKind::NaiveAttention;
            }
        }
        cfg
    }
}

impl FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spectre" => Ok(KernelKind::Spectre),
            "spectre-no-lr" => Ok(KernelKind::SpectreNoLr),
            "spectre-no-wrm" => Ok(KernelKind::SpectreNoWrm),
            "naive-attention" => Ok(KernelKind::NaiveAttention),
            other => Err(Error::Config(format!("unknown kernel '{other}'"))),
        }
    }
}

/// What to sweep.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    /// Strictly increasing sequence lengths; cached kernels require each to
    /// fit the configured window cap.
    pub lengths: Vec<usize>,
    pub kernels: Vec<KernelKind>,
    /// Timed repetitions per cell (>= 3; medians are reported).
    pub repeats: usize,
    /// Discarded warmup runs per cell.
    pub warmup: usize,
    /// Decode steps for the streaming phase of each cell.
    pub decode_steps: usize,
}

impl SweepSpec {
    pub fn validate(&self, cfg: &ModelConfig) -> Result<()> {
        if self.lengths.is_empty() {
            return Err(Error::Config("sweep needs at least one length".into()));
        }
        if !self.lengths.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config("lengths must be strictly increasing".into()));
        }
        if self.repeats < 3 {
            return Err(Error::Config("repeats must be >= 3".into()));
        }
        if self.kernels.is_empty() {
            return Err(Error::Config("sweep needs at least one kernel".into()));
        }
        for &l in &self.lengths {
            if !l.is_power_of_two() {
                return Err(Error::Config(format!(
                    "sweep length {l} must be a power of two (it becomes the FFT window)"
                )));
            }
            if l > cfg.n_max
                && self
                    .kernels
                    .iter()
                    .any(|k| *k != KernelKind::NaiveAttention)
            {
                return Err(Error::Capacity(format!(
                    "length {l} exceeds the window cap {} for cached kernels",
                    cfg.n_max
                )));
            }
        }
        Ok(())
    }
}

/// One measured cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub kernel: String,
    pub seq_len: usize,
    /// Median single mixing-layer forward latency.
    pub median_latency_ms: f64,
    pub throughput_tok_per_s: f64,
    pub ttft_ms: f64,
    pub tpot_ms: f64,
    pub bytes_state: u64,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn random_tokens<T: Scalar>(rows: usize, cols: usize, seed: u64) -> Matrix<T> {
    let mut rng = SplitMix64::new(seed);
    let mut m = Matrix::zeros(rows, cols);
    for v in m.data_mut() {
        *v = T::from_real(rng.next_normal() * 0.1);
    }
    m
}

fn measure_cell<T: Scalar>(
    kernel: KernelKind,
    length: usize,
    spec: &SweepSpec,
    base: &ModelConfig,
) -> Result<SweepRow> {
    // size the window to the measured length so cost scales with it
    let mut cfg = kernel.configure(base);
    cfg.n_max = length;
    cfg.validate()?;

    let weights = init_random::<T>(&cfg)?;
    let lcfg = cfg.layer_config();
    let input: Matrix<T> = random_tokens(
        length,
        cfg.d_model(),
        cfg.seed ^ (length as u64) ^ ((kernel.label().len() as u64) << 32),
    );

    let mix = &weights.blocks[0].mix;
    let run_once = || -> Result<f64> {
        let t0 = Instant::now();
        let out = match cfg.mixer {
            MixerKind::Spectre => crate::layer::spectre_mix_forward(&input, mix, &lcfg)?,
            MixerKind::NaiveAttention => naive_attention_forward(&input, mix, &lcfg)?,
        };
        let dt = t0.elapsed().as_secs_f64() * 1e3;
        // keep the result observable so the computation cannot be elided
        if !out.is_finite() {
            return Err(Error::Input("non-finite forward output".into()));
        }
        Ok(dt)
    };

    for _ in 0..spec.warmup.max(1) {
        run_once()?;
    }
    let mut times = Vec::with_capacity(spec.repeats);
    for _ in 0..spec.repeats {
        times.push(run_once()?);
    }
    let median_latency_ms = median(&mut times);

    let gen = stream_generate(&weights, &input, spec.decode_steps)?;
    Ok(SweepRow {
        kernel: kernel.label().to_string(),
        seq_len: length,
        median_latency_ms,
        throughput_tok_per_s: gen.report.throughput_tok_per_s,
        ttft_ms: gen.report.ttft_ms,
        tpot_ms: gen.report.tpot_ms,
        bytes_state: gen.report.peak_state_bytes,
    })
}

/// Runs every (kernel, length) cell sequentially (stable timings).
pub fn run_sweep<T: Scalar>(spec: &SweepSpec, cfg: &ModelConfig) -> Result<Vec<SweepRow>> {
    spec.validate(cfg)?;
    let mut rows = Vec::with_capacity(spec.kernels.len() * spec.lengths.len());
    for &kernel in &spec.kernels {
        for &length in &spec.lengths {
            rows.push(measure_cell::<T>(kernel, length, spec, cfg)?);
        }
    }
    Ok(rows)
}

/// Distributes cells over a rayon pool. Timings of concurrent cells can
/// interfere; prefer [`run_sweep`] when numbers matter.
pub fn run_sweep_parallel<T: Scalar>(spec: &SweepSpec, cfg: &ModelConfig) -> Result<Vec<SweepRow>> {
    use rayon::prelude::*;
    spec.validate(cfg)?;
    let cells: Vec<(KernelKind, usize)> = spec
        .kernels
        .iter()
        .flat_map(|&k| spec.lengths.iter().map(move |&l| (k, l)))
        .collect();
    cells
        .into_par_iter()
        .map(|(k, l)| measure_cell::<T>(k, l, spec, cfg))
        .collect()
}
