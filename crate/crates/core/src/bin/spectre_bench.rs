//! Benchmark and verification CLI.
//!
//! Exit codes: 0 success, 1 check failure, 2 usage/config error, 3 I/O or
//! file-format error. `SPECTRE_THREADS` caps the worker pool used by
//! `sweep --parallel`.

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use spectre_core::bench::{
    emit_csv, run_sweep, run_sweep_parallel, run_verify, slope_fit, KernelKind, SweepSpec,
    VerifyConfig,
};
use spectre_core::runtime::rng::SplitMix64;
use spectre_core::runtime::{
    init_random, load_weights_any, save_weights, stream_generate, LoadedModel, ModelConfig,
};
use spectre_core::{Error, Matrix, Scalar};

#[derive(Parser)]
#[command(
    name = "spectre-bench",
    about = "Frequency-domain token mixing: benchmarks, verification, streaming generation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// Per-head embedding width.
    #[arg(long, default_value_t = 32)]
    d: usize,
    /// Number of mixing heads.
    #[arg(long, default_value_t = 4)]
    heads: usize,
    /// Number of residual blocks.
    #[arg(long, default_value_t = 2)]
    layers: usize,
    /// Sliding-window / FFT length (power of two).
    #[arg(long = "n-max", default_value_t = 32768)]
    n_max: usize,
    /// Feed-forward width; defaults to 4 * heads * d.
    #[arg(long = "d-ffn")]
    d_ffn: Option<usize>,
    /// Persistent memory rows per head (0 disables the bank).
    #[arg(long = "memory-tokens", default_value_t = 0)]
    memory_tokens: usize,
    /// Share one set of gate weights across the heads of each layer.
    #[arg(long = "share-gates", default_value_t = false)]
    share_gates: bool,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Run in f64 instead of f32.
    #[arg(long = "f64", default_value_t = false)]
    use_f64: bool,
}

impl ModelArgs {
    fn to_config(&self) -> ModelConfig {
        ModelConfig {
            n_layers: self.layers,
            heads: self.heads,
            head_dim: self.d,
            d_ffn: self.d_ffn.unwrap_or(4 * self.heads * self.d),
            n_max: self.n_max,
            memory_tokens: self.memory_tokens,
            gate_hidden: ModelConfig::default_gate_hidden_for(self.d),
            share_gates: self.share_gates,
            seed: self.seed,
            ..ModelConfig::default()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Latency/throughput sweep over sequence lengths.
    Sweep {
        /// Comma-separated sequence lengths (powers of two).
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "512,1024,4096,8192,32768"
        )]
        lengths: Vec<usize>,
        /// Comma-separated kernels: spectre, spectre-no-lr, spectre-no-wrm,
        /// naive-attention.
        #[arg(long, value_delimiter = ',', default_value = "spectre,naive-attention")]
        kernels: Vec<String>,
        /// Timed repetitions per cell (median reported).
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        /// Discarded warmup runs per cell.
        #[arg(long, default_value_t = 1)]
        warmup: usize,
        /// Decode steps for the streaming phase.
        #[arg(long = "decode-steps", default_value_t = 256)]
        decode_steps: usize,
        /// CSV output path (stdout when omitted).
        #[arg(long)]
        csv: Option<std::path::PathBuf>,
        /// Distribute cells over worker threads (timings may interfere).
        #[arg(long, default_value_t = false)]
        parallel: bool,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Run the oracle verification suite.
    Verify {
        #[arg(long = "n-max", default_value_t = 256)]
        n_max: usize,
        #[arg(long, default_value_t = 16)]
        d: usize,
        /// Run in f64 instead of f32.
        #[arg(long = "f64", default_value_t = false)]
        use_f64: bool,
    },
    /// Streaming generation from a weight container.
    Generate {
        /// Weight container produced by `init`.
        #[arg(long)]
        weights: std::path::PathBuf,
        /// Prompt length (random tokens, seeded).
        #[arg(long = "prompt-len")]
        prompt_len: usize,
        /// Decode steps to run.
        #[arg(long)]
        steps: usize,
        /// Seed for the synthetic prompt.
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Write a seeded weight container.
    Init {
        /// Output path for the container.
        #[arg(long)]
        out: std::path::PathBuf,
        #[command(flatten)]
        model: ModelArgs,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Io(_) | Error::Format(_) | Error::Checksum(_) => 3,
        _ => 2,
    }
}

fn parallel_pool() -> Option<usize> {
    std::env::var("SPECTRE_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
}

fn cmd_sweep(
    lengths: Vec<usize>,
    kernels: Vec<String>,
    repeats: usize,
    warmup: usize,
    decode_steps: usize,
    csv: Option<std::path::PathBuf>,
    parallel: bool,
    model: ModelArgs,
) -> Result<(), Error> {
    let kernels = kernels
        .iter()
        .map(|k| k.parse::<KernelKind>())
        .collect::<Result<Vec<_>, _>>()?;
    let spec = SweepSpec {
        lengths,
        kernels,
        repeats,
        warmup,
        decode_steps,
    };
    let cfg = model.to_config();

    let run = |spec: &SweepSpec, cfg: &ModelConfig| {
        if model.use_f64 {
            if parallel {
                run_sweep_parallel::<f64>(spec, cfg)
            } else {
                run_sweep::<f64>(spec, cfg)
            }
        } else if parallel {
            run_sweep_parallel::<f32>(spec, cfg)
        } else {
            run_sweep::<f32>(spec, cfg)
        }
    };

    let rows = if parallel {
        eprintln!("warning: --parallel can distort per-cell timings");
        if let Some(threads) = parallel_pool() {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?
                .install(|| run(&spec, &cfg))?
        } else {
            run(&spec, &cfg)?
        }
    } else {
        run(&spec, &cfg)?
    };

    match &csv {
        Some(path) => {
            emit_csv(&rows, path)?;
            eprintln!("wrote {} rows to {}", rows.len(), path.display());
        }
        None => {
            let mut out = Vec::new();
            spectre_core::bench::write_csv(&rows, &mut out)?;
            print!("{}", String::from_utf8_lossy(&out));
        }
    }

    if rows
        .iter()
        .map(|r| r.seq_len)
        .collect::<std::collections::BTreeSet<_>>()
        .len()
        >= 3
    {
        for fit in slope_fit(&rows)? {
            eprintln!(
                "fit: {:<18} alpha = {:.3} (rms residual {:.3})",
                fit.kernel, fit.exponent, fit.residual
            );
        }
    }
    Ok(())
}

fn cmd_verify(n_max: usize, d: usize, use_f64: bool) -> Result<bool, Error> {
    let cfg = VerifyConfig { n_max, d };
    let results = if use_f64 {
        run_verify::<f64>(&cfg)
    } else {
        run_verify::<f32>(&cfg)
    };
    let mut all_ok = true;
    for r in &results {
        println!(
            "{:<26} {}  max err {:.3e} (tol {:.1e})",
            r.name,
            if r.passed { "PASS" } else { "FAIL" },
            r.max_err,
            r.tolerance
        );
        all_ok &= r.passed;
    }
    Ok(all_ok)
}

fn random_prompt<T: Scalar>(rows: usize, cols: usize, seed: u64) -> Matrix<T> {
    let mut rng = SplitMix64::new(seed);
    let mut m = Matrix::zeros(rows, cols);
    for v in m.data_mut() {
        *v = T::from_real(rng.next_normal() * 0.1);
    }
    m
}

fn run_generation<T: Scalar>(
    weights: &spectre_core::runtime::ModelWeights<T>,
    prompt_len: usize,
    steps: usize,
    seed: u64,
) -> Result<(), Error> {
    let prompt = random_prompt::<T>(prompt_len, weights.config.d_model(), seed);
    let result = stream_generate(weights, &prompt, steps)?;
    let r = &result.report;
    println!("kernel:      {}", r.kernel_name);
    println!("prompt:      {} tokens", r.seq_len);
    println!("generated:   {steps} tokens");
    println!("ttft:        {:.3} ms", r.ttft_ms);
    println!("tpot:        {:.4} ms", r.tpot_ms);
    println!("throughput:  {:.1} tok/s", r.throughput_tok_per_s);
    println!("state:       {} bytes", r.peak_state_bytes);
    Ok(())
}

fn run() -> Result<bool, Error> {
    let cli = Cli::parse();
    match cli.command {
        Command::Sweep {
            lengths,
            kernels,
            repeats,
            warmup,
            decode_steps,
            csv,
            parallel,
            model,
        } => {
            cmd_sweep(
                lengths,
                kernels,
                repeats,
                warmup,
                decode_steps,
                csv,
                parallel,
                model,
            )?;
            Ok(true)
        }
        Command::Verify { n_max, d, use_f64 } => cmd_verify(n_max, d, use_f64),
        Command::Generate {
            weights,
            prompt_len,
            steps,
            seed,
        } => {
            match load_weights_any(&weights)? {
                LoadedModel::F32(w) => run_generation(&w, prompt_len, steps, seed)?,
                LoadedModel::F64(w) => run_generation(&w, prompt_len, steps, seed)?,
            }
            Ok(true)
        }
        Command::Init { out, model } => {
            let cfg = model.to_config();
            if model.use_f64 {
                save_weights(&init_random::<f64>(&cfg)?, &out)?;
            } else {
                save_weights(&init_random::<f32>(&cfg)?, &out)?;
            }
            eprintln!("wrote weights to {}", out.display());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
