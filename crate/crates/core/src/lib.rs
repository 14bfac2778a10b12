//! Frequency-domain token mixing with a streaming prefix-FFT cache.
//!
//! The mixer replaces quadratic token interaction with a real FFT along the
//! sequence axis, a content-adaptive complex gate per frequency bin, and an
//! inverse FFT back to token space. Autoregressive decoding is served by a
//! constant-memory cache that keeps the window spectrum coherent under
//! per-token evict-and-update instead of re-transforming the window.
//!
//! Module map:
//! - [`spectral`]: half-spectrum RFFT/iRFFT, a quadratic reference DFT,
//!   orthonormal Haar wavelet transforms, twiddle tables, modReLU.
//! - [`layer`]: the mixing head — projections, descriptor-driven spectral
//!   gates (optional Toeplitz update), positional phase, wavelet refinement.
//! - [`cache`]: streaming decode state (spectrum accumulator, ring buffers,
//!   running descriptor) plus a persistent memory bank extension.
//! - [`runtime`]: a small pre-norm block stack, seeded initialization, the
//!   binary weight container, streaming generation, and a causal softmax
//!   attention baseline.
//! - [`bench`]: latency/throughput sweeps, log-log slope fits, the oracle
//!   verification suite, CSV emission.
//!
//! The `spectre-bench` binary exposes `sweep`, `verify`, `generate` and
//! `init` subcommands over this library.

pub mod bench;
pub mod cache;
pub mod error;
pub mod layer;
pub mod matrix;
pub mod runtime;
pub mod scalar;
pub mod spectral;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use scalar::{DType, Scalar};
