//! C ABI over the mixing library: opaque handles, status codes, and a
//! thread-local error message. The surface is `f32`; callers wanting the
//! `f64` oracle paths should bind the Rust crate directly.
//!
//! Ownership rules: every `*_create`/`*_open`/`*_load` hands the caller an
//! owned handle that must be released with the matching `*_free`. Handles
//! are not thread-safe for concurrent mutation; a stream must be stepped
//! from one thread at a time.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::Instant;

use spectre_core::runtime::{
    init_random, load_weights, save_weights, ModelConfig, ModelWeights, StreamSession,
};
use spectre_core::{Error, Matrix};

/// Status code returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectreStatus {
    Ok = 0,
    /// Null pointer or otherwise unusable argument.
    InvalidArgument = 1,
    /// Rejected configuration value.
    Config = 2,
    /// Dimension mismatch.
    Shape = 3,
    /// Sequence exceeds the configured window.
    Capacity = 4,
    /// Call not valid for the handle's current state.
    State = 5,
    /// Filesystem error.
    Io = 6,
    /// Malformed container file.
    Format = 7,
    /// Container checksum mismatch.
    Checksum = 8,
    /// Panic or other internal failure.
    Internal = 9,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let own = CString::new(msg.replace('\0', "?")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = own);
}

fn status_of(err: &Error) -> SpectreStatus {
    match err {
        Error::Config(_) => SpectreStatus::Config,
        Error::Input(_) => SpectreStatus::InvalidArgument,
        Error::Shape(_) => SpectreStatus::Shape,
        Error::Capacity(_) => SpectreStatus::Capacity,
        Error::State(_) => SpectreStatus::State,
        Error::InsufficientData(_) => SpectreStatus::InvalidArgument,
        Error::Io(_) => SpectreStatus::Io,
        Error::Format(_) => SpectreStatus::Format,
        Error::Checksum(_) => SpectreStatus::Checksum,
    }
}

fn fail(err: Error) -> SpectreStatus {
    set_error(&err.to_string());
    status_of(&err)
}

fn guarded(f: impl FnOnce() -> SpectreStatus) -> SpectreStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            SpectreStatus::Internal
        }
    }
}

/// Model construction parameters; see `spectre_model_params_default`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SpectreModelParams {
    pub n_layers: u32,
    pub heads: u32,
    pub head_dim: u32,
    /// Feed-forward width; 0 means `4 * heads * head_dim`.
    pub d_ffn: u32,
    /// Sliding-window / FFT length, a power of two.
    pub n_max: u32,
    /// 0 disables the vocabulary (raw-embedding generation).
    pub vocab_size: u32,
    /// Persistent memory rows per head; 0 disables the bank.
    pub memory_tokens: u32,
    pub toeplitz_enabled: bool,
    pub toeplitz_radius: u32,
    pub wrm_enabled: bool,
    pub wrm_levels: u32,
    pub seed: u64,
}

impl SpectreModelParams {
    fn to_config(self) -> ModelConfig {
        let heads = self.heads as usize;
        let head_dim = self.head_dim as usize;
        ModelConfig {
            n_layers: self.n_layers as usize,
            heads,
            head_dim,
            d_ffn: if self.d_ffn == 0 {
                4 * heads * head_dim
            } else {
                self.d_ffn as usize
            },
            n_max: self.n_max as usize,
            vocab_size: self.vocab_size as usize,
            memory_tokens: self.memory_tokens as usize,
            toeplitz_enabled: self.toeplitz_enabled,
            toeplitz_radius: self.toeplitz_radius as usize,
            wrm_enabled: self.wrm_enabled,
            wrm_levels: self.wrm_levels as usize,
            gate_hidden: ModelConfig::default_gate_hidden_for(head_dim),
            seed: self.seed,
            ..ModelConfig::default()
        }
    }
}

/// Timing and footprint summary of one stream.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SpectreReport {
    /// Prefill wall time in milliseconds.
    pub ttft_ms: f64,
    /// Mean decode-step wall time in milliseconds.
    pub tpot_ms: f64,
    /// Prompt length the stream started from.
    pub prompt_len: u64,
    /// Decode steps taken so far.
    pub steps: u64,
    /// Bytes held by the decode state across layers and heads.
    pub state_bytes: u64,
}

/// Opaque model handle.
pub struct SpectreModel {
    weights: Arc<ModelWeights<f32>>,
}

/// Opaque stream handle (prefilled decode session).
pub struct SpectreStream {
    weights: Arc<ModelWeights<f32>>,
    session: StreamSession<f32>,
    feedback: Vec<f32>,
    prompt_len: u64,
    steps: u64,
    ttft_ms: f64,
    decode_ms: f64,
}

/// Version of the library behind this interface.
#[no_mangle]
pub extern "C" fn spectre_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message for the most recent error on this thread. Valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn spectre_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Fills `params` with the default configuration.
/// # Safety
/// `params` must be null or valid for writing one `SpectreModelParams`.
#[no_mangle]
pub unsafe extern "C" fn spectre_model_params_default(params: *mut SpectreModelParams) {
    if params.is_null() {
        return;
    }
    let d = ModelConfig::default();
    *params = SpectreModelParams {
        n_layers: d.n_layers as u32,
        heads: d.heads as u32,
        head_dim: d.head_dim as u32,
        d_ffn: d.d_ffn as u32,
        n_max: d.n_max as u32,
        vocab_size: 0,
        memory_tokens: 0,
        toeplitz_enabled: d.toeplitz_enabled,
        toeplitz_radius: d.toeplitz_radius as u32,
        wrm_enabled: d.wrm_enabled,
        wrm_levels: d.wrm_levels as u32,
        seed: d.seed,
    }
}

/// Creates a model with seeded random weights.
/// # Safety
/// `params` must point to a valid struct and `out` must be valid for
/// writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn spectre_model_create(
    params: *const SpectreModelParams,
    out: *mut *mut SpectreModel,
) -> SpectreStatus {
    guarded(|| {
        if params.is_null() || out.is_null() {
            set_error("null argument");
            return SpectreStatus::InvalidArgument;
        }
        match init_random::<f32>(&(*params).to_config()) {
            Ok(w) => {
                *out = Box::into_raw(Box::new(SpectreModel {
                    weights: Arc::new(w),
                }));
                SpectreStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

unsafe fn path_from(ptr: *const c_char) -> Result<String, SpectreStatus> {
    if ptr.is_null() {
        set_error("null path");
        return Err(SpectreStatus::InvalidArgument);
    }
    match CStr::from_ptr(ptr).to_str() {
        Ok(s) => Ok(s.to_string()),
        Err(_) => {
            set_error("path is not valid UTF-8");
            Err(SpectreStatus::InvalidArgument)
        }
    }
}

/// Loads a weight container written by `spectre_model_save` (f32 contents).
/// # Safety
/// `path` must be a NUL-terminated string and `out` valid for writing one
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn spectre_model_load(
    path: *const c_char,
    out: *mut *mut SpectreModel,
) -> SpectreStatus {
    guarded(|| {
        if out.is_null() {
            set_error("null output handle");
            return SpectreStatus::InvalidArgument;
        }
        let path = match path_from(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match load_weights::<f32>(&path) {
            Ok(w) => {
                *out = Box::into_raw(Box::new(SpectreModel {
                    weights: Arc::new(w),
                }));
                SpectreStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Writes the model to a weight container.
/// # Safety
/// `model` must be a live handle from this library and `path` a
/// NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn spectre_model_save(
    model: *const SpectreModel,
    path: *const c_char,
) -> SpectreStatus {
    guarded(|| {
        if model.is_null() {
            set_error("null model");
            return SpectreStatus::InvalidArgument;
        }
        let path = match path_from(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match save_weights(&*(*model).weights, &path) {
            Ok(()) => SpectreStatus::Ok,
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `model` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn spectre_model_free(model: *mut SpectreModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Embedding width of the model's token rows (0 for a null handle).
/// # Safety
/// `model` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn spectre_model_dim(model: *const SpectreModel) -> u32 {
    if model.is_null() {
        return 0;
    }
    let model = &*model;
    model.weights.config.d_model() as u32
}

/// Exact parameter tallies: everything, and the mixer-specific additions.
/// # Safety
/// `model` must be a live handle; `total` and `mixer_added` must be valid
/// for writing one `u64` each.
#[no_mangle]
pub unsafe extern "C" fn spectre_model_param_counts(
    model: *const SpectreModel,
    total: *mut u64,
    mixer_added: *mut u64,
) -> SpectreStatus {
    guarded(|| {
        if model.is_null() || total.is_null() || mixer_added.is_null() {
            set_error("null argument");
            return SpectreStatus::InvalidArgument;
        }
        let counts = (*model).weights.param_counts();
        *total = counts.total;
        *mixer_added = counts.spectre_added;
        SpectreStatus::Ok
    })
}

/// Batch forward over `n_tokens` rows of `d_model` floats (row-major).
/// `out` must hold `n_tokens * d_model` floats.
/// # Safety
/// `x` must hold `n_tokens * d_model` floats and `out` must be valid for
/// writing the same amount.
#[no_mangle]
pub unsafe extern "C" fn spectre_model_forward(
    model: *const SpectreModel,
    x: *const f32,
    n_tokens: usize,
    out: *mut f32,
) -> SpectreStatus {
    guarded(|| {
        if model.is_null() || (x.is_null() && n_tokens > 0) || out.is_null() {
            set_error("null argument");
            return SpectreStatus::InvalidArgument;
        }
        let weights = &(*model).weights;
        let d_model = weights.config.d_model();
        let input = Matrix::from_vec(
            n_tokens,
            d_model,
            std::slice::from_raw_parts(x, n_tokens * d_model).to_vec(),
        );
        match spectre_core::runtime::model_forward(&input, weights) {
            Ok(y) => {
                std::slice::from_raw_parts_mut(out, n_tokens * d_model).copy_from_slice(y.data());
                SpectreStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Prefills a decode stream over `prompt_len` rows of `d_model` floats.
/// # Safety
/// `prompt` must hold `prompt_len * d_model` floats; `out` must be valid
/// for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn spectre_stream_open(
    model: *const SpectreModel,
    prompt: *const f32,
    prompt_len: usize,
    out: *mut *mut SpectreStream,
) -> SpectreStatus {
    guarded(|| {
        if model.is_null() || out.is_null() || (prompt.is_null() && prompt_len > 0) {
            set_error("null argument");
            return SpectreStatus::InvalidArgument;
        }
        let weights = Arc::clone(&(*model).weights);
        let d_model = weights.config.d_model();
        let prompt = Matrix::from_vec(
            prompt_len,
            d_model,
            if prompt_len == 0 {
                Vec::new()
            } else {
                std::slice::from_raw_parts(prompt, prompt_len * d_model).to_vec()
            },
        );
        let t0 = Instant::now();
        match StreamSession::prefill(&weights, &prompt) {
            Ok((session, outputs)) => {
                let ttft_ms = t0.elapsed().as_secs_f64() * 1e3;
                let feedback = if outputs.rows() > 0 {
                    outputs.row(outputs.rows() - 1).to_vec()
                } else {
                    vec![0.0; d_model]
                };
                *out = Box::into_raw(Box::new(SpectreStream {
                    weights,
                    session,
                    feedback,
                    prompt_len: prompt_len as u64,
                    steps: 0,
                    ttft_ms,
                    decode_ms: 0.0,
                }));
                SpectreStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Advances the stream one token. `next_in` supplies the input row; pass
/// NULL to feed the previous output back (generation). `out_row` receives
/// `d_model` floats.
/// # Safety
/// `stream` must be a live handle stepped from one thread at a time;
/// `next_in` must be null or hold `d_model` floats; `out_row` must be
/// valid for writing `d_model` floats.
#[no_mangle]
pub unsafe extern "C" fn spectre_stream_step(
    stream: *mut SpectreStream,
    next_in: *const f32,
    out_row: *mut f32,
) -> SpectreStatus {
    guarded(|| {
        if stream.is_null() || out_row.is_null() {
            set_error("null argument");
            return SpectreStatus::InvalidArgument;
        }
        let s = &mut *stream;
        let d_model = s.weights.config.d_model();
        let input: Vec<f32> = if next_in.is_null() {
            s.feedback.clone()
        } else {
            std::slice::from_raw_parts(next_in, d_model).to_vec()
        };
        let t0 = Instant::now();
        match s.session.decode(&s.weights, &input) {
            Ok(step) => {
                s.decode_ms += t0.elapsed().as_secs_f64() * 1e3;
                s.steps += 1;
                s.feedback = step.row.clone();
                std::slice::from_raw_parts_mut(out_row, d_model).copy_from_slice(&step.row);
                SpectreStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Snapshot of the stream's timing counters.
/// # Safety
/// `stream` must be a live handle and `report` valid for writing one
/// `SpectreReport`.
#[no_mangle]
pub unsafe extern "C" fn spectre_stream_report(
    stream: *const SpectreStream,
    report: *mut SpectreReport,
) -> SpectreStatus {
    guarded(|| {
        if stream.is_null() || report.is_null() {
            set_error("null argument");
            return SpectreStatus::InvalidArgument;
        }
        let s = &*stream;
        *report = SpectreReport {
            ttft_ms: s.ttft_ms,
            tpot_ms: if s.steps > 0 {
                s.decode_ms / s.steps as f64
            } else {
                0.0
            },
            prompt_len: s.prompt_len,
            steps: s.steps,
            state_bytes: s.session.state_bytes(),
        };
        SpectreStatus::Ok
    })
}

/// # Safety
/// `stream` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn spectre_stream_free(stream: *mut SpectreStream) {
    if !stream.is_null() {
        drop(Box::from_raw(stream));
    }
}
