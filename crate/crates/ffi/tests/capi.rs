//! Exercises the C surface from Rust the way a foreign binding would:
//! through raw pointers and status codes only.

use std::ffi::{CStr, CString};
use std::ptr;

use spectre_ffi::*;

fn default_params() -> SpectreModelParams {
    let mut p = std::mem::MaybeUninit::<SpectreModelParams>::uninit();
    unsafe {
        spectre_model_params_default(p.as_mut_ptr());
        p.assume_init()
    }
}

fn small_params() -> SpectreModelParams {
    SpectreModelParams {
        n_layers: 1,
        heads: 2,
        head_dim: 4,
        d_ffn: 0,
        n_max: 16,
        vocab_size: 0,
        memory_tokens: 0,
        toeplitz_enabled: true,
        toeplitz_radius: 1,
        wrm_enabled: false,
        wrm_levels: 1,
        seed: 11,
    }
}

fn create(params: &SpectreModelParams) -> *mut SpectreModel {
    let mut model = ptr::null_mut();
    let status = unsafe { spectre_model_create(params, &mut model) };
    assert_eq!(status, SpectreStatus::Ok);
    assert!(!model.is_null());
    model
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(spectre_version()) };
    assert!(!v.to_str().unwrap().is_empty());
}

#[test]
fn defaults_round_trip_through_create() {
    let params = default_params();
    assert_eq!(params.heads, 4);
    let model = create(&params);
    assert_eq!(unsafe { spectre_model_dim(model) }, 128);
    unsafe { spectre_model_free(model) };
}

#[test]
fn forward_produces_finite_rows() {
    let model = create(&small_params());
    let d = unsafe { spectre_model_dim(model) } as usize;
    assert_eq!(d, 8);
    let x: Vec<f32> = (0..5 * d).map(|i| (i as f32 * 0.1).sin()).collect();
    let mut y = vec![0.0f32; 5 * d];
    let status = unsafe { spectre_model_forward(model, x.as_ptr(), 5, y.as_mut_ptr()) };
    assert_eq!(status, SpectreStatus::Ok);
    assert!(y.iter().all(|v| v.is_finite()));
    assert!(y.iter().any(|v| *v != 0.0));
    unsafe { spectre_model_free(model) };
}

#[test]
fn null_arguments_are_invalid_not_fatal() {
    let status = unsafe { spectre_model_create(ptr::null(), ptr::null_mut()) };
    assert_eq!(status, SpectreStatus::InvalidArgument);
    let msg = unsafe { CStr::from_ptr(spectre_last_error()) };
    assert!(!msg.to_str().unwrap().is_empty());
    unsafe {
        spectre_model_free(ptr::null_mut());
        spectre_stream_free(ptr::null_mut());
    }
}

#[test]
fn bad_config_maps_to_config_status() {
    let mut params = small_params();
    params.n_max = 15; // not a power of two
    let mut model = ptr::null_mut();
    let status = unsafe { spectre_model_create(&params, &mut model) };
    assert_eq!(status, SpectreStatus::Config);
}

#[test]
fn save_load_round_trip_preserves_outputs() {
    let model = create(&small_params());
    let path = std::env::temp_dir().join(format!("spectre-ffi-{}.spcw", std::process::id()));
    let c_path = CString::new(path.to_str().unwrap()).unwrap();

    let status = unsafe { spectre_model_save(model, c_path.as_ptr()) };
    assert_eq!(status, SpectreStatus::Ok);

    let mut loaded = ptr::null_mut();
    let status = unsafe { spectre_model_load(c_path.as_ptr(), &mut loaded) };
    assert_eq!(status, SpectreStatus::Ok);

    let d = unsafe { spectre_model_dim(model) } as usize;
    let x: Vec<f32> = (0..3 * d).map(|i| (i as f32 * 0.2).cos()).collect();
    let mut y1 = vec![0.0f32; 3 * d];
    let mut y2 = vec![0.0f32; 3 * d];
    unsafe {
        assert_eq!(
            spectre_model_forward(model, x.as_ptr(), 3, y1.as_mut_ptr()),
            SpectreStatus::Ok
        );
        assert_eq!(
            spectre_model_forward(loaded, x.as_ptr(), 3, y2.as_mut_ptr()),
            SpectreStatus::Ok
        );
    }
    assert_eq!(y1, y2);

    unsafe {
        spectre_model_free(model);
        spectre_model_free(loaded);
    }
    std::fs::remove_file(&path).ok();
}

#[test]
fn load_errors_carry_io_and_format_statuses() {
    let mut out = ptr::null_mut();
    let missing = CString::new("/nonexistent/spectre-weights.spcw").unwrap();
    let status = unsafe { spectre_model_load(missing.as_ptr(), &mut out) };
    assert_eq!(status, SpectreStatus::Io);

    let path = std::env::temp_dir().join(format!("spectre-ffi-junk-{}.bin", std::process::id()));
    std::fs::write(&path, b"not a container at all").unwrap();
    let c_path = CString::new(path.to_str().unwrap()).unwrap();
    let status = unsafe { spectre_model_load(c_path.as_ptr(), &mut out) };
    assert_eq!(status, SpectreStatus::Format);
    std::fs::remove_file(&path).ok();
}

#[test]
fn stream_generates_and_reports() {
    let model = create(&small_params());
    let d = unsafe { spectre_model_dim(model) } as usize;
    let prompt: Vec<f32> = (0..4 * d).map(|i| (i as f32 * 0.05).sin()).collect();

    let mut stream = ptr::null_mut();
    let status = unsafe { spectre_stream_open(model, prompt.as_ptr(), 4, &mut stream) };
    assert_eq!(status, SpectreStatus::Ok);

    let mut row = vec![0.0f32; d];
    for _ in 0..10 {
        let status = unsafe { spectre_stream_step(stream, ptr::null(), row.as_mut_ptr()) };
        assert_eq!(status, SpectreStatus::Ok);
        assert!(row.iter().all(|v| v.is_finite()));
    }

    // teacher-forced step with an explicit input row
    let forced = vec![0.25f32; d];
    let status = unsafe { spectre_stream_step(stream, forced.as_ptr(), row.as_mut_ptr()) };
    assert_eq!(status, SpectreStatus::Ok);

    let mut report = std::mem::MaybeUninit::<SpectreReport>::uninit();
    let status = unsafe { spectre_stream_report(stream, report.as_mut_ptr()) };
    assert_eq!(status, SpectreStatus::Ok);
    let report = unsafe { report.assume_init() };
    assert_eq!(report.prompt_len, 4);
    assert_eq!(report.steps, 11);
    assert!(report.ttft_ms >= 0.0);
    assert!(report.tpot_ms > 0.0);
    assert!(report.state_bytes > 0);

    unsafe {
        spectre_stream_free(stream);
        spectre_model_free(model);
    }
}

#[test]
fn oversized_prompt_is_capacity_error() {
    let model = create(&small_params());
    let d = unsafe { spectre_model_dim(model) } as usize;
    let prompt = vec![0.0f32; 17 * d]; // window is 16
    let mut stream = ptr::null_mut();
    let status = unsafe { spectre_stream_open(model, prompt.as_ptr(), 17, &mut stream) };
    assert_eq!(status, SpectreStatus::Capacity);
    unsafe { spectre_model_free(model) };
}

#[test]
fn param_counts_are_exposed() {
    let model = create(&small_params());
    let mut total = 0u64;
    let mut added = 0u64;
    let status = unsafe { spectre_model_param_counts(model, &mut total, &mut added) };
    assert_eq!(status, SpectreStatus::Ok);
    assert!(total > added);
    assert!(added > 0);
    unsafe { spectre_model_free(model) };
}
