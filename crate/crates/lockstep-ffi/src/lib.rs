//! C ABI for the coordination-detection pipeline.
//!
//! Conventions:
//! - every function returns a [`LockstepStatus`] (0 = ok) or a pointer that
//!   is null on failure;
//! - the last error message is thread-local and retrieved with
//!   [`lockstep_last_error`];
//! - datasets are opaque handles created by [`lockstep_dataset_open`] and
//!   released with [`lockstep_dataset_free`];
//! - strings returned by this library are freed with
//!   [`lockstep_string_free`], never with `free(3)`.
//!
//! The matching header lives at `include/lockstep.h` and is maintained by
//! hand alongside this file.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::{Path, PathBuf};

use lockstep::cluster::ClusterAssignment;
use lockstep::data::{ingest, Dataset, IngestConfig};
use lockstep::error::Error;
use lockstep::pipeline::{run_pipeline_quiet, PipelineConfig};
use lockstep::synth::{generate, pseudo_sentence_vectors, score_detection, CampaignSpec, GroundTruth};

/// Status codes mirrored in `include/lockstep.h`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LockstepStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Data = 4,
    Config = 5,
    Internal = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let message = CString::new(message)
        .unwrap_or_else(|_| CString::new("error message contained NUL").expect("static"));
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(message));
}

fn status_of(e: &Error) -> LockstepStatus {
    match e {
        Error::Io(_) => LockstepStatus::Io,
        Error::Config(_) => LockstepStatus::Config,
        Error::Stage { source, .. } => status_of(source),
        _ => LockstepStatus::Data,
    }
}

fn fail(e: Error) -> LockstepStatus {
    let status = status_of(&e);
    set_error(e.to_string());
    status
}

/// # Safety
/// `ptr` must be a valid NUL-terminated C string.
unsafe fn path_arg(ptr: *const c_char) -> Result<PathBuf, LockstepStatus> {
    if ptr.is_null() {
        set_error("null path argument".into());
        return Err(LockstepStatus::NullArgument);
    }
    match unsafe { CStr::from_ptr(ptr) }.to_str() {
        Ok(s) => Ok(PathBuf::from(s)),
        Err(_) => {
            set_error("path is not valid UTF-8".into());
            Err(LockstepStatus::InvalidUtf8)
        }
    }
}

/// Library version as a static string; do not free.
#[no_mangle]
pub extern "C" fn lockstep_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message of the most recent error on this thread, or null. The returned
/// string must be freed with [`lockstep_string_free`].
#[no_mangle]
pub extern "C" fn lockstep_last_error() -> *mut c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map(|msg| msg.clone().into_raw())
            .unwrap_or(std::ptr::null_mut())
    })
}

/// Free a string returned by this library. Null is a no-op.
///
/// # Safety
/// `s` must have been returned by a `lockstep_*` function and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lockstep_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}

/// Opaque dataset handle.
pub struct LockstepDataset {
    inner: Dataset,
}

/// Ingest the three input files (posts JSON-lines, videos JSON-lines,
/// channels CSV). Returns null on failure; see [`lockstep_last_error`].
///
/// # Safety
/// The three path pointers must be valid NUL-terminated C strings.
#[no_mangle]
pub unsafe extern "C" fn lockstep_dataset_open(
    posts_path: *const c_char,
    videos_path: *const c_char,
    channels_path: *const c_char,
    strict: bool,
) -> *mut LockstepDataset {
    let paths = (|| -> Result<[PathBuf; 3], LockstepStatus> {
        Ok([
            unsafe { path_arg(posts_path) }?,
            unsafe { path_arg(videos_path) }?,
            unsafe { path_arg(channels_path) }?,
        ])
    })();
    let [posts, videos, channels] = match paths {
        Ok(p) => p,
        Err(_) => return std::ptr::null_mut(),
    };
    let config = IngestConfig {
        strict,
        ..IngestConfig::default()
    };
    match ingest(&posts, &videos, &channels, &config) {
        Ok(outcome) => Box::into_raw(Box::new(LockstepDataset {
            inner: outcome.dataset,
        })),
        Err(e) => {
            fail(e);
            std::ptr::null_mut()
        }
    }
}

/// # Safety
/// `ds` must be a handle from [`lockstep_dataset_open`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lockstep_dataset_free(ds: *mut LockstepDataset) {
    if !ds.is_null() {
        drop(unsafe { Box::from_raw(ds) });
    }
}

/// # Safety
/// `ds` must be a live handle from [`lockstep_dataset_open`].
#[no_mangle]
pub unsafe extern "C" fn lockstep_dataset_n_posts(ds: *const LockstepDataset) -> usize {
    if ds.is_null() {
        return 0;
    }
    unsafe { &*ds }.inner.posts.len()
}

/// # Safety
/// `ds` must be a live handle from [`lockstep_dataset_open`].
#[no_mangle]
pub unsafe extern "C" fn lockstep_dataset_n_videos(ds: *const LockstepDataset) -> usize {
    if ds.is_null() {
        return 0;
    }
    unsafe { &*ds }.inner.videos.len()
}

/// # Safety
/// `ds` must be a live handle from [`lockstep_dataset_open`].
#[no_mangle]
pub unsafe extern "C" fn lockstep_dataset_n_channels(ds: *const LockstepDataset) -> usize {
    if ds.is_null() {
        return 0;
    }
    unsafe { &*ds }.inner.channels.len()
}

/// Population standard deviation of factuality scores over labeled posts.
///
/// # Safety
/// `ds` must be a live handle; `out` must point to writable memory.
#[no_mangle]
pub unsafe extern "C" fn lockstep_dataset_factuality_std(
    ds: *const LockstepDataset,
    out: *mut f64,
) -> LockstepStatus {
    if ds.is_null() || out.is_null() {
        set_error("null argument".into());
        return LockstepStatus::NullArgument;
    }
    match lockstep::data::dataset_factuality_std(&unsafe { &*ds }.inner) {
        Ok(std) => {
            unsafe { *out = std };
            LockstepStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Run the full pipeline from a config file (same format as the CLI).
///
/// # Safety
/// `config_path` must be a valid NUL-terminated C string.
#[no_mangle]
pub unsafe extern "C" fn lockstep_pipeline_run(config_path: *const c_char) -> LockstepStatus {
    let path = match unsafe { path_arg(config_path) } {
        Ok(p) => p,
        Err(status) => return status,
    };
    let config = match PipelineConfig::load(&path) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    match run_pipeline_quiet(&config, false) {
        Ok(_) => LockstepStatus::Ok,
        Err(e) => fail(e),
    }
}

/// Generate a synthetic dataset. `spec_json` may be null for defaults; when
/// given it is a JSON object in the `CampaignSpec` schema. `emit_vector_dim`
/// of 0 skips the stand-in sentence vectors.
///
/// # Safety
/// `out_dir` must be a valid C string; `spec_json` may be null or a valid
/// C string.
#[no_mangle]
pub unsafe extern "C" fn lockstep_synth_generate(
    spec_json: *const c_char,
    out_dir: *const c_char,
    emit_vector_dim: usize,
) -> LockstepStatus {
    let out = match unsafe { path_arg(out_dir) } {
        Ok(p) => p,
        Err(status) => return status,
    };
    let spec: CampaignSpec = if spec_json.is_null() {
        CampaignSpec::default()
    } else {
        let raw = match unsafe { CStr::from_ptr(spec_json) }.to_str() {
            Ok(s) => s,
            Err(_) => {
                set_error("spec JSON is not valid UTF-8".into());
                return LockstepStatus::InvalidUtf8;
            }
        };
        match serde_json::from_str(raw) {
            Ok(spec) => spec,
            Err(e) => {
                set_error(format!("bad spec JSON: {e}"));
                return LockstepStatus::Config;
            }
        }
    };
    let result = (|| -> Result<(), Error> {
        let (ds, truth) = generate(&spec)?;
        std::fs::create_dir_all(&out)?;
        lockstep::data::write_dataset(&out, &ds)?;
        truth.write_csv(&out.join("ground_truth.csv"))?;
        if emit_vector_dim > 0 {
            let vectors = pseudo_sentence_vectors(&ds, emit_vector_dim, spec.seed)?;
            lockstep::embed::write_embeddings(&out.join("external_vectors.txt"), &vectors)?;
        }
        Ok(())
    })();
    match result {
        Ok(()) => LockstepStatus::Ok,
        Err(e) => fail(e),
    }
}

/// Pairwise precision/recall/F1 of an assignment CSV against a ground-truth
/// CSV. Any of the three out-pointers may be null when unwanted.
///
/// # Safety
/// Path pointers must be valid C strings; non-null out-pointers must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn lockstep_score_detection(
    assignment_csv: *const c_char,
    ground_truth_csv: *const c_char,
    precision: *mut f64,
    recall: *mut f64,
    f1: *mut f64,
) -> LockstepStatus {
    let assignment_path = match unsafe { path_arg(assignment_csv) } {
        Ok(p) => p,
        Err(status) => return status,
    };
    let truth_path = match unsafe { path_arg(ground_truth_csv) } {
        Ok(p) => p,
        Err(status) => return status,
    };
    let result = (|| -> Result<lockstep::synth::DetectionScore, Error> {
        let assignment = ClusterAssignment::read_csv(&assignment_path)?;
        let truth = GroundTruth::read_csv(&truth_path)?;
        Ok(score_detection(&assignment, &truth))
    })();
    match result {
        Ok(score) => {
            unsafe {
                if !precision.is_null() {
                    *precision = score.precision;
                }
                if !recall.is_null() {
                    *recall = score.recall;
                }
                if !f1.is_null() {
                    *f1 = score.f1;
                }
            }
            LockstepStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Convenience wrapper: default config as a string the caller can write to
/// disk and edit. Free with [`lockstep_string_free`].
#[no_mangle]
pub extern "C" fn lockstep_default_config() -> *mut c_char {
    let text = PipelineConfig::default().canonical_string();
    CString::new(text)
        .map(CString::into_raw)
        .unwrap_or(std::ptr::null_mut())
}

#[allow(dead_code)]
fn assert_paths_are_utf8(_: &Path) {}
