//! C ABI over the wheel-flat pipeline core.
//!
//! Conventions: every fallible function returns a [`WfStatus`];
//! results travel through caller-provided out pointers; heap objects
//! cross the boundary as opaque handles with paired `_new`/`_free`
//! functions; paths are NUL-terminated UTF-8. After any non-OK status,
//! [`wf_last_error`] returns a thread-local message describing the
//! failure; the pointer stays valid until the same thread's next call
//! into this library. Panics never unwind across the boundary: they
//! convert to `WF_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use wheelflat_core::error::Error;
use wheelflat_core::flatgen::{AbaRecord, SimConfig, WheelFlat, WheelPosition};
use wheelflat_core::fnn::FnnModel;
use wheelflat_core::wpd::QmfPair;
use wheelflat_core::{eval, features, flatgen, hilbert, wpd};

// --- status codes and the thread-local error message --------------------------------

/// Result of a call across the C boundary.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum WfStatus {
    /// The call succeeded.
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// An argument value was out of range or otherwise unusable.
    InvalidArgument = 2,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 3,
    /// The operating system reported an I/O failure.
    Io = 4,
    /// A file existed but its contents did not parse.
    Parse = 5,
    /// A model file was readable but internally inconsistent.
    Model = 6,
    /// A model file was written by an incompatible library version.
    VersionMismatch = 7,
    /// An internal invariant failed; see wf_last_error.
    Panic = 8,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let sanitized: String = message.chars().filter(|c| *c != '\0').collect();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn clear_error() {
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::default();
    });
}

fn status_of(err: &Error) -> WfStatus {
    match err {
        Error::Domain(_) | Error::Config(_) | Error::Shape(_) => WfStatus::InvalidArgument,
        Error::Io { .. } => WfStatus::Io,
        Error::Parse { .. } => WfStatus::Parse,
        Error::Model(_) => WfStatus::Model,
        Error::VersionMismatch { .. } => WfStatus::VersionMismatch,
    }
}

fn fail(err: &Error) -> WfStatus {
    set_error(&err.to_string());
    status_of(err)
}

fn fail_with(status: WfStatus, message: &str) -> WfStatus {
    set_error(message);
    status
}

/// Runs `f` with panics contained so they cannot unwind into C frames.
fn guarded(f: impl FnOnce() -> WfStatus) -> WfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "internal panic".into());
            fail_with(WfStatus::Panic, &msg)
        }
    }
}

/// Returns the message of the most recent failure on this thread, as a
/// NUL-terminated string. Empty until a call fails. The pointer is
/// invalidated by the thread's next call into this library.
#[no_mangle]
pub extern "C" fn wf_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

// --- geometry ----------------------------------------------------------------------

/// Number of flat heights in the reference ladder.
pub const WF_HEIGHT_LADDER_LEN: usize = 5;

/// Computes the flat's half-angle (radians) and skid length (metres)
/// from its height and the wheel radius, both in metres.
///
/// # Safety
/// `angle_rad_out` and `skid_length_m_out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn wf_flat_geometry(
    height_m: f64,
    wheel_radius_m: f64,
    angle_rad_out: *mut f64,
    skid_length_m_out: *mut f64,
) -> WfStatus {
    guarded(|| {
        if angle_rad_out.is_null() || skid_length_m_out.is_null() {
            return fail_with(WfStatus::NullPointer, "geometry out pointers are null");
        }
        match flatgen::flat_geometry(height_m, wheel_radius_m) {
            Ok((angle, skid)) => {
                unsafe {
                    *angle_rad_out = angle;
                    *skid_length_m_out = skid;
                }
                clear_error();
                WfStatus::Ok
            }
            Err(err) => fail(&err),
        }
    })
}

/// Writes the reference flat-height ladder, in metres and ascending,
/// into `out`. `len` must be at least `WF_HEIGHT_LADDER_LEN`.
///
/// # Safety
/// `out` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn wf_height_ladder(out: *mut f64, len: usize) -> WfStatus {
    guarded(|| {
        if out.is_null() {
            return fail_with(WfStatus::NullPointer, "ladder out pointer is null");
        }
        if len < WF_HEIGHT_LADDER_LEN {
            return fail_with(
                WfStatus::InvalidArgument,
                "ladder buffer holds fewer than WF_HEIGHT_LADDER_LEN values",
            );
        }
        let ladder = flatgen::height_ladder();
        unsafe { std::ptr::copy_nonoverlapping(ladder.as_ptr(), out, ladder.len()) };
        clear_error();
        WfStatus::Ok
    })
}

// --- simulation configuration handle ----------------------------------------------------

/// Opaque synthesis configuration; create with `wf_sim_config_new`.
pub struct WfSimConfig(SimConfig);

/// Allocates a configuration with the reference defaults. Never null.
/// Release with `wf_sim_config_free`.
#[no_mangle]
pub extern "C" fn wf_sim_config_new() -> *mut WfSimConfig {
    Box::into_raw(Box::new(WfSimConfig(SimConfig::default())))
}

/// Releases a configuration. A null handle is ignored.
///
/// # Safety
/// `config` must have come from `wf_sim_config_new` and not have been
/// freed already.
#[no_mangle]
pub unsafe extern "C" fn wf_sim_config_free(config: *mut WfSimConfig) {
    if !config.is_null() {
        drop(unsafe { Box::from_raw(config) });
    }
}

unsafe fn with_config(
    config: *mut WfSimConfig,
    apply: impl FnOnce(&mut SimConfig),
) -> WfStatus {
    guarded(|| {
        if config.is_null() {
            return fail_with(WfStatus::NullPointer, "config handle is null");
        }
        apply(unsafe { &mut (*config).0 });
        clear_error();
        WfStatus::Ok
    })
}

/// Sets the seed that pins every random draw of the synthesis.
///
/// # Safety
/// `config` must be a live handle from `wf_sim_config_new`.
#[no_mangle]
pub unsafe extern "C" fn wf_sim_config_set_seed(config: *mut WfSimConfig, seed: u64) -> WfStatus {
    unsafe { with_config(config, |c| c.rng_seed = seed) }
}

/// Sets the train speed in metres per second.
///
/// # Safety
/// `config` must be a live handle from `wf_sim_config_new`.
#[no_mangle]
pub unsafe extern "C" fn wf_sim_config_set_speed(
    config: *mut WfSimConfig,
    m_per_s: f64,
) -> WfStatus {
    unsafe { with_config(config, |c| c.speed_m_per_s = m_per_s) }
}

/// Sets the record duration in seconds.
///
/// # Safety
/// `config` must be a live handle from `wf_sim_config_new`.
#[no_mangle]
pub unsafe extern "C" fn wf_sim_config_set_duration(
    config: *mut WfSimConfig,
    seconds: f64,
) -> WfStatus {
    unsafe { with_config(config, |c| c.duration_s = seconds) }
}

/// Sets the sampling rate in hertz.
///
/// # Safety
/// `config` must be a live handle from `wf_sim_config_new`.
#[no_mangle]
pub unsafe extern "C" fn wf_sim_config_set_sample_rate(
    config: *mut WfSimConfig,
    hz: f64,
) -> WfStatus {
    unsafe { with_config(config, |c| c.sample_rate_hz = hz) }
}

/// Sets the measurement-noise level as a fraction of the impact
/// amplitude.
///
/// # Safety
/// `config` must be a live handle from `wf_sim_config_new`.
#[no_mangle]
pub unsafe extern "C" fn wf_sim_config_set_noise(
    config: *mut WfSimConfig,
    fraction: f64,
) -> WfStatus {
    unsafe { with_config(config, |c| c.noise_frac = fraction) }
}

// --- synthesis -------------------------------------------------------------------------

/// Opaque four-channel acceleration record; create with
/// `wf_synthesize`.
pub struct WfAbaRecord(AbaRecord);

/// Synthesizes the acceleration record of a flat of `height_m` metres
/// on the wheel with index `wheel` (0 = front left, 1 = front right,
/// 2 = rear left, 3 = rear right). Invalid configurations are rejected
/// here. On success `record_out` receives a handle to release with
/// `wf_aba_record_free`.
///
/// # Safety
/// `config` must be a live handle and `record_out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn wf_synthesize(
    config: *const WfSimConfig,
    height_m: f64,
    wheel: u32,
    record_out: *mut *mut WfAbaRecord,
) -> WfStatus {
    guarded(|| {
        if config.is_null() || record_out.is_null() {
            return fail_with(WfStatus::NullPointer, "config or record_out is null");
        }
        let config = unsafe { &(*config).0 };
        let Some(position) = WheelPosition::from_index(wheel as usize) else {
            return fail_with(WfStatus::InvalidArgument, "wheel index must be 0..=3");
        };
        let result = WheelFlat::new(height_m, config.wheel_radius_m, position)
            .and_then(|flat| flatgen::synthesize(&flat, config));
        match result {
            Ok(record) => {
                unsafe { *record_out = Box::into_raw(Box::new(WfAbaRecord(record))) };
                clear_error();
                WfStatus::Ok
            }
            Err(err) => fail(&err),
        }
    })
}

/// Releases a record. A null handle is ignored.
///
/// # Safety
/// `record` must have come from `wf_synthesize` and not have been
/// freed already.
#[no_mangle]
pub unsafe extern "C" fn wf_aba_record_free(record: *mut WfAbaRecord) {
    if !record.is_null() {
        drop(unsafe { Box::from_raw(record) });
    }
}

/// Returns the per-channel sample count of a record; 0 for null.
///
/// # Safety
/// `record` must be null or a live handle from `wf_synthesize`.
#[no_mangle]
pub unsafe extern "C" fn wf_aba_record_samples(record: *const WfAbaRecord) -> usize {
    if record.is_null() {
        return 0;
    }
    unsafe { &(*record).0 }.channels[0].len()
}

/// Copies one channel (0 = front left .. 3 = rear right) into `out`,
/// which must hold exactly `wf_aba_record_samples` values.
///
/// # Safety
/// `record` must be a live handle and `out` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn wf_aba_record_channel(
    record: *const WfAbaRecord,
    channel: u32,
    out: *mut f64,
    len: usize,
) -> WfStatus {
    guarded(|| {
        if record.is_null() || out.is_null() {
            return fail_with(WfStatus::NullPointer, "record or out pointer is null");
        }
        if channel >= 4 {
            return fail_with(WfStatus::InvalidArgument, "channel index must be 0..=3");
        }
        let samples = &unsafe { &(*record).0 }.channels[channel as usize];
        if len != samples.len() {
            return fail_with(
                WfStatus::InvalidArgument,
                "out length does not match the record's sample count",
            );
        }
        unsafe { std::ptr::copy_nonoverlapping(samples.as_ptr(), out, len) };
        clear_error();
        WfStatus::Ok
    })
}

// --- signal kernels ---------------------------------------------------------------

/// Computes the analytic-signal envelope of `samples` into `out`; both
/// buffers hold `len` values and may alias. `len` must be at least 8.
///
/// # Safety
/// `samples` must be valid for `len` reads and `out` for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn wf_analytic_amplitude(
    samples: *const f64,
    len: usize,
    out: *mut f64,
) -> WfStatus {
    guarded(|| {
        if samples.is_null() || out.is_null() {
            return fail_with(WfStatus::NullPointer, "sample or out pointer is null");
        }
        let input = unsafe { std::slice::from_raw_parts(samples, len) };
        match hilbert::analytic_amplitude(input) {
            Ok(envelope) => {
                unsafe { std::ptr::copy_nonoverlapping(envelope.as_ptr(), out, len) };
                clear_error();
                WfStatus::Ok
            }
            Err(err) => fail(&err),
        }
    })
}

/// Decomposes `samples` to wavelet-packet level `level` (0..=6) and
/// writes the per-subspace RMS values, in natural subspace order, into
/// `out`. `out_len` must equal 2^level.
///
/// # Safety
/// `samples` must be valid for `len` reads and `out` for `out_len`
/// writes.
#[no_mangle]
pub unsafe extern "C" fn wf_wpd_rms(
    samples: *const f64,
    len: usize,
    level: u32,
    out: *mut f64,
    out_len: usize,
) -> WfStatus {
    guarded(|| {
        if samples.is_null() || out.is_null() {
            return fail_with(WfStatus::NullPointer, "sample or out pointer is null");
        }
        let level = level as usize;
        if level > wpd::MAX_LEVEL {
            return fail_with(WfStatus::InvalidArgument, "level must be 0..=6");
        }
        if out_len != 1usize << level {
            return fail_with(WfStatus::InvalidArgument, "out length must equal 2^level");
        }
        let input = unsafe { std::slice::from_raw_parts(samples, len) };
        let tree = match wpd::decompose(input, level, &QmfPair::daubechies4()) {
            Ok(tree) => tree,
            Err(err) => return fail(&err),
        };
        for (i, subspace) in tree.subspaces.iter().enumerate() {
            match features::rms(subspace) {
                Ok(value) => unsafe { *out.add(i) = value },
                Err(err) => return fail(&err),
            }
        }
        clear_error();
        WfStatus::Ok
    })
}

// --- model handle ------------------------------------------------------------------

/// Opaque trained network; create with `wf_model_load`.
pub struct WfModel(FnnModel);

/// Loads a model file written by the pipeline's training stage. On
/// success `model_out` receives a handle to release with
/// `wf_model_free`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `model_out` valid for a
/// write.
#[no_mangle]
pub unsafe extern "C" fn wf_model_load(
    path: *const c_char,
    model_out: *mut *mut WfModel,
) -> WfStatus {
    guarded(|| {
        if path.is_null() || model_out.is_null() {
            return fail_with(WfStatus::NullPointer, "path or model_out is null");
        }
        let Ok(path) = unsafe { CStr::from_ptr(path) }.to_str() else {
            return fail_with(WfStatus::InvalidUtf8, "path is not valid UTF-8");
        };
        match FnnModel::load(Path::new(path)) {
            Ok(model) => {
                unsafe { *model_out = Box::into_raw(Box::new(WfModel(model))) };
                clear_error();
                WfStatus::Ok
            }
            Err(err) => fail(&err),
        }
    })
}

/// Releases a model. A null handle is ignored.
///
/// # Safety
/// `model` must have come from `wf_model_load` and not have been freed
/// already.
#[no_mangle]
pub unsafe extern "C" fn wf_model_free(model: *mut WfModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

/// Returns the feature width the model expects; 0 for null.
///
/// # Safety
/// `model` must be null or a live handle from `wf_model_load`.
#[no_mangle]
pub unsafe extern "C" fn wf_model_input_dim(model: *const WfModel) -> usize {
    if model.is_null() {
        return 0;
    }
    unsafe { &(*model).0 }.input_dim()
}

/// Runs the model on one feature vector of `len` values (`len` must
/// equal `wf_model_input_dim`) and writes the four per-wheel outputs
/// into `out`.
///
/// # Safety
/// `model` must be a live handle, `features` valid for `len` reads,
/// and `out` valid for four writes.
#[no_mangle]
pub unsafe extern "C" fn wf_model_forward(
    model: *const WfModel,
    features: *const f64,
    len: usize,
    out: *mut f64,
) -> WfStatus {
    guarded(|| {
        if model.is_null() || features.is_null() || out.is_null() {
            return fail_with(WfStatus::NullPointer, "model, features, or out is null");
        }
        let input = unsafe { std::slice::from_raw_parts(features, len) };
        match unsafe { &(*model).0 }.forward(input) {
            Ok(prediction) => {
                unsafe { std::ptr::copy_nonoverlapping(prediction.as_ptr(), out, 4) };
                clear_error();
                WfStatus::Ok
            }
            Err(err) => fail(&err),
        }
    })
}

/// Picks the wheel a four-slot prediction points at (0..=3, ties to
/// the lowest index) and writes it to `index_out`. `len` must be 4.
///
/// # Safety
/// `prediction` must be valid for `len` reads and `index_out` for a
/// write.
#[no_mangle]
pub unsafe extern "C" fn wf_localize(
    prediction: *const f64,
    len: usize,
    index_out: *mut u32,
) -> WfStatus {
    guarded(|| {
        if prediction.is_null() || index_out.is_null() {
            return fail_with(WfStatus::NullPointer, "prediction or index_out is null");
        }
        if len != 4 {
            return fail_with(WfStatus::InvalidArgument, "prediction must hold 4 values");
        }
        let values = unsafe { std::slice::from_raw_parts(prediction, len) };
        unsafe { *index_out = eval::localize(values) as u32 };
        clear_error();
        WfStatus::Ok
    })
}

// --- tests ------------------------------------------------------------------------
