//! C ABI for the coverstream streaming classifier.
//!
//! Handles are opaque pointers created and destroyed by this library;
//! functions return [`CsStatus`] codes and leave a human-readable message
//! retrievable via [`cs_last_error`]. Strings returned through out-params
//! are owned by the caller and must be released with [`cs_string_free`].
//!
//! Descriptor bags cross the boundary as one contiguous row-major `f64`
//! buffer: `descriptors` rows of `dim` values each.

#![deny(unsafe_op_in_unsafe_fn)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::ptr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use coverstream::active::{stream_step, ActiveState, MapOracle, StreamStats};
use coverstream::error::Error;
use coverstream::model::{CoverModel, ModelConfig};
use coverstream::types::{FeatureVector, VideoBag};
use coverstream::Variant;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    InvalidUtf8 = 4,
    Io = 5,
    Internal = 6,
}

/// Active-learning variant selector.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsVariant {
    Full = 0,
    Rnd = 1,
    VarUn = 2,
    VarUnFix = 3,
}

impl From<CsVariant> for Variant {
    fn from(v: CsVariant) -> Variant {
        match v {
            CsVariant::Full => Variant::Full,
            CsVariant::Rnd => Variant::Rnd,
            CsVariant::VarUn => Variant::VarUn,
            CsVariant::VarUnFix => Variant::VarUnFix,
        }
    }
}

/// Opaque model handle.
pub struct CsModel {
    inner: CoverModel,
}

/// Opaque stream-session handle: threshold state, prequential statistics,
/// and the session RNG.
pub struct CsStream {
    state: ActiveState,
    stats: StreamStats,
    variant: Variant,
    rng: ChaCha8Rng,
    next_bag: u64,
}

/// Prediction for one bag. `label` is null while the model is empty.
#[repr(C)]
pub struct CsPrediction {
    pub label: *mut c_char,
    pub confidence: f64,
}

/// Outcome of one stream step. `predicted` is null for unknown predictions.
#[repr(C)]
pub struct CsStepInfo {
    pub predicted: *mut c_char,
    pub queried: bool,
    pub correct: bool,
    pub confidence: f64,
    pub threshold: f64,
    pub query_rate: f64,
    pub online_accuracy: f64,
    pub balls: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<Vec<u8>>) {
    let message = CString::new(message).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(message));
}

fn status_of(err: &Error) -> CsStatus {
    match err {
        Error::DimensionMismatch { .. } => CsStatus::DimensionMismatch,
        Error::Io(_) => CsStatus::Io,
        Error::InvalidParam { .. }
        | Error::EmptyFeatureVector
        | Error::NonFiniteCoordinate { .. }
        | Error::EmptyBag { .. }
        | Error::EmptyInput(_) => CsStatus::InvalidArgument,
        _ => CsStatus::Internal,
    }
}

fn fail(err: Error) -> CsStatus {
    let status = status_of(&err);
    set_error(err.to_string());
    status
}

fn null_argument(what: &str) -> CsStatus {
    set_error(format!("null argument: {what}"));
    CsStatus::NullArgument
}

/// Builds a bag from a row-major buffer.
///
/// # Safety
/// `data` must point to `descriptors * dim` readable doubles.
unsafe fn bag_from_raw(
    id: String,
    data: *const f64,
    descriptors: usize,
    dim: usize,
) -> Result<VideoBag, Error> {
    if descriptors == 0 || dim == 0 {
        return Err(Error::invalid("bag", "descriptors and dim must be positive"));
    }
    let flat = unsafe { std::slice::from_raw_parts(data, descriptors * dim) };
    let mut rows = Vec::with_capacity(descriptors);
    for chunk in flat.chunks_exact(dim) {
        rows.push(FeatureVector::new(chunk.to_vec())?);
    }
    VideoBag::new(id, rows, None)
}

/// # Safety
/// `s` must be a valid NUL-terminated string.
unsafe fn str_from_raw<'a>(s: *const c_char) -> Result<&'a str, CsStatus> {
    let cstr = unsafe { CStr::from_ptr(s) };
    cstr.to_str().map_err(|_| {
        set_error("argument is not valid UTF-8");
        CsStatus::InvalidUtf8
    })
}

fn owned_c_string(s: &str) -> *mut c_char {
    CString::new(s).map_or(ptr::null_mut(), CString::into_raw)
}

/// Returns the library version as a static string; do not free.
#[no_mangle]
pub extern "C" fn cs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Returns and clears the last error message on this thread, or null.
/// Free the result with `cs_string_free`.
#[no_mangle]
pub extern "C" fn cs_last_error() -> *mut c_char {
    LAST_ERROR.with(|slot| match slot.borrow_mut().take() {
        Some(msg) => msg.into_raw(),
        None => ptr::null_mut(),
    })
}

/// Frees a string returned by this library. Null is a no-op.
///
/// # Safety
/// `s` must have been returned by this library and not freed before.
#[no_mangle]
pub unsafe extern "C" fn cs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}

/// Creates a model. `max_balls == 0` means unlimited; `seed` drives the
/// model's eviction RNG.
#[no_mangle]
pub extern "C" fn cs_model_new(max_balls: usize, seed: u64) -> *mut CsModel {
    let config = ModelConfig {
        max_balls: (max_balls > 0).then_some(max_balls),
        seed,
        ..ModelConfig::default()
    };
    Box::into_raw(Box::new(CsModel {
        inner: CoverModel::new(config),
    }))
}

/// Destroys a model handle. Null is a no-op.
///
/// # Safety
/// `model` must come from `cs_model_new`/`cs_model_load` and not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn cs_model_free(model: *mut CsModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

/// Number of balls currently in the model; 0 for null.
///
/// # Safety
/// `model` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn cs_model_num_balls(model: *const CsModel) -> usize {
    if model.is_null() {
        return 0;
    }
    unsafe { &*model }.inner.num_balls()
}

/// Number of classes seen so far; 0 for null.
///
/// # Safety
/// `model` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn cs_model_num_classes(model: *const CsModel) -> usize {
    if model.is_null() {
        return 0;
    }
    unsafe { &*model }.inner.num_classes()
}

/// Learns one labeled bag.
///
/// # Safety
/// `model` must be a live handle, `data` must point to
/// `descriptors * dim` doubles, and `label` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn cs_model_learn(
    model: *mut CsModel,
    data: *const f64,
    descriptors: usize,
    dim: usize,
    label: *const c_char,
) -> CsStatus {
    if model.is_null() {
        return null_argument("model");
    }
    if data.is_null() {
        return null_argument("data");
    }
    if label.is_null() {
        return null_argument("label");
    }
    let model = unsafe { &mut *model };
    let label = match unsafe { str_from_raw(label) } {
        Ok(l) => l,
        Err(status) => return status,
    };
    let bag = match unsafe { bag_from_raw(String::new(), data, descriptors, dim) } {
        Ok(b) => b,
        Err(e) => return fail(e),
    };
    match model.inner.learn_bag(&bag, label) {
        Ok(_) => CsStatus::Ok,
        Err(e) => fail(e),
    }
}

/// Predicts one bag; fills `out` with the label (caller frees) and the
/// prediction confidence.
///
/// # Safety
/// `model` must be a live handle, `data` must point to
/// `descriptors * dim` doubles, and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cs_model_predict(
    model: *const CsModel,
    data: *const f64,
    descriptors: usize,
    dim: usize,
    out: *mut CsPrediction,
) -> CsStatus {
    if model.is_null() {
        return null_argument("model");
    }
    if data.is_null() {
        return null_argument("data");
    }
    if out.is_null() {
        return null_argument("out");
    }
    let model = unsafe { &*model };
    let bag = match unsafe { bag_from_raw(String::new(), data, descriptors, dim) } {
        Ok(b) => b,
        Err(e) => return fail(e),
    };
    match model.inner.predict_bag(&bag) {
        Ok(p) => {
            let label = p
                .predicted
                .and_then(|id| model.inner.label_name(id))
                .map_or(ptr::null_mut(), owned_c_string);
            unsafe {
                (*out).label = label;
                (*out).confidence = p.top_confidence;
            }
            CsStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Saves the model snapshot to `path`.
///
/// # Safety
/// `model` must be a live handle and `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn cs_model_save(model: *const CsModel, path: *const c_char) -> CsStatus {
    if model.is_null() {
        return null_argument("model");
    }
    if path.is_null() {
        return null_argument("path");
    }
    let path = match unsafe { str_from_raw(path) } {
        Ok(p) => p,
        Err(status) => return status,
    };
    match unsafe { &*model }.inner.save(path) {
        Ok(()) => CsStatus::Ok,
        Err(e) => fail(e),
    }
}

/// Loads a model snapshot; returns null on failure (see `cs_last_error`).
///
/// # Safety
/// `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn cs_model_load(path: *const c_char) -> *mut CsModel {
    if path.is_null() {
        null_argument("path");
        return ptr::null_mut();
    }
    let path = match unsafe { str_from_raw(path) } {
        Ok(p) => p,
        Err(_) => return ptr::null_mut(),
    };
    match CoverModel::load(path) {
        Ok(inner) => Box::into_raw(Box::new(CsModel { inner })),
        Err(e) => {
            fail(e);
            ptr::null_mut()
        }
    }
}

/// Creates a stream session; returns null on invalid budget or tau.
#[no_mangle]
pub extern "C" fn cs_stream_new(
    variant: CsVariant,
    budget: f64,
    tau: f64,
    seed: u64,
) -> *mut CsStream {
    let variant: Variant = variant.into();
    match ActiveState::for_variant(variant, budget, tau) {
        Ok(state) => Box::into_raw(Box::new(CsStream {
            state,
            stats: StreamStats::new(),
            variant,
            rng: ChaCha8Rng::seed_from_u64(seed),
            next_bag: 0,
        })),
        Err(e) => {
            fail(e);
            ptr::null_mut()
        }
    }
}

/// Destroys a stream handle. Null is a no-op.
///
/// # Safety
/// `stream` must come from `cs_stream_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cs_stream_free(stream: *mut CsStream) {
    if !stream.is_null() {
        drop(unsafe { Box::from_raw(stream) });
    }
}

/// Advances one stream step: predicts the bag, updates the online accuracy,
/// and — when the strategy decides to spend budget — learns from
/// `true_label`. The caller acts as the annotation oracle.
///
/// # Safety
/// `stream` and `model` must be live handles, `data` must point to
/// `descriptors * dim` doubles, `true_label` must be NUL-terminated, and
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cs_stream_step(
    stream: *mut CsStream,
    model: *mut CsModel,
    data: *const f64,
    descriptors: usize,
    dim: usize,
    true_label: *const c_char,
    out: *mut CsStepInfo,
) -> CsStatus {
    if stream.is_null() {
        return null_argument("stream");
    }
    if model.is_null() {
        return null_argument("model");
    }
    if data.is_null() {
        return null_argument("data");
    }
    if true_label.is_null() {
        return null_argument("true_label");
    }
    if out.is_null() {
        return null_argument("out");
    }
    let stream = unsafe { &mut *stream };
    let model = unsafe { &mut *model };
    let label = match unsafe { str_from_raw(true_label) } {
        Ok(l) => l,
        Err(status) => return status,
    };
    let bag_id = format!("ffi_{}", stream.next_bag);
    stream.next_bag += 1;
    let bag = match unsafe { bag_from_raw(bag_id.clone(), data, descriptors, dim) } {
        Ok(b) => b,
        Err(e) => return fail(e),
    };
    let mut oracle = MapOracle::new();
    oracle.insert(bag_id, label);
    let record = match stream_step(
        &mut model.inner,
        &mut stream.state,
        &mut stream.stats,
        &bag,
        &oracle,
        stream.variant,
        &mut stream.rng,
    ) {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    unsafe {
        (*out).predicted = record
            .predicted
            .as_deref()
            .map_or(ptr::null_mut(), owned_c_string);
        (*out).queried = record.queried;
        (*out).correct = record.correct;
        (*out).confidence = record.confidence;
        (*out).threshold = record.threshold;
        (*out).query_rate = record.query_rate;
        (*out).online_accuracy = record.online_accuracy;
        (*out).balls = record.balls;
    }
    CsStatus::Ok
}
