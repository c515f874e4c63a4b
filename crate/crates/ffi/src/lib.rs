//! C ABI for the scoring engine.
//!
//! The surface is deliberately small: open a trained model (checkpoint +
//! vocabulary, with optional segmentation dictionary and stop list), score
//! UTF-8 texts one at a time, and free the handle. Every function returns
//! a [`SentiscoreStatus`] code; a human-readable description of the most
//! recent failure on the calling thread is available through
//! [`sentiscore_last_error_message`]. All entry points catch panics, so no
//! unwinding ever crosses the boundary.
//!
//! The generated header lives at `include/sentiscore.h`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use sentiscore::textprep::{Dictionary, Preprocessor, Stoplist, Vocabulary};
use sentiscore::trainer::{load_checkpoint, predict};

/// Status code returned by every FFI entry point.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SentiscoreStatus {
    /// The call succeeded.
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// A file could not be read or written.
    IoError = 3,
    /// A file exists but its contents could not be understood.
    ParseError = 4,
    /// Model pieces disagree about their dimensions.
    DimensionMismatch = 5,
    /// An argument was structurally valid but unusable (for example, a
    /// text that cleans to nothing).
    InvalidArgument = 6,
    /// An internal numeric failure.
    InternalError = 7,
    /// A panic was caught at the boundary; the handle is still valid.
    Panic = 8,
}

/// A loaded scoring model. Opaque: create with [`sentiscore_model_open`],
/// release with [`sentiscore_model_free`].
pub struct SentiscoreModel {
    params: sentiscore::nnet::ModelParams<f32>,
    vocab: Vocabulary,
    pre: Preprocessor,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let sanitized: String = message.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn fail(status: SentiscoreStatus, message: &str) -> SentiscoreStatus {
    set_last_error(message);
    status
}

fn status_of(error: &sentiscore::Error) -> SentiscoreStatus {
    use sentiscore::Error;
    match error {
        Error::Io(_) | Error::Csv(_) => SentiscoreStatus::IoError,
        Error::Parse { .. } | Error::Config(_) | Error::Checkpoint(_) => {
            SentiscoreStatus::ParseError
        }
        Error::Dimension(_) => SentiscoreStatus::DimensionMismatch,
        Error::InvalidArgument(_) => SentiscoreStatus::InvalidArgument,
        Error::NonFinite(_) => SentiscoreStatus::InternalError,
    }
}

fn fail_with(error: &sentiscore::Error) -> SentiscoreStatus {
    fail(status_of(error), &error.to_string())
}

/// Wraps a boundary body so panics become [`SentiscoreStatus::Panic`].
fn guarded<F: FnOnce() -> SentiscoreStatus>(body: F) -> SentiscoreStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => fail(SentiscoreStatus::Panic, "internal panic caught at the FFI boundary"),
    }
}

/// Reads a required UTF-8 C string argument.
///
/// # Safety
/// `ptr` must be null or point to a NUL-terminated string.
unsafe fn read_str<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, SentiscoreStatus> {
    if ptr.is_null() {
        return Err(fail(
            SentiscoreStatus::NullArgument,
            &format!("{what} must not be null"),
        ));
    }
    unsafe { CStr::from_ptr(ptr) }.to_str().map_err(|_| {
        fail(
            SentiscoreStatus::InvalidUtf8,
            &format!("{what} is not valid UTF-8"),
        )
    })
}

/// Loads a trained model.
///
/// `checkpoint_path` and `vocab_path` are required; `dictionary_path` and
/// `stoplist_path` may be null to run without them. On success writes a
/// handle to `out_model`; the caller owns it and must release it with
/// [`sentiscore_model_free`]. On failure `*out_model` is set to null.
///
/// # Safety
/// Path arguments must be null or NUL-terminated strings. `out_model`
/// must point to writable memory for one pointer.
#[no_mangle]
pub unsafe extern "C" fn sentiscore_model_open(
    checkpoint_path: *const c_char,
    vocab_path: *const c_char,
    dictionary_path: *const c_char,
    stoplist_path: *const c_char,
    out_model: *mut *mut SentiscoreModel,
) -> SentiscoreStatus {
    guarded(|| {
        if out_model.is_null() {
            return fail(SentiscoreStatus::NullArgument, "out_model must not be null");
        }
        unsafe { *out_model = ptr::null_mut() };
        let checkpoint_path = match unsafe { read_str(checkpoint_path, "checkpoint_path") } {
            Ok(s) => s,
            Err(status) => return status,
        };
        let vocab_path = match unsafe { read_str(vocab_path, "vocab_path") } {
            Ok(s) => s,
            Err(status) => return status,
        };

        let checkpoint = match load_checkpoint(Path::new(checkpoint_path)) {
            Ok(c) => c,
            Err(e) => return fail_with(&e),
        };
        let vocab = match Vocabulary::load(Path::new(vocab_path)) {
            Ok(v) => v,
            Err(e) => return fail_with(&e),
        };
        if let Err(e) = checkpoint.require_vocab(&vocab) {
            return fail_with(&e);
        }

        let dictionary = if dictionary_path.is_null() {
            Dictionary::empty()
        } else {
            let path = match unsafe { read_str(dictionary_path, "dictionary_path") } {
                Ok(s) => s,
                Err(status) => return status,
            };
            match Dictionary::load(Path::new(path)) {
                Ok(d) => d,
                Err(e) => return fail_with(&e),
            }
        };
        let stoplist = if stoplist_path.is_null() {
            Stoplist::empty()
        } else {
            let path = match unsafe { read_str(stoplist_path, "stoplist_path") } {
                Ok(s) => s,
                Err(status) => return status,
            };
            match Stoplist::load(Path::new(path)) {
                Ok(s) => s,
                Err(e) => return fail_with(&e),
            }
        };

        let model = Box::new(SentiscoreModel {
            params: checkpoint.params,
            vocab,
            pre: Preprocessor {
                dictionary,
                stoplist,
            },
        });
        unsafe { *out_model = Box::into_raw(model) };
        SentiscoreStatus::Ok
    })
}

/// Scores one UTF-8 text on the 0–5 rating scale.
///
/// # Safety
/// `model` must be a live handle from [`sentiscore_model_open`].
/// `text_utf8` must be a NUL-terminated string. `out_score` must point to
/// writable memory for one double.
#[no_mangle]
pub unsafe extern "C" fn sentiscore_score(
    model: *const SentiscoreModel,
    text_utf8: *const c_char,
    out_score: *mut f64,
) -> SentiscoreStatus {
    guarded(|| {
        if model.is_null() {
            return fail(SentiscoreStatus::NullArgument, "model must not be null");
        }
        if out_score.is_null() {
            return fail(SentiscoreStatus::NullArgument, "out_score must not be null");
        }
        let text = match unsafe { read_str(text_utf8, "text_utf8") } {
            Ok(s) => s,
            Err(status) => return status,
        };
        let model = unsafe { &*model };
        let texts = [text.to_string()];
        match predict(&texts, &model.params, &model.vocab, &model.pre) {
            Ok(scores) => match &scores[0] {
                Ok(score) => {
                    unsafe { *out_score = *score };
                    SentiscoreStatus::Ok
                }
                Err(e) => fail_with(e),
            },
            Err(e) => fail_with(&e),
        }
    })
}

/// Releases a model handle. Null is accepted and ignored. Passing the
/// same non-null handle twice is undefined behavior.
///
/// # Safety
/// `model` must be null or a handle from [`sentiscore_model_open`] that
/// has not been freed.
#[no_mangle]
pub unsafe extern "C" fn sentiscore_model_free(model: *mut SentiscoreModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

/// Copies the calling thread's most recent error message into `buffer`
/// (NUL-terminated, truncated to `capacity`). Returns the full message
/// length in bytes excluding the NUL, so calling with a null buffer or
/// zero capacity sizes a follow-up call.
///
/// # Safety
/// `buffer` must be null or point to `capacity` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn sentiscore_last_error_message(
    buffer: *mut c_char,
    capacity: usize,
) -> usize {
    LAST_ERROR.with(|slot| {
        let message = slot.borrow();
        let bytes = message.as_bytes();
        if !buffer.is_null() && capacity > 0 {
            let n = bytes.len().min(capacity - 1);
            unsafe {
                ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buffer, n);
                *buffer.add(n) = 0;
            }
        }
        bytes.len()
    })
}

/// The library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sentiscore_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
