//! C ABI over the vsearch engine.
//!
//! Every function returns a [`VsStatus`]. On failure the message is kept per
//! thread and can be read with [`vs_last_error`]. Strings handed out by the
//! library must be released with [`vs_string_free`], engines with
//! [`vs_engine_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use vsearch::evalbench::metrics::ndcg_at_10;
use vsearch::serving::{Engine, Request, ServingConfig};
use vsearch::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VsStatus {
    Ok = 0,
    /// A required pointer was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// The request or data was rejected.
    InvalidInput = 3,
    /// The model behind the request is not loaded.
    Unavailable = 4,
    /// A referenced document does not exist.
    NotFound = 5,
    /// The embedding store was built from a different ranker.
    StaleStore = 6,
    Io = 7,
    /// A file or JSON payload could not be parsed.
    Format = 8,
    Internal = 9,
    /// The library panicked; the engine should be discarded.
    Panic = 10,
}

/// Opaque engine handle.
pub struct VsEngine {
    engine: Engine,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> VsStatus {
    match e {
        Error::InvalidInput(_) | Error::Shape(_) => VsStatus::InvalidInput,
        Error::Unavailable(_) => VsStatus::Unavailable,
        Error::MissingDocument(_) => VsStatus::NotFound,
        Error::StaleStore { .. } => VsStatus::StaleStore,
        Error::Io(_) => VsStatus::Io,
        Error::Format { .. } | Error::Json(_) => VsStatus::Format,
        Error::Diverged(_) | Error::Target(_) => VsStatus::Internal,
    }
}

struct Failure(VsStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> VsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            VsStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("panic inside vsearch");
            VsStatus::Panic
        }
    }
}

/// # Safety
/// `p` must be null or point to a NUL-terminated string.
unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(VsStatus::NullArgument, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(VsStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

fn give_string(s: String, out: *mut *mut c_char) -> Result<(), Failure> {
    let c = CString::new(s).map_err(|_| Failure(VsStatus::Internal, "response contains NUL".into()))?;
    // SAFETY: callers check `out` for null before calling.
    unsafe { *out = c.into_raw() };
    Ok(())
}

fn null_out<T>(out: *mut *mut T, name: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure(VsStatus::NullArgument, format!("{name} is null")));
    }
    // SAFETY: checked non-null; the caller owns the slot.
    unsafe { *out = ptr::null_mut() };
    Ok(())
}

/// Loads the engine described by a configuration file.
///
/// # Safety
/// `config_path` must be a NUL-terminated string and `out` a valid pointer
/// to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn vs_engine_open(config_path: *const c_char, out: *mut *mut VsEngine) -> VsStatus {
    guard(|| {
        null_out(out, "out")?;
        let path = str_arg(config_path, "config_path")?;
        let engine = Engine::load(ServingConfig::load(Path::new(path))?)?;
        *out = Box::into_raw(Box::new(VsEngine { engine }));
        Ok(())
    })
}

/// Releases an engine. Null is ignored.
///
/// # Safety
/// `engine` must come from [`vs_engine_open`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn vs_engine_free(engine: *mut VsEngine) {
    if !engine.is_null() {
        drop(Box::from_raw(engine));
    }
}

/// Runs one JSON request such as
/// `{"endpoint":"autocomplete","prefix":"da"}` and returns the JSON
/// response the HTTP API would send.
///
/// # Safety
/// `engine` must be a live handle, `request_json` a NUL-terminated string
/// and `response_json` a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn vs_engine_handle(
    engine: *const VsEngine,
    request_json: *const c_char,
    response_json: *mut *mut c_char,
) -> VsStatus {
    guard(|| {
        null_out(response_json, "response_json")?;
        let engine = engine
            .as_ref()
            .ok_or_else(|| Failure(VsStatus::NullArgument, "engine is null".into()))?;
        let text = str_arg(request_json, "request_json")?;
        let req: Request = serde_json::from_str(text).map_err(|e| Failure(VsStatus::Format, e.to_string()))?;
        let value = engine.engine.handle(&req)?;
        give_string(value.to_string(), response_json)
    })
}

/// Model availability as a JSON object of booleans.
///
/// # Safety
/// As for [`vs_engine_handle`].
#[no_mangle]
pub unsafe extern "C" fn vs_engine_health(engine: *const VsEngine, health_json: *mut *mut c_char) -> VsStatus {
    guard(|| {
        null_out(health_json, "health_json")?;
        let engine = engine
            .as_ref()
            .ok_or_else(|| Failure(VsStatus::NullArgument, "engine is null".into()))?;
        let text = serde_json::to_string(&engine.engine.health()).map_err(Error::from)?;
        give_string(text, health_json)
    })
}

/// NDCG@10 of relevance grades listed in ranked order.
///
/// # Safety
/// `grades` must point to `len` readable bytes (or be null with `len == 0`)
/// and `out` to a writable double.
#[no_mangle]
pub unsafe extern "C" fn vs_ndcg_at_10(grades: *const u8, len: usize, out: *mut f64) -> VsStatus {
    guard(|| {
        if out.is_null() || (grades.is_null() && len > 0) {
            return Err(Failure(VsStatus::NullArgument, "grades or out is null".into()));
        }
        let g: &[u8] = if len == 0 { &[] } else { std::slice::from_raw_parts(grades, len) };
        *out = ndcg_at_10(g);
        Ok(())
    })
}

/// Frees a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn vs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message of the last failed call on this thread; empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn vs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, a static string.
#[no_mangle]
pub extern "C" fn vs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
