//! C ABI over the clockpress library: opaque handles, integer status
//! codes, and a thread-local last-error message.
//!
//! Every entry point returns a [`CpStatus`]; results travel through out
//! pointers that are written only on `CP_STATUS_OK`. Handles are created
//! and released by `cp_*_new` / `cp_*_free` pairs and must not be shared
//! across threads without external synchronization. Panics never cross
//! the boundary; they are caught and reported as `CP_STATUS_PANIC`.
//!
//! The matching header is generated into `include/clockpress.h` by the
//! build script.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use clockpress::clockstate::{build_block_state, trace_distance, BlockState, ClockParams};
use clockpress::compressor::{
    compression_error, decode_known, decode_unknown, encode_known, encode_unknown, error_bound,
    make_partition, memory_shape, starved_run, CompressedRecord, Mode, TailRestriction,
};
use clockpress::repkit::Spin;
use clockpress::Error;

/// Status code returned by every function in this interface.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CpStatus {
    /// Success; out parameters are valid.
    Ok = 0,
    /// An argument or configuration value is invalid.
    Argument = 1,
    /// The request exceeds a documented size limit.
    Size = 2,
    /// An internal numerical tolerance was violated.
    Numeric = 3,
    /// A required pointer was null.
    NullPointer = 4,
    /// An internal panic was caught at the boundary.
    Panic = 5,
    /// An i/o operation failed.
    Io = 6,
}

/// Opaque block-diagonal state handle.
pub struct CpBlockState {
    inner: BlockState,
}

/// Opaque compressed-record handle; remembers the partition exponent it
/// was encoded with so decoding needs no extra context.
pub struct CpRecord {
    inner: CompressedRecord,
    x: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).expect("nul bytes were stripped");
    });
}

fn fail(err: Error) -> CpStatus {
    set_error(&err.to_string());
    match err {
        Error::Argument(_) | Error::Config(_) => CpStatus::Argument,
        Error::SizeRefusal(_) => CpStatus::Size,
        Error::Numeric(_) => CpStatus::Numeric,
        Error::Io(_) => CpStatus::Io,
    }
}

fn null_pointer(name: &str) -> CpStatus {
    set_error(&format!("null pointer: {name}"));
    CpStatus::NullPointer
}

fn guard(body: impl FnOnce() -> CpStatus) -> CpStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic caught at the C boundary");
            CpStatus::Panic
        }
    }
}

fn parse_mode(mode: i32) -> Result<Mode, CpStatus> {
    match mode {
        0 => Ok(Mode::Known),
        1 => Ok(Mode::Unknown),
        other => {
            set_error(&format!("mode {other} is not 0 (known) or 1 (unknown)"));
            Err(CpStatus::Argument)
        }
    }
}

fn parse_restriction(restrict: i32) -> Result<TailRestriction, CpStatus> {
    match restrict {
        0 => Ok(TailRestriction::Auto),
        1 => Ok(TailRestriction::Always),
        2 => Ok(TailRestriction::Never),
        other => {
            set_error(&format!(
                "tail restriction {other} is not 0 (auto), 1 (always) or 2 (never)"
            ));
            Err(CpStatus::Argument)
        }
    }
}

/// Version string of the library; static storage, never freed.
#[no_mangle]
pub extern "C" fn cp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the most recent failure on the calling thread, empty if
/// none. The pointer stays valid until the next failing call on the
/// same thread.
#[no_mangle]
pub extern "C" fn cp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Builds the block decomposition of the n-copy clock state with mixing
/// parameter `s`, spectrum `p` and time `t`, storing a new handle in
/// `*out`.
///
/// # Safety
///
/// `out` must be valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn cp_block_state_new(
    n: u32,
    s: f64,
    p: f64,
    t: f64,
    out: *mut *mut CpBlockState,
) -> CpStatus {
    guard(|| {
        if out.is_null() {
            return null_pointer("out");
        }
        let params = match ClockParams::new(n, s, p, t) {
            Ok(p) => p,
            Err(e) => return fail(e),
        };
        match build_block_state(params) {
            Ok(inner) => {
                unsafe { out.write(Box::into_raw(Box::new(CpBlockState { inner }))) };
                CpStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Releases a block-state handle; a null pointer is a no-op.
///
/// # Safety
///
/// `state` must be null or a pointer from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cp_block_state_free(state: *mut CpBlockState) {
    if !state.is_null() {
        drop(unsafe { Box::from_raw(state) });
    }
}

/// Number of copies n the state was built from.
///
/// # Safety
///
/// `state` must be a live handle; `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn cp_block_state_copies(
    state: *const CpBlockState,
    out: *mut u32,
) -> CpStatus {
    guard(|| {
        let Some(state) = (unsafe { state.as_ref() }) else {
            return null_pointer("state");
        };
        if out.is_null() {
            return null_pointer("out");
        }
        unsafe { out.write(state.inner.n) };
        CpStatus::Ok
    })
}

/// Weight q_J of the block with doubled total spin `twice_j`; zero when
/// the block is absent.
///
/// # Safety
///
/// `state` must be a live handle; `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn cp_block_state_weight(
    state: *const CpBlockState,
    twice_j: u32,
    out: *mut f64,
) -> CpStatus {
    guard(|| {
        let Some(state) = (unsafe { state.as_ref() }) else {
            return null_pointer("state");
        };
        if out.is_null() {
            return null_pointer("out");
        }
        let weight = state
            .inner
            .block(Spin::new(twice_j))
            .map_or(0.0, |b| b.weight);
        unsafe { out.write(weight) };
        CpStatus::Ok
    })
}

/// Trace distance between two block states over the same copy count.
///
/// # Safety
///
/// `a` and `b` must be live handles; `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn cp_trace_distance(
    a: *const CpBlockState,
    b: *const CpBlockState,
    out: *mut f64,
) -> CpStatus {
    guard(|| {
        let Some(a) = (unsafe { a.as_ref() }) else {
            return null_pointer("a");
        };
        let Some(b) = (unsafe { b.as_ref() }) else {
            return null_pointer("b");
        };
        if out.is_null() {
            return null_pointer("out");
        }
        match trace_distance(&a.inner, &b.inner) {
            Ok(d) => {
                unsafe { out.write(d) };
                CpStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Compresses a block state. `mode` is 0 (known spectrum, using `p`) or
/// 1 (unknown spectrum, using the interval partition with exponent `x`);
/// `s` is the mixing parameter the windows are centred on. Stores a new
/// record handle in `*out`.
///
/// # Safety
///
/// `state` must be a live handle; `out` must be valid for writing one
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn cp_encode(
    state: *const CpBlockState,
    mode: i32,
    p: f64,
    s: f64,
    x: f64,
    out: *mut *mut CpRecord,
) -> CpStatus {
    guard(|| {
        let Some(state) = (unsafe { state.as_ref() }) else {
            return null_pointer("state");
        };
        if out.is_null() {
            return null_pointer("out");
        }
        let mode = match parse_mode(mode) {
            Ok(m) => m,
            Err(status) => return status,
        };
        let encoded = match mode {
            Mode::Known => encode_known(&state.inner, p, s),
            Mode::Unknown => make_partition(state.inner.n, x)
                .and_then(|partition| encode_unknown(&state.inner, &partition, s)),
        };
        match encoded {
            Ok(inner) => {
                unsafe { out.write(Box::into_raw(Box::new(CpRecord { inner, x }))) };
                CpStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Releases a record handle; a null pointer is a no-op.
///
/// # Safety
///
/// `rec` must be null or a pointer from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cp_record_free(rec: *mut CpRecord) {
    if !rec.is_null() {
        drop(unsafe { Box::from_raw(rec) });
    }
}

/// Memory footprint of a record: the quantum register dimension and the
/// number of classical index values.
///
/// # Safety
///
/// `rec` must be a live handle; both out pointers must be valid for
/// writing.
#[no_mangle]
pub unsafe extern "C" fn cp_record_dims(
    rec: *const CpRecord,
    quantum_dim: *mut u64,
    classical_count: *mut u64,
) -> CpStatus {
    guard(|| {
        let Some(rec) = (unsafe { rec.as_ref() }) else {
            return null_pointer("rec");
        };
        if quantum_dim.is_null() {
            return null_pointer("quantum_dim");
        }
        if classical_count.is_null() {
            return null_pointer("classical_count");
        }
        unsafe {
            quantum_dim.write(rec.inner.quantum_dim as u64);
            classical_count.write(rec.inner.classical_count as u64);
        }
        CpStatus::Ok
    })
}

/// Reconstructs a block state from a record, storing a new handle in
/// `*out`. All decoding context (copy count, mode, spectrum, partition
/// exponent) travels inside the record.
///
/// # Safety
///
/// `rec` must be a live handle; `out` must be valid for writing one
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn cp_decode(rec: *const CpRecord, out: *mut *mut CpBlockState) -> CpStatus {
    guard(|| {
        let Some(rec) = (unsafe { rec.as_ref() }) else {
            return null_pointer("rec");
        };
        if out.is_null() {
            return null_pointer("out");
        }
        let n = rec.inner.n;
        let decoded = match rec.inner.mode {
            Mode::Known => decode_known(&rec.inner, n, rec.inner.p, rec.inner.s),
            Mode::Unknown => make_partition(n, rec.x)
                .and_then(|partition| decode_unknown(&rec.inner, &partition, n)),
        };
        match decoded {
            Ok(inner) => {
                unsafe { out.write(Box::into_raw(Box::new(CpBlockState { inner }))) };
                CpStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Exact compression error of the full pipeline at the given parameters,
/// maximized over the built-in time grid. `mode` is 0 (known) or 1
/// (unknown); `restriction` is 0 (auto), 1 (always) or 2 (never) and
/// controls the large-n tail restriction. Writes the streamed error to
/// `*epsilon` and the excluded-weight allowance to `*tail_bound`.
///
/// # Safety
///
/// Both out pointers must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn cp_compression_error(
    n: u32,
    s: f64,
    p: f64,
    mode: i32,
    x: f64,
    restriction: i32,
    epsilon: *mut f64,
    tail_bound: *mut f64,
) -> CpStatus {
    guard(|| {
        if epsilon.is_null() {
            return null_pointer("epsilon");
        }
        if tail_bound.is_null() {
            return null_pointer("tail_bound");
        }
        let mode = match parse_mode(mode) {
            Ok(m) => m,
            Err(status) => return status,
        };
        let restrict = match parse_restriction(restriction) {
            Ok(r) => r,
            Err(status) => return status,
        };
        let params = match ClockParams::new(n, s, p, 0.0) {
            Ok(p) => p,
            Err(e) => return fail(e),
        };
        match compression_error(params, mode, x, restrict) {
            Ok(est) => {
                unsafe {
                    epsilon.write(est.epsilon);
                    tail_bound.write(est.tail_bound);
                }
                CpStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Known-spectrum pipeline error with the window half-width forced to
/// n^w / 2, clipped to [0, 1].
///
/// # Safety
///
/// `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn cp_starved_run(
    n: u32,
    s: f64,
    p: f64,
    width_exponent: f64,
    out: *mut f64,
) -> CpStatus {
    guard(|| {
        if out.is_null() {
            return null_pointer("out");
        }
        let params = match ClockParams::new(n, s, p, 0.0) {
            Ok(p) => p,
            Err(e) => return fail(e),
        };
        match starved_run(params, width_exponent) {
            Ok(eps) => {
                unsafe { out.write(eps) };
                CpStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Analytic leading-order error bound for n copies at spectrum p.
///
/// # Safety
///
/// `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn cp_error_bound(n: u32, p: f64, out: *mut f64) -> CpStatus {
    guard(|| {
        if out.is_null() {
            return null_pointer("out");
        }
        match error_bound(n, p) {
            Ok(b) => {
                unsafe { out.write(b) };
                CpStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Memory dimensions of the protocol without running it: the window
/// size at the reference spin and the classical index count. `mode` is
/// 0 (known) or 1 (unknown).
///
/// # Safety
///
/// Both out pointers must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn cp_memory_shape(
    n: u32,
    p: f64,
    s: f64,
    x: f64,
    mode: i32,
    quantum_dim: *mut u64,
    classical_count: *mut u64,
) -> CpStatus {
    guard(|| {
        if quantum_dim.is_null() {
            return null_pointer("quantum_dim");
        }
        if classical_count.is_null() {
            return null_pointer("classical_count");
        }
        let mode = match parse_mode(mode) {
            Ok(m) => m,
            Err(status) => return status,
        };
        match memory_shape(n, p, s, x, mode) {
            Ok((qdim, ccount)) => {
                unsafe {
                    quantum_dim.write(qdim as u64);
                    classical_count.write(ccount as u64);
                }
                CpStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}
