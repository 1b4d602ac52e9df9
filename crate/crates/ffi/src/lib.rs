//! C ABI over `tmformer`.
//!
//! Objects cross the boundary as opaque heap handles created by a
//! constructor and released by the matching `*_free`. Every entry point
//! returns a [`TmfStatus`] and writes results through out-pointers; on
//! failure, [`tmf_last_error_message`] describes the error. Panics never
//! cross the boundary: they are caught and reported as `TMF_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use tmformer::bounds::{self, ModelCapacity};
use tmformer::compiler::{self, CompiledProgram, SimTrace};
use tmformer::machines;
use tmformer::propagation;
use tmformer::sim::QuantizationConfig;
use tmformer::tm::{parse_spec, ValidatedSpec};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TmfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    ParseError = 4,
    CompileError = 5,
    SimulationError = 6,
    BoundsError = 7,
    OutOfRange = 8,
    Panic = 99,
}

/// Parsed and validated machine.
pub struct TmfSpec(ValidatedSpec);

/// Compiled single-layer program.
pub struct TmfProgram(CompiledProgram);

/// Result of a simulation run.
pub struct TmfTrace(SimTrace);

/// One simulated step.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct TmfStepRecord {
    pub step: usize,
    /// 1 when the decoded window equals the reference window.
    pub agreement: u8,
    /// 1 when the decoded output could be read back as a window.
    pub decoded: u8,
    pub distance: f64,
    pub deviation: f64,
    pub error_bound: f64,
    pub n_ops: u64,
    pub saturations: u64,
}

/// Capacity constants of the learning bounds.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct TmfCapacity {
    pub b_spec: f64,
    pub l_phi: f64,
    pub l_max: u32,
    pub r_x: f64,
    pub k: u64,
    pub loss_lipschitz: f64,
    pub loss_bound: f64,
}

impl From<TmfCapacity> for ModelCapacity {
    fn from(c: TmfCapacity) -> Self {
        ModelCapacity {
            b_spec: c.b_spec,
            l_phi: c.l_phi,
            l_max: c.l_max,
            r_x: c.r_x,
            k: c.k,
            loss_lipschitz: c.loss_lipschitz,
            loss_bound: c.loss_bound,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

type Failure = (TmfStatus, String);

fn fail<E: std::fmt::Display>(status: TmfStatus) -> impl FnOnce(E) -> Failure {
    move |e| (status, e.to_string())
}

fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> TmfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            TmfStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(&format!("panic: {msg}"));
            TmfStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T) -> Result<&'a T, Failure> {
    p.as_ref().ok_or((TmfStatus::NullPointer, "null pointer argument".into()))
}

unsafe fn out<'a, T>(p: *mut T) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or((TmfStatus::NullPointer, "null output pointer".into()))
}

unsafe fn string<'a>(p: *const c_char) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err((TmfStatus::NullPointer, "null string argument".into()));
    }
    CStr::from_ptr(p).to_str().map_err(fail(TmfStatus::InvalidUtf8))
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next `tmf_*` call on the same thread.
#[no_mangle]
pub extern "C" fn tmf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Parse a machine description.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tmf_spec_parse(text: *const c_char, out_spec: *mut *mut TmfSpec) -> TmfStatus {
    guard(|| {
        let slot = out(out_spec)?;
        *slot = ptr::null_mut();
        let spec = parse_spec(string(text)?).map_err(fail(TmfStatus::ParseError))?;
        *slot = boxed(TmfSpec(spec));
        Ok(())
    })
}

/// Look up a bundled machine by name (`inc`, `flip`, `copy`, `shift`, `loop`).
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tmf_spec_builtin(name: *const c_char, out_spec: *mut *mut TmfSpec) -> TmfStatus {
    guard(|| {
        let slot = out(out_spec)?;
        *slot = ptr::null_mut();
        let name = string(name)?;
        let b = machines::builtin(name).ok_or((TmfStatus::InvalidArgument, format!("no builtin machine `{name}`")))?;
        *slot = boxed(TmfSpec(b.spec()));
        Ok(())
    })
}

/// Number of states and tape symbols.
///
/// # Safety
/// `spec` must come from `tmf_spec_*`; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn tmf_spec_dims(spec: *const TmfSpec, n_states: *mut usize, n_symbols: *mut usize) -> TmfStatus {
    guard(|| {
        let s = &deref(spec)?.0;
        *out(n_states)? = s.n_states();
        *out(n_symbols)? = s.n_symbols();
        Ok(())
    })
}

/// # Safety
/// `spec` must be null or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn tmf_spec_free(spec: *mut TmfSpec) {
    let _ = catch_unwind(AssertUnwindSafe(|| {
        if !spec.is_null() {
            drop(Box::from_raw(spec));
        }
    }));
}

/// Compile `spec` with window size `k`. `levels == 0` selects exact
/// arithmetic; otherwise values are rounded to `levels` points on `[-range, range]`.
///
/// # Safety
/// `spec` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tmf_compile(
    spec: *const TmfSpec,
    k: usize,
    levels: u64,
    range: f64,
    out_program: *mut *mut TmfProgram,
) -> TmfStatus {
    guard(|| {
        let slot = out(out_program)?;
        *slot = ptr::null_mut();
        let spec = &deref(spec)?.0;
        let qc = if levels == 0 {
            QuantizationConfig::unquantized()
        } else {
            QuantizationConfig::new(levels, range).map_err(fail(TmfStatus::InvalidArgument))?
        };
        let program = compiler::compile(spec, k, qc).map_err(fail(TmfStatus::CompileError))?;
        *slot = boxed(TmfProgram(program));
        Ok(())
    })
}

/// Embedding width `d` and FFN width `h`.
///
/// # Safety
/// `program` must be a live handle; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn tmf_program_dims(program: *const TmfProgram, d: *mut usize, hidden: *mut usize) -> TmfStatus {
    guard(|| {
        let p = &deref(program)?.0;
        *out(d)? = p.layout.d;
        *out(hidden)? = p.hidden;
        Ok(())
    })
}

/// # Safety
/// `program` must be null or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn tmf_program_free(program: *mut TmfProgram) {
    let _ = catch_unwind(AssertUnwindSafe(|| {
        if !program.is_null() {
            drop(Box::from_raw(program));
        }
    }));
}

/// Simulate up to `steps` transitions on `input`, a word of
/// whitespace-separated or single-character symbols.
///
/// # Safety
/// `program` must be a live handle, `input` a NUL-terminated string and
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tmf_simulate(
    program: *const TmfProgram,
    input: *const c_char,
    steps: usize,
    out_trace: *mut *mut TmfTrace,
) -> TmfStatus {
    guard(|| {
        let slot = out(out_trace)?;
        *slot = ptr::null_mut();
        let p = &deref(program)?.0;
        let word = p.spec.parse_input(string(input)?).map_err(fail(TmfStatus::InvalidArgument))?;
        let trace = compiler::simulate(p, &word, steps).map_err(fail(TmfStatus::SimulationError))?;
        *slot = boxed(TmfTrace(trace));
        Ok(())
    })
}

/// Number of records, including the initial one.
///
/// # Safety
/// `trace` must be a live handle; `len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tmf_trace_len(trace: *const TmfTrace, len: *mut usize) -> TmfStatus {
    guard(|| {
        *out(len)? = deref(trace)?.0.records.len();
        Ok(())
    })
}

/// Whether the reference machine reached its accepting state.
///
/// # Safety
/// `trace` must be a live handle; `halted` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tmf_trace_halted(trace: *const TmfTrace, halted: *mut u8) -> TmfStatus {
    guard(|| {
        *out(halted)? = u8::from(deref(trace)?.0.halted);
        Ok(())
    })
}

/// First step whose decoded window disagrees with the reference, or -1.
///
/// # Safety
/// `trace` must be a live handle; `step` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tmf_trace_first_disagreement(trace: *const TmfTrace, step: *mut i64) -> TmfStatus {
    guard(|| {
        *out(step)? = deref(trace)?.0.first_disagreement().map_or(-1, |s| s as i64);
        Ok(())
    })
}

/// Copy record `index` into `record`.
///
/// # Safety
/// `trace` must be a live handle; `record` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tmf_trace_step(trace: *const TmfTrace, index: usize, record: *mut TmfStepRecord) -> TmfStatus {
    guard(|| {
        let t = &deref(trace)?.0;
        let slot = out(record)?;
        let r = t.records.get(index).ok_or((
            TmfStatus::OutOfRange,
            format!("record {index} out of range (len {})", t.records.len()),
        ))?;
        *slot = TmfStepRecord {
            step: r.step,
            agreement: u8::from(r.agreement),
            decoded: u8::from(r.decoded.is_some()),
            distance: r.distance,
            deviation: r.deviation,
            error_bound: r.error_bound,
            n_ops: r.n_ops,
            saturations: r.saturations,
        };
        Ok(())
    })
}

/// # Safety
/// `trace` must be null or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn tmf_trace_free(trace: *mut TmfTrace) {
    let _ = catch_unwind(AssertUnwindSafe(|| {
        if !trace.is_null() {
            drop(Box::from_raw(trace));
        }
    }));
}

/// All capacity constants set to 1.
#[no_mangle]
pub extern "C" fn tmf_capacity_unit() -> TmfCapacity {
    let u = ModelCapacity::unit();
    TmfCapacity {
        b_spec: u.b_spec,
        l_phi: u.l_phi,
        l_max: u.l_max,
        r_x: u.r_x,
        k: u.k,
        loss_lipschitz: u.loss_lipschitz,
        loss_bound: u.loss_bound,
    }
}

/// Rademacher complexity bound for `m` samples.
///
/// # Safety
/// `cap` must be readable and `value` writable.
#[no_mangle]
pub unsafe extern "C" fn tmf_rademacher_bound(cap: *const TmfCapacity, m: u64, value: *mut f64) -> TmfStatus {
    guard(|| {
        let cap = ModelCapacity::from(*deref(cap)?);
        *out(value)? = bounds::rademacher_bound(&cap, m).map_err(fail(TmfStatus::BoundsError))?;
        Ok(())
    })
}

/// Next-token sample complexity.
///
/// # Safety
/// `cap` must be readable and `value` writable.
#[no_mangle]
pub unsafe extern "C" fn tmf_sample_complexity_next_token(
    cap: *const TmfCapacity,
    eps: f64,
    delta: f64,
    value: *mut f64,
) -> TmfStatus {
    guard(|| {
        let cap = ModelCapacity::from(*deref(cap)?);
        let sc = bounds::sample_complexity_next_token(&cap, eps, delta).map_err(fail(TmfStatus::BoundsError))?;
        *out(value)? = sc.m;
        Ok(())
    })
}

/// Sample complexity of a length-`total` sequence learned in `rounds` rounds.
///
/// # Safety
/// `cap` must be readable and `value` writable.
#[no_mangle]
pub unsafe extern "C" fn tmf_sample_complexity_multiround(
    cap: *const TmfCapacity,
    eps: f64,
    delta: f64,
    total: usize,
    rounds: usize,
    value: *mut f64,
) -> TmfStatus {
    guard(|| {
        let cap = ModelCapacity::from(*deref(cap)?);
        let sc = bounds::sample_complexity_multiround(&cap, eps, delta, total, rounds)
            .map_err(fail(TmfStatus::BoundsError))?;
        *out(value)? = sc.m;
        Ok(())
    })
}

/// Cumulative error bound under uniform propagation.
///
/// # Safety
/// `value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tmf_uniform_error_bound(
    gamma: f64,
    lambda: f64,
    eta: f64,
    rounds: usize,
    value: *mut f64,
) -> TmfStatus {
    guard(|| {
        *out(value)? =
            propagation::uniform_closed_form(gamma, lambda, eta, rounds).map_err(fail(TmfStatus::InvalidArgument))?;
        Ok(())
    })
}
