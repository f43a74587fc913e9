//! C ABI over the stable-clt library.
//!
//! Objects cross the boundary as opaque handles created by `*_new` or
//! `*_from_json` and released by the matching `*_free`. Every fallible call
//! returns an [`ScltStatus`]; on failure the message is kept per thread and
//! can be copied out with [`sclt_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use stable_clt::attraction::{build_sn, gamma_n, Law, LawSpec};
use stable_clt::bounds::{bound_improved, bound_main, BoundReport, ConstantMode};
use stable_clt::distances::{ks_statistic, CdfTable};
use stable_clt::generator::{apply_generator, GeneratorForm};
use stable_clt::smooth::{SmoothFn, SmoothFnSpec};
use stable_clt::stable::{sample_stable, stable_cdf, stable_pdf};
use stable_clt::{Error, ErrorClass, QuadConfig, StableParams};

/// Status codes; the nonzero library codes match the CLI exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScltStatus {
    Ok = 0,
    Io = 1,
    InvalidInput = 2,
    Numerical = 3,
    Hypothesis = 4,
    NullPointer = 5,
    Panic = 6,
}

/// Stable law parameters.
pub struct ScltStable {
    params: StableParams,
}

/// A law attracted to a stable law.
pub struct ScltLaw {
    law: Law,
}

/// A test function with its derivatives.
pub struct ScltFunction {
    f: SmoothFn,
}

/// Tabulated stable distribution function for fast Kolmogorov distances.
pub struct ScltCdfTable {
    table: CdfTable,
}

/// Which operator form [`sclt_generator_apply`] evaluates.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScltForm {
    Raw = 0,
    Shifted = 1,
}

/// Constant convention for bound reports.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScltBoundMode {
    Unit = 0,
    Explicit = 1,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> ScltStatus {
    match e.class() {
        ErrorClass::InvalidInput => ScltStatus::InvalidInput,
        ErrorClass::Numerical => ScltStatus::Numerical,
        ErrorClass::Hypothesis => ScltStatus::Hypothesis,
        ErrorClass::Io => ScltStatus::Io,
    }
}

enum Failure {
    Lib(Error),
    Null(&'static str),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

/// Runs `body`, converting errors and panics into status codes.
fn guard<F: FnOnce() -> Result<(), Failure>>(body: F) -> ScltStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => ScltStatus::Ok,
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer passed as {what}"));
            ScltStatus::NullPointer
        }
        Err(_) => {
            set_error("internal panic".into());
            ScltStatus::Panic
        }
    }
}

unsafe fn get<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(what))
}

unsafe fn text<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure::Lib(Error::InvalidConfig(format!("{what} is not UTF-8: {e}"))))
}

unsafe fn buffer<'a>(p: *mut f64, len: usize, what: &'static str) -> Result<&'a mut [f64], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

fn boxed<T>(slot: &mut *mut T, value: T) {
    *slot = Box::into_raw(Box::new(value));
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

fn quad() -> QuadConfig {
    QuadConfig::default()
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `cap` bytes) and returns the full message length.
///
/// # Safety
/// `buf` must be null or point to `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn sclt_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && cap > 0 {
            let n = msg.len().min(cap - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// # Safety
/// `out_handle` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn sclt_stable_new(
    alpha: f64,
    beta: f64,
    sigma: f64,
    out_handle: *mut *mut ScltStable,
) -> ScltStatus {
    guard(|| {
        let slot = out(out_handle, "out_handle")?;
        boxed(
            slot,
            ScltStable {
                params: StableParams::new(alpha, beta, sigma)?,
            },
        );
        Ok(())
    })
}

/// # Safety
/// `handle` must be null or come from [`sclt_stable_new`] or [`sclt_law_limit`].
#[no_mangle]
pub unsafe extern "C" fn sclt_stable_free(handle: *mut ScltStable) {
    free(handle)
}

/// Density of the stable process at time `t`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sclt_stable_pdf(handle: *const ScltStable, t: f64, x: f64, out_value: *mut f64) -> ScltStatus {
    guard(|| {
        let h = get(handle, "handle")?;
        *out(out_value, "out_value")? = stable_pdf(&h.params, t, x, &quad())?;
        Ok(())
    })
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sclt_stable_cdf(handle: *const ScltStable, x: f64, out_value: *mut f64) -> ScltStatus {
    guard(|| {
        let h = get(handle, "handle")?;
        *out(out_value, "out_value")? = stable_cdf(&h.params, x, &quad())?;
        Ok(())
    })
}

/// Fills `values[0..count]` with stable draws from the stream `seed`.
///
/// # Safety
/// `values` must point to `count` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn sclt_stable_sample(
    handle: *const ScltStable,
    count: usize,
    seed: u64,
    values: *mut f64,
) -> ScltStatus {
    guard(|| {
        let h = get(handle, "handle")?;
        let dst = buffer(values, count, "values")?;
        if count > 0 {
            dst.copy_from_slice(&sample_stable(&h.params, count, seed)?.values);
        }
        Ok(())
    })
}

/// Builds a law from its JSON description, e.g. `{"family":"pareto","alpha":1.5}`.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out_handle` a valid slot.
#[no_mangle]
pub unsafe extern "C" fn sclt_law_from_json(json: *const c_char, out_handle: *mut *mut ScltLaw) -> ScltStatus {
    guard(|| {
        let spec: LawSpec = serde_json::from_str(text(json, "json")?).map_err(Error::from)?;
        let slot = out(out_handle, "out_handle")?;
        boxed(
            slot,
            ScltLaw {
                law: Law::from_spec(&spec, &quad())?,
            },
        );
        Ok(())
    })
}

/// # Safety
/// `handle` must be null or come from [`sclt_law_from_json`].
#[no_mangle]
pub unsafe extern "C" fn sclt_law_free(handle: *mut ScltLaw) {
    free(handle)
}

/// The stable limit of the normalized sums; free with [`sclt_stable_free`].
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sclt_law_limit(handle: *const ScltLaw, out_handle: *mut *mut ScltStable) -> ScltStatus {
    guard(|| {
        let h = get(handle, "handle")?;
        boxed(out(out_handle, "out_handle")?, ScltStable { params: h.law.limit() });
        Ok(())
    })
}

/// Fills `values[0..count]` with realizations of the normalized sum of `n`
/// draws.
///
/// # Safety
/// `values` must point to `count` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn sclt_law_sample_sum(
    handle: *const ScltLaw,
    n: usize,
    count: usize,
    seed: u64,
    values: *mut f64,
) -> ScltStatus {
    guard(|| {
        let h = get(handle, "handle")?;
        let dst = buffer(values, count, "values")?;
        if count > 0 {
            dst.copy_from_slice(&build_sn(&h.law, n, count, seed, &quad())?.values);
        }
        Ok(())
    })
}

/// Builds a test function from JSON, e.g. `{"kind":"step","center":0,"rho":2}`.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out_handle` a valid slot.
#[no_mangle]
pub unsafe extern "C" fn sclt_function_from_json(
    json: *const c_char,
    out_handle: *mut *mut ScltFunction,
) -> ScltStatus {
    guard(|| {
        let spec: SmoothFnSpec = serde_json::from_str(text(json, "json")?).map_err(Error::from)?;
        let slot = out(out_handle, "out_handle")?;
        boxed(slot, ScltFunction { f: spec.build()? });
        Ok(())
    })
}

/// # Safety
/// `handle` must be null or come from [`sclt_function_from_json`].
#[no_mangle]
pub unsafe extern "C" fn sclt_function_free(handle: *mut ScltFunction) {
    free(handle)
}

/// Derivative of order `order` (0 to 3) at `x`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sclt_function_eval(
    handle: *const ScltFunction,
    order: u32,
    x: f64,
    out_value: *mut f64,
) -> ScltStatus {
    guard(|| {
        let h = get(handle, "handle")?;
        if order > 3 {
            return Err(Error::OutOfRange(format!("derivative order must be at most 3, got {order}")).into());
        }
        *out(out_value, "out_value")? = h.f.derivative(order as usize, x);
        Ok(())
    })
}

/// The stable generator applied to a test function at `x`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sclt_generator_apply(
    stable: *const ScltStable,
    function: *const ScltFunction,
    x: f64,
    form: ScltForm,
    out_value: *mut f64,
) -> ScltStatus {
    guard(|| {
        let p = get(stable, "stable")?;
        let f = get(function, "function")?;
        let form = match form {
            ScltForm::Raw => GeneratorForm::Raw,
            ScltForm::Shifted => GeneratorForm::Shifted,
        };
        *out(out_value, "out_value")? = apply_generator(&f.f, &p.params, x, &quad(), form)?;
        Ok(())
    })
}

/// Total of the main (or, with `improved`, the improved) bound at `n`.
/// `function` supplies derivative norms and may be null in unit mode.
///
/// # Safety
/// `law` and `out_total` must be valid; `function` may be null.
#[no_mangle]
pub unsafe extern "C" fn sclt_bound_total(
    law: *const ScltLaw,
    function: *const ScltFunction,
    n: usize,
    mode: ScltBoundMode,
    improved: bool,
    out_total: *mut f64,
) -> ScltStatus {
    guard(|| {
        let l = get(law, "law")?;
        let attracted = l
            .law
            .as_attracted()
            .ok_or_else(|| Error::UnsupportedForm("bounds need a law in the domain of normal attraction".into()))?;
        let norms = function.as_ref().map(|f| f.f.norms()).unwrap_or([None; 4]);
        let mode = match mode {
            ScltBoundMode::Unit => ConstantMode::Unit,
            ScltBoundMode::Explicit => ConstantMode::Explicit,
        };
        let report: BoundReport = if improved {
            bound_improved(&norms, attracted, n, mode, &quad())?
        } else {
            bound_main(&norms, attracted, n, mode, &quad())?
        };
        *out(out_total, "out_total")? = report.total;
        Ok(())
    })
}

/// Builds the distribution-function table of a stable law.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sclt_cdf_table_new(
    stable: *const ScltStable,
    out_handle: *mut *mut ScltCdfTable,
) -> ScltStatus {
    guard(|| {
        let p = get(stable, "stable")?;
        let slot = out(out_handle, "out_handle")?;
        boxed(
            slot,
            ScltCdfTable {
                table: CdfTable::build(&p.params, &quad())?,
            },
        );
        Ok(())
    })
}

/// # Safety
/// `handle` must be null or come from [`sclt_cdf_table_new`].
#[no_mangle]
pub unsafe extern "C" fn sclt_cdf_table_free(handle: *mut ScltCdfTable) {
    free(handle)
}

/// Kolmogorov distance between the empirical law of `values` and the
/// tabulated stable law.
///
/// # Safety
/// `values` must point to `len` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn sclt_kolmogorov_distance(
    table: *const ScltCdfTable,
    values: *const f64,
    len: usize,
    out_value: *mut f64,
) -> ScltStatus {
    guard(|| {
        let t = get(table, "table")?;
        if values.is_null() {
            return Err(Failure::Null("values"));
        }
        let v = std::slice::from_raw_parts(values, len);
        *out(out_value, "out_value")? = ks_statistic(v, |x| t.table.eval(x))?.value;
        Ok(())
    })
}

/// The normalizing level of the log-tail family.
///
/// # Safety
/// `out_value` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sclt_gamma_n(alpha: f64, delta: f64, k0: f64, n: usize, out_value: *mut f64) -> ScltStatus {
    guard(|| {
        *out(out_value, "out_value")? = gamma_n(alpha, delta, k0, n)?.gamma;
        Ok(())
    })
}
