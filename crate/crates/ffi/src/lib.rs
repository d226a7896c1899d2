//! C ABI for statfield.
//!
//! Objects are opaque handles created by `sf_*_new` / `sf_*_from_*` and
//! released with the matching `sf_*_free`. Every fallible function returns
//! an [`SfStatus`]; on failure a message is available from
//! [`sf_last_error_message`] on the same thread until the next call.
//!
//! Matrices are written row-major into caller-provided `re` / `im`
//! buffers of length `n * n`. Ensembles are written sample-major, `M * n`
//! entries. Strings returned by the library are freed with [`sf_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use num_complex::Complex64;
use statfield::cli::{run_scenario, RunReport, Scenario};
use statfield::covariance_analysis::gamma_analytic;
use statfield::field_synthesis::{FieldEnsemble, GosMeasure};
use statfield::grid_calculus::{GridSpec, TestFunction};
use statfield::spectral_measure::{AtomSet, MeasureConfig, SpectralMeasure};
use statfield::{fixtures, Error};

/// Result codes of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SfStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// An argument was out of range or inconsistent with a handle.
    InvalidArgument = 3,
    /// A measure was malformed or had an indefinite weight.
    InvalidMeasure = 4,
    /// JSON input failed to parse or validate.
    Config = 5,
    /// An output buffer was too small.
    BufferTooSmall = 6,
    /// A numerical routine could not produce a result.
    Numerical = 7,
    /// A size limit was exceeded.
    ResourceLimit = 8,
    Io = 9,
    /// An internal panic was caught at the boundary.
    Internal = 10,
}

/// Uniform grid over `[-L, L)^d`.
pub struct SfGrid(GridSpec);

/// Matrix-valued atomic spectral measure.
pub struct SfMeasure(SpectralMeasure);

/// Gramian orthogonally scattered measure realized by a seeded ensemble.
pub struct SfGos(GosMeasure);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> SfStatus {
    match e {
        Error::Config { .. } => SfStatus::Config,
        Error::NonHermitian { .. } | Error::IndefiniteAtom { .. } | Error::InvalidMeasure(_) => SfStatus::InvalidMeasure,
        Error::MemoryGuard { .. } => SfStatus::ResourceLimit,
        Error::Underdetermined { .. } | Error::IllConditioned { .. } => SfStatus::Numerical,
        Error::Io(_) => SfStatus::Io,
        _ => SfStatus::InvalidArgument,
    }
}

struct Failure(SfStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn fail<T>(status: SfStatus, msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure(status, msg.into()))
}

/// Runs `f`, records any failure and converts panics into `Internal`.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SfStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SfStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal error: {msg}"));
            SfStatus::Internal
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().map_or_else(|| fail(SfStatus::NullPointer, format!("{name} is null")), Ok)
}

unsafe fn out_ptr<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().map_or_else(|| fail(SfStatus::NullPointer, format!("{name} is null")), Ok)
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return fail(SfStatus::NullPointer, format!("{name} is null"));
    }
    CStr::from_ptr(p)
        .to_str()
        .or_else(|_| fail(SfStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return fail(SfStatus::NullPointer, format!("{name} is null"));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// Writes complex values into split buffers of capacity `len`.
unsafe fn write_complex(values: &[Complex64], re: *mut f64, im: *mut f64, len: usize) -> Result<(), Failure> {
    if re.is_null() || im.is_null() {
        return fail(SfStatus::NullPointer, "output buffer is null");
    }
    if len < values.len() {
        return fail(SfStatus::BufferTooSmall, format!("need {} entries, buffer holds {len}", values.len()));
    }
    let re = std::slice::from_raw_parts_mut(re, values.len());
    let im = std::slice::from_raw_parts_mut(im, values.len());
    for (k, v) in values.iter().enumerate() {
        re[k] = v.re;
        im[k] = v.im;
    }
    Ok(())
}

fn into_handle<T>(value: T, out: &mut *mut T) {
    *out = Box::into_raw(Box::new(value));
}

unsafe fn bump(grid: &GridSpec, center: *const f64, radius: f64) -> Result<TestFunction, Failure> {
    let center = slice_arg(center, grid.dim(), "center")?;
    Ok(TestFunction::make_bump(center, radius, grid)?)
}

fn matrix_entries(m: &statfield::operator_algebra::OperatorValue) -> Vec<Complex64> {
    let n = m.dim();
    let a = m.matrix();
    (0..n).flat_map(|r| (0..n).map(move |c| a[(r, c)])).collect()
}

fn ensemble_entries(e: &FieldEnsemble) -> Vec<Complex64> {
    e.samples().flat_map(|s| s.iter().copied()).collect()
}

fn json_string(v: &RunReport) -> Result<*mut c_char, Failure> {
    let text = serde_json::to_string(v).or_else(|e| fail(SfStatus::Internal, e.to_string()))?;
    CString::new(text)
        .map(CString::into_raw)
        .or_else(|e| fail(SfStatus::Internal, e.to_string()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null. Valid until
/// the next library call on the same thread.
#[no_mangle]
pub extern "C" fn sf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by the library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn sf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Creates a grid with `points_per_axis` points per axis over `[-half_width, half_width)^dim`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sf_grid_new(dim: usize, half_width: f64, points_per_axis: usize, out: *mut *mut SfGrid) -> SfStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        into_handle(SfGrid(GridSpec::new(dim, half_width, points_per_axis)?), out);
        Ok(())
    })
}

/// # Safety
/// `grid` must be null or a live handle from [`sf_grid_new`].
#[no_mangle]
pub unsafe extern "C" fn sf_grid_free(grid: *mut SfGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// Parses a measure from its JSON form
/// `{"d":…, "n":…, "atoms":[{"omega":[…], "weight_re":[[…]], "weight_im":[[…]]}]}`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sf_measure_from_json(json: *const c_char, out: *mut *mut SfMeasure) -> SfStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let config: MeasureConfig = statfield::cli::parse_json(str_arg(json, "json")?)?;
        into_handle(SfMeasure(config.build()?), out);
        Ok(())
    })
}

/// The three-atom reference measure on the line with 2x2 weights.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sf_measure_fixture(out: *mut *mut SfMeasure) -> SfStatus {
    guard(|| {
        into_handle(SfMeasure(fixtures::measure()), out_ptr(out, "out")?);
        Ok(())
    })
}

/// # Safety
/// `measure` must be null or a live measure handle.
#[no_mangle]
pub unsafe extern "C" fn sf_measure_free(measure: *mut SfMeasure) {
    if !measure.is_null() {
        drop(Box::from_raw(measure));
    }
}

/// Number of atoms, or 0 for a null handle.
///
/// # Safety
/// `measure` must be null or a live measure handle.
#[no_mangle]
pub unsafe extern "C" fn sf_measure_atom_count(measure: *const SfMeasure) -> usize {
    measure.as_ref().map_or(0, |m| m.0.len())
}

/// Dimension `n` of the value space, or 0 for a null handle.
///
/// # Safety
/// `measure` must be null or a live measure handle.
#[no_mangle]
pub unsafe extern "C" fn sf_measure_dim_h(measure: *const SfMeasure) -> usize {
    measure.as_ref().map_or(0, |m| m.0.dim_h())
}

/// `K(phi)` for the bump of the given center and radius.
///
/// # Safety
/// Handles must be live, `center` must hold `dim` values and `re`, `im`
/// must hold `len >= n * n` values.
#[no_mangle]
pub unsafe extern "C" fn sf_k_of_bump(
    measure: *const SfMeasure,
    grid: *const SfGrid,
    center: *const f64,
    radius: f64,
    re: *mut f64,
    im: *mut f64,
    len: usize,
) -> SfStatus {
    guard(|| {
        let m = &deref(measure, "measure")?.0;
        let g = &deref(grid, "grid")?.0;
        let k = m.k_of(&bump(g, center, radius)?)?;
        write_complex(&matrix_entries(&k), re, im, len)
    })
}

/// Covariance `Gamma(phi, psi) = K(phi * psi~)` of two bumps.
///
/// # Safety
/// As for [`sf_k_of_bump`], with two centers.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn sf_gamma_bumps(
    measure: *const SfMeasure,
    grid: *const SfGrid,
    center_phi: *const f64,
    radius_phi: f64,
    center_psi: *const f64,
    radius_psi: f64,
    re: *mut f64,
    im: *mut f64,
    len: usize,
) -> SfStatus {
    guard(|| {
        let m = &deref(measure, "measure")?.0;
        let g = &deref(grid, "grid")?.0;
        let phi = bump(g, center_phi, radius_phi)?;
        let psi = bump(g, center_psi, radius_psi)?;
        write_complex(&matrix_entries(&gamma_analytic(m, &phi, &psi)?), re, im, len)
    })
}

/// Draws the gos measure of `measure` with `ensemble_size` samples from `seed`.
///
/// # Safety
/// `measure` must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn sf_gos_new(measure: *const SfMeasure, ensemble_size: usize, seed: u64, out: *mut *mut SfGos) -> SfStatus {
    guard(|| {
        let m = deref(measure, "measure")?.0.clone();
        let out = out_ptr(out, "out")?;
        into_handle(SfGos(GosMeasure::new(m, ensemble_size, seed)?), out);
        Ok(())
    })
}

/// # Safety
/// `gos` must be null or a live gos handle.
#[no_mangle]
pub unsafe extern "C" fn sf_gos_free(gos: *mut SfGos) {
    if !gos.is_null() {
        drop(Box::from_raw(gos));
    }
}

/// Ensemble size `M`, or 0 for a null handle.
///
/// # Safety
/// `gos` must be null or a live gos handle.
#[no_mangle]
pub unsafe extern "C" fn sf_gos_ensemble_size(gos: *const SfGos) -> usize {
    gos.as_ref().map_or(0, |g| g.0.ensemble_size())
}

/// `xi(A)` for the atom set listed in `atoms`, written as `M * n` entries.
///
/// # Safety
/// `gos` must be live, `atoms` must hold `count` indices and `re`, `im`
/// must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn sf_gos_xi_of_set(
    gos: *const SfGos,
    atoms: *const usize,
    count: usize,
    re: *mut f64,
    im: *mut f64,
    len: usize,
) -> SfStatus {
    guard(|| {
        let g = &deref(gos, "gos")?.0;
        let set: AtomSet = slice_arg(atoms, count, "atoms")?.iter().copied().collect();
        write_complex(&ensemble_entries(&g.xi_of_set(&set)?), re, im, len)
    })
}

/// The field `U_phi` at a bump, written as `M * n` entries.
///
/// # Safety
/// Handles must be live, `center` must hold `dim` values and `re`, `im`
/// must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn sf_gos_evaluate_bump(
    gos: *const SfGos,
    grid: *const SfGrid,
    center: *const f64,
    radius: f64,
    re: *mut f64,
    im: *mut f64,
    len: usize,
) -> SfStatus {
    guard(|| {
        let g = &deref(gos, "gos")?.0;
        let grid = &deref(grid, "grid")?.0;
        let u = g.evaluate_field(&bump(grid, center, radius)?)?;
        write_complex(&ensemble_entries(&u), re, im, len)
    })
}

/// Runs a scenario given as JSON and returns the report as a JSON string.
/// A scenario whose checks fail still returns `SF_STATUS_OK`; read
/// `overall_pass` from the report.
///
/// # Safety
/// `config_json` must be a NUL-terminated string and `out_json` valid.
#[no_mangle]
pub unsafe extern "C" fn sf_run_scenario(config_json: *const c_char, out_json: *mut *mut c_char) -> SfStatus {
    guard(|| {
        let out = out_ptr(out_json, "out_json")?;
        let s = Scenario::from_json(str_arg(config_json, "config_json")?)?;
        *out = json_string(&run_scenario(&s)?.report)?;
        Ok(())
    })
}

/// Runs every registered check on the reference measure.
///
/// # Safety
/// `out_json` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sf_run_demo(seed: u64, ensemble_size: usize, out_json: *mut *mut c_char) -> SfStatus {
    guard(|| {
        let out = out_ptr(out_json, "out_json")?;
        let s = Scenario::fixture(seed, ensemble_size)?;
        *out = json_string(&run_scenario(&s)?.report)?;
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn last_error() -> String {
        let p = sf_last_error_message();
        assert!(!p.is_null());
        unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
    }

    #[test]
    fn null_arguments_are_reported() {
        unsafe {
            assert_eq!(sf_measure_fixture(ptr::null_mut()), SfStatus::NullPointer);
            assert!(last_error().contains("out"));
            let mut re = [0.0; 4];
            let mut im = [0.0; 4];
            let c = [0.0];
            let s = sf_k_of_bump(ptr::null(), ptr::null(), c.as_ptr(), 0.5, re.as_mut_ptr(), im.as_mut_ptr(), 4);
            assert_eq!(s, SfStatus::NullPointer);
        }
    }

    #[test]
    fn success_clears_the_last_error() {
        unsafe {
            let mut m = ptr::null_mut();
            assert_eq!(sf_measure_fixture(ptr::null_mut()), SfStatus::NullPointer);
            assert_eq!(sf_measure_fixture(&mut m), SfStatus::Ok);
            assert!(sf_last_error_message().is_null());
            sf_measure_free(m);
        }
    }

    #[test]
    fn status_codes_follow_error_kinds() {
        assert_eq!(status_of(&Error::IndefiniteAtom { atom: 1, eigenvalue: -1.0 }), SfStatus::InvalidMeasure);
        assert_eq!(status_of(&Error::IllConditioned { condition: 1e9 }), SfStatus::Numerical);
        assert_eq!(status_of(&Error::InvalidGrid("x".into())), SfStatus::InvalidArgument);
    }

    #[test]
    fn panics_become_internal() {
        let s = guard(|| panic!("boom"));
        assert_eq!(s, SfStatus::Internal);
        assert!(last_error().contains("boom"));
    }
}
