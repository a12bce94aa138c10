//! C ABI over derive-core.
//!
//! Handles are opaque and owned by the caller once returned; free each with
//! its `*_free`. Strings returned through `char**` are freed with
//! `dm_string_free`. Every call returns a `DmStatus`; on anything but
//! `DM_STATUS_OK` the message is available from `dm_last_error` until the
//! next call on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use derive_core::cli::{is_input_error, run, Cli};
use derive_core::error::Error;
use derive_core::geometry::{virtual_dimension, DerivedChart};
use derive_core::io::{ChartDocument, ContractionDocument, MorphismDocument};
use derive_core::linfty::{check_morphism, check_structure, CurvedStructure, LooMorphism};
use derive_core::pathspace::derived_path_space;
use derive_core::transfer::transfer_structure;

use clap::Parser;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DmStatus {
    Ok = 0,
    /// A check or construction failed for mathematical reasons.
    MathFailure = 1,
    /// Malformed document, wrong shapes or degrees.
    InvalidInput = 2,
    NullPointer = 3,
    InvalidUtf8 = 4,
    /// A Rust panic was caught at the boundary; the library state is intact.
    Internal = 5,
}

/// A parsed structure. It need not satisfy its equations; operations that
/// need a derived chart verify it first and report `DM_STATUS_MATH_FAILURE`.
pub struct DmChart {
    structure: CurvedStructure,
}

impl DmChart {
    fn verified(&self) -> Result<DerivedChart, Error> {
        DerivedChart::new(self.structure.clone())
    }
}

pub struct DmMorphism {
    morphism: LooMorphism,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let s = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = s);
}

fn fail(e: Error) -> DmStatus {
    set_error(e.to_string());
    if is_input_error(&e) {
        DmStatus::InvalidInput
    } else {
        DmStatus::MathFailure
    }
}

/// Runs `f` with panics turned into `DmStatus::Internal`.
fn guard(f: impl FnOnce() -> DmStatus) -> DmStatus {
    set_error("");
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| {
        set_error("internal panic");
        DmStatus::Internal
    })
}

unsafe fn read_str<'a>(p: *const c_char) -> Result<&'a str, DmStatus> {
    if p.is_null() {
        set_error("null string");
        return Err(DmStatus::NullPointer);
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error("string is not UTF-8");
        DmStatus::InvalidUtf8
    })
}

unsafe fn write_out<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).unwrap_or_default().into_raw()
}

macro_rules! non_null {
    ($($p:expr),+) => {
        if $($p.is_null())||+ {
            set_error("null pointer argument");
            return DmStatus::NullPointer;
        }
    };
}

macro_rules! tri {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(status) => return status,
        }
    };
}

/// Message for the last failing call on this thread; empty after success.
#[no_mangle]
pub extern "C" fn dm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// # Safety
/// `s` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn dm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a chart document (JSON).
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dm_chart_from_json(json: *const c_char, out: *mut *mut DmChart) -> DmStatus {
    guard(|| {
        non_null!(out);
        let text = tri!(read_str(json));
        match ChartDocument::from_json(text).and_then(|d| d.structure()) {
            Ok(structure) => {
                write_out(out, DmChart { structure });
                DmStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `chart` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn dm_chart_free(chart: *mut DmChart) {
    if !chart.is_null() {
        drop(Box::from_raw(chart));
    }
}

/// Serializes the chart's structure as a chart document.
///
/// # Safety
/// `chart` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dm_chart_to_json(chart: *const DmChart, out: *mut *mut c_char) -> DmStatus {
    guard(|| {
        non_null!(chart, out);
        *out = into_c_string(ChartDocument::from_structure(&(*chart).structure).to_json());
        DmStatus::Ok
    })
}

/// Checks the structure equations; `*pass` is 1 or 0. When they fail, the
/// first witness is left in `dm_last_error`.
///
/// # Safety
/// `chart` must be a live handle; `pass` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dm_chart_check(chart: *const DmChart, pass: *mut c_int) -> DmStatus {
    guard(|| {
        non_null!(chart, pass);
        let r = check_structure(&(*chart).structure);
        *pass = r.pass as c_int;
        if let Some(f) = r.failures.first() {
            set_error(f.to_string());
        }
        DmStatus::Ok
    })
}

/// # Safety
/// `chart` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dm_chart_vdim(chart: *const DmChart, out: *mut i64) -> DmStatus {
    guard(|| {
        non_null!(chart, out);
        match (*chart).verified() {
            Ok(c) => {
                *out = virtual_dimension(&c);
                DmStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// The derived path space of a chart.
///
/// # Safety
/// `chart` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dm_path_space(chart: *const DmChart, out: *mut *mut DmChart) -> DmStatus {
    guard(|| {
        non_null!(chart, out);
        match (*chart).verified().and_then(|c| derived_path_space(&c)) {
            Ok(ps) => {
                write_out(out, DmChart { structure: ps.chart.structure().clone() });
                DmStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Parses a morphism document between two charts.
///
/// # Safety
/// `json` must be NUL-terminated; `source`, `target` live handles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dm_morphism_from_json(
    json: *const c_char,
    source: *const DmChart,
    target: *const DmChart,
    out: *mut *mut DmMorphism,
) -> DmStatus {
    guard(|| {
        non_null!(source, target, out);
        let text = tri!(read_str(json));
        let (s, t) = (&(*source).structure, &(*target).structure);
        match MorphismDocument::from_json(text).and_then(|d| d.morphism(s.bundle(), t.bundle())) {
            Ok(morphism) => {
                write_out(out, DmMorphism { morphism });
                DmStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `m` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn dm_morphism_free(m: *mut DmMorphism) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// # Safety
/// `m` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dm_morphism_to_json(m: *const DmMorphism, out: *mut *mut c_char) -> DmStatus {
    guard(|| {
        non_null!(m, out);
        *out = into_c_string(MorphismDocument::from_morphism(&(*m).morphism).to_json());
        DmStatus::Ok
    })
}

/// Checks the morphism equations between the given charts; `*pass` is 1 or 0.
///
/// # Safety
/// All handles must be live; `pass` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dm_morphism_check(
    m: *const DmMorphism,
    source: *const DmChart,
    target: *const DmChart,
    pass: *mut c_int,
) -> DmStatus {
    guard(|| {
        non_null!(m, source, target, pass);
        match check_morphism(&(*m).morphism, &(*source).structure, &(*target).structure) {
            Ok(r) => {
                *pass = r.pass as c_int;
                if let Some(f) = r.failures.first() {
                    set_error(f.to_string());
                }
                DmStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Transfers the chart's structure along a contraction document; returns
/// the retract and the transferred inclusion retract → chart.
///
/// # Safety
/// `chart` must be live; `contraction_json` NUL-terminated; outputs writable.
#[no_mangle]
pub unsafe extern "C" fn dm_transfer(
    chart: *const DmChart,
    contraction_json: *const c_char,
    retract_out: *mut *mut DmChart,
    inclusion_out: *mut *mut DmMorphism,
) -> DmStatus {
    guard(|| {
        non_null!(chart, retract_out, inclusion_out);
        let text = tri!(read_str(contraction_json));
        let s = &(*chart).structure;
        let result = ContractionDocument::from_json(text)
            .and_then(|d| d.contraction(s))
            .and_then(|c| transfer_structure(s, &c));
        match result {
            Ok(t) => {
                write_out(retract_out, DmChart { structure: t.h_structure });
                write_out(inclusion_out, DmMorphism { morphism: t.phi });
                DmStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Runs one `derive` command line (argv[0] is the program name) and returns
/// the rendered report and the process exit code it would have.
///
/// # Safety
/// `argv` must hold `argc` NUL-terminated strings; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn dm_run(
    argc: c_int,
    argv: *const *const c_char,
    report_out: *mut *mut c_char,
    exit_code: *mut c_int,
) -> DmStatus {
    guard(|| {
        non_null!(argv, report_out, exit_code);
        let mut args = Vec::new();
        for i in 0..argc.max(0) as usize {
            args.push(tri!(read_str(*argv.add(i))).to_string());
        }
        match Cli::try_parse_from(&args) {
            Ok(cli) => {
                let (report, code) = run(&cli);
                *report_out = into_c_string(derive_core::cli::render(&cli, &report));
                *exit_code = code;
                DmStatus::Ok
            }
            Err(e) => {
                set_error(e.to_string());
                *report_out = ptr::null_mut();
                *exit_code = 2;
                DmStatus::InvalidInput
            }
        }
    })
}
