//! C ABI over the sawecm cubature library. The mirror of this surface lives
//! in `include/sawecm.h`; keep the two in sync.
//!
//! Conventions: opaque handles created and freed here, integer status codes,
//! a thread-local last-error message, and 1-based point indices on the wire.

#![deny(unsafe_op_in_unsafe_fn)]

use std::cell::RefCell;
use std::ffi::CString;

use libc::{c_char, c_double, c_int, size_t};
use nalgebra::{DMatrix, DVector};
use sawecm::lp::{assemble_lp, extract_rule, solve_simplex, LpStatus, PivotRule};
use sawecm::problems::evaluate_rule;
use sawecm::saw::{saw_ecm, AdaptiveRule, AugmentPolicy, SawOptions, SubspaceFamily, VisitOrder};
use sawecm::Error;

pub const SAWECM_OK: c_int = 0;
pub const SAWECM_INVALID_ARGUMENT: c_int = 1;
pub const SAWECM_SHAPE_MISMATCH: c_int = 2;
pub const SAWECM_NO_CONVERGENCE: c_int = 3;
pub const SAWECM_LP_NOT_OPTIMAL: c_int = 4;
pub const SAWECM_INTERNAL: c_int = 5;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).expect("NULs removed");
    });
}

fn status_of(err: &Error) -> c_int {
    match err {
        Error::Subspace { source, .. } => status_of(source),
        Error::NoConvergence { .. } | Error::SingularGram => SAWECM_NO_CONVERGENCE,
        Error::NotOptimal { .. } => SAWECM_LP_NOT_OPTIMAL,
        Error::ShapeMismatch(_) => SAWECM_SHAPE_MISMATCH,
        Error::NonFinite { .. } | Error::NonpositiveWeight { .. } | Error::ZeroMatrix => {
            SAWECM_INVALID_ARGUMENT
        }
        _ => SAWECM_INTERNAL,
    }
}

fn fail(err: &Error) -> c_int {
    set_error(&err.to_string());
    status_of(err)
}

fn fail_invalid(message: &str) -> c_int {
    set_error(message);
    SAWECM_INVALID_ARGUMENT
}

/// Opaque family handle: raw sample data collected before a solve.
pub struct FfiFamily {
    weights: DVector<f64>,
    matrices: Vec<DMatrix<f64>>,
}

/// Opaque rule handle.
pub struct FfiRule {
    rule: AdaptiveRule,
    point_count: usize,
}

#[repr(C)]
pub struct FfiOptions {
    pub svd_tolerance: c_double,
    pub random_ordering: i32,
    pub ordering_seed: u64,
    pub failure_threshold: size_t,
    pub low_norm_floor: c_double,
    pub augment: i32,
    pub zero_floor: c_double,
    pub dantzig_pivot: i32,
}

impl FfiOptions {
    fn saw_options(&self) -> Result<SawOptions, c_int> {
        let augment = match self.augment {
            0 => AugmentPolicy::Auto,
            1 => AugmentPolicy::Always,
            2 => AugmentPolicy::Never,
            other => {
                return Err(fail_invalid(&format!(
                    "augment policy {other} is not one of 0 (auto), 1 (always), 2 (never)"
                )))
            }
        };
        Ok(SawOptions {
            failure_threshold: self.failure_threshold,
            low_norm_floor: self.low_norm_floor,
            augment,
            ..SawOptions::default()
        })
    }

    fn ordering(&self) -> VisitOrder {
        if self.random_ordering != 0 {
            VisitOrder::SeededRandom(self.ordering_seed)
        } else {
            VisitOrder::Natural
        }
    }
}

/// # Safety
/// `options` must point to writable memory for one `sawecm_options` record.
#[no_mangle]
pub unsafe extern "C" fn sawecm_options_default(options: *mut FfiOptions) {
    if options.is_null() {
        return;
    }
    unsafe {
        (*options).svd_tolerance = 0.0;
        (*options).random_ordering = 0;
        (*options).ordering_seed = 0;
        (*options).failure_threshold = 10;
        (*options).low_norm_floor = 1e-6;
        (*options).augment = 0;
        (*options).zero_floor = 1e-10;
        (*options).dantzig_pivot = 0;
    }
}

/// # Safety
/// `weights` must point to `point_count` doubles; `out_family` must be a
/// valid destination for one pointer.
#[no_mangle]
pub unsafe extern "C" fn sawecm_family_new(
    point_count: size_t,
    weights: *const c_double,
    out_family: *mut *mut FfiFamily,
) -> c_int {
    if out_family.is_null() {
        return fail_invalid("out_family is null");
    }
    unsafe { *out_family = std::ptr::null_mut() };
    if weights.is_null() {
        return fail_invalid("weights is null");
    }
    if point_count == 0 {
        return fail_invalid("point_count must be positive");
    }
    let slice = unsafe { std::slice::from_raw_parts(weights, point_count) };
    let weights = DVector::from_column_slice(slice);
    for (index, &value) in weights.iter().enumerate() {
        if !(value > 0.0) || !value.is_finite() {
            return fail(&Error::NonpositiveWeight { index, value });
        }
    }
    let family = Box::new(FfiFamily {
        weights,
        matrices: Vec::new(),
    });
    unsafe { *out_family = Box::into_raw(family) };
    SAWECM_OK
}

/// # Safety
/// `family` must be a live handle from [`sawecm_family_new`]; `values` must
/// point to `point_count * column_count` doubles in column-major order.
#[no_mangle]
pub unsafe extern "C" fn sawecm_family_add_subspace(
    family: *mut FfiFamily,
    column_count: size_t,
    values: *const c_double,
) -> c_int {
    let Some(family) = (unsafe { family.as_mut() }) else {
        return fail_invalid("family is null");
    };
    if values.is_null() {
        return fail_invalid("values is null");
    }
    if column_count == 0 {
        return fail_invalid("column_count must be positive");
    }
    let points = family.weights.len();
    let slice = unsafe { std::slice::from_raw_parts(values, points * column_count) };
    if slice.iter().any(|v| !v.is_finite()) {
        return fail(&Error::NonFinite {
            context: "subspace sample matrix",
        });
    }
    family
        .matrices
        .push(DMatrix::from_column_slice(points, column_count, slice));
    SAWECM_OK
}

/// # Safety
/// `family` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sawecm_family_point_count(family: *const FfiFamily) -> size_t {
    unsafe { family.as_ref() }.map_or(0, |f| f.weights.len())
}

/// # Safety
/// `family` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sawecm_family_subspace_count(family: *const FfiFamily) -> size_t {
    unsafe { family.as_ref() }.map_or(0, |f| f.matrices.len())
}

/// # Safety
/// `family` must be null or a live handle; it is consumed.
#[no_mangle]
pub unsafe extern "C" fn sawecm_family_free(family: *mut FfiFamily) {
    if !family.is_null() {
        drop(unsafe { Box::from_raw(family) });
    }
}

fn build_family(family: &FfiFamily, options: &FfiOptions) -> Result<SubspaceFamily, c_int> {
    if family.matrices.is_empty() {
        return Err(fail_invalid("family has no subspaces"));
    }
    if !(0.0..=1.0).contains(&options.svd_tolerance) {
        return Err(fail_invalid("svd_tolerance must lie in [0, 1]"));
    }
    SubspaceFamily::new(family.matrices.clone(), family.weights.clone())
        .map(|f| {
            f.with_svd_tolerance(options.svd_tolerance)
                .with_ordering(options.ordering())
        })
        .map_err(|e| fail(&e))
}

/// # Safety
/// All pointers must be valid; `out_rule` receives an owned handle on success.
#[no_mangle]
pub unsafe extern "C" fn sawecm_solve_greedy(
    family: *const FfiFamily,
    options: *const FfiOptions,
    out_rule: *mut *mut FfiRule,
) -> c_int {
    let Some(out_slot) = (unsafe { out_rule.as_mut() }) else {
        return fail_invalid("out_rule is null");
    };
    *out_slot = std::ptr::null_mut();
    let Some(family) = (unsafe { family.as_ref() }) else {
        return fail_invalid("family is null");
    };
    let Some(options) = (unsafe { options.as_ref() }) else {
        return fail_invalid("options is null");
    };
    let saw_options = match options.saw_options() {
        Ok(o) => o,
        Err(code) => return code,
    };
    let assembled = match build_family(family, options) {
        Ok(f) => f,
        Err(code) => return code,
    };
    match saw_ecm(&assembled, &saw_options) {
        Ok(rule) => {
            *out_slot = Box::into_raw(Box::new(FfiRule {
                rule,
                point_count: assembled.point_count(),
            }));
            SAWECM_OK
        }
        Err(e) => fail(&e),
    }
}

/// # Safety
/// All pointers must be valid; `out_rule` receives an owned handle on success.
#[no_mangle]
pub unsafe extern "C" fn sawecm_solve_lp(
    family: *const FfiFamily,
    options: *const FfiOptions,
    out_rule: *mut *mut FfiRule,
) -> c_int {
    let Some(out_slot) = (unsafe { out_rule.as_mut() }) else {
        return fail_invalid("out_rule is null");
    };
    *out_slot = std::ptr::null_mut();
    let Some(family) = (unsafe { family.as_ref() }) else {
        return fail_invalid("family is null");
    };
    let Some(options) = (unsafe { options.as_ref() }) else {
        return fail_invalid("options is null");
    };
    let saw_options = match options.saw_options() {
        Ok(o) => o,
        Err(code) => return code,
    };
    let assembled = match build_family(family, options) {
        Ok(f) => f,
        Err(code) => return code,
    };
    let lp = match assemble_lp(&assembled, &saw_options) {
        Ok(lp) => lp,
        Err(e) => return fail(&e),
    };
    let pivot = if options.dantzig_pivot != 0 {
        PivotRule::Dantzig
    } else {
        PivotRule::Bland
    };
    let solution = solve_simplex(&lp, pivot);
    if solution.status != LpStatus::Optimal {
        return fail(&Error::NotOptimal {
            status: solution.status,
        });
    }
    match extract_rule(&solution, &lp, options.zero_floor) {
        Ok(rule) => {
            *out_slot = Box::into_raw(Box::new(FfiRule {
                rule,
                point_count: assembled.point_count(),
            }));
            SAWECM_OK
        }
        Err(e) => fail(&e),
    }
}

/// # Safety
/// `rule` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sawecm_rule_point_count(rule: *const FfiRule) -> size_t {
    unsafe { rule.as_ref() }.map_or(0, |r| r.rule.card())
}

/// # Safety
/// `rule` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sawecm_rule_subspace_count(rule: *const FfiRule) -> size_t {
    unsafe { rule.as_ref() }.map_or(0, |r| r.rule.subspace_count())
}

/// # Safety
/// `rule` must be a live handle; `out` must hold `len` entries.
#[no_mangle]
pub unsafe extern "C" fn sawecm_rule_indices(
    rule: *const FfiRule,
    out: *mut size_t,
    len: size_t,
) -> c_int {
    let Some(rule) = (unsafe { rule.as_ref() }) else {
        return fail_invalid("rule is null");
    };
    if out.is_null() {
        return fail_invalid("out is null");
    }
    if len < rule.rule.card() {
        set_error("output buffer is smaller than card(E)");
        return SAWECM_SHAPE_MISMATCH;
    }
    let out = unsafe { std::slice::from_raw_parts_mut(out, rule.rule.card()) };
    for (dst, &g) in out.iter_mut().zip(rule.rule.indices.iter()) {
        *dst = g + 1;
    }
    SAWECM_OK
}

/// # Safety
/// `rule` must be a live handle; `out` must hold `len` entries.
#[no_mangle]
pub unsafe extern "C" fn sawecm_rule_weights(
    rule: *const FfiRule,
    subspace: size_t,
    out: *mut c_double,
    len: size_t,
) -> c_int {
    let Some(rule) = (unsafe { rule.as_ref() }) else {
        return fail_invalid("rule is null");
    };
    if out.is_null() {
        return fail_invalid("out is null");
    }
    if subspace >= rule.rule.subspace_count() {
        set_error("subspace index out of range");
        return SAWECM_SHAPE_MISMATCH;
    }
    if len < rule.rule.card() {
        set_error("output buffer is smaller than card(E)");
        return SAWECM_SHAPE_MISMATCH;
    }
    let weights = &rule.rule.per_subspace_weights[subspace];
    let out = unsafe { std::slice::from_raw_parts_mut(out, rule.rule.card()) };
    for (dst, &w) in out.iter_mut().zip(weights.iter()) {
        *dst = w;
    }
    SAWECM_OK
}

/// # Safety
/// `rule` and `family` must be live handles; `out_residual` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sawecm_rule_max_residual(
    rule: *const FfiRule,
    family: *const FfiFamily,
    out_residual: *mut c_double,
) -> c_int {
    let Some(rule) = (unsafe { rule.as_ref() }) else {
        return fail_invalid("rule is null");
    };
    let Some(family) = (unsafe { family.as_ref() }) else {
        return fail_invalid("family is null");
    };
    if out_residual.is_null() {
        return fail_invalid("out_residual is null");
    }
    if family.weights.len() != rule.point_count
        || family.matrices.len() != rule.rule.subspace_count()
    {
        set_error("rule and family dimensions disagree");
        return SAWECM_SHAPE_MISMATCH;
    }
    let assembled = match SubspaceFamily::new(family.matrices.clone(), family.weights.clone()) {
        Ok(f) => f,
        Err(e) => return fail(&e),
    };
    let report = evaluate_rule(&rule.rule, &assembled);
    unsafe { *out_residual = report.max_residual };
    SAWECM_OK
}

/// # Safety
/// `rule` must be null or a live handle; it is consumed.
#[no_mangle]
pub unsafe extern "C" fn sawecm_rule_free(rule: *mut FfiRule) {
    if !rule.is_null() {
        drop(unsafe { Box::from_raw(rule) });
    }
}

/// # Safety
/// The returned pointer is valid on this thread until the next failing call.
#[no_mangle]
pub unsafe extern "C" fn sawecm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}
