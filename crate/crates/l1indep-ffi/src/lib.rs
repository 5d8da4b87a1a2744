//! C ABI for the `l1indep` independence test.
//!
//! Every entry point returns an `l1indep_status` code; computed results are
//! handed back through an opaque `l1indep_result` that must be released with
//! [`l1indep_result_free`]. All pointers must be non-null and arrays must
//! have the documented lengths; data is row-major with `n` rows of `d`
//! columns, where `d` is the sum of the block dimensions.

// C-style identifiers are deliberate: they are the exported ABI names.
#![allow(non_camel_case_types)]

use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};

use l1indep::bandwidth::{select_bandwidths, BandwidthGrid};
use l1indep::data::{BlockSpec, Sample};
use l1indep::kernel::Kernel;
use l1indep::statistic::{run_test, TestConfig, TestResult};
use l1indep::variance::{default_resolution, sigma_sq, VarianceParams};
use l1indep::{Bandwidths, Error};

/// Status codes returned by every `l1indep_*` entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum l1indep_status {
    /// Success.
    L1INDEP_OK = 0,
    /// A required pointer argument was null.
    L1INDEP_NULL_POINTER = 1,
    /// The block structure is invalid (fewer than two blocks, zero dims, ...).
    L1INDEP_BAD_SPEC = 2,
    /// The data contain non-finite values or have the wrong shape.
    L1INDEP_BAD_DATA = 3,
    /// Too few observations for the requested block structure.
    L1INDEP_TOO_FEW_OBS = 4,
    /// A coordinate is degenerate (zero spread), so no bandwidth exists.
    L1INDEP_DEGENERATE = 5,
    /// A configuration value (alpha, bandwidth, resolution) is out of range.
    L1INDEP_BAD_CONFIG = 6,
    /// Internal numeric failure.
    L1INDEP_INTERNAL = 7,
}

use l1indep_status::*;

/// Opaque handle to a completed test run.
pub struct l1indep_result {
    inner: TestResult,
}

fn status_of(err: &Error) -> l1indep_status {
    match err {
        Error::InvalidSpec(_) => L1INDEP_BAD_SPEC,
        Error::BadField { .. } | Error::BadArity { .. } => L1INDEP_BAD_DATA,
        Error::TooFewObservations { .. } => L1INDEP_TOO_FEW_OBS,
        Error::DegenerateCoordinate { .. } => L1INDEP_DEGENERATE,
        Error::InvalidBandwidth(_) | Error::InvalidConfig(_) => L1INDEP_BAD_CONFIG,
        _ => L1INDEP_INTERNAL,
    }
}

unsafe fn build_sample(
    data: *const f64,
    n: usize,
    dims: *const usize,
    p: usize,
) -> Result<Sample, l1indep_status> {
    if data.is_null() || dims.is_null() {
        return Err(L1INDEP_NULL_POINTER);
    }
    let dims = std::slice::from_raw_parts(dims, p).to_vec();
    let spec = BlockSpec::new(dims).map_err(|e| status_of(&e))?;
    let values = std::slice::from_raw_parts(data, n * spec.d()).to_vec();
    Sample::from_rows(values, n, spec).map_err(|e| status_of(&e))
}

fn run_pipeline(
    sample: &Sample,
    fixed_bw: Option<Vec<f64>>,
    alpha: f64,
) -> Result<TestResult, l1indep_status> {
    let bw = match fixed_bw {
        Some(h) => Bandwidths::new(h).map_err(|e| status_of(&e))?,
        None => {
            let grid = BandwidthGrid::from_sample(sample, 5).map_err(|e| status_of(&e))?;
            select_bandwidths(sample, &grid).map_err(|e| status_of(&e))?.bandwidths
        }
    };
    let vp = VarianceParams::uniform(sample.spec()).map_err(|e| status_of(&e))?;
    let cfg = TestConfig { alpha, ..TestConfig::default() };
    run_test(sample, &bw, &vp, &cfg).map_err(|e| status_of(&e))
}

/// Run the full test (data-driven bandwidths, uniform kernel, asymptotic
/// calibration) and store a handle in `*out` on success.
///
/// # Safety
/// `data` must point to `n * sum(dims)` doubles, `dims` to `p` sizes, and
/// `out` to a writable pointer slot.
#[no_mangle]
pub unsafe extern "C" fn l1indep_run(
    data: *const f64,
    n: usize,
    dims: *const usize,
    p: usize,
    alpha: f64,
    out: *mut *mut l1indep_result,
) -> l1indep_status {
    l1indep_run_fixed(data, n, dims, p, alpha, std::ptr::null(), 0, out)
}

/// Like [`l1indep_run`], but with caller-supplied bandwidths: `bandwidths`
/// points to `n_bandwidths` doubles, one per flat coordinate (pass null / 0
/// for data-driven selection).
///
/// # Safety
/// See [`l1indep_run`]; `bandwidths` must be null or point to
/// `n_bandwidths` doubles.
#[no_mangle]
pub unsafe extern "C" fn l1indep_run_fixed(
    data: *const f64,
    n: usize,
    dims: *const usize,
    p: usize,
    alpha: f64,
    bandwidths: *const f64,
    n_bandwidths: usize,
    out: *mut *mut l1indep_result,
) -> l1indep_status {
    if out.is_null() {
        return L1INDEP_NULL_POINTER;
    }
    let sample = match build_sample(data, n, dims, p) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let fixed = if bandwidths.is_null() {
        None
    } else {
        if n_bandwidths != sample.d() {
            return L1INDEP_BAD_CONFIG;
        }
        Some(std::slice::from_raw_parts(bandwidths, n_bandwidths).to_vec())
    };
    let result = catch_unwind(AssertUnwindSafe(|| run_pipeline(&sample, fixed, alpha)));
    match result {
        Ok(Ok(r)) => {
            *out = Box::into_raw(Box::new(l1indep_result { inner: r }));
            L1INDEP_OK
        }
        Ok(Err(code)) => code,
        Err(_) => L1INDEP_INTERNAL,
    }
}

/// Release a result handle. Passing null is a no-op.
///
/// # Safety
/// `result` must be null or a pointer previously returned through
/// [`l1indep_run`] / [`l1indep_run_fixed`], and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn l1indep_result_free(result: *mut l1indep_result) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

macro_rules! getter {
    ($(#[$doc:meta])* $name:ident, $field:ident, $ty:ty, $conv:expr) => {
        $(#[$doc])*
        /// # Safety
        /// `result` must be a live handle and `out` a writable slot.
        #[no_mangle]
        pub unsafe extern "C" fn $name(
            result: *const l1indep_result,
            out: *mut $ty,
        ) -> l1indep_status {
            if result.is_null() || out.is_null() {
                return L1INDEP_NULL_POINTER;
            }
            #[allow(clippy::redundant_closure_call)]
            {
                *out = $conv(&(*result).inner.$field);
            }
            L1INDEP_OK
        }
    };
}

getter!(
    /// The L1 discrepancy `V_n`.
    l1indep_result_v_n, v_n, f64, |v: &f64| *v);
getter!(
    /// The centering term `a_n`.
    l1indep_result_a_n, a_n, f64, |v: &f64| *v);
getter!(
    /// The standardized statistic `T_n`.
    l1indep_result_t_n, t_n, f64, |v: &f64| *v);
getter!(
    /// The one-sided asymptotic p-value.
    l1indep_result_p_value, p_value, f64, |v: &f64| *v);
getter!(
    /// The asymptotic standard deviation used for normalization.
    l1indep_result_sigma, sigma, f64, |v: &f64| *v);
getter!(
    /// 1 when independence is rejected at the configured level, else 0.
    l1indep_result_reject, reject, i32, |v: &bool| *v as i32);

/// Copy the per-coordinate bandwidths into `out` (capacity `cap`); writes
/// the coordinate count to `*len`.
///
/// # Safety
/// `result` must be a live handle; `out` must have room for `cap` doubles;
/// `len` must be a writable slot.
#[no_mangle]
pub unsafe extern "C" fn l1indep_result_bandwidths(
    result: *const l1indep_result,
    out: *mut f64,
    cap: usize,
    len: *mut usize,
) -> l1indep_status {
    if result.is_null() || out.is_null() || len.is_null() {
        return L1INDEP_NULL_POINTER;
    }
    let h = &(*result).inner.bandwidths;
    *len = h.len();
    if cap < h.len() {
        return L1INDEP_BAD_CONFIG;
    }
    std::ptr::copy_nonoverlapping(h.as_ptr(), out, h.len());
    L1INDEP_OK
}

/// Compute the asymptotic variance constant `sigma^2` for a block structure
/// under the uniform kernel. `resolution` of 0 selects a dimension-dependent
/// default.
///
/// # Safety
/// `dims` must point to `p` sizes and `out` to a writable double.
#[no_mangle]
pub unsafe extern "C" fn l1indep_sigma_sq(
    dims: *const usize,
    p: usize,
    resolution: usize,
    out: *mut f64,
) -> l1indep_status {
    if dims.is_null() || out.is_null() {
        return L1INDEP_NULL_POINTER;
    }
    let dims = std::slice::from_raw_parts(dims, p).to_vec();
    let spec = match BlockSpec::new(dims) {
        Ok(s) => s,
        Err(e) => return status_of(&e),
    };
    let resolution = if resolution == 0 { default_resolution(spec.d()) } else { resolution };
    let kernels: Vec<Kernel> = spec.dims().iter().map(|&dl| Kernel::uniform(dl)).collect();
    match catch_unwind(AssertUnwindSafe(|| sigma_sq(&spec, &kernels, resolution))) {
        Ok(Ok(v)) => {
            *out = v;
            L1INDEP_OK
        }
        Ok(Err(e)) => status_of(&e),
        Err(_) => L1INDEP_INTERNAL,
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn l1indep_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn l1indep_strerror(code: l1indep_status) -> *const c_char {
    let msg: &'static str = match code {
        L1INDEP_OK => "ok\0",
        L1INDEP_NULL_POINTER => "null pointer argument\0",
        L1INDEP_BAD_SPEC => "invalid block structure\0",
        L1INDEP_BAD_DATA => "invalid data\0",
        L1INDEP_TOO_FEW_OBS => "too few observations\0",
        L1INDEP_DEGENERATE => "degenerate coordinate\0",
        L1INDEP_BAD_CONFIG => "invalid configuration value\0",
        L1INDEP_INTERNAL => "internal error\0",
    };
    msg.as_ptr() as *const c_char
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_block_data(n: usize) -> Vec<f64> {
        // deterministic dependent pairs: y = x with a slow wobble
        (0..n)
            .flat_map(|i| {
                let x = (i as f64 + 0.5) / n as f64;
                [x, x + 0.01 * (13.0 * x).sin()]
            })
            .collect()
    }

    #[test]
    fn run_and_read_back() {
        let n = 60;
        let data = two_block_data(n);
        let dims = [1usize, 1usize];
        let mut handle: *mut l1indep_result = std::ptr::null_mut();
        let code = unsafe { l1indep_run(data.as_ptr(), n, dims.as_ptr(), 2, 0.05, &mut handle) };
        assert_eq!(code, L1INDEP_OK);
        let mut t_n = f64::NAN;
        let mut reject = -1i32;
        let mut h = [0.0f64; 2];
        let mut len = 0usize;
        unsafe {
            assert_eq!(l1indep_result_t_n(handle, &mut t_n), L1INDEP_OK);
            assert_eq!(l1indep_result_reject(handle, &mut reject), L1INDEP_OK);
            assert_eq!(
                l1indep_result_bandwidths(handle, h.as_mut_ptr(), 2, &mut len),
                L1INDEP_OK
            );
            l1indep_result_free(handle);
        }
        assert!(t_n.is_finite());
        assert_eq!(len, 2);
        assert!(h[0] > 0.0 && h[1] > 0.0);
        // perfectly linked coordinates must reject decisively
        assert_eq!(reject, 1);
    }

    #[test]
    fn error_codes() {
        let dims = [1usize, 1usize];
        let mut handle: *mut l1indep_result = std::ptr::null_mut();
        let code = unsafe {
            l1indep_run(std::ptr::null(), 10, dims.as_ptr(), 2, 0.05, &mut handle)
        };
        assert_eq!(code, L1INDEP_NULL_POINTER);

        let data = two_block_data(3);
        let code = unsafe { l1indep_run(data.as_ptr(), 3, dims.as_ptr(), 2, 0.05, &mut handle) };
        assert_eq!(code, L1INDEP_TOO_FEW_OBS);

        let data = two_block_data(60);
        let code = unsafe { l1indep_run(data.as_ptr(), 60, dims.as_ptr(), 2, 1.5, &mut handle) };
        assert_eq!(code, L1INDEP_BAD_CONFIG);
    }

    #[test]
    fn sigma_matches_core() {
        let dims = [1usize, 1usize];
        let mut v = f64::NAN;
        let code = unsafe { l1indep_sigma_sq(dims.as_ptr(), 2, 0, &mut v) };
        assert_eq!(code, L1INDEP_OK);
        let spec = BlockSpec::new(vec![1, 1]).unwrap();
        let kernels = vec![Kernel::uniform(1), Kernel::uniform(1)];
        let expect = sigma_sq(&spec, &kernels, default_resolution(2)).unwrap();
        assert_eq!(v, expect);
        assert!(v > 0.0);
    }
}
