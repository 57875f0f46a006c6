//! C ABI over `covrecon`.
//!
//! Every entry point returns a [`CovreconStatus`]; results come back through
//! out-pointers. Objects are opaque handles created by `*_new` functions and
//! released with the matching `*_free`. Matrices are dense, row-major.
//! After a non-OK status, `covrecon_last_error` describes the failure on
//! the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use covrecon::analysis::{error_decomposition, truncation_error_e1};
use covrecon::estimators::{covariance_of_rows, optimal_taper, taper_estimate};
use covrecon::fem::{BasisKind, FemSpace};
use covrecon::field::{self, SpectrumModel};
use covrecon::lambert::{lambert_w, lambert_w_m1};
use covrecon::nalgebra::DMatrix;
use covrecon::planner::{brownian_plan, plan_parameters, PlanInputs, Regime};
use covrecon::spectral::{self, fix_signs, EigenSystem, Provenance};
use covrecon::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovreconStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    SpaceMismatch = 4,
    NotSymmetric = 5,
    NotPositiveDefinite = 6,
    NumericFailure = 7,
    OutOfRange = 8,
    BufferTooSmall = 9,
    Io = 10,
    Panic = 11,
}

/// Finite element space on the unit interval or square.
pub struct CovreconSpace(Arc<FemSpace>);

/// Covariance model with a known spectrum.
pub struct CovreconModel(Arc<SpectrumModel>);

/// Mass-orthonormal eigenpairs tied to one space.
pub struct CovreconEigenSystem {
    sys: EigenSystem,
    space: Arc<FemSpace>,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CovreconErrorReport {
    pub e1: f64,
    pub e2: f64,
    pub e3: f64,
    pub total: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CovreconPlan {
    /// 1, 2 or 3.
    pub regime: i32,
    pub l_eps: u64,
    /// Integer valued; may exceed the range of `u64`.
    pub m_eps: f64,
    pub h_lo: f64,
    pub h_hi: f64,
    pub h_eps: f64,
    pub vacuous: bool,
    pub capped: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> CovreconStatus {
    match e {
        Error::InvalidArgument { .. } | Error::Config { .. } | Error::Parse(_) | Error::MissingFunctional(_) => {
            CovreconStatus::InvalidArgument
        }
        Error::DimensionMismatch { .. } => CovreconStatus::DimensionMismatch,
        Error::SpaceMismatch => CovreconStatus::SpaceMismatch,
        Error::NotSymmetric { .. } => CovreconStatus::NotSymmetric,
        Error::NotPositiveDefinite => CovreconStatus::NotPositiveDefinite,
        Error::Quadrature { .. } => CovreconStatus::NumericFailure,
        Error::OutOfDomain { .. } | Error::OutOfRange { .. } | Error::SpectrumExhausted { .. } => {
            CovreconStatus::OutOfRange
        }
        Error::Io(_) => CovreconStatus::Io,
    }
}

enum Fail {
    Lib(Error),
    Null(&'static str),
    Buffer { needed: usize, given: usize },
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> CovreconStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CovreconStatus::Ok,
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Fail::Null(name))) => {
            set_error(format!("`{name}` is null"));
            CovreconStatus::NullPointer
        }
        Ok(Err(Fail::Buffer { needed, given })) => {
            set_error(format!("output buffer holds {given} values, {needed} needed"));
            CovreconStatus::BufferTooSmall
        }
        Err(_) => {
            set_error("internal panic".into());
            CovreconStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(name))
}

unsafe fn input<'a>(p: *const f64, len: usize, name: &'static str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn output<'a>(p: *mut f64, len: usize, needed: usize, name: &'static str) -> Result<&'a mut [f64], Fail> {
    if len < needed {
        return Err(Fail::Buffer { needed, given: len });
    }
    if p.is_null() {
        return Err(Fail::Null(name));
    }
    Ok(std::slice::from_raw_parts_mut(p, needed))
}

unsafe fn put<T>(out: *mut T, v: T, name: &'static str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null(name));
    }
    out.write(v);
    Ok(())
}

fn write_row_major(m: &DMatrix<f64>, out: &mut [f64]) {
    let c = m.ncols();
    for i in 0..m.nrows() {
        for j in 0..c {
            out[i * c + j] = m[(i, j)];
        }
    }
}

/// Copies the calling thread's last error message (NUL-terminated,
/// truncated to fit) and returns its full length in bytes.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn covrecon_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn covrecon_space_new(
    dim: usize,
    elements: usize,
    orthonormal: bool,
    out: *mut *mut CovreconSpace,
) -> CovreconStatus {
    guard(|| {
        let basis = if orthonormal {
            BasisKind::L2Orthonormal
        } else {
            BasisKind::Nodal
        };
        let space = FemSpace::new(dim, elements, basis)?;
        put(out, Box::into_raw(Box::new(CovreconSpace(Arc::new(space)))), "out")
    })
}

/// # Safety
/// `space` must come from `covrecon_space_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn covrecon_space_free(space: *mut CovreconSpace) {
    if !space.is_null() {
        drop(Box::from_raw(space));
    }
}

/// # Safety
/// `space` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn covrecon_space_dof_count(space: *const CovreconSpace, out: *mut usize) -> CovreconStatus {
    guard(|| put(out, deref(space, "space")?.0.dof_count(), "out"))
}

/// Mass matrix of the space's basis.
///
/// # Safety
/// `space` must be a live handle; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn covrecon_space_mass(space: *const CovreconSpace, out: *mut f64, len: usize) -> CovreconStatus {
    guard(|| {
        let s = &deref(space, "space")?.0;
        let n = s.dof_count();
        write_row_major(&s.mass().matrix, output(out, len, n * n, "out")?);
        Ok(())
    })
}

/// `name` is `brownian-1d` or `brownian-sheet`.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn covrecon_model_new(name: *const c_char, out: *mut *mut CovreconModel) -> CovreconStatus {
    guard(|| {
        if name.is_null() {
            return Err(Fail::Null("name"));
        }
        let name = CStr::from_ptr(name)
            .to_str()
            .map_err(|_| Error::Parse("model name is not UTF-8".into()))?;
        let model = SpectrumModel::by_name(name)?;
        put(out, Box::into_raw(Box::new(CovreconModel(Arc::new(model)))), "out")
    })
}

/// # Safety
/// `model` must come from `covrecon_model_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn covrecon_model_free(model: *mut CovreconModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// The `count` largest eigenvalues, non-increasing.
///
/// # Safety
/// `model` must be a live handle; `out` must hold `count` doubles.
#[no_mangle]
pub unsafe extern "C" fn covrecon_model_eigenvalues(
    model: *const CovreconModel,
    count: usize,
    out: *mut f64,
) -> CovreconStatus {
    guard(|| {
        let m = &deref(model, "model")?.0;
        let vals = m.eigenvalues(count)?;
        output(out, count, count, "out")?.copy_from_slice(&vals);
        Ok(())
    })
}

/// `(Σ_{ℓ>L} λ_ℓ²)^{1/2}`.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn covrecon_truncation_error(
    model: *const CovreconModel,
    l: usize,
    out: *mut f64,
) -> CovreconStatus {
    guard(|| put(out, truncation_error_e1(&deref(model, "model")?.0, l)?, "out"))
}

/// `m × n_h` coefficient samples (row-major) drawn with `l_gen` modes.
///
/// # Safety
/// Handles must be live; `out` must hold `len ≥ m · n_h` doubles.
#[no_mangle]
pub unsafe extern "C" fn covrecon_sample_field(
    model: *const CovreconModel,
    space: *const CovreconSpace,
    l_gen: usize,
    m: usize,
    seed: u64,
    out: *mut f64,
    len: usize,
) -> CovreconStatus {
    guard(|| {
        let model = &deref(model, "model")?.0;
        let space = &deref(space, "space")?.0;
        let s = field::sample_field(model, space, l_gen, m, seed)?;
        write_row_major(&s.data, output(out, len, m * space.dof_count(), "out")?);
        Ok(())
    })
}

/// Exact coefficient covariance of the model projected onto the space.
///
/// # Safety
/// Handles must be live; `out` must hold `len ≥ n_h²` doubles.
#[no_mangle]
pub unsafe extern "C" fn covrecon_projected_covariance(
    model: *const CovreconModel,
    space: *const CovreconSpace,
    out: *mut f64,
    len: usize,
) -> CovreconStatus {
    guard(|| {
        let model = &deref(model, "model")?.0;
        let space = &deref(space, "space")?.0;
        let sigma = field::projected_covariance_exact(model, space)?;
        let n = space.dof_count();
        write_row_major(&sigma, output(out, len, n * n, "out")?);
        Ok(())
    })
}

/// Tapered covariance of `m × n` row-major samples. `tau = 0` picks the
/// optimal even width for `alpha`; `out_tau` (optional) receives the width.
///
/// # Safety
/// `samples` must hold `m · n` doubles, `out` at least `n²`.
#[no_mangle]
pub unsafe extern "C" fn covrecon_tapered_covariance(
    samples: *const f64,
    m: usize,
    n: usize,
    tau: usize,
    alpha: f64,
    out: *mut f64,
    len: usize,
    out_tau: *mut usize,
) -> CovreconStatus {
    guard(|| {
        let data = input(samples, m * n, "samples")?;
        let rows = DMatrix::from_row_slice(m, n, data);
        let cov = covariance_of_rows(&rows)?;
        let tau = if tau == 0 { optimal_taper(m, alpha, Some(n))? } else { tau };
        let est = taper_estimate(&cov, tau)?;
        write_row_major(&est.matrix, output(out, len, n * n, "out")?);
        if !out_tau.is_null() {
            out_tau.write(tau);
        }
        Ok(())
    })
}

/// Generalized eigendecomposition `Σ Φ = Φ Λ` with `Φᵀ M Φ = I` for a
/// row-major `n_h × n_h` coefficient covariance. `exact` selects the
/// provenance tag.
///
/// # Safety
/// `space` must be live, `sigma` must hold `n_h²` doubles, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn covrecon_eigen_new(
    space: *const CovreconSpace,
    sigma: *const f64,
    n: usize,
    exact: bool,
    out: *mut *mut CovreconEigenSystem,
) -> CovreconStatus {
    guard(|| {
        let space = deref(space, "space")?.0.clone();
        let dofs = space.dof_count();
        if n != dofs {
            return Err(Error::DimensionMismatch {
                expected: dofs,
                actual: n,
            }
            .into());
        }
        let sigma = DMatrix::from_row_slice(n, n, input(sigma, n * n, "sigma")?);
        let prov = if exact { Provenance::Exact } else { Provenance::Sampled };
        let sys = spectral::decompose_in_space(&space, &sigma, prov)?;
        put(out, Box::into_raw(Box::new(CovreconEigenSystem { sys, space })), "out")
    })
}

/// # Safety
/// `sys` must come from `covrecon_eigen_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn covrecon_eigen_free(sys: *mut CovreconEigenSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// Eigenvalues, non-increasing.
///
/// # Safety
/// `sys` must be live; `out` must hold `len ≥ n_h` doubles.
#[no_mangle]
pub unsafe extern "C" fn covrecon_eigen_values(
    sys: *const CovreconEigenSystem,
    out: *mut f64,
    len: usize,
) -> CovreconStatus {
    guard(|| {
        let s = &deref(sys, "sys")?.sys;
        output(out, len, s.len(), "out")?.copy_from_slice(&s.values);
        Ok(())
    })
}

/// Eigenvector coefficients, row-major `n_h × n_h` (column `j` is mode `j`).
///
/// # Safety
/// `sys` must be live; `out` must hold `len ≥ n_h²` doubles.
#[no_mangle]
pub unsafe extern "C" fn covrecon_eigen_vectors(
    sys: *const CovreconEigenSystem,
    out: *mut f64,
    len: usize,
) -> CovreconStatus {
    guard(|| {
        let s = &deref(sys, "sys")?.sys;
        let n = s.len();
        write_row_major(&s.vectors, output(out, len, n * n, "out")?);
        Ok(())
    })
}

/// Truncation, discretization and sampling errors at level `l` plus the
/// total `L²` error of the sampled reconstruction.
///
/// # Safety
/// All handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn covrecon_error_decomposition(
    model: *const CovreconModel,
    exact: *const CovreconEigenSystem,
    sampled: *const CovreconEigenSystem,
    l: usize,
    out: *mut CovreconErrorReport,
) -> CovreconStatus {
    guard(|| {
        let model = deref(model, "model")?.0.clone();
        let exact = deref(exact, "exact")?;
        let sampled = deref(sampled, "sampled")?;
        let fixed = fix_signs(&exact.sys, &sampled.sys)?;
        let r = error_decomposition(model, exact.space.clone(), &exact.sys, &fixed, l)?;
        put(
            out,
            CovreconErrorReport {
                e1: r.e1,
                e2: r.e2,
                e3: r.e3,
                total: r.total,
            },
            "out",
        )
    })
}

/// Sufficient `(L, M, h)` for accuracy `eps` under Brownian-motion
/// surrogates (all unknown constants set to one). `regime` is 1, 2 or 3;
/// 0 selects the closed-form univariate plan.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn covrecon_plan_brownian(eps: f64, regime: i32, out: *mut CovreconPlan) -> CovreconStatus {
    guard(|| {
        let plan = match regime {
            0 => brownian_plan(eps, 1.0, 1.0, 1.0)?,
            1..=3 => plan_parameters(&PlanInputs::brownian(eps), Regime::ALL[(regime - 1) as usize])?,
            _ => {
                return Err(Error::InvalidArgument {
                    name: "regime",
                    reason: format!("expected 0..=3, got {regime}"),
                }
                .into())
            }
        };
        let regime = match plan.regime {
            Regime::Case1 => 1,
            Regime::Case2 => 2,
            Regime::Case3 => 3,
        };
        put(
            out,
            CovreconPlan {
                regime,
                l_eps: plan.l_eps as u64,
                m_eps: plan.m_eps,
                h_lo: plan.h_lo,
                h_hi: plan.h_hi,
                h_eps: plan.h_eps,
                vacuous: plan.vacuous,
                capped: plan.capped,
            },
            "out",
        )
    })
}

/// Lambert W; `branch` 0 is the principal branch, −1 the lower one.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn covrecon_lambert_w(x: f64, branch: i32, out: *mut f64) -> CovreconStatus {
    guard(|| {
        let w = match branch {
            0 => lambert_w(x)?,
            -1 => lambert_w_m1(x)?,
            _ => {
                return Err(Error::InvalidArgument {
                    name: "branch",
                    reason: format!("expected 0 or -1, got {branch}"),
                }
                .into())
            }
        };
        put(out, w, "out")
    })
}
