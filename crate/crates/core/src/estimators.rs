//! Covariance estimation from coefficient samples: maximum-likelihood
//! covariance, tapering, and the associated rate functions.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::fem::CoefficientVector;
use crate::field::SampleMatrix;
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    Sample,
    Tapered,
}

impl EstimatorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EstimatorKind::Sample => "sample",
            EstimatorKind::Tapered => "tapered",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceEstimate {
    pub matrix: DMatrix<f64>,
    pub kind: EstimatorKind,
    pub tau: Option<usize>,
    pub samples: usize,
    pub alpha: Option<f64>,
}

impl CovarianceEstimate {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Row mean of a sample matrix.
pub fn mean_of_rows(rows: &DMatrix<f64>) -> Result<DVector<f64>> {
    let m = rows.nrows();
    if m == 0 {
        return Err(invalid("M", "need at least one sample"));
    }
    Ok(rows.row_mean().transpose())
}

pub fn sample_mean(samples: &SampleMatrix) -> Result<CoefficientVector> {
    Ok(CoefficientVector {
        values: mean_of_rows(&samples.data)?,
        space: samples.space,
    })
}

/// `(1/M) Σ_m (x_m − x̄)(x_m − x̄)ᵀ` over the rows of `rows`.
pub fn covariance_of_rows(rows: &DMatrix<f64>) -> Result<CovarianceEstimate> {
    let m = rows.nrows();
    if m < 2 {
        return Err(invalid("M", format!("sample covariance needs M >= 2, got {m}")));
    }
    let mean = rows.row_mean();
    let mut centered = rows.clone();
    for mut r in centered.row_iter_mut() {
        r -= &mean;
    }
    let cov = centered.tr_mul(&centered) / m as f64;
    Ok(CovarianceEstimate {
        matrix: linalg::symmetrize(&cov),
        kind: EstimatorKind::Sample,
        tau: None,
        samples: m,
        alpha: None,
    })
}

pub fn sample_covariance(samples: &SampleMatrix) -> Result<CovarianceEstimate> {
    covariance_of_rows(&samples.data)
}

fn check_tau(tau: usize) -> Result<()> {
    if tau == 0 || tau % 2 == 1 {
        return Err(invalid("tau", format!("taper width must be a positive even integer, got {tau}")));
    }
    Ok(())
}

/// Tapering weight for index lag `|k − k'|` and even width `τ`.
pub fn taper_weight(k: usize, k_prime: usize, tau: usize) -> Result<f64> {
    check_tau(tau)?;
    Ok(weight_unchecked(k.abs_diff(k_prime), tau))
}

fn weight_unchecked(lag: usize, tau: usize) -> f64 {
    if 2 * lag <= tau {
        1.0
    } else if lag < tau {
        2.0 * (1.0 - lag as f64 / tau as f64)
    } else {
        0.0
    }
}

/// Entrywise product with the taper weights.
pub fn taper_estimate(cov: &CovarianceEstimate, tau: usize) -> Result<CovarianceEstimate> {
    check_tau(tau)?;
    let n = cov.dim();
    let asym = linalg::max_asymmetry(&cov.matrix);
    let scale = cov.matrix.amax().max(f64::MIN_POSITIVE);
    if asym > 1e-14 * scale {
        return Err(Error::NotSymmetric {
            asymmetry: asym,
            allowed: 1e-14 * scale,
        });
    }
    let weights: Vec<f64> = (0..n).map(|lag| weight_unchecked(lag, tau)).collect();
    let matrix = DMatrix::from_fn(n, n, |i, j| cov.matrix[(i, j)] * weights[i.abs_diff(j)]);
    Ok(CovarianceEstimate {
        matrix,
        kind: EstimatorKind::Tapered,
        tau: Some(tau),
        samples: cov.samples,
        alpha: cov.alpha,
    })
}

/// `M^{1/(2α+1)}` rounded to the nearest even integer (ties up), clamped to
/// `[2, 2·n_h]` when `n_h` is given.
pub fn optimal_taper(m: usize, alpha: f64, n_h: Option<usize>) -> Result<usize> {
    if m == 0 {
        return Err(invalid("M", "must be at least 1"));
    }
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(invalid("alpha", format!("must be positive, got {alpha}")));
    }
    let raw = (m as f64).powf(1.0 / (2.0 * alpha + 1.0));
    let mut tau = 2 * ((raw / 2.0 + 0.5).floor() as usize);
    tau = tau.max(2);
    if let Some(n) = n_h {
        tau = tau.min(2 * n.max(1));
    }
    Ok(tau)
}

/// Sample covariance followed by tapering with the optimal width.
pub fn tapered_covariance(samples: &SampleMatrix, alpha: f64) -> Result<CovarianceEstimate> {
    let cov = sample_covariance(samples)?;
    let tau = optimal_taper(cov.samples, alpha, Some(cov.dim()))?;
    let mut out = taper_estimate(&cov, tau)?;
    out.alpha = Some(alpha);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayClassReport {
    pub alpha: f64,
    /// `tail[c-1] = max_k Σ_{|k'−k|>c} |Σ_kk'|` for `c = 1..=n_h`.
    pub tail_sums: Vec<f64>,
    pub largest_eigenvalue: f64,
    /// Smallest `C₁` with `tail(c) ≤ C₁ c^{−α}` for every `c`.
    pub c1: f64,
    /// `λ_max(Σ)`.
    pub c2: f64,
    pub member: bool,
}

impl DecayClassReport {
    /// Membership for prescribed class constants.
    pub fn within(&self, c1_max: f64, c2_max: f64) -> bool {
        self.c1 <= c1_max && self.c2 <= c2_max
    }

    pub fn to_key_value(&self) -> String {
        let mut s = format!(
            "alpha = {:.16e}\nc1 = {:.16e}\nc2 = {:.16e}\nlargest_eigenvalue = {:.16e}\nmember = {}\n",
            self.alpha, self.c1, self.c2, self.largest_eigenvalue, self.member
        );
        for (i, t) in self.tail_sums.iter().enumerate() {
            s.push_str(&format!("tail.{} = {:.16e}\n", i + 1, t));
        }
        s
    }
}

pub fn decay_class_check(sigma: &DMatrix<f64>, alpha: f64) -> Result<DecayClassReport> {
    let n = sigma.nrows();
    if sigma.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: sigma.ncols(),
        });
    }
    let mut tail = vec![0.0_f64; n];
    let mut profile = vec![0.0_f64; n + 1];
    for k in 0..n {
        profile.iter_mut().for_each(|p| *p = 0.0);
        for kp in 0..n {
            profile[k.abs_diff(kp)] += sigma[(k, kp)].abs();
        }
        // suffix sums: lags strictly greater than c
        let mut acc = 0.0;
        for c in (1..=n).rev() {
            tail[c - 1] = tail[c - 1].max(acc);
            acc += profile[c];
        }
    }
    let c1 = tail
        .iter()
        .enumerate()
        .map(|(i, t)| t * ((i + 1) as f64).powf(alpha))
        .fold(0.0_f64, f64::max);
    let largest = linalg::sym_eigenvalues_desc(&linalg::symmetrize(sigma))
        .first()
        .copied()
        .unwrap_or(0.0);
    Ok(DecayClassReport {
        alpha,
        tail_sums: tail,
        largest_eigenvalue: largest,
        c1,
        c2: largest,
        member: c1.is_finite() && largest.is_finite(),
    })
}

/// `ρ_h(M)`: rate of the tapered estimator in terms of the dimension `n_h`.
pub fn rho(m: f64, n_h: f64, alpha: f64) -> f64 {
    let p = 2.0 * alpha + 1.0;
    if n_h >= m.powf(1.0 / p) {
        m.powf(-2.0 * alpha / p) + n_h.ln() / m
    } else {
        n_h / m
    }
}

/// `ρ̃_h(M)`: the same rate with `n_h` replaced by the mesh scale `h^{−d}`.
pub fn rho_tilde(m: f64, h: f64, d: usize, alpha: f64) -> f64 {
    let p = 2.0 * alpha + 1.0;
    let nh = h.powi(-(d as i32));
    if nh >= m.powf(1.0 / p) {
        m.powf(-2.0 * alpha / p) + d as f64 * (1.0 / h).ln() / m
    } else {
        nh / m
    }
}

/// `‖A − B‖₂` for symmetric matrices.
pub fn operator_norm_error(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    linalg::sym_operator_norm(&linalg::symmetrize(&(a - b)))
}
