//! Splitting the reconstruction error into truncation, discretization and
//! sampling parts, plus the gap condition and success probability.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::analysis::mercer::{kernel_l2_distance, truncate_model, truncate_system, MercerKernel};
use crate::error::{invalid, Error, Result};
use crate::fem::FemSpace;
use crate::field::{KernelFamily, SpectrumModel};
use crate::spectral::EigenSystem;

/// Terms summed explicitly before the integral remainder takes over.
const TAIL_TERMS: usize = 20_000;

/// `π⁻⁴ Σ_{ℓ>L} (ℓ − ½)⁻⁴`, summed directly with a midpoint-integral tail.
fn brownian_tail_sq_1d(l: usize) -> f64 {
    let upper = l + TAIL_TERMS;
    // smallest terms first for accuracy
    let mut acc = 0.0;
    for k in ((l + 1)..=upper).rev() {
        let t = k as f64 - 0.5;
        acc += 1.0 / (t * t * t * t);
    }
    // Σ_{k>N} (k−½)⁻⁴ ≈ ∫_N^∞ x⁻⁴ dx with O(N⁻⁵) error
    acc += 1.0 / (3.0 * (upper as f64).powi(3));
    acc / PI.powi(4)
}

/// `‖E1‖ = (Σ_{ℓ>L} λ_ℓ²)^{1/2}`.
pub fn truncation_error_e1(model: &SpectrumModel, l: usize) -> Result<f64> {
    match model.family() {
        KernelFamily::BrownianMotion => Ok(brownian_tail_sq_1d(l).sqrt()),
        KernelFamily::BrownianSheet => {
            let avail = model.available_modes();
            if l > avail {
                return Err(Error::SpectrumExhausted {
                    requested: l,
                    available: avail,
                });
            }
            let all = model.eigenvalues(avail)?;
            let table_tail: f64 = all[l..].iter().rev().map(|v| v * v).sum();
            let table_total: f64 = all.iter().rev().map(|v| v * v).sum();
            let beyond = (model.kernel_norm_sq() - table_total).max(0.0);
            Ok((table_tail + beyond).sqrt())
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParameterRecord {
    pub l: usize,
    pub h: f64,
    pub m: usize,
    pub tau: Option<usize>,
    pub alpha: Option<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ErrorReport {
    pub e1: f64,
    pub e2: f64,
    pub e3: f64,
    pub total: f64,
    pub sampling_error: Option<f64>,
    pub gap_flags: Vec<bool>,
    pub g: Option<f64>,
    pub h_functional: Option<f64>,
    pub p0: Option<SuccessProbability>,
    /// `‖R^{(h)}_∞ − R^{(h)}_{L_gen}‖` of the generator truncation.
    pub generator_residual: Option<f64>,
    pub params: ParameterRecord,
}

impl ErrorReport {
    pub fn triangle_holds(&self) -> bool {
        self.total <= self.e1 + self.e2 + self.e3 + 1e-10
    }

    pub const CSV_HEADER: &'static str =
        "seed,L,h,M,tau,alpha,e1,e2,e3,total,sampling_error,g,h_functional,p0,p0_clamped,generator_residual";

    pub fn csv_row(&self) -> String {
        let f = crate::csvio::fmt;
        let opt = |v: Option<f64>| v.map(f).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.params.seed,
            self.params.l,
            f(self.params.h),
            self.params.m,
            self.params.tau.map(|t| t.to_string()).unwrap_or_default(),
            opt(self.params.alpha),
            f(self.e1),
            f(self.e2),
            f(self.e3),
            f(self.total),
            opt(self.sampling_error),
            opt(self.g),
            opt(self.h_functional),
            opt(self.p0.map(|p| p.value)),
            self.p0.map(|p| p.clamped.to_string()).unwrap_or_default(),
            opt(self.generator_residual),
        )
    }
}

/// `‖E1‖`, `‖E2‖`, `‖E3‖` and the total error at truncation `l`.
///
/// `sampled` should be sign-fixed against `exact`; the distances themselves
/// are sign invariant.
pub fn error_decomposition(
    model: Arc<SpectrumModel>,
    space: Arc<FemSpace>,
    exact: &EigenSystem,
    sampled: &EigenSystem,
    l: usize,
) -> Result<ErrorReport> {
    if exact.space != sampled.space {
        return Err(Error::SpaceMismatch);
    }
    let analytic = truncate_model(model.clone(), l)?;
    let exact_l = truncate_system(space.clone(), exact, l)?;
    let sampled_l = truncate_system(space.clone(), sampled, l)?;
    let complete = MercerKernel::complete(model.clone());
    Ok(ErrorReport {
        e1: truncation_error_e1(&model, l)?,
        e2: kernel_l2_distance(&analytic, &exact_l)?,
        e3: kernel_l2_distance(&exact_l, &sampled_l)?,
        total: kernel_l2_distance(&complete, &sampled_l)?,
        params: ParameterRecord {
            l,
            h: space.h(),
            ..Default::default()
        },
        ..Default::default()
    })
}

/// Flags `δ_ℓ ≥ 4 C₁ h^{2s} / λ_{ℓ+1} + 4 E` for ℓ = 1..=L.
pub fn gap_condition_check(
    gaps: &[f64],
    lambda: &[f64],
    h: f64,
    s: f64,
    c1: f64,
    e_hm: f64,
    l: usize,
) -> Result<Vec<bool>> {
    if gaps.len() < l || lambda.len() < l + 1 {
        return Err(invalid("L", format!("need {l} gaps and {} eigenvalues", l + 1)));
    }
    Ok((0..l)
        .map(|j| gaps[j] >= 4.0 * c1 * h.powf(2.0 * s) / lambda[j + 1] + 4.0 * e_hm)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuccessProbability {
    pub value: f64,
    pub raw: f64,
    /// The raw bound left `[0, 1]`.
    pub clamped: bool,
}

/// `p₀ = 1 − 2 n_h 5^τ exp(−M ρ₁ H_L λ_max(M)^{−2})`, clamped to `[0, 1]`.
pub fn success_probability(
    m: f64,
    n_h: usize,
    tau: usize,
    rho1: f64,
    h_l: f64,
    lambda_max_mass: f64,
) -> SuccessProbability {
    let log_term = (2.0 * n_h as f64).ln() + tau as f64 * 5f64.ln()
        - m * rho1 * h_l / (lambda_max_mass * lambda_max_mass);
    let raw = 1.0 - log_term.exp();
    let value = raw.clamp(0.0, 1.0);
    SuccessProbability {
        value,
        raw,
        clamped: value != raw,
    }
}
