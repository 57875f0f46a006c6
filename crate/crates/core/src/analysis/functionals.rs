//! The spectral functionals `G(L)` and `H(L)` that govern the reconstruction
//! error and the success probability.

use std::f64::consts::PI;

use crate::error::Result;
use crate::field::{brownian_lambda, KernelFamily, SpectrumModel};
use crate::spectral::continuous_gap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FunctionalSource {
    ClosedFormBrownian,
    Numeric,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Functional {
    pub value: f64,
    /// A zero gap was met among the first `L` modes.
    pub degenerate: bool,
    pub source: FunctionalSource,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralFunctionals {
    pub g: Functional,
    pub h: Functional,
}

/// `G(L) = (Σ_{ℓ≤L} (λ_ℓ/δ_ℓ)²)^{1/2}`; needs `λ_1..λ_{L+1}`.
pub fn g_functional(lambda: &[f64], l: usize) -> Result<Functional> {
    let mut acc = 0.0;
    let mut degenerate = false;
    for k in 1..=l {
        let gap = continuous_gap(lambda, k)?;
        if gap == 0.0 {
            degenerate = true;
            acc = f64::INFINITY;
            continue;
        }
        let r = lambda[k - 1] / gap;
        acc += r * r;
    }
    Ok(Functional {
        value: acc.sqrt(),
        degenerate,
        source: FunctionalSource::Numeric,
    })
}

/// `H(L) = (min_{ℓ≤L} δ_ℓ / 48)²`; needs `λ_1..λ_{L+1}`.
pub fn h_functional(lambda: &[f64], l: usize) -> Result<Functional> {
    let mut min_gap = f64::INFINITY;
    for k in 1..=l {
        min_gap = min_gap.min(continuous_gap(lambda, k)?);
    }
    Ok(Functional {
        value: (min_gap / 48.0).powi(2),
        degenerate: min_gap == 0.0,
        source: FunctionalSource::Numeric,
    })
}

/// Forward gap `λ_ℓ − λ_{ℓ+1} = 2ℓ / (π² (ℓ² − ¼)²)` of Brownian motion,
/// which is also its two-sided gap.
pub fn brownian_gap(l: usize) -> f64 {
    let lf = l as f64;
    2.0 * lf / (PI * PI * (lf * lf - 0.25).powi(2))
}

/// `G²(L) = (1/64) Σ_{ℓ≤L} (2ℓ+1)⁴/ℓ²`, the same in every dimension.
pub fn g_closed_brownian(l: usize) -> f64 {
    let s: f64 = (1..=l)
        .map(|k| {
            let k = k as f64;
            (2.0 * k + 1.0).powi(4) / (k * k)
        })
        .sum();
    (s / 64.0).sqrt()
}

/// `H(L) = λ₁^{2(d−1)} (δ_B(L)/48)²`.
pub fn h_closed_brownian(l: usize, dim: usize) -> f64 {
    let prefactor = brownian_lambda(1).powi(2 * (dim as i32 - 1));
    prefactor * (brownian_gap(l) / 48.0).powi(2)
}

/// Distinct eigenvalues in decreasing order (ties merged), at least `count`.
pub fn distinct_eigenvalues(model: &SpectrumModel, count: usize) -> Result<Vec<f64>> {
    match model.family() {
        KernelFamily::BrownianMotion => model.eigenvalues(count),
        KernelFamily::BrownianSheet => {
            // distinct sheet values are λ₁ · λ_k^{1D}
            let l1 = brownian_lambda(1);
            Ok((1..=count).map(|k| l1 * brownian_lambda(k)).collect())
        }
    }
}

/// Numeric `G(L)` and `H(L)` over the distinct spectrum of `model`.
pub fn model_functionals(model: &SpectrumModel, l: usize) -> Result<SpectralFunctionals> {
    let lambda = distinct_eigenvalues(model, l + 1)?;
    Ok(SpectralFunctionals {
        g: g_functional(&lambda, l)?,
        h: h_functional(&lambda, l)?,
    })
}

pub fn closed_form_functionals(model: &SpectrumModel, l: usize) -> SpectralFunctionals {
    SpectralFunctionals {
        g: Functional {
            value: g_closed_brownian(l),
            degenerate: false,
            source: FunctionalSource::ClosedFormBrownian,
        },
        h: Functional {
            value: h_closed_brownian(l, model.dimension()),
            degenerate: false,
            source: FunctionalSource::ClosedFormBrownian,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g_at_one() {
        assert!((g_closed_brownian(1).powi(2) - 81.0 / 64.0).abs() < 1e-15);
    }

    #[test]
    fn h_single_mode() {
        let h = h_functional(&[4.0, 2.0, 1.0], 1).unwrap();
        assert!((h.value - (2.0_f64 / 48.0).powi(2)).abs() < 1e-16);
    }

    #[test]
    fn degenerate_flags() {
        let g = g_functional(&[1.0, 1.0, 0.5], 2).unwrap();
        assert!(g.degenerate && g.value.is_infinite());
        let h = h_functional(&[1.0, 1.0, 0.5], 2).unwrap();
        assert!(h.degenerate && h.value == 0.0);
    }
}
