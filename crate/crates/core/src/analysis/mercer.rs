//! Finite Mercer expansions and their `L²(D×D)` distances.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fem::{cross_mass, FemSpace};
use crate::field::SpectrumModel;
use crate::linalg;
use crate::spectral::EigenSystem;

#[derive(Debug, Clone)]
pub enum Factors {
    /// Leading eigenfunctions of an analytic model.
    Analytic(Arc<SpectrumModel>),
    /// Coefficient columns in a finite element space.
    Fem {
        space: Arc<FemSpace>,
        coeffs: DMatrix<f64>,
    },
    /// The untruncated kernel of the model (weights unused).
    Complete(Arc<SpectrumModel>),
}

/// `Σ_ℓ w_ℓ f_ℓ ⊗ f_ℓ`.
#[derive(Debug, Clone)]
pub struct MercerKernel {
    pub weights: Vec<f64>,
    pub factors: Factors,
}

impl MercerKernel {
    pub fn truncation(&self) -> usize {
        self.weights.len()
    }

    pub fn complete(model: Arc<SpectrumModel>) -> Self {
        Self {
            weights: Vec::new(),
            factors: Factors::Complete(model),
        }
    }

    /// The zero kernel.
    pub fn empty(model: Arc<SpectrumModel>) -> Self {
        Self {
            weights: Vec::new(),
            factors: Factors::Analytic(model),
        }
    }

    /// Pointwise value `Σ w_ℓ f_ℓ(x) f_ℓ(y)`.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        match &self.factors {
            Factors::Complete(m) => Ok(m.kernel(x, y)),
            Factors::Analytic(m) => {
                let mut acc = 0.0;
                for (l, w) in self.weights.iter().enumerate() {
                    acc += w * m.eigenfunction(l + 1, x)? * m.eigenfunction(l + 1, y)?;
                }
                Ok(acc)
            }
            Factors::Fem { space, coeffs } => {
                let mut acc = 0.0;
                for (j, w) in self.weights.iter().enumerate() {
                    let c = space.coefficients(coeffs.column(j).into_owned())?;
                    let v = space.evaluate(&c, &[x.to_vec(), y.to_vec()])?;
                    acc += w * v[0] * v[1];
                }
                Ok(acc)
            }
        }
    }
}

/// First `l` analytic eigenpairs of `model`.
pub fn truncate_model(model: Arc<SpectrumModel>, l: usize) -> Result<MercerKernel> {
    if l == 0 || l > model.available_modes() {
        return Err(Error::OutOfRange {
            index: l,
            max: model.available_modes(),
        });
    }
    Ok(MercerKernel {
        weights: model.eigenvalues(l)?,
        factors: Factors::Analytic(model),
    })
}

/// First `l` eigenpairs of a discrete system living in `space`.
pub fn truncate_system(space: Arc<FemSpace>, sys: &EigenSystem, l: usize) -> Result<MercerKernel> {
    if l == 0 || l > sys.len() {
        return Err(Error::OutOfRange {
            index: l,
            max: sys.len(),
        });
    }
    if let Some(key) = sys.space {
        if key != space.key() {
            return Err(Error::SpaceMismatch);
        }
    }
    Ok(MercerKernel {
        weights: sys.values[..l].to_vec(),
        factors: Factors::Fem {
            space,
            coeffs: sys.vectors.columns(0, l).into_owned(),
        },
    })
}

fn same_model(a: &SpectrumModel, b: &SpectrumModel) -> Result<()> {
    if a.family() != b.family() {
        return Err(Error::SpaceMismatch);
    }
    Ok(())
}

/// `Σ_ij a_i b_j G_ij²`.
fn weighted_square_sum(a: &[f64], b: &[f64], gram: &DMatrix<f64>) -> f64 {
    let mut acc = 0.0;
    for (i, ai) in a.iter().enumerate() {
        for (j, bj) in b.iter().enumerate() {
            let g = gram[(i, j)];
            acc += ai * bj * g * g;
        }
    }
    acc
}

/// `⟨A, B⟩_{L²(D×D)}` via factor Gram matrices.
pub fn kernel_inner_product(a: &MercerKernel, b: &MercerKernel) -> Result<f64> {
    use Factors::*;
    match (&a.factors, &b.factors) {
        (Complete(ma), Complete(mb)) => {
            same_model(ma, mb)?;
            Ok(ma.kernel_norm_sq())
        }
        (Complete(m), Analytic(mb)) | (Analytic(mb), Complete(m)) => {
            same_model(m, mb)?;
            // ⟨R, φ_ℓ ⊗ φ_ℓ⟩ = λ_ℓ
            let w = if matches!(a.factors, Complete(_)) { &b.weights } else { &a.weights };
            let lam = m.eigenvalues(w.len())?;
            Ok(w.iter().zip(&lam).map(|(x, y)| x * y).sum())
        }
        (Complete(m), Fem { space, coeffs }) | (Fem { space, coeffs }, Complete(m)) => {
            let w = if matches!(a.factors, Complete(_)) { &b.weights } else { &a.weights };
            let k = m.kernel_gram(space)?;
            let kc = &k * coeffs;
            Ok(w
                .iter()
                .enumerate()
                .map(|(j, wj)| wj * coeffs.column(j).dot(&kc.column(j)))
                .sum())
        }
        (Analytic(ma), Analytic(mb)) => {
            same_model(ma, mb)?;
            Ok(a.weights.iter().zip(&b.weights).map(|(x, y)| x * y).sum())
        }
        (Analytic(m), Fem { space, coeffs }) => {
            let loads = m.mode_loads(space, a.weights.len())?;
            let gram = loads.transpose() * coeffs;
            Ok(weighted_square_sum(&a.weights, &b.weights, &gram))
        }
        (Fem { .. }, Analytic(_)) => kernel_inner_product(b, a),
        (Fem { space: sa, coeffs: ca }, Fem { space: sb, coeffs: cb }) => {
            let gram = if sa.key() == sb.key() {
                ca.transpose() * &sa.mass().matrix * cb
            } else {
                ca.transpose() * cross_mass(sa, sb)? * cb
            };
            Ok(weighted_square_sum(&a.weights, &b.weights, &gram))
        }
    }
}

/// Coefficient form `S = C W Cᵀ` of a discrete kernel.
fn coefficient_kernel(weights: &[f64], coeffs: &DMatrix<f64>) -> DMatrix<f64> {
    let mut scaled = coeffs.clone();
    for (j, w) in weights.iter().enumerate() {
        scaled.column_mut(j).scale_mut(*w);
    }
    scaled * coeffs.transpose()
}

/// `‖Σ_ij (S₁ − S₂)_ij θ_i ⊗ θ_j‖_{L²(D×D)} = ‖Lᵀ(S₁ − S₂)L‖_F`.
pub fn covariance_l2_distance(space: &FemSpace, s1: &DMatrix<f64>, s2: &DMatrix<f64>) -> f64 {
    let l = &space.mass().lower;
    linalg::frobenius(&(l.transpose() * (s1 - s2) * l))
}

/// `‖R_A − R_B‖_{L²(D×D)}`.
pub fn kernel_l2_distance(a: &MercerKernel, b: &MercerKernel) -> Result<f64> {
    if let (Factors::Fem { space: sa, coeffs: ca }, Factors::Fem { space: sb, coeffs: cb }) =
        (&a.factors, &b.factors)
    {
        // same space: difference formed before squaring, no cancellation
        if sa.key() == sb.key() {
            let s1 = coefficient_kernel(&a.weights, ca);
            let s2 = coefficient_kernel(&b.weights, cb);
            return Ok(covariance_l2_distance(sa, &s1, &s2));
        }
    }
    let aa = kernel_inner_product(a, a)?;
    let bb = kernel_inner_product(b, b)?;
    let ab = kernel_inner_product(a, b)?;
    Ok((aa + bb - 2.0 * ab).max(0.0).sqrt())
}
