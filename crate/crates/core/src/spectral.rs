//! Generalized eigenproblem for coefficient covariances in a non-orthonormal
//! basis, plus spectral-gap, Weyl and Davis–Kahan diagnostics.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fem::{FemSpace, MassMatrix, SpaceKey};
use crate::linalg;

/// Davis–Kahan constant `2^{3/2}`.
pub const C_DK: f64 = 2.828_427_124_746_190_3;
/// Relative width below which neighbouring eigenvalues count as one cluster.
pub const CLUSTER_WIDTH: f64 = 1e-10;
const SYMMETRY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Exact,
    Sampled,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::Exact => "exact",
            Provenance::Sampled => "sampled",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    /// Non-increasing.
    pub values: Vec<f64>,
    /// Mass-orthonormal coefficient columns `Φ = L^{−T} Φ̃`.
    pub vectors: DMatrix<f64>,
    /// Orthonormal eigenvectors `Φ̃` of the reduced matrix `Lᵀ Σ L`.
    pub reduced: DMatrix<f64>,
    pub provenance: Provenance,
    pub space: Option<SpaceKey>,
}

impl EigenSystem {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `Σ_{ℓ ≤ count} λ_ℓ Φ_ℓ Φ_ℓᵀ` in coefficient form.
    pub fn reconstruct(&self, count: usize) -> DMatrix<f64> {
        let n = self.vectors.nrows();
        let count = count.min(self.len());
        let mut scaled = self.vectors.columns(0, count).into_owned();
        for j in 0..count {
            scaled.column_mut(j).scale_mut(self.values[j]);
        }
        let out = if count == 0 {
            DMatrix::zeros(n, n)
        } else {
            scaled * self.vectors.columns(0, count).transpose()
        };
        linalg::symmetrize(&out)
    }

    /// Copy with negative eigenvalues set to zero.
    pub fn clip_negative(&self) -> EigenSystem {
        let mut out = self.clone();
        for v in &mut out.values {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        out
    }

    pub fn values_csv(&self) -> String {
        let mut s = String::from("index,eigenvalue\n");
        for (i, v) in self.values.iter().enumerate() {
            s.push_str(&format!("{},{:.16e}\n", i + 1, v));
        }
        s
    }

    /// One row per coefficient, one column per eigenvector.
    pub fn vectors_csv(&self) -> String {
        crate::csvio::matrix_to_csv(&self.vectors, None)
    }
}

/// Eigenpairs of `(M Σ M, M)` through the reduction `Ã = Lᵀ Σ L`, `M = L Lᵀ`.
pub fn generalized_eigendecomposition(
    sigma: &DMatrix<f64>,
    mass: &MassMatrix,
    provenance: Provenance,
) -> Result<EigenSystem> {
    let n = mass.size();
    if sigma.nrows() != n || sigma.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: sigma.nrows(),
        });
    }
    let scale = linalg::frobenius(sigma);
    let asym = linalg::max_asymmetry(sigma);
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::NotSymmetric {
            asymmetry: asym,
            allowed: SYMMETRY_TOL * scale,
        });
    }
    let l = &mass.lower;
    let reduced_matrix = linalg::symmetrize(&(l.transpose() * sigma * l));
    let (values, reduced) = linalg::sym_eigen_desc(&reduced_matrix);
    let vectors = l
        .transpose()
        .solve_upper_triangular(&reduced)
        .ok_or(Error::NotPositiveDefinite)?;
    Ok(EigenSystem {
        values,
        vectors,
        reduced,
        provenance,
        space: None,
    })
}

/// Decompose a coefficient covariance of `space`.
pub fn decompose_in_space(
    space: &FemSpace,
    sigma: &DMatrix<f64>,
    provenance: Provenance,
) -> Result<EigenSystem> {
    let mut sys = generalized_eigendecomposition(sigma, space.mass(), provenance)?;
    sys.space = Some(space.key());
    Ok(sys)
}

fn check_pair(a: &EigenSystem, b: &EigenSystem) -> Result<()> {
    if a.space != b.space {
        return Err(Error::SpaceMismatch);
    }
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    Ok(())
}

/// Flip target columns whose mass inner product with the reference is negative.
pub fn fix_signs(reference: &EigenSystem, target: &EigenSystem) -> Result<EigenSystem> {
    check_pair(reference, target)?;
    let mut out = target.clone();
    for j in 0..target.len() {
        // Φ_refᵀ M Φ_tgt = Φ̃_refᵀ Φ̃_tgt
        if reference.reduced.column(j).dot(&target.reduced.column(j)) < 0.0 {
            out.vectors.column_mut(j).neg_mut();
            out.reduced.column_mut(j).neg_mut();
        }
    }
    Ok(out)
}

fn spectral_scale(values: &[f64]) -> f64 {
    values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

fn cluster(diff: f64, scale: f64) -> f64 {
    if diff <= CLUSTER_WIDTH * scale {
        0.0
    } else {
        diff
    }
}

/// `min{λ_{ℓ−1} − λ_ℓ, λ_ℓ − λ_{ℓ+1}}` with `λ_0 = +∞` (ℓ is 1-based).
pub fn continuous_gap(lambda: &[f64], l: usize) -> Result<f64> {
    if l == 0 || l + 1 > lambda.len() {
        return Err(Error::OutOfRange {
            index: l,
            max: lambda.len().saturating_sub(1),
        });
    }
    let scale = spectral_scale(lambda);
    let below = cluster(lambda[l - 1] - lambda[l], scale);
    let above = if l == 1 {
        f64::INFINITY
    } else {
        cluster(lambda[l - 2] - lambda[l - 1], scale)
    };
    Ok(above.min(below))
}

/// `min{|λ^{(h;M)}_{ℓ−1} − λ^{(h)}_ℓ|, |λ^{(h)}_ℓ − λ^{(h;M)}_{ℓ+1}|}` with
/// `λ^{(h;M)}_0 = +∞` and `λ^{(h;M)}_{n+1} = −∞`.
pub fn discrete_gap_values(exact: &[f64], sampled: &[f64], l: usize) -> Result<f64> {
    let n = exact.len();
    if sampled.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: sampled.len(),
        });
    }
    if l == 0 || l > n {
        return Err(Error::OutOfRange { index: l, max: n });
    }
    let scale = spectral_scale(exact).max(spectral_scale(sampled));
    let lam = exact[l - 1];
    let above = if l == 1 {
        f64::INFINITY
    } else {
        cluster((sampled[l - 2] - lam).abs(), scale)
    };
    let below = if l == n {
        f64::INFINITY
    } else {
        cluster((lam - sampled[l]).abs(), scale)
    };
    Ok(above.min(below))
}

pub fn discrete_gap(exact: &EigenSystem, sampled: &EigenSystem, l: usize) -> Result<f64> {
    discrete_gap_values(&exact.values, &sampled.values, l)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingError {
    /// `‖Lᵀ(Σ − Σ̂)L‖₂`.
    pub value: f64,
    /// `‖Σ − Σ̂‖₂`.
    pub coefficient_norm: f64,
    pub bracket: (f64, f64),
}

impl SamplingError {
    pub fn in_bracket(&self) -> bool {
        let slack = 1e-10 * self.bracket.1.max(f64::MIN_POSITIVE);
        self.value >= self.bracket.0 - slack && self.value <= self.bracket.1 + slack
    }
}

pub fn sampling_error_norm(
    sigma: &DMatrix<f64>,
    sigma_hat: &DMatrix<f64>,
    mass: &MassMatrix,
) -> Result<SamplingError> {
    let n = mass.size();
    for m in [sigma, sigma_hat] {
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: m.nrows(),
            });
        }
    }
    let diff = linalg::symmetrize(&(sigma - sigma_hat));
    let l = &mass.lower;
    let reduced = linalg::symmetrize(&(l.transpose() * &diff * l));
    let value = linalg::sym_operator_norm(&reduced);
    let coefficient_norm = linalg::sym_operator_norm(&diff);
    Ok(SamplingError {
        value,
        coefficient_norm,
        bracket: (mass.lambda_min * coefficient_norm, mass.lambda_max * coefficient_norm),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeylReport {
    pub residuals: Vec<f64>,
    pub bound: f64,
    pub pass: bool,
}

pub fn weyl_check(exact: &EigenSystem, sampled: &EigenSystem, e: f64) -> Result<WeylReport> {
    if exact.len() != sampled.len() {
        return Err(Error::DimensionMismatch {
            expected: exact.len(),
            actual: sampled.len(),
        });
    }
    let residuals: Vec<f64> = exact
        .values
        .iter()
        .zip(&sampled.values)
        .map(|(a, b)| (a - b).abs())
        .collect();
    let bound = e * (1.0 + 1e-10);
    // absolute floor for rounding in the eigensolver itself
    let floor = 1e-13 * spectral_scale(&exact.values).max(spectral_scale(&sampled.values));
    let pass = residuals.iter().all(|r| *r <= bound + floor);
    Ok(WeylReport {
        residuals,
        bound: e,
        pass,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DavisKahanEntry {
    pub index: usize,
    /// `‖Φ̃_ℓ − Φ̃_ℓ^{(M)}‖` after sign fixing.
    pub measured: f64,
    pub discrete_gap: f64,
    /// `C_DK · E / δ_ℓ^{(h;M)}`.
    pub bound: f64,
    /// `4 · C_DK · E / δ_ℓ` when the continuous gap is supplied.
    pub relaxed_bound: Option<f64>,
    /// Zero gap: the bound carries no information.
    pub vacuous: bool,
    pub holds: bool,
}

/// Both sides of the Davis–Kahan chain for ℓ = 1..=count.
///
/// `sampled` must already be sign-fixed against `exact`.
pub fn davis_kahan_diagnostic(
    exact: &EigenSystem,
    sampled: &EigenSystem,
    e: f64,
    continuous_gaps: Option<&[f64]>,
    count: usize,
) -> Result<Vec<DavisKahanEntry>> {
    check_pair(exact, sampled)?;
    let count = count.min(exact.len());
    let mut out = Vec::with_capacity(count);
    for l in 1..=count {
        let j = l - 1;
        let measured = (exact.reduced.column(j) - sampled.reduced.column(j)).norm();
        let gap = discrete_gap(exact, sampled, l)?;
        let vacuous = gap == 0.0;
        let bound = if vacuous { f64::INFINITY } else { C_DK * e / gap };
        let relaxed_bound = continuous_gaps.and_then(|g| g.get(j)).map(|&d| {
            if d > 0.0 {
                4.0 * C_DK * e / d
            } else {
                f64::INFINITY
            }
        });
        let holds = vacuous || measured <= bound * (1.0 + 1e-10) + 1e-12;
        out.push(DavisKahanEntry {
            index: l,
            measured,
            discrete_gap: gap,
            bound,
            relaxed_bound,
            vacuous,
            holds,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapReport {
    pub continuous_gaps: Vec<f64>,
    pub discrete_gaps: Vec<f64>,
    pub sampling_error: SamplingError,
    pub weyl: WeylReport,
    pub davis_kahan: Vec<DavisKahanEntry>,
}

/// Full diagnostic for the first `count` modes. `reference_lambda` is the
/// continuous spectrum and must hold at least `count + 1` values.
pub fn gap_report(
    sigma: &DMatrix<f64>,
    sigma_hat: &DMatrix<f64>,
    mass: &MassMatrix,
    exact: &EigenSystem,
    sampled: &EigenSystem,
    reference_lambda: &[f64],
    count: usize,
) -> Result<GapReport> {
    let sampled = fix_signs(exact, sampled)?;
    let sampling_error = sampling_error_norm(sigma, sigma_hat, mass)?;
    let continuous_gaps = (1..=count)
        .map(|l| continuous_gap(reference_lambda, l))
        .collect::<Result<Vec<_>>>()?;
    let discrete_gaps = (1..=count.min(exact.len()))
        .map(|l| discrete_gap(exact, &sampled, l))
        .collect::<Result<Vec<_>>>()?;
    let weyl = weyl_check(exact, &sampled, sampling_error.value)?;
    let davis_kahan = davis_kahan_diagnostic(
        exact,
        &sampled,
        sampling_error.value,
        Some(&continuous_gaps),
        count,
    )?;
    Ok(GapReport {
        continuous_gaps,
        discrete_gaps,
        sampling_error,
        weyl,
        davis_kahan,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_vec(v.to_vec()))
    }

    #[test]
    fn identity_mass_gives_plain_eigenpairs() {
        let s = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let sys = generalized_eigendecomposition(&s, &MassMatrix::identity(2), Provenance::Exact).unwrap();
        assert!((sys.values[0] - 3.0).abs() < 1e-14);
        assert!((sys.values[1] - 1.0).abs() < 1e-14);
        assert!((sys.reconstruct(2) - s).amax() < 1e-14);
    }

    #[test]
    fn gap_examples() {
        let lam = [4.0, 2.0, 1.0, 0.5];
        assert_eq!(continuous_gap(&lam, 1).unwrap(), 2.0);
        assert_eq!(continuous_gap(&lam, 3).unwrap(), 0.5);
        assert!(continuous_gap(&lam, 4).is_err());
        assert_eq!(continuous_gap(&[1.0, 1.0, 0.5], 1).unwrap(), 0.0);
        assert!((discrete_gap_values(&[3.0, 1.0], &[2.9, 1.2], 1).unwrap() - 1.8).abs() < 1e-15);
    }

    #[test]
    fn weyl_diagonal_example() {
        let m = MassMatrix::identity(2);
        let a = diag(&[3.0, 1.0]);
        let b = diag(&[3.1, 0.9]);
        let ea = generalized_eigendecomposition(&a, &m, Provenance::Exact).unwrap();
        let eb = generalized_eigendecomposition(&b, &m, Provenance::Sampled).unwrap();
        let e = sampling_error_norm(&a, &b, &m).unwrap();
        assert!((e.value - 0.1).abs() < 1e-14);
        let w = weyl_check(&ea, &eb, e.value).unwrap();
        assert!(w.pass);
    }

    #[test]
    fn sign_fix_flips_negated() {
        let m = MassMatrix::identity(3);
        let a = diag(&[3.0, 2.0, 1.0]);
        let ea = generalized_eigendecomposition(&a, &m, Provenance::Exact).unwrap();
        let mut neg = ea.clone();
        neg.vectors.neg_mut();
        neg.reduced.neg_mut();
        let fixed = fix_signs(&ea, &neg).unwrap();
        assert_eq!(fixed, ea);
    }

    #[test]
    fn rejects_asymmetric() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(
            generalized_eigendecomposition(&s, &MassMatrix::identity(2), Provenance::Exact),
            Err(Error::NotSymmetric { .. })
        ));
    }

    #[test]
    fn degenerate_pair_is_vacuous() {
        let m = MassMatrix::identity(2);
        let a = diag(&[1.0, 1.0]);
        let ea = generalized_eigendecomposition(&a, &m, Provenance::Exact).unwrap();
        let dk = davis_kahan_diagnostic(&ea, &ea, 0.0, None, 2).unwrap();
        assert!(dk[0].vacuous && dk[0].holds);
    }
}
