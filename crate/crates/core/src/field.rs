//! Covariance models with known Karhunen–Loève spectra, KL-based field
//! sampling into a finite element space, and exact coefficient covariances.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::fem::{sine_load_1d, FemSpace, SpaceKey};
use crate::linalg;
use crate::quadrature::GaussLegendre;

/// Largest odd-number product enumerated for the Brownian-sheet mode table.
const SHEET_PRODUCT_BOUND: usize = 10_001;
const MAX_1D_MODES: usize = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelFamily {
    /// `min(x, x')` on `(0,1)`.
    BrownianMotion,
    /// `min(x₁, x₁')·min(x₂, x₂')` on `(0,1)²`.
    BrownianSheet,
}

/// A covariance kernel whose eigenpairs are known analytically.
#[derive(Debug, Clone)]
pub struct SpectrumModel {
    family: KernelFamily,
    /// Multi-indices in non-increasing eigenvalue order (sheet only).
    sheet_modes: Vec<(usize, usize)>,
}

/// Largest 1D Brownian eigenvalue `4/π²`.
pub fn brownian_lambda(l: usize) -> f64 {
    let t = l as f64 - 0.5;
    1.0 / (PI * PI * t * t)
}

/// `√2 sin((ℓ − ½)πx)`, the ℓ-th L²-orthonormal eigenfunction of `min(x, x')`.
pub fn brownian_eigenfunction(l: usize, x: f64) -> f64 {
    std::f64::consts::SQRT_2 * ((l as f64 - 0.5) * PI * x).sin()
}

/// Position of the sheet eigenvalue `λ(ℓ₁,ℓ₂)` among the distinct 1D values:
/// `λ(ℓ₁,ℓ₂) = λ₁ · λ_{k(ℓ₁,ℓ₂)}`.
pub fn flattening_index(l1: usize, l2: usize) -> usize {
    ((2 * l1 - 1) * (2 * l2 - 1)).div_ceil(2)
}

pub fn brownian_spectrum_1d() -> SpectrumModel {
    SpectrumModel {
        family: KernelFamily::BrownianMotion,
        sheet_modes: Vec::new(),
    }
}

pub fn brownian_spectrum_tensor(dim: usize) -> Result<SpectrumModel> {
    if dim != 2 {
        return Err(invalid("dimension", format!("tensor Brownian model implemented for d = 2 only, got {dim}")));
    }
    let bound = SHEET_PRODUCT_BOUND;
    let mut modes = Vec::new();
    let mut a = 1;
    while a <= bound {
        let mut b = 1;
        while a * b <= bound {
            modes.push((a.div_ceil(2), b.div_ceil(2)));
            b += 2;
        }
        a += 2;
    }
    // flattening index first, lexicographic multi-index on ties
    modes.sort_by_key(|&(l1, l2)| (flattening_index(l1, l2), l1, l2));
    Ok(SpectrumModel {
        family: KernelFamily::BrownianSheet,
        sheet_modes: modes,
    })
}

impl SpectrumModel {
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "brownian-1d" | "brownian" => Ok(brownian_spectrum_1d()),
            "brownian-sheet" | "brownian-2d" => brownian_spectrum_tensor(2),
            other => Err(Error::Parse(format!("unknown model `{other}`"))),
        }
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn name(&self) -> &'static str {
        match self.family {
            KernelFamily::BrownianMotion => "brownian-1d",
            KernelFamily::BrownianSheet => "brownian-sheet",
        }
    }

    pub fn dimension(&self) -> usize {
        match self.family {
            KernelFamily::BrownianMotion => 1,
            KernelFamily::BrownianSheet => 2,
        }
    }

    /// Nominal Sobolev smoothness `s` (metadata only; the field has
    /// `s = ½ − δ` for every `δ > 0`).
    pub fn smoothness(&self) -> f64 {
        0.5
    }

    pub fn available_modes(&self) -> usize {
        match self.family {
            KernelFamily::BrownianMotion => MAX_1D_MODES,
            KernelFamily::BrownianSheet => self.sheet_modes.len(),
        }
    }

    fn check_mode(&self, l: usize) -> Result<()> {
        if l == 0 || l > self.available_modes() {
            return Err(Error::OutOfRange {
                index: l,
                max: self.available_modes(),
            });
        }
        Ok(())
    }

    /// Per-axis multi-index of the ℓ-th mode (1-based).
    pub fn mode_index(&self, l: usize) -> Result<Vec<usize>> {
        self.check_mode(l)?;
        Ok(match self.family {
            KernelFamily::BrownianMotion => vec![l],
            KernelFamily::BrownianSheet => {
                let (a, b) = self.sheet_modes[l - 1];
                vec![a, b]
            }
        })
    }

    pub fn eigenvalue(&self, l: usize) -> Result<f64> {
        let idx = self.mode_index(l)?;
        // evaluate through the odd product so that tied modes compare equal
        let odd: usize = idx.iter().map(|&li| 2 * li - 1).product();
        let scale = (2.0 / PI).powi(2 * idx.len() as i32);
        Ok(scale / (odd as f64 * odd as f64))
    }

    pub fn eigenvalues(&self, count: usize) -> Result<Vec<f64>> {
        if count > self.available_modes() {
            return Err(Error::SpectrumExhausted {
                requested: count,
                available: self.available_modes(),
            });
        }
        (1..=count).map(|l| self.eigenvalue(l)).collect()
    }

    pub fn eigenfunction(&self, l: usize, x: &[f64]) -> Result<f64> {
        let idx = self.mode_index(l)?;
        if x.len() != idx.len() {
            return Err(Error::DimensionMismatch {
                expected: idx.len(),
                actual: x.len(),
            });
        }
        Ok(idx
            .iter()
            .zip(x)
            .map(|(&li, &xi)| brownian_eigenfunction(li, xi))
            .product())
    }

    /// Closed-form kernel value.
    pub fn kernel(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter().zip(y).map(|(a, b)| a.min(*b)).product()
    }

    /// `Σ_{ℓ ≤ L} λ_ℓ φ_ℓ(x) φ_ℓ(y)`.
    pub fn mercer_sum(&self, x: &[f64], y: &[f64], truncation: usize) -> Result<f64> {
        let mut acc = 0.0;
        for l in 1..=truncation {
            acc += self.eigenvalue(l)? * self.eigenfunction(l, x)? * self.eigenfunction(l, y)?;
        }
        Ok(acc)
    }

    /// `‖R‖²_{L²(D×D)} = Σ λ_ℓ²`: `1/6` for Brownian motion and its square
    /// for the sheet.
    pub fn kernel_norm_sq(&self) -> f64 {
        (1.0_f64 / 6.0).powi(self.dimension() as i32)
    }

    /// Nodal-basis load vectors `∫ φ_ℓ θ_j` (columns ℓ = 1..=count).
    fn nodal_mode_loads(&self, space: &FemSpace, count: usize) -> Result<DMatrix<f64>> {
        let n = space.elements_per_axis();
        let mut out = DMatrix::zeros(space.dof_count(), count);
        let mut cache: std::collections::HashMap<usize, nalgebra::DVector<f64>> =
            std::collections::HashMap::new();
        let mut load_1d = |l: usize| {
            cache
                .entry(l)
                .or_insert_with(|| {
                    sine_load_1d(n, (l as f64 - 0.5) * PI) * std::f64::consts::SQRT_2
                })
                .clone()
        };
        for l in 1..=count {
            let idx = self.mode_index(l)?;
            let col = match idx.as_slice() {
                [a] => load_1d(*a),
                [a, b] => linalg::kron_vec(&load_1d(*a), &load_1d(*b)),
                _ => unreachable!("models are 1D or 2D"),
            };
            out.set_column(l - 1, &col);
        }
        Ok(out)
    }

    fn check_space(&self, space: &FemSpace) -> Result<()> {
        if space.dim() != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                actual: space.dim(),
            });
        }
        Ok(())
    }

    /// Load vectors `(φ_ℓ, θ_j)` in the space's basis (columns ℓ = 1..=count).
    pub fn mode_loads(&self, space: &FemSpace, count: usize) -> Result<DMatrix<f64>> {
        self.check_space(space)?;
        if count > self.available_modes() {
            return Err(Error::SpectrumExhausted {
                requested: count,
                available: self.available_modes(),
            });
        }
        Ok(space.nodal_loads_to_basis(self.nodal_mode_loads(space, count)?))
    }

    /// Coefficients of `Π_{V_h} φ_ℓ` (columns ℓ = 1..=count).
    pub fn projected_modes(&self, space: &FemSpace, count: usize) -> Result<DMatrix<f64>> {
        let loads = self.mode_loads(space, count)?;
        Ok(space.solve_mass(&loads))
    }

    /// Exact kernel Gram `K_jk = ∫∫ R(x,y) θ_j(x) θ_k(y)` in the space's basis.
    pub fn kernel_gram(&self, space: &FemSpace) -> Result<DMatrix<f64>> {
        self.check_space(space)?;
        let k1 = min_kernel_gram_1d(space.elements_per_axis());
        let nodal = match self.family {
            KernelFamily::BrownianMotion => k1,
            KernelFamily::BrownianSheet => linalg::kron(&k1, &k1),
        };
        Ok(space.nodal_gram_to_basis(nodal))
    }
}

/// `∫₀¹∫₀¹ min(x,y) θ_i(x) θ_j(y)` for 1D hat functions, exact.
///
/// Off-diagonal element pairs factor into first moments; on a diagonal
/// element the kink is resolved by splitting the inner integral at `x`.
pub fn min_kernel_gram_1d(n: usize) -> DMatrix<f64> {
    let h = 1.0 / n as f64;
    let gl = GaussLegendre::new(4);
    let mut k = DMatrix::zeros(n + 1, n + 1);
    // per element, local basis (left, right): ∫θ and ∫xθ
    let m0 = [h / 2.0, h / 2.0];
    let m1: Vec<[f64; 2]> = (0..n)
        .map(|e| {
            let a = e as f64 * h;
            [h * (a / 2.0 + h / 6.0), h * (a / 2.0 + h / 3.0)]
        })
        .collect();
    for e in 0..n {
        for f in (e + 1)..n {
            // x in e, y in f, x < y: min = x
            for li in 0..2 {
                for lj in 0..2 {
                    let v = m1[e][li] * m0[lj];
                    k[(e + li, f + lj)] += v;
                    k[(f + lj, e + li)] += v;
                }
            }
        }
        let a = e as f64 * h;
        let b = a + h;
        let basis = |loc: usize, x: f64| {
            let t = (x - a) / h;
            if loc == 0 {
                1.0 - t
            } else {
                t
            }
        };
        for li in 0..2 {
            for lj in 0..2 {
                let v = gl.integrate(a, b, |x| {
                    let below = gl.integrate(a, x, |y| y * basis(lj, y));
                    let above = gl.integrate(x, b, |y| basis(lj, y));
                    basis(li, x) * (below + x * above)
                });
                k[(e + li, e + lj)] += v;
            }
        }
    }
    linalg::symmetrize(&k)
}

/// Counter-based standard normal stream: one ChaCha8 stream per
/// (seed, replicate), two 64-bit words per mode, so the variate for
/// `(seed, replicate, mode)` never depends on evaluation order.
pub struct NormalStream {
    rng: ChaCha8Rng,
}

impl NormalStream {
    pub fn new(seed: u64, replicate: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(replicate);
        rng.set_word_pos(0);
        Self { rng }
    }

    /// Jump to the position of `mode` (0-based).
    pub fn seek(&mut self, mode: u64) {
        self.rng.set_word_pos(4 * mode as u128);
    }

    /// Box–Muller, cosine branch.
    pub fn next_normal(&mut self) -> f64 {
        let u1 = ((self.rng.next_u64() >> 11) as f64 + 1.0) * (1.0 / (1u64 << 53) as f64);
        let u2 = (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
    }
}

/// The standard normal keyed by `(seed, replicate, mode)`.
pub fn standard_normal(seed: u64, replicate: u64, mode: u64) -> f64 {
    let mut s = NormalStream::new(seed, replicate);
    s.seek(mode);
    s.next_normal()
}

/// `M × n_h` matrix of projected field realizations (one per row).
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    pub data: DMatrix<f64>,
    pub seed: u64,
    pub l_gen: usize,
    pub model_name: String,
    pub space: SpaceKey,
}

impl SampleMatrix {
    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn dofs(&self) -> usize {
        self.data.ncols()
    }
}

/// Rows of standard normals `ψ[r, ℓ]` for replicates `start..start+rows`.
pub fn normal_block(seed: u64, start: usize, rows: usize, cols: usize) -> DMatrix<f64> {
    let mut block = DMatrix::zeros(rows, cols);
    let filled: Vec<Vec<f64>> = (0..rows)
        .into_par_iter()
        .map(|r| {
            let mut s = NormalStream::new(seed, (start + r) as u64);
            (0..cols).map(|_| s.next_normal()).collect()
        })
        .collect();
    for (r, row) in filled.into_iter().enumerate() {
        for (c, v) in row.into_iter().enumerate() {
            block[(r, c)] = v;
        }
    }
    block
}

const SAMPLE_BLOCK_ROWS: usize = 4096;

/// Draw `m` projected KL realizations truncated at `l_gen` modes.
pub fn sample_field(
    model: &SpectrumModel,
    space: &FemSpace,
    l_gen: usize,
    m: usize,
    seed: u64,
) -> Result<SampleMatrix> {
    if l_gen == 0 {
        return Err(invalid("l_gen", "must be at least 1"));
    }
    if m == 0 {
        return Err(invalid("M", "must be at least 1"));
    }
    if l_gen > model.available_modes() {
        return Err(Error::SpectrumExhausted {
            requested: l_gen,
            available: model.available_modes(),
        });
    }
    let mut scaled = model.projected_modes(space, l_gen)?;
    let lambdas = model.eigenvalues(l_gen)?;
    for (j, lam) in lambdas.iter().enumerate() {
        let s = lam.sqrt();
        scaled.column_mut(j).scale_mut(s);
    }
    let scaled_t = scaled.transpose();
    let mut data = DMatrix::zeros(m, space.dof_count());
    let mut start = 0;
    while start < m {
        let rows = SAMPLE_BLOCK_ROWS.min(m - start);
        let psi = normal_block(seed, start, rows, l_gen);
        let block = psi * &scaled_t;
        data.rows_mut(start, rows).copy_from(&block);
        start += rows;
    }
    Ok(SampleMatrix {
        data,
        seed,
        l_gen,
        model_name: model.name().to_string(),
        space: space.key(),
    })
}

/// `Σ = P Λ Pᵀ` from the first `l_gen` projected eigenpairs.
pub fn true_coefficient_covariance(
    model: &SpectrumModel,
    space: &FemSpace,
    l_gen: usize,
) -> Result<DMatrix<f64>> {
    let mut p = model.projected_modes(space, l_gen)?;
    let lambdas = model.eigenvalues(l_gen)?;
    for (j, lam) in lambdas.iter().enumerate() {
        p.column_mut(j).scale_mut(lam.sqrt());
    }
    Ok(linalg::symmetrize(&(&p * p.transpose())))
}

/// Coefficient covariance of the projection of the untruncated field,
/// `M⁻¹ K M⁻¹` with the exact kernel Gram `K`.
pub fn projected_covariance_exact(model: &SpectrumModel, space: &FemSpace) -> Result<DMatrix<f64>> {
    let k = model.kernel_gram(space)?;
    let left = space.solve_mass(&k);
    let both = space.solve_mass(&left.transpose());
    Ok(linalg::symmetrize(&both))
}

/// Kernel value together with the truncation used (None for closed form).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelValue {
    pub value: f64,
    pub truncation: Option<usize>,
}

pub fn kernel_eval(model: &SpectrumModel, x: &[f64], y: &[f64]) -> Result<KernelValue> {
    let d = model.dimension();
    if x.len() != d || y.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: x.len().max(y.len()),
        });
    }
    for p in [x, y] {
        if p.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(Error::OutOfDomain { point: p.to_vec() });
        }
    }
    Ok(KernelValue {
        value: model.kernel(x, y),
        truncation: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::BasisKind;

    #[test]
    fn brownian_eigenvalues() {
        let m = brownian_spectrum_1d();
        assert!((m.eigenvalue(1).unwrap() - 4.0 / (PI * PI)).abs() < 1e-15);
        assert!((m.eigenvalue(1).unwrap() - 0.405284734569351).abs() < 1e-12);
        assert!((m.eigenvalue(2).unwrap() - 4.0 / (9.0 * PI * PI)).abs() < 1e-15);
        assert!((m.eigenvalue(2).unwrap() - 0.0450316371743723).abs() < 1e-12);
    }

    #[test]
    fn decay_constant_is_exact() {
        // λ_ℓ (ℓ − ½)² = 1/π² exactly; λ_ℓ ℓ² → 1/π² while λ_ℓ(2ℓ−1)² = 4/π²
        let m = brownian_spectrum_1d();
        for l in 1..200 {
            let v = m.eigenvalue(l).unwrap() * ((2 * l - 1) as f64).powi(2);
            assert!((v - 4.0 / (PI * PI)).abs() < 1e-12);
        }
    }

    #[test]
    fn integral_equation_holds() {
        // ∫₀¹ min(x,y) φ₁(y) dy = λ₁ φ₁(x), by quadrature split at the kink
        let m = brownian_spectrum_1d();
        let gl = GaussLegendre::new(30);
        let lam = m.eigenvalue(1).unwrap();
        for x in [0.25, 0.5, 0.75] {
            let left = gl.integrate(0.0, x, |y| y * brownian_eigenfunction(1, y));
            let right = gl.integrate(x, 1.0, |y| x * brownian_eigenfunction(1, y));
            let want = lam * brownian_eigenfunction(1, x);
            assert!((left + right - want).abs() < 1e-6);
        }
    }

    #[test]
    fn eigenfunctions_orthonormal() {
        let m = brownian_spectrum_1d();
        let gl = GaussLegendre::new(8);
        let pts = crate::quadrature::composite_unit(&gl, 64);
        for i in 1..=10 {
            for j in 1..=10 {
                let g: f64 = pts
                    .iter()
                    .map(|&(x, w)| w * m.eigenfunction(i, &[x]).unwrap() * m.eigenfunction(j, &[x]).unwrap())
                    .sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g - want).abs() < 1e-8, "({i},{j}) {g}");
            }
        }
    }

    #[test]
    fn sheet_spectrum() {
        let m = brownian_spectrum_tensor(2).unwrap();
        let l1 = 4.0 / (PI * PI);
        assert!((m.eigenvalue(1).unwrap() - l1 * l1).abs() < 1e-15);
        assert!((m.eigenvalue(1).unwrap() - 0.164255716).abs() < 1e-9);
        assert_eq!(m.mode_index(2).unwrap(), vec![1, 2]);
        assert_eq!(m.mode_index(3).unwrap(), vec![2, 1]);
        assert_eq!(m.eigenvalue(2).unwrap(), m.eigenvalue(3).unwrap());
        let vals = m.eigenvalues(500).unwrap();
        assert!(vals.windows(2).all(|w| w[0] >= w[1]));
        assert_eq!(flattening_index(1, 1), 1);
        assert_eq!(flattening_index(1, 2), 2);
        assert!(brownian_spectrum_tensor(3).is_err());
    }

    #[test]
    fn sheet_flattening_reproduces_product() {
        let m = brownian_spectrum_tensor(2).unwrap();
        let l1 = brownian_lambda(1);
        for l in 1..50 {
            let idx = m.mode_index(l).unwrap();
            let k = flattening_index(idx[0], idx[1]);
            let via_k = l1 * brownian_lambda(k);
            assert!((m.eigenvalue(l).unwrap() - via_k).abs() < 1e-15 * via_k.max(1.0));
        }
    }

    #[test]
    fn kernel_values() {
        let m = brownian_spectrum_1d();
        assert_eq!(kernel_eval(&m, &[0.3], &[0.7]).unwrap().value, 0.3);
        let s = brownian_spectrum_tensor(2).unwrap();
        let v = kernel_eval(&s, &[0.3, 0.5], &[0.7, 0.2]).unwrap().value;
        assert!((v - 0.06).abs() < 1e-15);
        let trunc = m.mercer_sum(&[0.4], &[0.9], 200).unwrap();
        assert!((trunc - 0.4).abs() < 2e-3);
    }

    #[test]
    fn sampling_is_deterministic() {
        let m = brownian_spectrum_1d();
        let s = FemSpace::new(1, 8, BasisKind::Nodal).unwrap();
        let a = sample_field(&m, &s, 16, 7, 42).unwrap();
        let b = sample_field(&m, &s, 16, 7, 42).unwrap();
        assert_eq!(a, b);
        let c = sample_field(&m, &s, 16, 7, 43).unwrap();
        assert_ne!(a.data, c.data);
    }

    #[test]
    fn single_mode_samples_have_rank_one() {
        let m = brownian_spectrum_1d();
        let s = FemSpace::new(1, 8, BasisKind::Nodal).unwrap();
        let x = sample_field(&m, &s, 1, 20, 3).unwrap();
        let sv = x.data.clone().svd(false, false).singular_values;
        assert!(sv[1] < 1e-12 * sv[0]);
    }

    #[test]
    fn counter_based_normals_are_order_independent() {
        let mut s = NormalStream::new(9, 4);
        let seq: Vec<f64> = (0..10).map(|_| s.next_normal()).collect();
        for (mode, v) in seq.iter().enumerate().rev() {
            assert_eq!(*v, standard_normal(9, 4, mode as u64));
        }
    }

    #[test]
    fn l_gen_bounds() {
        let m = brownian_spectrum_tensor(2).unwrap();
        let s = FemSpace::new(2, 4, BasisKind::Nodal).unwrap();
        let too_many = m.available_modes() + 1;
        assert!(matches!(
            sample_field(&m, &s, too_many, 2, 0),
            Err(Error::SpectrumExhausted { .. })
        ));
        assert!(sample_field(&m, &s, 0, 2, 0).is_err());
    }

    #[test]
    fn rank_one_covariance() {
        let m = brownian_spectrum_1d();
        let s = FemSpace::new(1, 16, BasisKind::Nodal).unwrap();
        let cov = true_coefficient_covariance(&m, &s, 1).unwrap();
        let p = m.projected_modes(&s, 1).unwrap();
        let want = &p * p.transpose() * m.eigenvalue(1).unwrap();
        assert!((cov.clone() - want).amax() < 1e-15);
        assert_eq!(linalg::max_asymmetry(&cov), 0.0);
    }

    #[test]
    fn kernel_gram_matches_mercer_limit() {
        // M⁻¹KM⁻¹ is the L_gen → ∞ limit of P Λ Pᵀ
        let m = brownian_spectrum_1d();
        let s = FemSpace::new(1, 8, BasisKind::Nodal).unwrap();
        let exact = projected_covariance_exact(&m, &s).unwrap();
        let trunc = true_coefficient_covariance(&m, &s, 4000).unwrap();
        assert!((exact - trunc).amax() < 1e-6);
    }

    #[test]
    fn kernel_gram_total_mass() {
        // Σ_jk K_jk = ∫∫ min(x,y) = 1/3
        let k = min_kernel_gram_1d(7);
        assert!((k.sum() - 1.0 / 3.0).abs() < 1e-14);
    }
}
