//! Piecewise-linear finite element spaces on the unit interval and the unit
//! square (tensor mesh), with either the nodal hat basis or its
//! mass-orthonormalized counterpart.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::linalg;
use crate::quadrature::GaussLegendre;

/// Dense storage limit for assembled matrices.
pub const MAX_DENSE_DOFS: usize = 4225;

/// Default Gauss–Legendre points per element when projecting functions.
pub const DEFAULT_QUAD_POINTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BasisKind {
    /// Lagrange P1 hat functions, one per mesh node.
    Nodal,
    /// The nodal basis transformed by `L^{-T}` so that the mass matrix is the identity.
    L2Orthonormal,
}

impl BasisKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            BasisKind::Nodal => "nodal",
            BasisKind::L2Orthonormal => "l2-orthonormal",
        }
    }
}

impl std::str::FromStr for BasisKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "nodal" | "nodal-p1" | "p1" => Ok(BasisKind::Nodal),
            "l2-orthonormal" | "orthonormal" | "l2" => Ok(BasisKind::L2Orthonormal),
            other => Err(Error::Parse(format!("unknown basis kind `{other}`"))),
        }
    }
}

impl fmt::Display for BasisKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Identity of a discretization space; two coefficient vectors are
/// compatible iff their keys are equal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SpaceKey {
    pub dim: usize,
    pub n: usize,
    pub basis: BasisKind,
}

#[derive(Debug, Clone)]
pub struct MassMatrix {
    pub matrix: DMatrix<f64>,
    /// Lower Cholesky factor, `matrix = lower * lowerᵀ`.
    pub lower: DMatrix<f64>,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

impl MassMatrix {
    /// Factor an arbitrary SPD Gram matrix.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() == 0 || matrix.nrows() != matrix.ncols() {
            return Err(invalid("mass", "must be a nonempty square matrix"));
        }
        let lower = linalg::cholesky_lower(&matrix)?;
        let eig = linalg::sym_eigenvalues_desc(&matrix);
        Ok(Self {
            lambda_max: eig[0],
            lambda_min: *eig.last().expect("nonempty after Cholesky"),
            matrix,
            lower,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            matrix: DMatrix::identity(n, n),
            lower: DMatrix::identity(n, n),
            lambda_min: 1.0,
            lambda_max: 1.0,
        }
    }

    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Coefficients of a function in a [`FemSpace`] basis.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientVector {
    pub values: DVector<f64>,
    pub space: SpaceKey,
}

impl CoefficientVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct FemSpace {
    key: SpaceKey,
    quad_points: usize,
    mass_1d_nodal: DMatrix<f64>,
    chol_1d_nodal: DMatrix<f64>,
    mass: MassMatrix,
}

impl FemSpace {
    /// Uniform mesh with `n` elements per axis on `(0,1)^dim`.
    pub fn new(dim: usize, n: usize, basis: BasisKind) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(invalid("dimension", format!("must be 1 or 2, got {dim}")));
        }
        if n < 2 {
            return Err(invalid("n", format!("need at least 2 elements per axis, got {n}")));
        }
        let dofs = (n + 1).pow(dim as u32);
        if dofs > MAX_DENSE_DOFS {
            return Err(invalid(
                "n",
                format!("{dofs} degrees of freedom exceed the dense limit {MAX_DENSE_DOFS}"),
            ));
        }
        let mass_1d_nodal = nodal_mass_1d(n);
        let chol_1d_nodal = linalg::cholesky_lower(&mass_1d_nodal)?;
        let key = SpaceKey { dim, n, basis };
        let mass = match basis {
            BasisKind::L2Orthonormal => MassMatrix::identity(dofs),
            BasisKind::Nodal => {
                let (lo, hi) = nodal_mass_extremes(dim, n);
                let (matrix, lower) = if dim == 1 {
                    (mass_1d_nodal.clone(), chol_1d_nodal.clone())
                } else {
                    (
                        linalg::kron(&mass_1d_nodal, &mass_1d_nodal),
                        linalg::kron(&chol_1d_nodal, &chol_1d_nodal),
                    )
                };
                MassMatrix {
                    matrix,
                    lower,
                    lambda_min: lo,
                    lambda_max: hi,
                }
            }
        };
        Ok(Self {
            key,
            quad_points: DEFAULT_QUAD_POINTS,
            mass_1d_nodal,
            chol_1d_nodal,
            mass,
        })
    }

    pub fn with_quad_points(mut self, points: usize) -> Self {
        self.quad_points = points.max(1);
        self
    }

    pub fn key(&self) -> SpaceKey {
        self.key
    }

    pub fn dim(&self) -> usize {
        self.key.dim
    }

    pub fn elements_per_axis(&self) -> usize {
        self.key.n
    }

    pub fn basis(&self) -> BasisKind {
        self.key.basis
    }

    pub fn h(&self) -> f64 {
        1.0 / self.key.n as f64
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.key.n + 1
    }

    pub fn dof_count(&self) -> usize {
        self.nodes_per_axis().pow(self.key.dim as u32)
    }

    pub fn quad_points(&self) -> usize {
        self.quad_points
    }

    pub fn mass(&self) -> &MassMatrix {
        &self.mass
    }

    pub fn mass_1d_nodal(&self) -> &DMatrix<f64> {
        &self.mass_1d_nodal
    }

    /// Node coordinates; in 2D the first coordinate is the outer index.
    pub fn node_coordinates(&self) -> Vec<Vec<f64>> {
        let m = self.nodes_per_axis();
        let h = self.h();
        match self.key.dim {
            1 => (0..m).map(|i| vec![i as f64 * h]).collect(),
            _ => (0..m)
                .flat_map(|i| (0..m).map(move |j| vec![i as f64 * h, j as f64 * h]))
                .collect(),
        }
    }

    pub fn coefficients(&self, values: DVector<f64>) -> Result<CoefficientVector> {
        if values.len() != self.dof_count() {
            return Err(Error::DimensionMismatch {
                expected: self.dof_count(),
                actual: values.len(),
            });
        }
        Ok(CoefficientVector {
            values,
            space: self.key,
        })
    }

    pub fn zero(&self) -> CoefficientVector {
        CoefficientVector {
            values: DVector::zeros(self.dof_count()),
            space: self.key,
        }
    }

    fn check(&self, c: &CoefficientVector) -> Result<()> {
        if c.space != self.key {
            return Err(Error::SpaceMismatch);
        }
        if c.values.len() != self.dof_count() {
            return Err(Error::DimensionMismatch {
                expected: self.dof_count(),
                actual: c.values.len(),
            });
        }
        Ok(())
    }

    /// Lower Cholesky factor of the nodal mass matrix on the full space.
    fn nodal_lower(&self) -> DMatrix<f64> {
        if self.key.dim == 1 {
            self.chol_1d_nodal.clone()
        } else {
            linalg::kron(&self.chol_1d_nodal, &self.chol_1d_nodal)
        }
    }

    /// Map nodal load vectors (`∫ f θ_j`, columnwise) into this space's basis.
    pub fn nodal_loads_to_basis(&self, loads: DMatrix<f64>) -> DMatrix<f64> {
        match self.key.basis {
            BasisKind::Nodal => loads,
            BasisKind::L2Orthonormal => self
                .nodal_lower()
                .solve_lower_triangular(&loads)
                .expect("mass factor is nonsingular"),
        }
    }

    /// Map a nodal Gram-type matrix `G_jk = ∫∫ g θ_j θ_k` into this basis.
    pub fn nodal_gram_to_basis(&self, gram: DMatrix<f64>) -> DMatrix<f64> {
        match self.key.basis {
            BasisKind::Nodal => gram,
            BasisKind::L2Orthonormal => {
                let l = self.nodal_lower();
                let left = l.solve_lower_triangular(&gram).expect("nonsingular");
                let both = l
                    .solve_lower_triangular(&left.transpose())
                    .expect("nonsingular");
                linalg::symmetrize(&both)
            }
        }
    }

    /// Nodal values (hat-function coefficients) of columns given in this basis.
    pub fn to_nodal(&self, coeffs: &DMatrix<f64>) -> DMatrix<f64> {
        match self.key.basis {
            BasisKind::Nodal => coeffs.clone(),
            BasisKind::L2Orthonormal => self
                .nodal_lower()
                .transpose()
                .solve_upper_triangular(coeffs)
                .expect("nonsingular"),
        }
    }

    /// Coefficients in this basis of functions given by nodal values.
    pub fn from_nodal(&self, nodal: &DMatrix<f64>) -> DMatrix<f64> {
        match self.key.basis {
            BasisKind::Nodal => nodal.clone(),
            BasisKind::L2Orthonormal => self.nodal_lower().transpose() * nodal,
        }
    }

    /// Solve `M c = b` columnwise.
    pub fn solve_mass(&self, loads: &DMatrix<f64>) -> DMatrix<f64> {
        match self.key.basis {
            BasisKind::L2Orthonormal => loads.clone(),
            BasisKind::Nodal => linalg::cholesky_solve(&self.mass.lower, loads),
        }
    }

    /// Nodal load vector `b_j = ∫ f θ_j` by composite Gauss–Legendre quadrature.
    pub fn nodal_load<F>(&self, f: F) -> Result<DVector<f64>>
    where
        F: Fn(&[f64]) -> f64,
    {
        let gl = GaussLegendre::new(self.quad_points);
        let n = self.key.n;
        let h = self.h();
        let m = self.nodes_per_axis();
        let mut b = DVector::zeros(self.dof_count());
        match self.key.dim {
            1 => {
                for e in 0..n {
                    let a = e as f64 * h;
                    for (x, w) in gl.on_interval(a, a + h) {
                        let v = f(&[x]);
                        if !v.is_finite() {
                            return Err(Error::Quadrature { point: vec![x], value: v });
                        }
                        let t = (x - a) / h;
                        b[e] += w * v * (1.0 - t);
                        b[e + 1] += w * v * t;
                    }
                }
            }
            _ => {
                let pts: Vec<(f64, f64)> = gl.on_interval(0.0, h).collect();
                for e1 in 0..n {
                    let a1 = e1 as f64 * h;
                    for e2 in 0..n {
                        let a2 = e2 as f64 * h;
                        for &(x1, w1) in &pts {
                            for &(x2, w2) in &pts {
                                let p = [a1 + x1, a2 + x2];
                                let v = f(&p);
                                if !v.is_finite() {
                                    return Err(Error::Quadrature { point: p.to_vec(), value: v });
                                }
                                let t1 = x1 / h;
                                let t2 = x2 / h;
                                let wv = w1 * w2 * v;
                                b[e1 * m + e2] += wv * (1.0 - t1) * (1.0 - t2);
                                b[e1 * m + e2 + 1] += wv * (1.0 - t1) * t2;
                                b[(e1 + 1) * m + e2] += wv * t1 * (1.0 - t2);
                                b[(e1 + 1) * m + e2 + 1] += wv * t1 * t2;
                            }
                        }
                    }
                }
            }
        }
        Ok(b)
    }

    /// L² projection onto the space.
    pub fn project_l2<F>(&self, f: F) -> Result<CoefficientVector>
    where
        F: Fn(&[f64]) -> f64,
    {
        let b = self.nodal_load(f)?;
        let loads = self.nodal_loads_to_basis(DMatrix::from_column_slice(b.len(), 1, b.as_slice()));
        let c = self.solve_mass(&loads);
        Ok(CoefficientVector {
            values: c.column(0).into_owned(),
            space: self.key,
        })
    }

    /// `aᵀ M b`, the L² inner product of the represented functions.
    pub fn inner_product(&self, a: &CoefficientVector, b: &CoefficientVector) -> Result<f64> {
        self.check(a)?;
        self.check(b)?;
        if a.space != b.space {
            return Err(Error::SpaceMismatch);
        }
        Ok(match self.key.basis {
            BasisKind::L2Orthonormal => a.values.dot(&b.values),
            BasisKind::Nodal => a.values.dot(&(&self.mass.matrix * &b.values)),
        })
    }

    /// Point values of `Σ c_j θ_j`.
    pub fn evaluate(&self, c: &CoefficientVector, points: &[Vec<f64>]) -> Result<Vec<f64>> {
        self.check(c)?;
        let nodal = self.to_nodal(&DMatrix::from_column_slice(c.len(), 1, c.values.as_slice()));
        let nodal = nodal.column(0);
        points
            .iter()
            .map(|p| self.interpolate_nodal(nodal.as_slice(), p))
            .collect()
    }

    /// Evaluate a function given by nodal values at `x`.
    pub fn interpolate_nodal(&self, nodal: &[f64], x: &[f64]) -> Result<f64> {
        if x.len() != self.key.dim {
            return Err(Error::DimensionMismatch {
                expected: self.key.dim,
                actual: x.len(),
            });
        }
        if x.iter().any(|&t| !(0.0..=1.0).contains(&t)) {
            return Err(Error::OutOfDomain { point: x.to_vec() });
        }
        let n = self.key.n;
        let locate = |t: f64| -> (usize, f64) {
            let s = t * n as f64;
            let e = (s.floor() as usize).min(n - 1);
            (e, s - e as f64)
        };
        Ok(match self.key.dim {
            1 => {
                let (e, t) = locate(x[0]);
                nodal[e] * (1.0 - t) + nodal[e + 1] * t
            }
            _ => {
                let m = n + 1;
                let (e1, t1) = locate(x[0]);
                let (e2, t2) = locate(x[1]);
                nodal[e1 * m + e2] * (1.0 - t1) * (1.0 - t2)
                    + nodal[e1 * m + e2 + 1] * (1.0 - t1) * t2
                    + nodal[(e1 + 1) * m + e2] * t1 * (1.0 - t2)
                    + nodal[(e1 + 1) * m + e2 + 1] * t1 * t2
            }
        })
    }

    /// `‖v_h − f‖_{L²}` by composite quadrature with `points` per element and axis.
    pub fn l2_error<F>(&self, c: &CoefficientVector, f: F, points: usize) -> Result<f64>
    where
        F: Fn(&[f64]) -> f64,
    {
        self.check(c)?;
        let nodal = self.to_nodal(&DMatrix::from_column_slice(c.len(), 1, c.values.as_slice()));
        let nodal = nodal.column(0);
        let gl = GaussLegendre::new(points);
        let n = self.key.n;
        let h = self.h();
        let mut acc = 0.0;
        match self.key.dim {
            1 => {
                for e in 0..n {
                    let a = e as f64 * h;
                    for (x, w) in gl.on_interval(a, a + h) {
                        let t = (x - a) / h;
                        let vh = nodal[e] * (1.0 - t) + nodal[e + 1] * t;
                        let d = vh - f(&[x]);
                        acc += w * d * d;
                    }
                }
            }
            _ => {
                let pts: Vec<(f64, f64)> = gl.on_interval(0.0, h).collect();
                for e1 in 0..n {
                    for e2 in 0..n {
                        for &(x1, w1) in &pts {
                            for &(x2, w2) in &pts {
                                let p = [e1 as f64 * h + x1, e2 as f64 * h + x2];
                                let d = self.interpolate_nodal(nodal.as_slice(), &p)? - f(&p);
                                acc += w1 * w2 * d * d;
                            }
                        }
                    }
                }
            }
        }
        Ok(acc.sqrt())
    }
}

/// Closed-form 1D P1 mass matrix: `h/3` at the two boundary nodes, `2h/3`
/// in the interior, `h/6` off the diagonal.
pub fn nodal_mass_1d(n: usize) -> DMatrix<f64> {
    let h = 1.0 / n as f64;
    let mut m = DMatrix::zeros(n + 1, n + 1);
    for e in 0..n {
        m[(e, e)] += h / 3.0;
        m[(e + 1, e + 1)] += h / 3.0;
        m[(e, e + 1)] += h / 6.0;
        m[(e + 1, e)] += h / 6.0;
    }
    m
}

/// `∫_0^1 θ^{(a)}_i θ^{(b)}_j dx` between hat functions of two uniform
/// meshes with `na` and `nb` elements. Exact: every product is quadratic
/// between consecutive breakpoints of the merged mesh.
pub fn cross_mass_1d(na: usize, nb: usize) -> DMatrix<f64> {
    let hat = |n: usize, i: usize, x: f64| (1.0 - (x * n as f64 - i as f64).abs()).max(0.0);
    let mut cuts: Vec<f64> = (0..=na).map(|i| i as f64 / na as f64).collect();
    cuts.extend((0..=nb).map(|j| j as f64 / nb as f64));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|x, y| (*x - *y).abs() <= 1e-15);
    let gl = GaussLegendre::new(2);
    let mut m = DMatrix::zeros(na + 1, nb + 1);
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let mid = 0.5 * (lo + hi);
        let ia = ((mid * na as f64).floor() as usize).min(na - 1);
        let ib = ((mid * nb as f64).floor() as usize).min(nb - 1);
        for (t, wt) in gl.nodes.iter().zip(&gl.weights) {
            let x = mid + 0.5 * (hi - lo) * t;
            let wx = 0.5 * (hi - lo) * wt;
            for i in ia..=ia + 1 {
                let va = hat(na, i, x);
                for j in ib..=ib + 1 {
                    m[(i, j)] += wx * va * hat(nb, j, x);
                }
            }
        }
    }
    m
}

/// `∫_D ψ^{(a)}_i ψ^{(b)}_j` between the bases of two spaces on the same
/// domain (meshes may differ).
pub fn cross_mass(a: &FemSpace, b: &FemSpace) -> Result<DMatrix<f64>> {
    if a.dim() != b.dim() {
        return Err(Error::SpaceMismatch);
    }
    let m1 = cross_mass_1d(a.elements_per_axis(), b.elements_per_axis());
    let nodal = if a.dim() == 1 { m1 } else { linalg::kron(&m1, &m1) };
    let left = a.nodal_loads_to_basis(nodal);
    Ok(b.nodal_loads_to_basis(left.transpose()).transpose())
}

/// Extreme eigenvalues of the nodal mass matrix. The 2D matrix is a
/// Kronecker square, so its extremes are squares of the 1D extremes.
pub fn nodal_mass_extremes(dim: usize, n: usize) -> (f64, f64) {
    let vals = linalg::sym_eigenvalues_desc(&nodal_mass_1d(n));
    let hi = vals[0];
    let lo = *vals.last().expect("non-empty spectrum");
    (lo.powi(dim as i32), hi.powi(dim as i32))
}

/// `∫_0^1 sin(ω x) θ_j(x) dx` for every 1D hat function on `n` elements.
///
/// Elements with `ω h < 1` use 10-point Gauss–Legendre (spectrally accurate
/// there); wider elements use the closed-form antiderivative, which stays
/// exact when the sine oscillates within an element.
pub fn sine_load_1d(n: usize, omega: f64) -> DVector<f64> {
    let h = 1.0 / n as f64;
    let mut b = DVector::zeros(n + 1);
    let gl = GaussLegendre::new(10);
    let anti = |x: f64| (omega * x).sin() / (omega * omega) - x * (omega * x).cos() / omega;
    for e in 0..n {
        let a = e as f64 * h;
        let bnd = a + h;
        let (left, right) = if omega * h < 1.0 {
            let mut l = 0.0;
            let mut r = 0.0;
            for (x, w) in gl.on_interval(a, bnd) {
                let s = (omega * x).sin();
                let t = (x - a) / h;
                l += w * s * (1.0 - t);
                r += w * s * t;
            }
            (l, r)
        } else {
            let i1 = ((omega * a).cos() - (omega * bnd).cos()) / omega;
            let ix = anti(bnd) - anti(a);
            ((bnd * i1 - ix) / h, (ix - a * i1) / h)
        };
        b[e] += left;
        b[e + 1] += right;
    }
    b
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn rejects_bad_dimension_and_mesh() {
        assert!(FemSpace::new(3, 4, BasisKind::Nodal).is_err());
        assert!(FemSpace::new(0, 4, BasisKind::Nodal).is_err());
        assert!(FemSpace::new(1, 1, BasisKind::Nodal).is_err());
    }

    #[test]
    fn dof_counts_and_mesh_size() {
        let s = FemSpace::new(1, 4, BasisKind::Nodal).unwrap();
        assert_eq!(s.dof_count(), 5);
        assert_eq!(s.h(), 0.25);
        assert_eq!(FemSpace::new(2, 4, BasisKind::Nodal).unwrap().dof_count(), 25);
        assert_eq!(FemSpace::new(1, 4, BasisKind::L2Orthonormal).unwrap().dof_count(), 5);
    }

    #[test]
    fn mass_entries_1d() {
        let s = FemSpace::new(1, 4, BasisKind::Nodal).unwrap();
        let m = &s.mass().matrix;
        let h = 0.25;
        assert!((m[(2, 2)] - 2.0 * h / 3.0).abs() < 1e-15);
        assert!((m[(2, 3)] - h / 6.0).abs() < 1e-15);
        assert!((m[(0, 0)] - h / 3.0).abs() < 1e-15);
        assert!((m[(4, 4)] - h / 3.0).abs() < 1e-15);
        assert!((m.sum() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn mass_sums_to_one_in_2d() {
        let s = FemSpace::new(2, 5, BasisKind::Nodal).unwrap();
        assert!((s.mass().matrix.sum() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn orthonormal_mass_is_identity() {
        let s = FemSpace::new(1, 4, BasisKind::L2Orthonormal).unwrap();
        assert_eq!(s.mass().matrix, DMatrix::identity(5, 5));
    }

    #[test]
    fn cholesky_reconstructs_mass() {
        for (d, n) in [(1, 3), (1, 64), (2, 8)] {
            let s = FemSpace::new(d, n, BasisKind::Nodal).unwrap();
            let m = &s.mass().matrix;
            let l = &s.mass().lower;
            let rel = linalg::frobenius(&(l * l.transpose() - m)) / linalg::frobenius(m);
            assert!(rel <= 1e-12, "d={d} n={n} rel={rel}");
        }
    }

    #[test]
    fn constant_projects_to_ones() {
        let s = FemSpace::new(1, 6, BasisKind::Nodal).unwrap();
        let c = s.project_l2(|_| 1.0).unwrap();
        for v in c.values.iter() {
            assert!((v - 1.0).abs() < 1e-13);
        }
        let s2 = FemSpace::new(2, 4, BasisKind::Nodal).unwrap();
        let c2 = s2.project_l2(|_| 1.0).unwrap();
        assert!(c2.values.iter().all(|v| (v - 1.0).abs() < 1e-13));
    }

    #[test]
    fn inner_products() {
        let s = FemSpace::new(1, 4, BasisKind::Nodal).unwrap();
        let ones = s.coefficients(DVector::from_element(5, 1.0)).unwrap();
        assert!((s.inner_product(&ones, &ones).unwrap() - 1.0).abs() < 1e-15);
        let mut e = DVector::zeros(5);
        e[2] = 1.0;
        let e2 = s.coefficients(e).unwrap();
        assert!((s.inner_product(&e2, &e2).unwrap() - 2.0 * 0.25 / 3.0).abs() < 1e-15);

        let o = FemSpace::new(1, 4, BasisKind::L2Orthonormal).unwrap();
        let mut a = DVector::zeros(5);
        a[0] = 1.0;
        let mut b = DVector::zeros(5);
        b[1] = 1.0;
        let ip = o
            .inner_product(&o.coefficients(a).unwrap(), &o.coefficients(b).unwrap())
            .unwrap();
        assert_eq!(ip, 0.0);
    }

    #[test]
    fn mismatched_spaces_rejected() {
        let s = FemSpace::new(1, 4, BasisKind::Nodal).unwrap();
        let t = FemSpace::new(1, 5, BasisKind::Nodal).unwrap();
        let a = s.zero();
        let b = t.zero();
        assert_eq!(s.inner_product(&a, &b), Err(Error::SpaceMismatch));
    }

    #[test]
    fn evaluation_interpolates() {
        let s = FemSpace::new(1, 4, BasisKind::Nodal).unwrap();
        let vals = DVector::from_vec(vec![0.0, 1.0, 3.0, -2.0, 5.0]);
        let c = s.coefficients(vals.clone()).unwrap();
        let nodes = s.node_coordinates();
        let got = s.evaluate(&c, &nodes).unwrap();
        for (g, v) in got.iter().zip(vals.iter()) {
            assert!((g - v).abs() < 1e-15);
        }
        let mid = s.evaluate(&c, &[vec![0.375]]).unwrap()[0];
        assert!((mid - 2.0).abs() < 1e-15);
        let z = s.evaluate(&s.zero(), &[vec![0.1], vec![0.9]]).unwrap();
        assert_eq!(z, vec![0.0, 0.0]);
        assert!(matches!(
            s.evaluate(&c, &[vec![1.5]]),
            Err(Error::OutOfDomain { .. })
        ));
    }

    #[test]
    fn non_finite_integrand_reports_point() {
        let s = FemSpace::new(1, 4, BasisKind::Nodal).unwrap();
        let err = s.project_l2(|x| if x[0] > 0.5 { f64::NAN } else { 0.0 }).unwrap_err();
        match err {
            Error::Quadrature { point, .. } => assert!(point[0] > 0.5),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sine_projection_rate_is_second_order() {
        let f = |x: &[f64]| (PI * x[0]).sin();
        let errs: Vec<f64> = [8, 16, 32]
            .iter()
            .map(|&n| {
                let s = FemSpace::new(1, n, BasisKind::Nodal).unwrap();
                let c = s.project_l2(f).unwrap();
                s.l2_error(&c, f, 12).unwrap()
            })
            .collect();
        for w in errs.windows(2) {
            let r = w[0] / w[1];
            assert!((3.5..=4.5).contains(&r), "ratio {r}");
        }
    }

    #[test]
    fn sine_load_matches_quadrature() {
        let n = 8;
        let s = FemSpace::new(1, n, BasisKind::Nodal).unwrap().with_quad_points(40);
        for omega in [0.5 * PI, 7.5 * PI, 60.5 * PI] {
            let exact = sine_load_1d(n, omega);
            let quad = s.nodal_load(|x| (omega * x[0]).sin()).unwrap();
            assert!((exact - quad).amax() < 1e-12, "omega={omega}");
        }
    }

    #[test]
    fn orthonormal_and_nodal_agree_pointwise() {
        let f = |x: &[f64]| (3.0 * x[0]).cos() + x[0] * x[0];
        let a = FemSpace::new(1, 10, BasisKind::Nodal).unwrap();
        let b = FemSpace::new(1, 10, BasisKind::L2Orthonormal).unwrap();
        let ca = a.project_l2(f).unwrap();
        let cb = b.project_l2(f).unwrap();
        let pts: Vec<Vec<f64>> = (0..=50).map(|i| vec![i as f64 / 50.0]).collect();
        let va = a.evaluate(&ca, &pts).unwrap();
        let vb = b.evaluate(&cb, &pts).unwrap();
        for (x, y) in va.iter().zip(&vb) {
            assert!((x - y).abs() <= 1e-10);
        }
    }
}
