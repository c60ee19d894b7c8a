//! Dense complex operator algebra on a finite d-dimensional Hilbert space (hbar = 1).

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tol;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// Largest absolute entry.
pub fn max_norm(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn trace(m: &CMatrix) -> Complex64 {
    m.diagonal().sum()
}

/// `Tr[a b]` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    let d = a.nrows();
    let mut acc = ZERO;
    for i in 0..d {
        for k in 0..d {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn anticommutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b + b * a
}

pub fn identity(d: usize) -> CMatrix {
    CMatrix::identity(d, d)
}

/// Builds a square matrix from row-major entries.
pub fn from_row_major(d: usize, entries: &[Complex64]) -> Result<CMatrix> {
    if d == 0 || entries.len() != d * d {
        return Err(Error::Shape(format!(
            "expected {} entries for a {d}x{d} matrix, got {}",
            d * d,
            entries.len()
        )));
    }
    Ok(CMatrix::from_row_slice(d, d, entries))
}

/// Pauli matrices and their eigenvectors.
pub mod pauli {
    use super::*;

    pub fn x() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
    }

    pub fn y() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO])
    }

    pub fn z() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
    }

    /// `(|0> + i|1>)/sqrt(2)` for `sign = +1`, `(|0> - i|1>)/sqrt(2)` for `sign = -1`.
    pub fn y_eigenvector(sign: f64) -> CVector {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        CVector::from_vec(vec![Complex64::new(s, 0.0), Complex64::new(0.0, sign * s)])
    }
}

fn check_square(m: &CMatrix) -> Result<()> {
    if m.nrows() == 0 || m.nrows() != m.ncols() {
        return Err(Error::Shape(format!(
            "expected a non-empty square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

fn check_same_dim(a: &CMatrix, b: &CMatrix) -> Result<()> {
    if a.nrows() != b.nrows() {
        return Err(Error::Shape(format!(
            "dimension mismatch: {} vs {}",
            a.nrows(),
            b.nrows()
        )));
    }
    Ok(())
}

/// A Hermitian operator, stored in symmetrized form `(A + A^dagger)/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator(CMatrix);

impl HermitianOperator {
    pub fn new(m: CMatrix) -> Result<Self> {
        Self::with_tolerance(m, tol::HERMITICITY)
    }

    pub fn with_tolerance(m: CMatrix, tolerance: f64) -> Result<Self> {
        check_square(&m)?;
        let adj = m.adjoint();
        let deviation = max_norm(&(&m - &adj));
        if !deviation.is_finite() || deviation > tolerance {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(Self((m + adj).scale(0.5)))
    }

    /// Symmetrizes without checking; for operators that are Hermitian by construction.
    pub(crate) fn symmetrized(m: CMatrix) -> Self {
        let adj = m.adjoint();
        Self((m + adj).scale(0.5))
    }

    pub fn zero(d: usize) -> Self {
        Self(CMatrix::zeros(d, d))
    }

    pub fn identity(d: usize) -> Self {
        Self(identity(d))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    /// Real linear combination `a self + b other`.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        check_same_dim(&self.0, &other.0)?;
        Ok(Self(self.0.scale(a) + other.0.scale(b)))
    }

    pub fn scale(&self, a: f64) -> Self {
        Self(self.0.scale(a))
    }

    /// `Tr[self rho]`, real for Hermitian operators.
    pub fn expectation(&self, rho: &DensityMatrix) -> f64 {
        trace_product(&self.0, rho.matrix()).re
    }

    /// Spectral (largest singular value) norm.
    pub fn spectral_norm(&self) -> f64 {
        match raw_eigen(&self.0) {
            Ok((values, _)) => values.iter().fold(0.0_f64, |a, v| a.max(v.abs())),
            Err(_) => self.0.norm(),
        }
    }

    /// `f(A)` evaluated in the eigenbasis, for real-valued `f`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let (values, vectors) = raw_eigen(&self.0)?;
        let d = self.dim();
        let mut out = CMatrix::zeros(d, d);
        for (k, &x) in values.iter().enumerate() {
            let v = vectors.column(k);
            out += (v * v.adjoint()).scale(f(x));
        }
        Ok(Self::symmetrized(out))
    }

    /// `f(A)` for complex-valued `f`; the result is in general not Hermitian.
    pub fn complex_function(&self, f: impl Fn(f64) -> Complex64) -> Result<CMatrix> {
        let (values, vectors) = raw_eigen(&self.0)?;
        let d = self.dim();
        let mut out = CMatrix::zeros(d, d);
        for (k, &x) in values.iter().enumerate() {
            let v = vectors.column(k);
            out += (v * v.adjoint()) * f(x);
        }
        Ok(out)
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let (mut values, _) = raw_eigen(&self.0)?;
        values.sort_by(f64::total_cmp);
        Ok(values)
    }
}

/// A unitary operator.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryOperator(CMatrix);

impl UnitaryOperator {
    pub fn new(m: CMatrix) -> Result<Self> {
        Self::with_tolerance(m, tol::UNITARITY)
    }

    pub fn with_tolerance(m: CMatrix, tolerance: f64) -> Result<Self> {
        check_square(&m)?;
        let deviation = unitarity_defect(&m);
        if !deviation.is_finite() || deviation > tolerance {
            return Err(Error::NotUnitary { deviation });
        }
        Ok(Self(m))
    }

    pub fn identity(d: usize) -> Self {
        Self(identity(d))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    /// `self * other`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        check_same_dim(&self.0, &other.0)?;
        Ok(Self(&self.0 * &other.0))
    }

    pub fn unitarity_defect(&self) -> f64 {
        unitarity_defect(&self.0)
    }
}

fn unitarity_defect(m: &CMatrix) -> f64 {
    let d = m.nrows();
    max_norm(&(m.adjoint() * m - identity(d)))
}

/// A density matrix: Hermitian, unit trace, positive semidefinite within tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        let h = HermitianOperator::new(m).map_err(|e| match e {
            Error::NotHermitian { deviation } => {
                Error::InvalidDensity(format!("not Hermitian (deviation {deviation:.3e})"))
            }
            other => other,
        })?;
        let tr = trace(h.matrix()).re;
        if (tr - 1.0).abs() > tol::TRACE {
            return Err(Error::InvalidDensity(format!("trace is {tr}, expected 1")));
        }
        let min = h.eigenvalues()?.first().copied().unwrap_or(0.0);
        if min < tol::MIN_EIGENVALUE {
            return Err(Error::InvalidDensity(format!(
                "minimum eigenvalue {min:.3e} is negative"
            )));
        }
        Ok(Self(h.into_matrix()))
    }

    /// Renormalizes a positive semidefinite Hermitian matrix to unit trace first.
    pub fn normalized(m: CMatrix) -> Result<Self> {
        let tr = trace(&m).re;
        if !(tr.is_finite() && tr > 0.0) {
            return Err(Error::InvalidDensity(format!("cannot normalize trace {tr}")));
        }
        Self::new(m.unscale(tr))
    }

    /// The pure state `|psi><psi|` for a (not necessarily normalized) vector.
    pub fn pure(psi: &CVector) -> Result<Self> {
        let n = psi.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::InvalidDensity("zero state vector".into()));
        }
        let v = psi.unscale(n);
        Self::new(&v * v.adjoint())
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self(identity(d).unscale(d as f64))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    /// `sum_n P_n rho P_n` over the projectors of a decomposition.
    pub fn dephased(&self, basis: &SpectralDecomposition) -> Self {
        let d = self.dim();
        let mut out = CMatrix::zeros(d, d);
        for p in &basis.projectors {
            out += p * &self.0 * p;
        }
        Self(out)
    }
}

/// Eigenvalues (ascending, merged within the degeneracy threshold) and orthogonal projectors.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub projectors: Vec<CMatrix>,
    pub ranks: Vec<usize>,
    /// Unit eigenvector for each rank-1 projector, `None` for merged clusters.
    pub vectors: Vec<Option<CVector>>,
}

impl SpectralDecomposition {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.projectors.first().map_or(0, |p| p.nrows())
    }

    pub fn all_rank_one(&self) -> bool {
        self.ranks.iter().all(|&r| r == 1)
    }

    /// `sum_n x_n P_n`.
    pub fn reconstruct(&self) -> CMatrix {
        let d = self.dim();
        self.eigenvalues
            .iter()
            .zip(&self.projectors)
            .fold(CMatrix::zeros(d, d), |acc, (&x, p)| acc + p.scale(x))
    }

    /// Largest residual among orthogonality `P_n P_m - delta_nm P_n` and completeness `sum P_n - 1`.
    pub fn projector_residual(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0_f64;
        let mut total = CMatrix::zeros(d, d);
        for (n, p) in self.projectors.iter().enumerate() {
            total += p;
            for (m, q) in self.projectors.iter().enumerate() {
                let prod = p * q;
                let r = if n == m { max_norm(&(prod - p)) } else { max_norm(&prod) };
                worst = worst.max(r);
            }
        }
        worst.max(max_norm(&(total - identity(d))))
    }

    /// Index of the projector equal to `p` within `tolerance`, if any.
    pub fn find_projector(&self, p: &CMatrix, tolerance: f64) -> Option<usize> {
        self.projectors
            .iter()
            .position(|q| q.nrows() == p.nrows() && max_norm(&(q - p)) <= tolerance)
    }
}

/// Unsorted eigenpairs of a Hermitian matrix.
fn raw_eigen(m: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let eig = SymmetricEigen::try_new(m.clone(), tol::EIGEN_EPS, tol::EIGEN_MAX_ITER).ok_or_else(
        || Error::NumericalFailure {
            residual: max_norm(&(m - m.adjoint())).max(m.norm()),
        },
    )?;
    let values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    // Residual of the returned pairs; the solver should be at machine precision.
    let mut residual = 0.0_f64;
    for (k, &x) in values.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        residual = residual.max((m * v - v.scale(x)).norm());
    }
    let scale = m.norm().max(1.0);
    if !residual.is_finite() || residual > 1e-8 * scale {
        return Err(Error::NumericalFailure { residual });
    }
    Ok((values, eig.eigenvectors))
}

/// Default clustering threshold for `a`: relative to its spectral norm with an absolute floor.
pub fn default_degeneracy_tol(a: &HermitianOperator) -> f64 {
    (tol::DEGENERACY_RELATIVE * a.spectral_norm()).max(tol::DEGENERACY_FLOOR)
}

/// Spectral decomposition with eigenvalue clusters closer than `degeneracy_tol` merged.
pub fn spectral_decompose(a: &HermitianOperator, degeneracy_tol: f64) -> Result<SpectralDecomposition> {
    decompose(a, degeneracy_tol, false)
}

/// As [`spectral_decompose`] but degenerate clusters are an error.
pub fn spectral_decompose_strict(
    a: &HermitianOperator,
    degeneracy_tol: f64,
) -> Result<SpectralDecomposition> {
    decompose(a, degeneracy_tol, true)
}

fn decompose(a: &HermitianOperator, degeneracy_tol: f64, strict: bool) -> Result<SpectralDecomposition> {
    if !(degeneracy_tol > 0.0) {
        return Err(Error::Domain(format!(
            "degeneracy tolerance must be positive, got {degeneracy_tol}"
        )));
    }
    let (values, vectors) = raw_eigen(a.matrix())?;
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));

    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for &k in &order {
        match clusters.last_mut() {
            Some(c) if values[k] - values[*c.last().unwrap()] < degeneracy_tol => c.push(k),
            _ => clusters.push(vec![k]),
        }
    }
    if strict {
        if let Some(c) = clusters.iter().find(|c| c.len() > 1) {
            return Err(Error::Domain(format!(
                "degenerate eigenvalue {} with multiplicity {}",
                values[c[0]],
                c.len()
            )));
        }
    }

    let d = a.dim();
    let mut out = SpectralDecomposition {
        eigenvalues: Vec::with_capacity(clusters.len()),
        projectors: Vec::with_capacity(clusters.len()),
        ranks: Vec::with_capacity(clusters.len()),
        vectors: Vec::with_capacity(clusters.len()),
    };
    for c in clusters {
        let mean = c.iter().map(|&k| values[k]).sum::<f64>() / c.len() as f64;
        let mut p = CMatrix::zeros(d, d);
        for &k in &c {
            let v = vectors.column(k);
            p += v * v.adjoint();
        }
        out.eigenvalues.push(mean);
        out.ranks.push(c.len());
        out.vectors
            .push((c.len() == 1).then(|| vectors.column(c[0]).into_owned()));
        out.projectors.push((&p + p.adjoint()).scale(0.5));
    }
    Ok(out)
}

/// `exp(-i H dt)` via the eigenbasis of `H`.
pub fn unitary_step(h: &HermitianOperator, dt: f64) -> Result<UnitaryOperator> {
    if !dt.is_finite() {
        return Err(Error::Domain(format!("time step must be finite, got {dt}")));
    }
    let m = h.complex_function(|x| Complex64::from_polar(1.0, -x * dt))?;
    UnitaryOperator::new(m)
}

/// Natural log of `Tr exp(-beta H)`, computed with the largest exponent factored out.
pub fn log_partition_function(h: &HermitianOperator, beta: f64) -> Result<f64> {
    if !(beta >= 0.0) {
        return Err(Error::Domain(format!("beta must be non-negative, got {beta}")));
    }
    let values = h.eigenvalues()?;
    Ok(log_sum_exp(values.iter().map(|&x| -beta * x)))
}

fn log_sum_exp(exponents: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = exponents.clone().fold(f64::NEG_INFINITY, f64::max);
    max + exponents.map(|e| (e - max).exp()).sum::<f64>().ln()
}

/// The Gibbs state `exp(-beta H) / Z`.
pub fn thermal_state(h: &HermitianOperator, beta: f64) -> Result<DensityMatrix> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::Domain(format!("beta must be non-negative, got {beta}")));
    }
    let (values, vectors) = raw_eigen(h.matrix())?;
    let max = values.iter().map(|&x| -beta * x).fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = values.iter().map(|&x| (-beta * x - max).exp()).collect();
    let z: f64 = weights.iter().sum();
    let d = h.dim();
    let mut rho = CMatrix::zeros(d, d);
    for (k, w) in weights.iter().enumerate() {
        let v = vectors.column(k);
        rho += (v * v.adjoint()).scale(w / z);
    }
    let rho = (&rho + rho.adjoint()).scale(0.5);
    // Fix the trace to rounding before validation.
    let tr = trace(&rho).re;
    DensityMatrix::new(rho.unscale(tr))
}

/// Heisenberg-picture transform `V^dagger X V`.
pub fn heisenberg_transform(x: &HermitianOperator, v: &UnitaryOperator) -> Result<HermitianOperator> {
    check_same_dim(x.matrix(), v.matrix())?;
    let m = v.matrix().adjoint() * x.matrix() * v.matrix();
    Ok(HermitianOperator::symmetrized(m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn herm(m: CMatrix) -> HermitianOperator {
        HermitianOperator::new(m).unwrap()
    }

    fn close(a: &CMatrix, b: &CMatrix, eps: f64) -> bool {
        max_norm(&(a - b)) <= eps
    }

    #[test]
    fn pauli_z_spectrum() {
        let s = spectral_decompose(&herm(pauli::z()), 1e-9).unwrap();
        assert_eq!(s.eigenvalues.len(), 2);
        assert!((s.eigenvalues[0] + 1.0).abs() < 1e-12);
        assert!((s.eigenvalues[1] - 1.0).abs() < 1e-12);
        let p_minus = CMatrix::from_diagonal(&CVector::from_vec(vec![ZERO, ONE]));
        let p_plus = CMatrix::from_diagonal(&CVector::from_vec(vec![ONE, ZERO]));
        assert!(close(&s.projectors[0], &p_minus, 1e-12));
        assert!(close(&s.projectors[1], &p_plus, 1e-12));
    }

    #[test]
    fn pauli_y_spectrum() {
        let s = spectral_decompose(&herm(pauli::y()), 1e-9).unwrap();
        for (k, sign) in [(0, -1.0), (1, 1.0)] {
            let v = pauli::y_eigenvector(sign);
            assert!(close(&s.projectors[k], &(&v * v.adjoint()), 1e-12));
            assert!((s.eigenvalues[k] - sign).abs() < 1e-12);
        }
        assert!(s.all_rank_one());
    }

    #[test]
    fn degenerate_eigenvalues_merge() {
        let m = CMatrix::from_diagonal(&CVector::from_vec(vec![ONE, ONE, -ONE]));
        let s = spectral_decompose(&herm(m.clone()), 1e-9).unwrap();
        assert_eq!(s.ranks, vec![1, 2]);
        assert!(s.vectors[1].is_none());
        assert!(close(&s.reconstruct(), &m, 1e-12));
        assert!(spectral_decompose_strict(&herm(m), 1e-9).is_err());
    }

    #[test]
    fn zero_operator_is_one_cluster() {
        let z = HermitianOperator::zero(3);
        let s = spectral_decompose(&z, default_degeneracy_tol(&z)).unwrap();
        assert_eq!(s.ranks, vec![3]);
        assert!(close(&s.projectors[0], &identity(3), 1e-12));
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ZERO, ZERO]);
        assert!(matches!(HermitianOperator::new(m), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn unitary_step_examples() {
        let u = unitary_step(&HermitianOperator::zero(2), 0.7).unwrap();
        assert!(close(u.matrix(), &identity(2), 1e-14));

        let u = unitary_step(&herm(pauli::x()), PI / 2.0).unwrap();
        assert!(close(u.matrix(), &(pauli::x() * -I), 1e-12));
    }

    #[test]
    fn thermal_state_examples() {
        let h = herm(pauli::z().scale(0.5 * 1.3));
        let rho = thermal_state(&h, 0.0).unwrap();
        assert!(close(rho.matrix(), &identity(2).unscale(2.0), 1e-14));

        let (omega, beta) = (1.3_f64, 0.7_f64);
        let rho = thermal_state(&h, beta).unwrap();
        let z = 2.0 * (beta * omega / 2.0).cosh();
        assert!((rho.matrix()[(0, 0)].re - (-beta * omega / 2.0).exp() / z).abs() < 1e-12);
        assert!((rho.matrix()[(1, 1)].re - (beta * omega / 2.0).exp() / z).abs() < 1e-12);
        assert!(thermal_state(&h, -1.0).is_err());
    }

    #[test]
    fn thermal_state_survives_large_beta() {
        let h = herm(pauli::z().scale(500.0));
        let rho = thermal_state(&h, 10.0).unwrap();
        assert!((rho.matrix()[(1, 1)].re - 1.0).abs() < 1e-12);
        let lz = log_partition_function(&h, 10.0).unwrap();
        assert!((lz - 5000.0).abs() < 1e-9);
    }

    #[test]
    fn heisenberg_examples() {
        let x = herm(pauli::y());
        let same = heisenberg_transform(&x, &UnitaryOperator::identity(2)).unwrap();
        assert!(close(same.matrix(), x.matrix(), 1e-15));

        let v = unitary_step(&herm(pauli::x().scale(0.3) + pauli::z()), 1.1).unwrap();
        let one = heisenberg_transform(&HermitianOperator::identity(2), &v).unwrap();
        assert!(close(one.matrix(), &identity(2), 1e-12));

        let wrong = UnitaryOperator::identity(3);
        assert!(matches!(heisenberg_transform(&x, &wrong), Err(Error::Shape(_))));
    }

    #[test]
    fn density_validation() {
        assert!(DensityMatrix::new(identity(2)).is_err());
        let neg = CMatrix::from_diagonal(&CVector::from_vec(vec![
            Complex64::new(1.5, 0.0),
            Complex64::new(-0.5, 0.0),
        ]));
        assert!(DensityMatrix::new(neg).is_err());
        assert!(DensityMatrix::pure(&pauli::y_eigenvector(1.0)).is_ok());
    }
}
