//! Numerical tolerances shared by constructors, invariants and tests.

/// Max-norm of `A - A^dagger` accepted for a Hermitian operator.
pub const HERMITICITY: f64 = 1e-10;
/// Max-norm of `U^dagger U - 1` accepted for a unitary.
pub const UNITARITY: f64 = 1e-10;
/// Allowed deviation of `Tr rho` from one.
pub const TRACE: f64 = 1e-12;
/// Most negative eigenvalue tolerated in a density matrix.
pub const MIN_EIGENVALUE: f64 = -1e-10;
/// Orthogonality, completeness and reconstruction residuals of a spectral decomposition.
pub const SPECTRAL: f64 = 1e-10;
/// Relative eigenvalue clustering threshold (times the spectral norm).
pub const DEGENERACY_RELATIVE: f64 = 1e-9;
/// Absolute floor for the clustering threshold, used when the operator is (close to) zero.
pub const DEGENERACY_FLOOR: f64 = 1e-12;
/// Commutator norm below which two operators count as commuting.
pub const COMMUTING: f64 = 1e-9;
/// Rounding slack for measured weights; anything below `-MEASURED_CLAMP` is a bug.
pub const MEASURED_CLAMP: f64 = 1e-12;
/// Normalization check for distributions and trajectory sums.
pub const NORMALIZATION: f64 = 1e-10;
/// Relative default bin width (times the largest |w|).
pub const BIN_RELATIVE: f64 = 1e-9;
/// Absolute floor for the default bin width.
pub const BIN_FLOOR: f64 = 1e-13;
/// Bins whose weight magnitude is at most this are dropped as rounding residue.
pub const NEGLIGIBLE_WEIGHT: f64 = 1e-14;
/// Eigen-solver convergence threshold and iteration limit.
pub const EIGEN_EPS: f64 = f64::EPSILON;
pub const EIGEN_MAX_ITER: usize = 10_000;
