//! Operator expressions for work moments and the generating function.

use num_complex::Complex64;

use crate::error::Result;
use crate::operator::{anticommutator, identity, trace, trace_product, CMatrix, DensityMatrix, HermitianOperator, I};
use crate::protocol::DiscretizedProtocol;

/// `D = H_H(tau) - H(0)`.
pub fn work_operator(proto: &DiscretizedProtocol) -> Result<HermitianOperator> {
    proto
        .final_heisenberg_hamiltonian()
        .combine(1.0, proto.initial_hamiltonian(), -1.0)
}

fn power(a: &CMatrix, m: u32) -> CMatrix {
    let mut out = identity(a.nrows());
    for _ in 0..m {
        out = &out * a;
    }
    out
}

/// `Tr[(H_H(tau) - H(0))^m rho]`.
pub fn closed_form_moment(proto: &DiscretizedProtocol, rho: &DensityMatrix, m: u32) -> Result<f64> {
    let d = work_operator(proto)?;
    Ok(trace_product(&power(d.matrix(), m), rho.matrix()).re)
}

fn binomial(m: u32, l: u32) -> f64 {
    (0..l).fold(1.0, |acc, i| acc * f64::from(m - i) / f64::from(i + 1))
}

/// `1/2 sum_l C(m, l) Tr[{H_H(tau)^l, (-H(0))^(m-l)} rho]`.
pub fn mh_closed_form_moment(proto: &DiscretizedProtocol, rho: &DensityMatrix, m: u32) -> Result<f64> {
    let a = proto.final_heisenberg_hamiltonian().matrix();
    let b = -proto.initial_hamiltonian().matrix();
    let mut sum = 0.0;
    for l in 0..=m {
        let ac = anticommutator(&power(a, l), &power(&b, m - l));
        sum += binomial(m, l) * trace_product(&ac, rho.matrix()).re;
    }
    Ok(0.5 * sum)
}

/// `dt sum_{j<K} Tr[X_H^(j) rho]`, the exact first moment of the histories
/// distribution at finite `K`.
pub fn finite_k_first_moment(proto: &DiscretizedProtocol, rho: &DensityMatrix) -> f64 {
    proto.heisenberg_power[..proto.k]
        .iter()
        .map(|x| x.expectation(rho))
        .sum::<f64>()
        * proto.dt
}

/// `dt^2 Tr[S^2 rho]` with `S = sum_{j<K} X_H^(j)`.
pub fn finite_k_second_moment(proto: &DiscretizedProtocol, rho: &DensityMatrix) -> f64 {
    let d = proto.dim();
    let s = proto.heisenberg_power[..proto.k]
        .iter()
        .fold(CMatrix::zeros(d, d), |acc, x| acc + x.matrix());
    trace(&(&s * &s * rho.matrix())).re * proto.dt * proto.dt
}

/// `G(lambda) = Tr[exp(i lambda D) rho]`; complex `lambda` is allowed, and
/// `lambda = i beta` gives the exponentiated-work average.
pub fn mgf(proto: &DiscretizedProtocol, rho: &DensityMatrix, lambda: Complex64) -> Result<Complex64> {
    let d = work_operator(proto)?;
    let e = d.complex_function(|x| (I * lambda * x).exp())?;
    Ok(trace_product(&e, rho.matrix()))
}

/// Truncated series `sum_{m <= order} (i lambda)^m <w^m> / m!` with closed-form moments.
pub fn mgf_series(
    proto: &DiscretizedProtocol,
    rho: &DensityMatrix,
    lambda: Complex64,
    order: u32,
) -> Result<Complex64> {
    let mut sum = Complex64::new(0.0, 0.0);
    let mut coeff = Complex64::new(1.0, 0.0);
    for m in 0..=order {
        if m > 0 {
            coeff *= I * lambda / f64::from(m);
        }
        sum += coeff * closed_form_moment(proto, rho, m)?;
    }
    Ok(sum)
}
