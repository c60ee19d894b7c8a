//! Jarzynski, moment, time-reversal and comparison reports.

use num_complex::Complex64;
use serde::Serialize;

use super::{
    backward_trajectory_distributions, closed_form_moment, finite_k_first_moment, max_gap,
    mgf, mh_backward_distribution, mh_closed_form_moment, mh_distribution, pointwise_difference,
    tpm_backward_distribution, tpm_distribution, trajectory_distributions, BuildOptions, Kind,
    Origin, WorkDistribution,
};
use crate::error::{Error, Result};
use crate::operator::{commutator, identity, log_partition_function, max_norm, thermal_state, trace_product, CMatrix, DensityMatrix};
use crate::protocol::DiscretizedProtocol;
use crate::tol;

#[derive(Debug, Clone, Serialize)]
pub struct JarzynskiReport {
    pub beta: f64,
    /// `<e^{-beta w}>` from the distribution, or the closed form if none was given.
    pub lhs: f64,
    /// `Tr[e^{-beta (H_H(tau) - H(0))} rho]`.
    pub lhs_closed_form: f64,
    /// `Z_tau / Z_0`.
    pub rhs: f64,
    pub delta_f: f64,
    pub gap: f64,
    pub commuting_flag: bool,
    /// Whether `rho` is the Gibbs state of `H(0)` at this `beta`.
    pub thermal_flag: bool,
    pub origin: Option<Origin>,
}

fn is_thermal(proto: &DiscretizedProtocol, rho: &DensityMatrix, beta: f64) -> Result<bool> {
    let g = thermal_state(proto.initial_hamiltonian(), beta)?;
    Ok(max_norm(&(g.matrix() - rho.matrix())) <= 1e-9)
}

/// Compares `<e^{-beta w}>` with `e^{-beta dF}`. The left side comes from
/// `dist` when given, otherwise from the closed form.
pub fn jarzynski_report(
    dist: Option<&WorkDistribution>,
    proto: &DiscretizedProtocol,
    rho: &DensityMatrix,
    beta: f64,
) -> Result<JarzynskiReport> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Domain(format!("beta must be positive and finite, got {beta}")));
    }
    let ln_z0 = log_partition_function(proto.initial_hamiltonian(), beta)?;
    let ln_zt = log_partition_function(proto.final_heisenberg_hamiltonian(), beta)?;
    let rhs = (ln_zt - ln_z0).exp();
    let lhs_closed_form = mgf(proto, rho, Complex64::new(0.0, beta))?.re;
    let lhs = dist.map_or(lhs_closed_form, |d| d.exponential_average(beta));
    Ok(JarzynskiReport {
        beta,
        lhs,
        lhs_closed_form,
        rhs,
        delta_f: (ln_z0 - ln_zt) / beta,
        gap: lhs - rhs,
        commuting_flag: proto.hamiltonians_commute(),
        thermal_flag: is_thermal(proto, rho, beta)?,
        origin: dist.map(WorkDistribution::origin),
    })
}

pub fn jarzynski_closed_form(
    proto: &DiscretizedProtocol,
    rho: &DensityMatrix,
    beta: f64,
) -> Result<JarzynskiReport> {
    jarzynski_report(None, proto, rho, beta)
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentReport {
    pub origin: Origin,
    pub orders: Vec<u32>,
    pub enumerated: Vec<f64>,
    /// Operator-expression moments; absent where no closed form applies.
    pub closed_form: Vec<Option<f64>>,
    pub gaps: Vec<Option<f64>>,
}

/// `sum_n Tr[(H_H(tau) - e_n)^m P_n rho P_n]`.
fn tpm_closed_form_moment(proto: &DiscretizedProtocol, rho: &DensityMatrix, m: u32) -> f64 {
    let a = proto.final_heisenberg_hamiltonian().matrix();
    let s = &proto.initial_energy;
    let d = proto.dim();
    let mut total = 0.0;
    for (e, p) in s.eigenvalues.iter().zip(&s.projectors) {
        let shifted: CMatrix = a - identity(d) * Complex64::new(*e, 0.0);
        let mut pw = identity(d);
        for _ in 0..m {
            pw = &pw * &shifted;
        }
        total += trace_product(&pw, &(p * rho.matrix() * p)).re;
    }
    total
}

/// Moments `0..=max_order` of `dist` next to their operator expressions.
/// Histories moments are compared with `Tr[(H_H(tau) - H(0))^m rho]`, which
/// they reach only in the small-step limit.
pub fn moment_report(
    dist: &WorkDistribution,
    proto: &DiscretizedProtocol,
    rho: &DensityMatrix,
    max_order: u32,
) -> Result<MomentReport> {
    let orders: Vec<u32> = (0..=max_order).collect();
    let enumerated: Vec<f64> = orders.iter().map(|&m| dist.moment(m)).collect();
    let closed_form = orders
        .iter()
        .map(|&m| {
            Ok(match dist.origin() {
                Origin::Histories => Some(closed_form_moment(proto, rho, m)?),
                Origin::MargenauHill => Some(mh_closed_form_moment(proto, rho, m)?),
                Origin::Tpm => Some(tpm_closed_form_moment(proto, rho, m)),
                Origin::Measured => None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let gaps = enumerated
        .iter()
        .zip(&closed_form)
        .map(|(e, c)| c.map(|c| (e - c).abs()))
        .collect();
    Ok(MomentReport {
        origin: dist.origin(),
        orders,
        enumerated,
        closed_form,
        gaps,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TimeReversalReport {
    /// `max_w |p_back(w) - p(-w)|` per distribution.
    pub histories: f64,
    pub measured: f64,
    pub tpm: f64,
    pub mh: f64,
    /// `sum_n delta(w + w_n) Tr[[C_n, C_n^dagger] rho]` per bin of the
    /// backward measured distribution.
    pub measured_commutator: Vec<(f64, f64)>,
}

impl TimeReversalReport {
    pub fn gap(&self, origin: Origin) -> f64 {
        match origin {
            Origin::Histories => self.histories,
            Origin::Measured => self.measured,
            Origin::Tpm => self.tpm,
            Origin::MargenauHill => self.mh,
        }
    }
}

pub fn time_reversal_check(
    proto: &DiscretizedProtocol,
    rho: &DensityMatrix,
    opts: &BuildOptions,
) -> Result<TimeReversalReport> {
    let (p, pm) = trajectory_distributions(proto, rho, opts)?;
    time_reversal_with(proto, rho, opts, &p, &pm)
}

fn time_reversal_with(
    proto: &DiscretizedProtocol,
    rho: &DensityMatrix,
    opts: &BuildOptions,
    p: &WorkDistribution,
    pm: &WorkDistribution,
) -> Result<TimeReversalReport> {
    let (b, bm) = backward_trajectory_distributions(proto, rho, opts)?;
    let t = tpm_distribution(proto, rho, opts.bin_tol)?;
    let tb = tpm_backward_distribution(proto, rho, opts.bin_tol)?;
    let h = mh_distribution(proto, rho, opts.bin_tol)?;
    let hb = mh_backward_distribution(proto, rho, opts.bin_tol)?;
    let pm_mirror = pm.mirrored();
    Ok(TimeReversalReport {
        histories: max_gap(&b, &p.mirrored()),
        measured: max_gap(&bm, &pm_mirror),
        tpm: max_gap(&tb, &t.mirrored()),
        mh: max_gap(&hb, &h.mirrored()),
        measured_commutator: pointwise_difference(&bm, &pm_mirror),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonRow {
    pub origin: Origin,
    pub kind: Kind,
    pub min_weight: f64,
    pub mean: f64,
    /// `|<w> - dU|` with `dU = Tr[(H_H(tau) - H(0)) rho]`.
    pub energy_gap: f64,
    pub time_reversal_gap: f64,
    /// `<e^{-beta w}> - Z_tau / Z_0`, when a `beta` was supplied.
    pub jarzynski_gap: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub k: usize,
    pub dt: f64,
    pub beta: Option<f64>,
    pub delta_u: f64,
    pub rows: Vec<ComparisonRow>,
    /// `|<w>_K - dt sum_j Tr[X_H^(j) rho]|`; zero up to rounding at any `K`.
    pub histories_first_law_gap: f64,
    /// `|Tr[H_H(tau)(eta - rho)]|` with `eta` the dephased initial state.
    pub tpm_expected_energy_gap: f64,
    pub hamiltonians_commute: bool,
    pub state_commutes_with_h0: bool,
    /// `rho`, `H(0)` and `H_H(tau)` commute pairwise.
    pub classical_limit: bool,
    /// Largest bin-by-bin difference among the four distributions.
    pub coincidence_gap: f64,
    pub coincident: bool,
    pub jarzynski_closed_form: Option<JarzynskiReport>,
}

impl ComparisonReport {
    pub fn row(&self, origin: Origin) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.origin == origin)
    }
}

/// Fills the property matrix for all four distributions.
pub fn comparison_report(
    proto: &DiscretizedProtocol,
    rho: &DensityMatrix,
    beta: Option<f64>,
    opts: &BuildOptions,
) -> Result<ComparisonReport> {
    let (p, pm) = trajectory_distributions(proto, rho, opts)?;
    let t = tpm_distribution(proto, rho, opts.bin_tol)?;
    let h = mh_distribution(proto, rho, opts.bin_tol)?;
    let tr = time_reversal_with(proto, rho, opts, &p, &pm)?;
    let delta_u = closed_form_moment(proto, rho, 1)?;
    let jz = match beta {
        Some(b) => Some(jarzynski_closed_form(proto, rho, b)?),
        None => None,
    };
    let dists = [&p, &pm, &t, &h];
    let rows = dists
        .iter()
        .map(|d| ComparisonRow {
            origin: d.origin(),
            kind: d.kind(),
            min_weight: d.min_weight(),
            mean: d.mean(),
            energy_gap: (d.mean() - delta_u).abs(),
            time_reversal_gap: tr.gap(d.origin()),
            jarzynski_gap: jz.as_ref().map(|j| d.exponential_average(j.beta) - j.rhs),
        })
        .collect();
    let mut coincidence_gap: f64 = 0.0;
    for i in 0..dists.len() {
        for j in i + 1..dists.len() {
            coincidence_gap = coincidence_gap.max(max_gap(dists[i], dists[j]));
        }
    }
    let h0 = proto.initial_hamiltonian().matrix();
    let ht = proto.final_heisenberg_hamiltonian().matrix();
    let eta = rho.dephased(&proto.initial_energy);
    let commutes = |a: &CMatrix, b: &CMatrix| max_norm(&commutator(a, b)) <= tol::COMMUTING;
    let state_commutes_with_h0 = commutes(rho.matrix(), h0);
    let hamiltonians_commute = proto.hamiltonians_commute();
    Ok(ComparisonReport {
        k: proto.k,
        dt: proto.dt,
        beta,
        delta_u,
        rows,
        histories_first_law_gap: (p.mean() - finite_k_first_moment(proto, rho)).abs(),
        tpm_expected_energy_gap: trace_product(ht, &(eta.matrix() - rho.matrix())).re.abs(),
        hamiltonians_commute,
        state_commutes_with_h0,
        classical_limit: state_commutes_with_h0 && hamiltonians_commute && commutes(rho.matrix(), ht),
        coincidence_gap,
        coincident: coincidence_gap <= 1e-9,
        jarzynski_closed_form: jz,
    })
}

fn round_numbers(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Number(n) => {
            if let Some(x) = n.as_f64().filter(|_| n.is_f64()) {
                let r: f64 = format!("{x:.11e}").parse().unwrap_or(x);
                if let Some(num) = serde_json::Number::from_f64(r) {
                    *n = num;
                }
            }
        }
        serde_json::Value::Array(a) => a.iter_mut().for_each(round_numbers),
        serde_json::Value::Object(o) => o.values_mut().for_each(round_numbers),
        _ => {}
    }
}

/// Pretty JSON with every float rounded to 12 significant digits.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut v = serde_json::to_value(value)
        .map_err(|e| Error::Consistency(format!("report serialization failed: {e}")))?;
    round_numbers(&mut v);
    serde_json::to_string_pretty(&v)
        .map_err(|e| Error::Consistency(format!("report serialization failed: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_rounds_to_twelve_digits() {
        let s = to_json(&vec![std::f64::consts::PI, 1.0]).unwrap();
        assert!(s.contains("3.14159265359"));
        assert!(!s.contains("3.141592653589"));
    }
}
