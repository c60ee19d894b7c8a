//! Work distributions: histories, continuously measured, two-point
//! measurement and Margenau-Hill.

mod closed_form;
mod report;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{trace, DensityMatrix, SpectralDecomposition};
use crate::protocol::DiscretizedProtocol;
use crate::tol;
use crate::trajectories::{self, EnumerationGuard, Method};

pub use closed_form::{
    closed_form_moment, finite_k_first_moment, finite_k_second_moment, mgf, mgf_series,
    mh_closed_form_moment, work_operator,
};
pub use report::{
    comparison_report, jarzynski_closed_form, jarzynski_report, moment_report, time_reversal_check,
    to_json, ComparisonReport, ComparisonRow, JarzynskiReport, MomentReport, TimeReversalReport,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Quasi,
    Probability,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Origin {
    #[serde(rename = "histories")]
    Histories,
    #[serde(rename = "measured")]
    Measured,
    #[serde(rename = "tpm")]
    Tpm,
    #[serde(rename = "mh")]
    MargenauHill,
}

impl Origin {
    pub const ALL: [Origin; 4] = [Origin::Histories, Origin::Measured, Origin::Tpm, Origin::MargenauHill];

    pub fn name(self) -> &'static str {
        match self {
            Origin::Histories => "histories",
            Origin::Measured => "measured",
            Origin::Tpm => "tpm",
            Origin::MargenauHill => "mh",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|o| o.name() == s)
    }

    pub fn kind(self) -> Kind {
        match self {
            Origin::Histories | Origin::MargenauHill => Kind::Quasi,
            Origin::Measured | Origin::Tpm => Kind::Probability,
        }
    }
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A discrete distribution of work values with strictly ascending support.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorkDistribution {
    support: Vec<(f64, f64)>,
    kind: Kind,
    origin: Origin,
    bin_tol: f64,
}

impl WorkDistribution {
    /// Bins raw `(w, weight)` points. Values closer than `bin_tol` to their
    /// predecessor join its bin; a bin is represented by its smallest value.
    pub fn from_points(
        points: impl IntoIterator<Item = (f64, f64)>,
        origin: Origin,
        bin_tol: Option<f64>,
        quantum: Option<f64>,
    ) -> Result<Self> {
        let mut pts: Vec<(f64, f64)> = points.into_iter().collect();
        if let Some(bad) = pts.iter().find(|(w, p)| !w.is_finite() || !p.is_finite()) {
            return Err(Error::NumericalFailure {
                residual: if bad.0.is_finite() { bad.1 } else { bad.0 },
            });
        }
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let bin_tol = bin_tol.unwrap_or_else(|| default_bin_tol(pts.iter().map(|p| p.0)));
        if !(bin_tol >= 0.0) {
            return Err(Error::config("bin_tol", None, "bin_tol must be nonnegative"));
        }
        let snap = |w: f64| match quantum {
            Some(q) if q > 0.0 => {
                let s = (w / q).round() * q;
                if s == 0.0 { 0.0 } else { s }
            }
            _ => w,
        };
        let mut support: Vec<(f64, f64)> = Vec::new();
        let mut prev = f64::NEG_INFINITY;
        for (w, p) in pts {
            match support.last_mut() {
                Some(last) if w - prev <= bin_tol => last.1 += p,
                _ => support.push((snap(w), p)),
            }
            prev = w;
        }
        support.retain(|&(_, p)| p.abs() > tol::NEGLIGIBLE_WEIGHT);
        let origin_kind = origin.kind();
        let dist = Self {
            support,
            kind: origin_kind,
            origin,
            bin_tol,
        };
        if origin_kind == Kind::Probability {
            if let Some(&(_, p)) = dist.support.iter().find(|(_, p)| *p < -tol::MEASURED_CLAMP) {
                return Err(Error::Consistency(format!(
                    "{origin} distribution has negative weight {p:e}"
                )));
            }
        }
        Ok(dist)
    }

    pub fn support(&self) -> &[(f64, f64)] {
        &self.support
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn origin(&self) -> Origin {
        self.origin
    }

    pub fn bin_tol(&self) -> f64 {
        self.bin_tol
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.support.iter().map(|p| p.1).sum()
    }

    pub fn min_weight(&self) -> f64 {
        self.support.iter().map(|p| p.1).fold(f64::INFINITY, f64::min)
    }

    pub fn has_negative_bin(&self) -> bool {
        self.support.iter().any(|p| p.1 < 0.0)
    }

    /// Weight of the bin within `bin_tol` of `w`, or zero.
    pub fn weight_at(&self, w: f64) -> f64 {
        let tol = self.bin_tol.max(tol::BIN_FLOOR);
        self.support
            .iter()
            .find(|(x, _)| (x - w).abs() <= tol)
            .map_or(0.0, |p| p.1)
    }

    /// Running sums `Q(w)` over the ascending support.
    pub fn cumulative(&self) -> Vec<(f64, f64)> {
        let mut q = 0.0;
        self.support
            .iter()
            .map(|&(w, p)| {
                q += p;
                (w, q)
            })
            .collect()
    }

    pub fn moment(&self, m: u32) -> f64 {
        self.support.iter().map(|&(w, p)| p * w.powi(m as i32)).sum()
    }

    pub fn mean(&self) -> f64 {
        self.moment(1)
    }

    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        self.support.iter().map(|&(w, p)| p * (w - mu).powi(2)).sum()
    }

    /// `sum_w weight(w) e^{-beta w}`.
    pub fn exponential_average(&self, beta: f64) -> f64 {
        self.support.iter().map(|&(w, p)| p * (-beta * w).exp()).sum()
    }

    /// Re-bins with a new tolerance.
    pub fn rebin(&self, bin_tol: f64) -> Result<Self> {
        Self::from_points(self.support.iter().copied(), self.origin, Some(bin_tol), None)
    }

    /// The distribution of `-w`.
    pub fn mirrored(&self) -> Self {
        let mut support: Vec<(f64, f64)> = self.support.iter().map(|&(w, p)| (-w, p)).collect();
        support.reverse();
        Self { support, ..self.clone() }
    }

    /// Checks the declared invariants.
    pub fn validate(&self) -> Result<()> {
        let total = self.total();
        if (total - 1.0).abs() > tol::NORMALIZATION {
            return Err(Error::Consistency(format!(
                "{} distribution sums to {total}",
                self.origin
            )));
        }
        if self.support.windows(2).any(|w| w[1].0 - w[0].0 <= self.bin_tol) {
            return Err(Error::Consistency("support is not separated by bin_tol".into()));
        }
        Ok(())
    }
}

/// Default clustering tolerance: `1e-9 * max|w|`, floored.
pub fn default_bin_tol(values: impl Iterator<Item = f64>) -> f64 {
    let m = values.fold(0.0f64, |m, w| m.max(w.abs()));
    (tol::BIN_RELATIVE * m).max(tol::BIN_FLOOR)
}

/// Largest pointwise difference between two distributions, matching support
/// points within the larger of their bin tolerances.
pub fn max_gap(a: &WorkDistribution, b: &WorkDistribution) -> f64 {
    max_gap_pairs(a.support(), b.support(), a.bin_tol.max(b.bin_tol).max(tol::BIN_FLOOR))
}

/// Differences `a(w) - b(w)` over the merged support.
pub fn pointwise_difference(a: &WorkDistribution, b: &WorkDistribution) -> Vec<(f64, f64)> {
    let tol = a.bin_tol.max(b.bin_tol).max(tol::BIN_FLOOR);
    let (x, y) = (a.support(), b.support());
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::with_capacity(x.len().max(y.len()));
    while i < x.len() || j < y.len() {
        if j == y.len() || (i < x.len() && x[i].0 < y[j].0 - tol) {
            out.push((x[i].0, x[i].1));
            i += 1;
        } else if i == x.len() || y[j].0 < x[i].0 - tol {
            out.push((y[j].0, -y[j].1));
            j += 1;
        } else {
            out.push((x[i].0, x[i].1 - y[j].1));
            i += 1;
            j += 1;
        }
    }
    out
}

fn max_gap_pairs(x: &[(f64, f64)], y: &[(f64, f64)], tol: f64) -> f64 {
    let a = WorkDistribution {
        support: x.to_vec(),
        kind: Kind::Quasi,
        origin: Origin::Histories,
        bin_tol: tol,
    };
    let b = WorkDistribution { support: y.to_vec(), ..a.clone() };
    pointwise_difference(&a, &b)
        .into_iter()
        .fold(0.0, |m, (_, d)| m.max(d.abs()))
}

/// Options shared by the distribution builders.
#[derive(Debug, Clone, Copy, Default)]
pub struct BuildOptions {
    pub bin_tol: Option<f64>,
    pub guard: EnumerationGuard,
    pub method: Method,
}

/// Histories and measured distributions from one pass over the histories.
pub fn trajectory_distributions(
    proto: &DiscretizedProtocol,
    rho: &DensityMatrix,
    opts: &BuildOptions,
) -> Result<(WorkDistribution, WorkDistribution)> {
    let walk = trajectories::forward_walk(proto, rho)?;
    build_pair(proto, &walk, opts)
}

/// Distributions of the reversed class operators, binned at `-w`.
pub fn backward_trajectory_distributions(
    proto: &DiscretizedProtocol,
    rho: &DensityMatrix,
    opts: &BuildOptions,
) -> Result<(WorkDistribution, WorkDistribution)> {
    let walk = trajectories::reverse_walk(proto, rho)?;
    build_pair(proto, &walk, opts)
}

fn build_pair(
    proto: &DiscretizedProtocol,
    walk: &trajectories::Walk,
    opts: &BuildOptions,
) -> Result<(WorkDistribution, WorkDistribution)> {
    let snap = |w: f64| proto.snap_work(w);
    let parts = trajectories::work_resolved(walk, &opts.guard, opts.method, &snap)?;
    let lin = WorkDistribution::from_points(
        parts.iter().map(|&(w, a, _)| (w, a.re)),
        Origin::Histories,
        opts.bin_tol,
        proto.work_quantum,
    )?;
    let meas = WorkDistribution::from_points(
        parts.iter().map(|&(w, _, m)| (w, m)),
        Origin::Measured,
        opts.bin_tol,
        proto.work_quantum,
    )?;
    Ok((lin, meas))
}

/// `p(w)`: linear weights `Re Tr[C rho]` binned by work.
pub fn histories_distribution(
    proto: &DiscretizedProtocol,
    rho: &DensityMatrix,
    opts: &BuildOptions,
) -> Result<WorkDistribution> {
    Ok(trajectory_distributions(proto, rho, opts)?.0)
}

/// `p~(w)`: measured weights `Tr[C^dagger C rho]` binned by work.
pub fn measured_distribution(
    proto: &DiscretizedProtocol,
    rho: &DensityMatrix,
    opts: &BuildOptions,
) -> Result<WorkDistribution> {
    Ok(trajectory_distributions(proto, rho, opts)?.1)
}

fn check_dim(proto: &DiscretizedProtocol, rho: &DensityMatrix) -> Result<()> {
    if proto.dim() != rho.dim() {
        return Err(Error::Shape(format!(
            "density matrix dimension {} does not match protocol dimension {}",
            rho.dim(),
            proto.dim()
        )));
    }
    Ok(())
}

/// Joint two-time weights over `(first, second)` energy projectors with
/// `w = e_second - e_first`.
fn two_time(
    first: &SpectralDecomposition,
    second: &SpectralDecomposition,
    weight: impl Fn(usize, usize) -> f64,
) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(first.len() * second.len());
    for n in 0..first.len() {
        for m in 0..second.len() {
            out.push((second.eigenvalues[m] - first.eigenvalues[n], weight(n, m)));
        }
    }
    out
}

/// Two-point measurement: `Tr[P_m P_n rho P_n P_m]` at `w = e_m(tau) - e_n(0)`.
pub fn tpm_distribution(
    proto: &DiscretizedProtocol,
    rho: &DensityMatrix,
    bin_tol: Option<f64>,
) -> Result<WorkDistribution> {
    check_dim(proto, rho)?;
    let (a, b) = (&proto.initial_energy, &proto.final_energy);
    let r = rho.matrix();
    let pts = two_time(a, b, |n, m| {
        let c = &b.projectors[m] * &a.projectors[n];
        trace(&(&c * r * c.adjoint())).re.max(0.0)
    });
    WorkDistribution::from_points(pts, Origin::Tpm, bin_tol, None)
}

/// Reversed measurement order, `Tr[P_n P_m rho P_m P_n]`, binned at `-w`.
pub fn tpm_backward_distribution(
    proto: &DiscretizedProtocol,
    rho: &DensityMatrix,
    bin_tol: Option<f64>,
) -> Result<WorkDistribution> {
    check_dim(proto, rho)?;
    let (a, b) = (&proto.initial_energy, &proto.final_energy);
    let r = rho.matrix();
    let pts = two_time(a, b, |n, m| {
        let c = &a.projectors[n] * &b.projectors[m];
        trace(&(&c * r * c.adjoint())).re.max(0.0)
    })
    .into_iter()
    .map(|(w, p)| (-w, p));
    WorkDistribution::from_points(pts, Origin::Tpm, bin_tol, None)
}

/// Margenau-Hill: `Re Tr[P_m P_n rho]` at `w = e_m(tau) - e_n(0)`.
pub fn mh_distribution(
    proto: &DiscretizedProtocol,
    rho: &DensityMatrix,
    bin_tol: Option<f64>,
) -> Result<WorkDistribution> {
    check_dim(proto, rho)?;
    let (a, b) = (&proto.initial_energy, &proto.final_energy);
    let r = rho.matrix();
    let pts = two_time(a, b, |n, m| {
        trace(&(&b.projectors[m] * &a.projectors[n] * r)).re
    });
    WorkDistribution::from_points(pts, Origin::MargenauHill, bin_tol, None)
}

/// Margenau-Hill with the two projectors swapped, binned at `-w`.
pub fn mh_backward_distribution(
    proto: &DiscretizedProtocol,
    rho: &DensityMatrix,
    bin_tol: Option<f64>,
) -> Result<WorkDistribution> {
    check_dim(proto, rho)?;
    let (a, b) = (&proto.initial_energy, &proto.final_energy);
    let r = rho.matrix();
    let pts = two_time(a, b, |n, m| {
        trace(&(&a.projectors[n] * &b.projectors[m] * r)).re
    })
    .into_iter()
    .map(|(w, p)| (-w, p));
    WorkDistribution::from_points(pts, Origin::MargenauHill, bin_tol, None)
}

/// Builds one distribution by origin.
pub fn build(
    origin: Origin,
    proto: &DiscretizedProtocol,
    rho: &DensityMatrix,
    opts: &BuildOptions,
) -> Result<WorkDistribution> {
    match origin {
        Origin::Histories => histories_distribution(proto, rho, opts),
        Origin::Measured => measured_distribution(proto, rho, opts),
        Origin::Tpm => tpm_distribution(proto, rho, opts.bin_tol),
        Origin::MargenauHill => mh_distribution(proto, rho, opts.bin_tol),
    }
}

/// Total-variation distance `1/2 sum_w |a(w) - b(w)|`.
pub fn total_variation(a: &WorkDistribution, b: &WorkDistribution) -> f64 {
    0.5 * pointwise_difference(a, b).iter().map(|p| p.1.abs()).sum::<f64>()
}

/// Small-step limit of the measured distribution for a protocol whose
/// Hamiltonian is `A + lambda(t) B`: weight `Tr[P_n rho]` on the eigenbasis of
/// `B` at `w = (lambda(tau) - lambda(0)) b_n`.
pub fn zeno_limit_distribution(
    proto: &DiscretizedProtocol,
    spec: &crate::protocol::ProtocolSpec,
    rho: &DensityMatrix,
    bin_tol: Option<f64>,
) -> Result<WorkDistribution> {
    use crate::operator::{default_degeneracy_tol, spectral_decompose};
    use crate::protocol::ProtocolKind;
    check_dim(proto, rho)?;
    let (b, schedule) = match &spec.kind {
        ProtocolKind::LinearRamp { b, schedule, .. } => (b, schedule),
        _ => return Err(Error::Domain("the small-step limit is defined for linear ramps".into())),
    };
    let dl = schedule.end() - schedule.start();
    let s = spectral_decompose(b, default_degeneracy_tol(b))?;
    let pts = (0..s.len()).map(|n| (dl * s.eigenvalues[n], trace(&(&s.projectors[n] * rho.matrix())).re));
    WorkDistribution::from_points(pts, Origin::Measured, bin_tol, None)
}
