//! Time-dependent Hamiltonian protocols, their discretization onto a K-step grid,
//! propagators, and Heisenberg-picture power operators with spectra.

mod config;
mod schedule;

pub use config::{parse_protocol_config, InitialState, RunSettings};
pub use schedule::Schedule;

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::operator::{
    default_degeneracy_tol, heisenberg_transform, max_norm, pauli, spectral_decompose,
    spectral_decompose_strict, unitary_step, CMatrix, HermitianOperator, SpectralDecomposition,
    UnitaryOperator, I, ONE, ZERO,
};
use crate::tol;

/// The driven system. Durations are in units with hbar = 1.
#[derive(Debug, Clone)]
pub enum ProtocolKind {
    /// `H(t) = (omega/2) sz + (g/2)(cos(omega t) sx + sin(omega t) sy)`.
    QubitDrive { omega: f64, g: f64 },
    /// `H(t) = A + lambda(t) B`.
    LinearRamp {
        a: HermitianOperator,
        b: HermitianOperator,
        schedule: Schedule,
    },
    /// `H(t) = sum_n E_n(t) Pi_n` with a fixed complete set of orthogonal projectors.
    FixedBasis {
        projectors: Vec<CMatrix>,
        tracks: Vec<Schedule>,
    },
    /// Explicit Hamiltonians `H^(0..K)` on the grid.
    Tabulated { hamiltonians: Vec<HermitianOperator> },
}

#[derive(Debug, Clone)]
pub struct ProtocolSpec {
    pub kind: ProtocolKind,
    pub tau: f64,
}

/// How the propagators `V^(j)` are built.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Propagation {
    /// Closed-form unitary (QubitDrive, FixedBasis).
    Analytic,
    /// `V^(j) = exp(-i H^(j) dt) V^(j-1)`, first order in `dt`.
    ProductStep,
    /// Fourth-order Magnus integration with `substeps` per grid interval.
    Magnus { substeps: usize },
}

/// Where within a step the power operator is sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PowerSampling {
    #[default]
    LeftEndpoint,
    Midpoint,
}

#[derive(Debug, Clone, Default)]
pub struct DiscretizeOptions {
    /// `None` picks the variant default: analytic where available, Magnus for
    /// LinearRamp, product stepping for Tabulated.
    pub propagation: Option<Propagation>,
    pub sampling: PowerSampling,
    /// Reject degenerate power/energy spectra instead of merging them.
    pub strict_degeneracy: bool,
}

pub const DEFAULT_MAGNUS_SUBSTEPS: usize = 32;

impl ProtocolSpec {
    pub fn qubit_drive(omega: f64, g: f64, tau: f64) -> Self {
        Self {
            kind: ProtocolKind::QubitDrive { omega, g },
            tau,
        }
    }

    /// The oscillating-field qubit with `dt = pi/(2g)` over `k` steps.
    pub fn qubit_drive_quarter_period(omega: f64, g: f64, k: usize) -> Self {
        Self::qubit_drive(omega, g, k as f64 * PI / (2.0 * g))
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            ProtocolKind::QubitDrive { .. } => 2,
            ProtocolKind::LinearRamp { a, .. } => a.dim(),
            ProtocolKind::FixedBasis { projectors, .. } => projectors.first().map_or(0, |p| p.nrows()),
            ProtocolKind::Tabulated { hamiltonians } => hamiltonians.first().map_or(0, |h| h.dim()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::config("tau", None, format!("duration must be positive, got {}", self.tau)));
        }
        match &self.kind {
            ProtocolKind::QubitDrive { omega, g } => {
                if !(*omega > 0.0 && omega.is_finite()) {
                    return Err(Error::config("omega", None, "omega must be positive"));
                }
                if !(*g > 0.0 && g.is_finite()) {
                    return Err(Error::config("g", None, "g must be positive"));
                }
            }
            ProtocolKind::LinearRamp { a, b, schedule } => {
                if a.dim() != b.dim() {
                    return Err(Error::config("B", None, format!(
                        "A is {}-dimensional but B is {}-dimensional",
                        a.dim(),
                        b.dim()
                    )));
                }
                schedule.validate()?;
            }
            ProtocolKind::FixedBasis { projectors, tracks } => {
                if projectors.is_empty() {
                    return Err(Error::config("basis", None, "no projectors given"));
                }
                if projectors.len() != tracks.len() {
                    return Err(Error::config("energies_start", None, format!(
                        "{} projectors but {} energy tracks",
                        projectors.len(),
                        tracks.len()
                    )));
                }
                let d = projectors[0].nrows();
                let mut total = CMatrix::zeros(d, d);
                for (n, p) in projectors.iter().enumerate() {
                    if p.nrows() != d || p.ncols() != d {
                        return Err(Error::Shape("projectors differ in dimension".into()));
                    }
                    total += p;
                    for (m, q) in projectors.iter().enumerate() {
                        let prod = p * q;
                        let r = if n == m { max_norm(&(prod - p)) } else { max_norm(&prod) };
                        if r > tol::SPECTRAL {
                            return Err(Error::config("basis", None, format!(
                                "projectors {n} and {m} are not orthogonal idempotents (residual {r:.2e})"
                            )));
                        }
                    }
                }
                let r = max_norm(&(total - CMatrix::identity(d, d)));
                if r > tol::SPECTRAL {
                    return Err(Error::config("basis", None, format!(
                        "projectors are not complete (residual {r:.2e})"
                    )));
                }
                for t in tracks {
                    t.validate()?;
                }
            }
            ProtocolKind::Tabulated { hamiltonians } => {
                if hamiltonians.len() < 2 {
                    return Err(Error::config("hamiltonians", None, "at least two Hamiltonians are required"));
                }
                let d = hamiltonians[0].dim();
                if hamiltonians.iter().any(|h| h.dim() != d) {
                    return Err(Error::config("hamiltonians", None, "Hamiltonians differ in dimension"));
                }
            }
        }
        Ok(())
    }

    /// `H(t)` for the variants that define it at arbitrary times.
    pub fn hamiltonian(&self, t: f64) -> Option<HermitianOperator> {
        match &self.kind {
            ProtocolKind::QubitDrive { omega, g } => {
                let m = pauli::z().scale(omega / 2.0)
                    + (pauli::x().scale((omega * t).cos()) + pauli::y().scale((omega * t).sin()))
                        .scale(g / 2.0);
                Some(HermitianOperator::symmetrized(m))
            }
            ProtocolKind::LinearRamp { a, b, schedule } => {
                Some(a.combine(1.0, b, schedule.value(t, self.tau)).expect("validated dims"))
            }
            ProtocolKind::FixedBasis { projectors, tracks } => {
                Some(fixed_basis_operator(projectors, tracks.iter().map(|s| s.value(t, self.tau))))
            }
            ProtocolKind::Tabulated { .. } => None,
        }
    }

    /// Schrodinger-picture power operator `dH/dt` where the variant defines a derivative.
    pub fn power(&self, t: f64) -> Option<HermitianOperator> {
        match &self.kind {
            ProtocolKind::QubitDrive { omega, g } => {
                let m = (pauli::y().scale((omega * t).cos()) - pauli::x().scale((omega * t).sin()))
                    .scale(g * omega / 2.0);
                Some(HermitianOperator::symmetrized(m))
            }
            ProtocolKind::LinearRamp { b, schedule, .. } => Some(b.scale(schedule.rate(t, self.tau))),
            ProtocolKind::FixedBasis { projectors, tracks } => {
                Some(fixed_basis_operator(projectors, tracks.iter().map(|s| s.rate(t, self.tau))))
            }
            ProtocolKind::Tabulated { .. } => None,
        }
    }

    /// Closed-form propagator `V(t)` when one exists.
    pub fn exact_unitary(&self, t: f64) -> Option<UnitaryOperator> {
        match &self.kind {
            ProtocolKind::QubitDrive { omega, g } => Some(qubit_drive_unitary(*omega, *g, t)),
            ProtocolKind::FixedBasis { projectors, tracks } => {
                let d = projectors[0].nrows();
                let mut v = CMatrix::zeros(d, d);
                for (p, s) in projectors.iter().zip(tracks) {
                    v += p * Complex64::from_polar(1.0, -s.integral(t, self.tau));
                }
                Some(UnitaryOperator::with_tolerance(v, 1e-8).expect("validated projectors"))
            }
            _ => None,
        }
    }

    fn default_propagation(&self) -> Propagation {
        match &self.kind {
            ProtocolKind::QubitDrive { .. } | ProtocolKind::FixedBasis { .. } => Propagation::Analytic,
            ProtocolKind::LinearRamp { .. } => Propagation::Magnus {
                substeps: DEFAULT_MAGNUS_SUBSTEPS,
            },
            ProtocolKind::Tabulated { .. } => Propagation::ProductStep,
        }
    }
}

fn fixed_basis_operator(projectors: &[CMatrix], values: impl Iterator<Item = f64>) -> HermitianOperator {
    let d = projectors[0].nrows();
    let m = projectors
        .iter()
        .zip(values)
        .fold(CMatrix::zeros(d, d), |acc, (p, e)| acc + p.scale(e));
    HermitianOperator::symmetrized(m)
}

/// `V(t) = exp(-i omega t sz / 2) exp(-i g t sx / 2)`.
pub fn qubit_drive_unitary(omega: f64, g: f64, t: f64) -> UnitaryOperator {
    let a = omega * t / 2.0;
    let rz = CMatrix::from_row_slice(
        2,
        2,
        &[Complex64::from_polar(1.0, -a), ZERO, ZERO, Complex64::from_polar(1.0, a)],
    );
    let b = g * t / 2.0;
    let rx = CMatrix::identity(2, 2) * Complex64::new(b.cos(), 0.0) - pauli::x() * (I * b.sin());
    UnitaryOperator::with_tolerance(rz * rx, 1e-12).expect("product of Pauli rotations")
}

/// One fourth-order Magnus step of `i dV/dt = H V` from `t0` to `t0 + h`.
fn magnus_step(spec: &ProtocolSpec, t0: f64, h: f64) -> Result<UnitaryOperator> {
    let c = 3.0_f64.sqrt() / 6.0;
    let h1 = spec.hamiltonian(t0 + (0.5 - c) * h).expect("analytic Hamiltonian");
    let h2 = spec.hamiltonian(t0 + (0.5 + c) * h).expect("analytic Hamiltonian");
    let comm = h2.matrix() * h1.matrix() - h1.matrix() * h2.matrix();
    // exp(Omega) with Omega = -i G, G = h (H1 + H2)/2 - i (sqrt(3)/12) h^2 [H2, H1]
    let g = (h1.matrix() + h2.matrix()).scale(h / 2.0) - comm * (I * (3.0_f64.sqrt() / 12.0 * h * h));
    unitary_step(&HermitianOperator::symmetrized(g), 1.0)
}

fn magnus_propagate(
    spec: &ProtocolSpec,
    v0: &UnitaryOperator,
    t0: f64,
    t1: f64,
    substeps: usize,
) -> Result<UnitaryOperator> {
    let n = substeps.max(1);
    let h = (t1 - t0) / n as f64;
    let mut v = v0.clone();
    for s in 0..n {
        let step = magnus_step(spec, t0 + s as f64 * h, h)?;
        v = step.compose(&v)?;
    }
    Ok(v)
}

/// A protocol discretized onto `t_j = j dt`, `j = 0..=K`.
///
/// Trajectories carry `K + 1` projector slots, so `heisenberg_power` and
/// `power_spectra` have `K + 1` entries; only steps `0..K` enter work values and
/// the last slot supplies the final projectors.
#[derive(Debug, Clone)]
pub struct DiscretizedProtocol {
    pub k: usize,
    pub dt: f64,
    pub tau: f64,
    pub times: Vec<f64>,
    pub schrodinger_h: Vec<HermitianOperator>,
    pub propagators: Vec<UnitaryOperator>,
    pub heisenberg_h: Vec<HermitianOperator>,
    pub heisenberg_power: Vec<HermitianOperator>,
    pub power_spectra: Vec<SpectralDecomposition>,
    /// Spectrum of `H(0)`.
    pub initial_energy: SpectralDecomposition,
    /// Spectrum of `H_H(tau)`.
    pub final_energy: SpectralDecomposition,
    /// Work values lie on multiples of this quantum when set.
    pub work_quantum: Option<f64>,
    pub fixed_basis: Option<FixedBasisLevels>,
}

/// Level bookkeeping for fixed-basis protocols.
#[derive(Debug, Clone)]
pub struct FixedBasisLevels {
    /// `energies[j][l] = E_l(t_j)`.
    pub energies: Vec<Vec<f64>>,
    /// `level_of[j][n]`: fixed-basis level of projector `n` at step `j`, `None` if merged.
    pub level_of: Vec<Vec<Option<usize>>>,
}

impl DiscretizedProtocol {
    pub fn dim(&self) -> usize {
        self.schrodinger_h[0].dim()
    }

    /// Per-step alphabet of power-operator projectors, `K + 1` slots.
    pub fn alphabet(&self) -> &[SpectralDecomposition] {
        &self.power_spectra
    }

    /// `prod_j d_j`, the number of trajectories.
    pub fn trajectory_count(&self) -> u128 {
        self.power_spectra
            .iter()
            .fold(1u128, |acc, s| acc.saturating_mul(s.len() as u128))
    }

    pub fn initial_hamiltonian(&self) -> &HermitianOperator {
        &self.schrodinger_h[0]
    }

    /// `H(tau)` in the Schrodinger picture.
    pub fn final_hamiltonian(&self) -> &HermitianOperator {
        &self.schrodinger_h[self.k]
    }

    /// `H_H(tau)`.
    pub fn final_heisenberg_hamiltonian(&self) -> &HermitianOperator {
        &self.heisenberg_h[self.k]
    }

    /// Whether `[H_H(tau), H(0)]` vanishes within tolerance.
    pub fn hamiltonians_commute(&self) -> bool {
        let c = crate::operator::commutator(
            self.final_heisenberg_hamiltonian().matrix(),
            self.initial_hamiltonian().matrix(),
        );
        max_norm(&c) <= tol::COMMUTING
    }

    /// Snaps a work value to the protocol lattice if one is exposed.
    pub fn snap_work(&self, w: f64) -> f64 {
        match self.work_quantum {
            Some(q) if q > 0.0 => {
                let s = (w / q).round() * q;
                if s == 0.0 { 0.0 } else { s }
            }
            _ => w,
        }
    }
}

/// Discretizes with default options.
pub fn discretize(spec: &ProtocolSpec, k: usize) -> Result<DiscretizedProtocol> {
    discretize_with(spec, k, &DiscretizeOptions::default())
}

pub fn discretize_with(spec: &ProtocolSpec, k: usize, opts: &DiscretizeOptions) -> Result<DiscretizedProtocol> {
    if k == 0 {
        return Err(Error::config("K", None, "K must be at least 1"));
    }
    spec.validate()?;
    if let ProtocolKind::Tabulated { hamiltonians } = &spec.kind {
        if hamiltonians.len() != k + 1 {
            return Err(Error::config("K", None, format!(
                "tabulated protocol has {} Hamiltonians but K + 1 = {}",
                hamiltonians.len(),
                k + 1
            )));
        }
    }
    let propagation = opts.propagation.unwrap_or_else(|| spec.default_propagation());
    match (propagation, &spec.kind) {
        (Propagation::Analytic, ProtocolKind::LinearRamp { .. } | ProtocolKind::Tabulated { .. }) => {
            return Err(Error::config("propagation", None, "no closed-form propagator for this protocol"));
        }
        (Propagation::Magnus { .. }, ProtocolKind::Tabulated { .. }) => {
            return Err(Error::config("propagation", None, "Magnus integration needs H(t) between grid points"));
        }
        _ => {}
    }
    if opts.sampling == PowerSampling::Midpoint
        && (propagation == Propagation::ProductStep || matches!(spec.kind, ProtocolKind::Tabulated { .. }))
    {
        return Err(Error::config(
            "sampling",
            None,
            "midpoint sampling needs an analytic or integrated propagator",
        ));
    }

    let d = spec.dim();
    let dt = spec.tau / k as f64;
    let times: Vec<f64> = (0..=k).map(|j| j as f64 * dt).collect();

    let schrodinger_h: Vec<HermitianOperator> = match &spec.kind {
        ProtocolKind::Tabulated { hamiltonians } => hamiltonians.clone(),
        _ => times.iter().map(|&t| spec.hamiltonian(t).unwrap()).collect(),
    };

    let mut propagators = Vec::with_capacity(k + 1);
    propagators.push(UnitaryOperator::identity(d));
    for j in 1..=k {
        let v = match propagation {
            Propagation::Analytic => spec.exact_unitary(times[j]).unwrap(),
            Propagation::ProductStep => unitary_step(&schrodinger_h[j], dt)?.compose(&propagators[j - 1])?,
            Propagation::Magnus { substeps } => {
                magnus_propagate(spec, &propagators[j - 1], times[j - 1], times[j], substeps)?
            }
        };
        propagators.push(v);
    }

    // Schrodinger-picture power source and the propagator it is transformed with.
    let mut heisenberg_power = Vec::with_capacity(k + 1);
    for j in 0..=k {
        let (source, v) = match (&spec.kind, opts.sampling) {
            (ProtocolKind::Tabulated { .. }, _) => {
                let (lo, hi) = if j < k { (j, j + 1) } else { (k - 1, k) };
                let x = schrodinger_h[hi].combine(1.0 / dt, &schrodinger_h[lo], -1.0 / dt)?;
                (x, propagators[j].clone())
            }
            (ProtocolKind::FixedBasis { projectors, tracks }, _) => {
                // Difference quotient of the energy tracks, so work telescopes
                // exactly. The last slot reuses the backward quotient: a cosine
                // track has zero rate at tau, which would merge final levels.
                let (a, b) = if j < k { (times[j], times[j + 1]) } else { (times[k - 1], times[k]) };
                let x = fixed_basis_operator(
                    projectors,
                    tracks.iter().map(|s| (s.value(b, spec.tau) - s.value(a, spec.tau)) / dt),
                );
                (x, propagators[j].clone())
            }
            (_, PowerSampling::LeftEndpoint) => (spec.power(times[j]).unwrap(), propagators[j].clone()),
            (_, PowerSampling::Midpoint) => {
                let t = times[j] + dt / 2.0;
                let v = match propagation {
                    Propagation::Analytic => spec.exact_unitary(t).unwrap(),
                    Propagation::Magnus { substeps } => {
                        magnus_propagate(spec, &propagators[j], times[j], t, substeps.div_ceil(2))?
                    }
                    Propagation::ProductStep => unreachable!("rejected above"),
                };
                (spec.power(t).unwrap(), v)
            }
        };
        heisenberg_power.push(heisenberg_transform(&source, &v)?);
    }

    let heisenberg_h: Vec<HermitianOperator> = schrodinger_h
        .iter()
        .zip(&propagators)
        .map(|(h, v)| heisenberg_transform(h, v))
        .collect::<Result<_>>()?;
    // H_H(0) = H(0) exactly.
    let mut heisenberg_h = heisenberg_h;
    heisenberg_h[0] = schrodinger_h[0].clone();

    let decompose = |a: &HermitianOperator| {
        let t = default_degeneracy_tol(a);
        if opts.strict_degeneracy {
            spectral_decompose_strict(a, t)
        } else {
            spectral_decompose(a, t)
        }
    };
    let power_spectra: Vec<SpectralDecomposition> =
        heisenberg_power.iter().map(&decompose).collect::<Result<_>>()?;
    let initial_energy = decompose(&heisenberg_h[0])?;
    let final_energy = decompose(&heisenberg_h[k])?;

    let work_quantum = match &spec.kind {
        ProtocolKind::QubitDrive { omega, g } => Some(g * omega / 2.0 * dt),
        _ => None,
    };

    let fixed_basis = match &spec.kind {
        ProtocolKind::FixedBasis { projectors, tracks } => {
            let energies = times
                .iter()
                .map(|&t| tracks.iter().map(|s| s.value(t, spec.tau)).collect())
                .collect();
            let level_of = power_spectra
                .iter()
                .map(|s| {
                    s.projectors
                        .iter()
                        .zip(&s.ranks)
                        .map(|(p, &r)| {
                            if r != 1 {
                                return None;
                            }
                            projectors.iter().position(|q| max_norm(&(q - p)) <= 1e-8)
                        })
                        .collect()
                })
                .collect();
            Some(FixedBasisLevels { energies, level_of })
        }
        _ => None,
    };

    Ok(DiscretizedProtocol {
        k,
        dt,
        tau: spec.tau,
        times,
        schrodinger_h,
        propagators,
        heisenberg_h,
        heisenberg_power,
        power_spectra,
        initial_energy,
        final_energy,
        work_quantum,
        fixed_basis,
    })
}

/// Rank-1 projectors `|e_n><e_n|` onto the columns of a unitary.
pub fn projectors_from_basis(basis: &CMatrix) -> Result<Vec<CMatrix>> {
    UnitaryOperator::with_tolerance(basis.clone(), 1e-10)?;
    Ok((0..basis.ncols())
        .map(|n| {
            let v = basis.column(n);
            v * v.adjoint()
        })
        .collect())
}

/// Computational-basis projectors of dimension `d`.
pub fn standard_projectors(d: usize) -> Vec<CMatrix> {
    (0..d)
        .map(|n| {
            let mut p = CMatrix::zeros(d, d);
            p[(n, n)] = ONE;
            p
        })
        .collect()
}
