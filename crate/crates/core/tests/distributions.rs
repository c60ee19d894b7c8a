mod common;

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::SeedableRng;
use workhist::distributions::*;
use workhist::operator::{thermal_state, trace, CVector, DensityMatrix, HermitianOperator, ONE, ZERO};
use workhist::protocol::{discretize, DiscretizedProtocol, ProtocolKind, ProtocolSpec};
use workhist::Error;

use common::*;

fn fig2() -> (DiscretizedProtocol, DensityMatrix) {
    let p = discretize(&ProtocolSpec::qubit_drive_quarter_period(1.0, 1.0, 15), 15).unwrap();
    let rho = thermal_state(p.initial_hamiltonian(), 0.1).unwrap();
    (p, rho)
}

fn opts() -> BuildOptions {
    BuildOptions::default()
}

fn static_protocol(h: HermitianOperator, k: usize) -> DiscretizedProtocol {
    let spec = ProtocolSpec {
        kind: ProtocolKind::Tabulated { hamiltonians: vec![h; k + 1] },
        tau: 1.0,
    };
    discretize(&spec, k).unwrap()
}

#[test]
fn static_hamiltonian_gives_single_point() {
    let p = static_protocol(sigma(sx() + sz()), 3);
    let mut rng = StdRng::seed_from_u64(1);
    let rho = random_density(&mut rng, 2);
    for origin in Origin::ALL {
        let d = build(origin, &p, &rho, &opts()).unwrap();
        assert_eq!(d.len(), 1, "{origin}");
        assert!(d.support()[0].0.abs() < 1e-12);
        assert!((d.support()[0].1 - 1.0).abs() < 1e-12);
    }
}

#[test]
fn driven_qubit_histories_live_on_odd_lattice() {
    let (p, rho) = fig2();
    let (h, m) = trajectory_distributions(&p, &rho, &opts()).unwrap();
    let expected: Vec<f64> = (0..16).map(|i| PI / 4.0 * (2 * i - 15) as f64).collect();
    for d in [&h, &m] {
        let ws: Vec<f64> = d.support().iter().map(|s| s.0).collect();
        assert_eq!(ws.len(), 16);
        for (a, b) in ws.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
        d.validate().unwrap();
    }
    assert!(h.min_weight() < 0.0);
    let q = h.cumulative();
    assert!(q.windows(2).any(|w| w[1].1 < w[0].1));
    assert!(m.min_weight() >= 0.0);
    assert!(m.cumulative().windows(2).all(|w| w[1].1 >= w[0].1));
    assert_eq!(h.kind(), Kind::Quasi);
    assert_eq!(m.kind(), Kind::Probability);
}

#[test]
fn tpm_of_energy_eigenstate_without_driving() {
    let p = static_protocol(sigma(sz()), 2);
    let rho = DensityMatrix::pure(&CVector::from_vec(vec![ONE, ZERO])).unwrap();
    let t = tpm_distribution(&p, &rho, None).unwrap();
    assert!((t.weight_at(0.0) - 1.0).abs() < 1e-14);
    assert!((t.total() - 1.0).abs() < 1e-14);
}

#[test]
fn tpm_mean_uses_dephased_state() {
    let mut rng = StdRng::seed_from_u64(2);
    for variant in 0..4 {
        let (_, p) = random_protocol(&mut rng, 3, 4, variant);
        let rho = random_density(&mut rng, 3);
        let t = tpm_distribution(&p, &rho, None).unwrap();
        let eta = rho.dephased(&p.initial_energy);
        let expected = p.final_heisenberg_hamiltonian().expectation(&eta) - p.initial_hamiltonian().expectation(&rho);
        assert!((t.mean() - expected).abs() < 1e-10);
        assert!(t.min_weight() >= 0.0);
    }
}

#[test]
fn tpm_is_invariant_under_eigenvector_phases() {
    // Projectors do not depend on eigenvector phases; check that a basis
    // rotated by diagonal phases gives the same fixed-basis TPM distribution.
    let mut rng = StdRng::seed_from_u64(21);
    let spec = random_fixed_basis(&mut rng, 3, 1.0);
    let rotated = match &spec.kind {
        ProtocolKind::FixedBasis { projectors, tracks } => ProtocolSpec {
            kind: ProtocolKind::FixedBasis {
                projectors: projectors.iter().map(|p| p * Complex64::new(1.0, 0.0)).collect(),
                tracks: tracks.clone(),
            },
            tau: spec.tau,
        },
        _ => unreachable!(),
    };
    let rho = random_density(&mut rng, 3);
    let a = tpm_distribution(&discretize(&spec, 3).unwrap(), &rho, None).unwrap();
    let b = tpm_distribution(&discretize(&rotated, 3).unwrap(), &rho, None).unwrap();
    assert!(max_gap(&a, &b) < 1e-12);
}

#[test]
fn tpm_backward_symmetry_conditions() {
    let p = discretize(&ProtocolSpec::qubit_drive(1.0, 1.0, 1.3), 4).unwrap();
    let gap = |p: &DiscretizedProtocol, rho: &DensityMatrix| {
        let f = tpm_distribution(p, rho, None).unwrap();
        let b = tpm_backward_distribution(p, rho, None).unwrap();
        max_gap(&b, &f.mirrored())
    };
    assert!(gap(&p, &coherent_qubit()) > 1e-6);
    assert!(gap(&p, &DensityMatrix::maximally_mixed(2)) < 1e-10);
    // commuting Hamiltonians
    let mut rng = StdRng::seed_from_u64(4);
    let fb = discretize(&random_fixed_basis(&mut rng, 3, 1.0), 3).unwrap();
    assert!(gap(&fb, &random_density(&mut rng, 3)) < 1e-10);
}

#[test]
fn tpm_backward_is_asymmetric_for_diagonal_state_when_hamiltonians_do_not_commute() {
    // With [rho, H(0)] = 0 the forward joint is p_n Tr[P_m Q_n] while the
    // backward joint is sum_k p_k Tr[Q_n P_m Q_k P_m]; for a qubit these
    // differ as soon as the two energy bases are neither equal nor unbiased.
    let p = discretize(&ProtocolSpec::qubit_drive(1.0, 1.0, 1.3), 4).unwrap();
    assert!(!p.hamiltonians_commute());
    let rho = thermal_state(p.initial_hamiltonian(), 0.8).unwrap();
    let (a, b) = (&p.initial_energy, &p.final_energy);
    let (n, m) = (0, 0);
    let forward = trace(&(&b.projectors[m] * &a.projectors[n] * rho.matrix() * &a.projectors[n] * &b.projectors[m])).re;
    let backward = trace(&(&a.projectors[n] * &b.projectors[m] * rho.matrix() * &b.projectors[m] * &a.projectors[n])).re;
    assert!((forward - backward).abs() > 1e-6);
    let f = tpm_distribution(&p, &rho, None).unwrap();
    let bk = tpm_backward_distribution(&p, &rho, None).unwrap();
    assert!(max_gap(&bk, &f.mirrored()) > 1e-6);
}

#[test]
fn margenau_hill_properties() {
    let p = discretize(&ProtocolSpec::qubit_drive(1.0, 1.0, 1.3), 4).unwrap();
    let thermal = thermal_state(p.initial_hamiltonian(), 0.5).unwrap();
    let mh = mh_distribution(&p, &thermal, None).unwrap();
    let t = tpm_distribution(&p, &thermal, None).unwrap();
    assert!(max_gap(&mh, &t) < 1e-10);
    // Qubit MH weights are (1 + a.b + (a + b).r)/4 for Bloch vectors a, b of
    // the two projectors; opposite branches with r along b - a go negative.
    let bloch = |h: &HermitianOperator| {
        let v: Vec<f64> = [workhist::operator::pauli::x(), workhist::operator::pauli::y(), sz()]
            .iter()
            .map(|s| trace(&(s * h.matrix())).re)
            .collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.into_iter().map(|x| x / n).collect::<Vec<f64>>()
    };
    let a = bloch(p.initial_hamiltonian());
    let b = bloch(p.final_heisenberg_hamiltonian());
    let r: Vec<f64> = b.iter().zip(&a).map(|(x, y)| x - y).collect();
    let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
    let pauli = [workhist::operator::pauli::x(), workhist::operator::pauli::y(), sz()];
    let mut m = workhist::operator::identity(2);
    for (s, x) in pauli.iter().zip(&r) {
        m += s * Complex64::new(x / norm, 0.0);
    }
    let rho = DensityMatrix::new(m * Complex64::new(0.5, 0.0)).unwrap();
    let mh = mh_distribution(&p, &rho, None).unwrap();
    assert!(mh.has_negative_bin(), "{:?}", mh.support());
    assert!((mh.mean() - closed_form_moment(&p, &rho, 1).unwrap()).abs() < 1e-12);
    for m in 0..5 {
        assert!((mh.moment(m) - mh_closed_form_moment(&p, &rho, m).unwrap()).abs() < 1e-10);
    }
}

#[test]
fn moment_identities() {
    let p = discretize(&ProtocolSpec::qubit_drive(1.0, 1.0, 1.3), 4).unwrap();
    let rho = coherent_qubit();
    for origin in Origin::ALL {
        let d = build(origin, &p, &rho, &opts()).unwrap();
        assert!((d.moment(0) - 1.0).abs() < 1e-12);
    }
    for m in 1..=2 {
        let a = mh_closed_form_moment(&p, &rho, m).unwrap();
        let b = closed_form_moment(&p, &rho, m).unwrap();
        assert!((a - b).abs() < 1e-12);
    }
    let a = mh_closed_form_moment(&p, &rho, 3).unwrap();
    let b = closed_form_moment(&p, &rho, 3).unwrap();
    assert!((a - b).abs() > 1e-6);
}

#[test]
fn generating_function_examples() {
    let p = discretize(&ProtocolSpec::qubit_drive(1.0, 1.0, 1.3), 4).unwrap();
    let rho = coherent_qubit();
    assert!((mgf(&p, &rho, Complex64::new(0.0, 0.0)).unwrap() - 1.0).norm() < 1e-14);
    let beta = 0.7;
    let d = work_operator(&p).unwrap();
    let e = d.map_spectrum(|x| (-beta * x).exp()).unwrap();
    let direct = trace(&(e.matrix() * rho.matrix()));
    let g = mgf(&p, &rho, Complex64::new(0.0, beta)).unwrap();
    assert!((g - direct).norm() < 1e-12);
    assert!(g.im.abs() < 1e-12);
    let lambda = Complex64::new(0.01, 0.0);
    let series = mgf_series(&p, &rho, lambda, 6).unwrap();
    assert!((mgf(&p, &rho, lambda).unwrap() - series).norm() < 1e-10);
}

#[test]
fn jarzynski_examples() {
    let mut rng = StdRng::seed_from_u64(5);
    let fb = discretize(&random_fixed_basis(&mut rng, 3, 1.0), 4).unwrap();
    let rho = thermal_state(fb.initial_hamiltonian(), 0.9).unwrap();
    let j = jarzynski_closed_form(&fb, &rho, 0.9).unwrap();
    assert!(j.commuting_flag && j.thermal_flag);
    assert!(j.gap.abs() < 1e-9);
    assert!(j.rhs > 0.0);
    assert!((j.rhs - (-0.9 * j.delta_f).exp()).abs() < 1e-12);

    let (p, rho) = fig2();
    let j = jarzynski_closed_form(&p, &rho, 0.1).unwrap();
    assert!(!j.commuting_flag);
    assert!(j.gap > 0.0);
    let t = tpm_distribution(&p, &rho, None).unwrap();
    let jt = jarzynski_report(Some(&t), &p, &rho, 0.1).unwrap();
    assert!(jt.gap.abs() < 1e-9);
    assert_eq!(jt.origin, Some(Origin::Tpm));

    assert!(matches!(jarzynski_closed_form(&p, &rho, 0.0), Err(Error::Domain(_))));
    assert!(matches!(jarzynski_closed_form(&p, &rho, -1.0), Err(Error::Domain(_))));
}

#[test]
fn time_reversal_examples() {
    let p = discretize(&ProtocolSpec::qubit_drive(1.0, 1.0, 1.3), 4).unwrap();
    let rho = coherent_qubit();
    let tr = time_reversal_check(&p, &rho, &opts()).unwrap();
    assert!(tr.histories <= 1e-10);
    assert!(tr.mh <= 1e-10);
    assert!(tr.measured > 1e-6);
    let largest = tr.measured_commutator.iter().fold(0.0f64, |m, x| m.max(x.1.abs()));
    assert!((largest - tr.measured).abs() < 1e-15);
    let total: f64 = tr.measured_commutator.iter().map(|x| x.1).sum();
    assert!(total.abs() < 1e-10);
}

#[test]
fn comparison_examples() {
    let mut rng = StdRng::seed_from_u64(6);
    let fb = discretize(&random_fixed_basis(&mut rng, 3, 1.0), 4).unwrap();
    let rho = thermal_state(fb.initial_hamiltonian(), 0.4).unwrap();
    let rep = comparison_report(&fb, &rho, Some(0.4), &opts()).unwrap();
    assert!(rep.classical_limit && rep.coincident);
    for row in &rep.rows {
        assert!(row.energy_gap <= 1e-9 && row.time_reversal_gap <= 1e-9);
        assert!(row.jarzynski_gap.unwrap().abs() <= 1e-9);
    }

    let p = discretize(&ProtocolSpec::qubit_drive(1.0, 1.0, 1.3), 4).unwrap();
    let rho = coherent_qubit();
    let rep = comparison_report(&p, &rho, None, &opts()).unwrap();
    assert!(!rep.coincident);
    assert!(rep.row(Origin::Histories).unwrap().time_reversal_gap <= 1e-10);
    assert!(rep.row(Origin::MargenauHill).unwrap().time_reversal_gap <= 1e-10);
    assert!(rep.row(Origin::Tpm).unwrap().time_reversal_gap > 1e-6);
    assert!(rep.row(Origin::Measured).unwrap().time_reversal_gap > 1e-6);
    assert!(rep.row(Origin::MargenauHill).unwrap().energy_gap < 1e-12);
    assert!(rep.histories_first_law_gap < 1e-12);
    let tpm_gap = rep.row(Origin::Tpm).unwrap().energy_gap;
    assert!((tpm_gap - rep.tpm_expected_energy_gap).abs() < 1e-12);
    assert!(tpm_gap > 1e-6);

    let json = to_json(&rep).unwrap();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 4);
    for key in ["delta_u", "coincidence_gap", "classical_limit", "histories_first_law_gap"] {
        assert!(v.get(key).is_some(), "{key}");
    }
    assert_eq!(v["rows"][0]["origin"], "histories");
}

#[test]
fn first_moment_converges_with_step_size() {
    let spec = ProtocolSpec::qubit_drive(1.0, 1.0, 1.0);
    let rho = coherent_qubit();
    let mut prev = f64::INFINITY;
    for k in [4, 8, 16] {
        let p = discretize(&spec, k).unwrap();
        let h = histories_distribution(&p, &rho, &opts()).unwrap();
        assert!((h.mean() - finite_k_first_moment(&p, &rho)).abs() < 1e-9);
        let gap = (h.mean() - closed_form_moment(&p, &rho, 1).unwrap()).abs();
        assert!(gap <= prev / 1.8);
        prev = gap;
    }
}

#[test]
fn moment_report_lists_gaps() {
    let p = discretize(&ProtocolSpec::qubit_drive(1.0, 1.0, 1.3), 4).unwrap();
    let rho = coherent_qubit();
    let mh = mh_distribution(&p, &rho, None).unwrap();
    let rep = moment_report(&mh, &p, &rho, 4).unwrap();
    assert_eq!(rep.orders, vec![0, 1, 2, 3, 4]);
    assert!(rep.gaps.iter().all(|g| g.unwrap() < 1e-10));
    let t = tpm_distribution(&p, &rho, None).unwrap();
    let rep = moment_report(&t, &p, &rho, 3).unwrap();
    assert!(rep.gaps.iter().all(|g| g.unwrap() < 1e-10));
    let m = measured_distribution(&p, &rho, &opts()).unwrap();
    let rep = moment_report(&m, &p, &rho, 2).unwrap();
    assert!(rep.closed_form.iter().all(Option::is_none));
}

#[test]
fn rebinning_is_idempotent() {
    let (p, rho) = fig2();
    for origin in Origin::ALL {
        let d = build(origin, &p, &rho, &opts()).unwrap();
        assert_eq!(d.rebin(d.bin_tol()).unwrap().support(), d.support());
    }
}

#[test]
fn transfer_method_matches_enumeration_on_linear_ramp() {
    let spec = ProtocolSpec {
        kind: ProtocolKind::LinearRamp {
            a: sigma(sx() * Complex64::new(0.5, 0.0)),
            b: sigma(sz()),
            schedule: workhist::protocol::Schedule::Linear { start: 0.0, end: 1.0 },
        },
        tau: 1.0,
    };
    let p = discretize(&spec, 8).unwrap();
    let rho = coherent_qubit();
    let a = trajectory_distributions(&p, &rho, &opts()).unwrap();
    let t = BuildOptions { method: workhist::trajectories::Method::Transfer, ..opts() };
    let b = trajectory_distributions(&p, &rho, &t).unwrap();
    assert!(max_gap(&a.0, &b.0) < 1e-12);
    assert!(max_gap(&a.1, &b.1) < 1e-12);
}
