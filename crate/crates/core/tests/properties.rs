mod common;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;
use workhist::distributions::{
    finite_k_first_moment, max_gap, mh_closed_form_moment, closed_form_moment, mh_distribution,
    time_reversal_check, trajectory_distributions, BuildOptions,
};
use workhist::operator::{
    commutator, default_degeneracy_tol, heisenberg_transform, max_norm, spectral_decompose, thermal_state, trace,
    unitary_step, CMatrix,
};

use common::*;

fn config() -> ProptestConfig {
    ProptestConfig { cases: 48, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn spectral_decomposition_reconstructs(seed in any::<u64>(), d in prop::sample::select(vec![2usize, 3, 4, 6])) {
        let mut rng = StdRng::seed_from_u64(seed);
        let a = random_hermitian(&mut rng, d, 2.0);
        let s = spectral_decompose(&a, default_degeneracy_tol(&a)).unwrap();
        prop_assert!(max_norm(&(s.reconstruct() - a.matrix())) < 1e-10);
        prop_assert!(s.projector_residual() < 1e-10);
        prop_assert!(s.eigenvalues.windows(2).all(|w| w[0] < w[1]));
        let total: usize = s.ranks.iter().sum();
        prop_assert_eq!(total, d);
    }

    #[test]
    fn unitary_steps_compose(seed in any::<u64>(), d in prop::sample::select(vec![2usize, 3, 4]), a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let mut rng = StdRng::seed_from_u64(seed);
        let h = random_hermitian(&mut rng, d, 1.0);
        let ua = unitary_step(&h, a).unwrap();
        let ub = unitary_step(&h, b).unwrap();
        let uab = unitary_step(&h, a + b).unwrap();
        prop_assert!(max_norm(&(ub.matrix() * ua.matrix() - uab.matrix())) < 1e-10);
        prop_assert!(ua.unitarity_defect() < 1e-10);
    }

    #[test]
    fn thermal_state_commutes_and_is_normalized(seed in any::<u64>(), d in prop::sample::select(vec![2usize, 3, 4, 6]), beta in 0.0f64..20.0) {
        let mut rng = StdRng::seed_from_u64(seed);
        let h = random_hermitian(&mut rng, d, 3.0);
        let rho = thermal_state(&h, beta).unwrap();
        prop_assert!(max_norm(&commutator(rho.matrix(), h.matrix())) < 1e-9);
        prop_assert!((trace(rho.matrix()).re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn heisenberg_transform_keeps_spectrum(seed in any::<u64>(), d in prop::sample::select(vec![2usize, 3, 4])) {
        let mut rng = StdRng::seed_from_u64(seed);
        let x = random_hermitian(&mut rng, d, 1.0);
        let v = unitary_step(&random_hermitian(&mut rng, d, 1.0), 1.0).unwrap();
        let y = heisenberg_transform(&x, &v).unwrap();
        let (ex, ey) = (x.eigenvalues().unwrap(), y.eigenvalues().unwrap());
        for (p, q) in ex.iter().zip(&ey) {
            prop_assert!((p - q).abs() < 1e-10);
        }
    }

    #[test]
    fn distributions_are_normalized_and_first_law_holds(seed in any::<u64>(), d in 2usize..=3, k in 1usize..=5, variant in 0usize..4) {
        let mut rng = StdRng::seed_from_u64(seed);
        let (_, p) = random_protocol(&mut rng, d, k, variant);
        let rho = random_density(&mut rng, d);
        let (h, m) = trajectory_distributions(&p, &rho, &BuildOptions::default()).unwrap();
        prop_assert!((h.total() - 1.0).abs() < 1e-10);
        prop_assert!((m.total() - 1.0).abs() < 1e-10);
        prop_assert!(m.min_weight() >= 0.0);
        prop_assert!((h.mean() - finite_k_first_moment(&p, &rho)).abs() < 1e-9);
        let again = h.rebin(h.bin_tol()).unwrap();
        prop_assert_eq!(again.support(), h.support());
    }

    #[test]
    fn histories_and_mh_are_time_reversal_symmetric(seed in any::<u64>(), d in 2usize..=3, k in 1usize..=4, variant in 0usize..4) {
        let mut rng = StdRng::seed_from_u64(seed);
        let (_, p) = random_protocol(&mut rng, d, k, variant);
        let rho = random_density(&mut rng, d);
        let tr = time_reversal_check(&p, &rho, &BuildOptions::default()).unwrap();
        prop_assert!(tr.histories <= 1e-10);
        prop_assert!(tr.mh <= 1e-10);
    }

    #[test]
    fn mh_low_moments_match_histories_closed_form(seed in any::<u64>(), d in 2usize..=4, variant in 0usize..4) {
        let mut rng = StdRng::seed_from_u64(seed);
        let (_, p) = random_protocol(&mut rng, d, 3, variant);
        let rho = random_density(&mut rng, d);
        let mh = mh_distribution(&p, &rho, None).unwrap();
        for m in 0..=2 {
            let c = closed_form_moment(&p, &rho, m).unwrap();
            prop_assert!((mh_closed_form_moment(&p, &rho, m).unwrap() - c).abs() < 1e-10);
            prop_assert!((mh.moment(m) - c).abs() < 1e-10);
        }
        let gap3 = (mh_closed_form_moment(&p, &rho, 3).unwrap() - closed_form_moment(&p, &rho, 3).unwrap()).abs();
        if p.hamiltonians_commute() {
            prop_assert!(gap3 < 1e-9);
        }
    }

    #[test]
    fn mirrored_twice_is_identity(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let (_, p) = random_protocol(&mut rng, 2, 3, 0);
        let rho = random_density(&mut rng, 2);
        let (h, _) = trajectory_distributions(&p, &rho, &BuildOptions::default()).unwrap();
        prop_assert_eq!(max_gap(&h.mirrored().mirrored(), &h), 0.0);
    }
}

#[test]
fn trace_is_preserved_by_unitary_evolution() {
    let mut rng = StdRng::seed_from_u64(17);
    for d in [2, 3, 4, 6] {
        let rho = random_density(&mut rng, d);
        let v = unitary_step(&random_hermitian(&mut rng, d, 1.0), 0.8).unwrap();
        let evolved: CMatrix = v.matrix() * rho.matrix() * v.matrix().adjoint();
        assert!((trace(&evolved) - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }
}
