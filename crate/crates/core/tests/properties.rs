//! Randomized structural properties of BdG operators, their spectral
//! idempotents, propagators and topological invariants.

mod common;

use approx::assert_abs_diff_eq;
use bosonic_bdg::bdg::{check_symmetries, toy2, toy4, Boundary};
use bosonic_bdg::bogoliubov::diagonalize;
use bosonic_bdg::dynamics::propagator;
use bosonic_bdg::linalg::{self, c64, cr};
use bosonic_bdg::models::{apply_disorder, chern_insulator, DisorderConfig, DisorderKind};
use bosonic_bdg::spectral::{classify_stability, eigenvalues, riesz_projection, spectrum};
use bosonic_bdg::topology::{bloch_spectra, derivation, trace_per_volume};
use bosonic_bdg::Error;
use proptest::prelude::*;

use common::*;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config(48))]

    #[test]
    fn fourfold_spectral_symmetry(seed in any::<u64>(), n in 1usize..7) {
        let op = random_bdg(&mut rng(seed), n);
        let w: Vec<c64> = eigenvalues(&op).unwrap().to_vec();
        let scale = linalg::op_norm(op.matrix());
        // generic random operators are diagonalizable, with eigenvalue
        // condition numbers far below 1e4
        let tol = 1e-10 * scale * 1e4;
        let neg: Vec<c64> = w.iter().map(|z| -z).collect();
        let bar: Vec<c64> = w.iter().map(|z| z.conj()).collect();
        prop_assert!(linalg::multiset_distance(&w, &neg) < tol);
        prop_assert!(linalg::multiset_distance(&w, &bar) < tol);
    }

    #[test]
    fn assembled_operators_are_phs_and_j_selfadjoint(seed in any::<u64>(), n in 1usize..9) {
        let op = random_bdg(&mut rng(seed), n);
        let d = check_symmetries(&op);
        prop_assert!(d.phs <= 1e-12 && d.j_selfadjoint <= 1e-12, "{d:?}");
    }

    #[test]
    fn positive_a_forces_real_spectrum(seed in any::<u64>(), n in 1usize..9) {
        // A = B*B + ε is positive for any B, including badly conditioned ones
        let mut r = rng(seed);
        let b = random_complex(&mut r, 2 * n, 1.0);
        let raw = linalg::dagger(&b).dot(&b) + linalg::identity(2 * n).mapv(|z| z * 1e-2);
        // impose the K-symmetry A = K conj(A) K that every BdG A carries
        let a = (&raw + &linalg::k_conj_sandwich(&raw)).mapv(|z| z * 0.5);
        let op = bosonic_bdg::bdg::BdGOperator::from_a(&a).unwrap();
        let v = classify_stability(&op, None).unwrap();
        prop_assert!(v.thermodynamically_stable);
        prop_assert!(v.dynamically_stable, "growth {}", v.max_growth_rate);
        prop_assert!(spectrum(&op, None).unwrap().is_real());
    }

    #[test]
    fn riesz_projections_are_krein_and_phs_symmetric(seed in any::<u64>(), n in 1usize..7) {
        let op = random_stable(&mut rng(seed), n, 0.4, 0.2);
        let top = linalg::op_norm(op.matrix()) + 1.0;
        let plus = riesz_projection(&op, (0.0, top)).unwrap();
        let minus = riesz_projection(&op, (-top, 0.0)).unwrap();
        prop_assert_eq!(plus.rank, n);
        prop_assert!(plus.idempotency_defect() < 1e-8);
        prop_assert!(plus.krein_defect() < 1e-8);
        let mirrored = linalg::k_conj_sandwich(&plus.q);
        prop_assert!(linalg::op_norm(&(mirrored - &minus.q)) < 1e-8);
        let total = &plus.q + &minus.q;
        prop_assert!(linalg::op_norm(&(total - linalg::identity(2 * n))) < 1e-8);
    }

    #[test]
    fn propagators_lie_in_the_symmetry_group(seed in any::<u64>(), n in 1usize..6, t in 0.05f64..5.0) {
        let op = random_stable(&mut rng(seed), n, 0.4, 0.2);
        let p = propagator(&op, t).unwrap();
        prop_assert!(p.j_unitarity_defect <= 1e-8, "{p:?}");
        prop_assert!(p.reality_defect <= 1e-8, "{p:?}");
    }

    #[test]
    fn stable_operators_diagonalize(seed in any::<u64>(), n in 1usize..12) {
        let op = random_stable(&mut rng(seed), n, 0.5, 0.05);
        let tr = diagonalize(&op).unwrap();
        prop_assert!(tr.residuals.max() <= 1e-8, "{:?}", tr.residuals);
        prop_assert!(tr.energies().iter().all(|&e| e > 0.0));
    }

    #[test]
    fn toy2_closed_form(mu in -3.0f64..3.0, nu in -3.0f64..3.0) {
        prop_assume!((mu.abs() - nu.abs()).abs() > 1e-3);
        let r = cr(mu * mu - nu * nu).sqrt();
        let w: Vec<c64> = eigenvalues(&toy2(mu, nu)).unwrap().to_vec();
        prop_assert!(linalg::multiset_distance(&w, &[r, -r]) < 1e-12);
    }

    #[test]
    fn toy4_closed_form(lambda in 0.01f64..3.0, nu in 0.01f64..3.0) {
        let expected = [c64::new(lambda, nu), c64::new(lambda, -nu), c64::new(-lambda, nu), c64::new(-lambda, -nu)];
        let w: Vec<c64> = eigenvalues(&toy4(lambda, nu)).unwrap().to_vec();
        prop_assert!(linalg::multiset_distance(&w, &expected) < 1e-12);
    }

    #[test]
    fn derivations_have_zero_trace_on_tori(seed in any::<u64>(), amplitude in 0.0f64..1.0) {
        let clean = chern_insulator(-1.0, [4, 4], [Boundary::Periodic; 2]).unwrap();
        let model = apply_disorder(&clean, DisorderConfig { amplitude, kind: DisorderKind::OnsiteUniform, seed }).unwrap();
        let h = model.bdg(-4.0).unwrap();
        let a = h.matrix().dot(h.matrix()).dot(h.matrix());
        for axis in 0..2 {
            let t = trace_per_volume(&derivation(&a, &model, axis, true), model.cells());
            prop_assert!(t.norm() < 1e-12, "{t}");
        }
    }
}

proptest! {
    #![proptest_config(config(6))]

    /// The Chern number of the range projection equals the one computed
    /// from the non-orthogonal idempotent itself.
    #[test]
    fn range_projection_keeps_the_chern_number(seed in any::<u64>()) {
        let (model, mu) = random_two_band(&mut rng(seed));
        let spectra = bloch_spectra(&model, mu, (24, 24), None).unwrap();
        let positive: Vec<i32> = spectra.indices().into_iter().filter(|&i| i > 0).collect();
        prop_assert_eq!(positive.len(), 2);
        let mut sum = 0.0;
        for j in positive {
            let range = spectra.chern(j).unwrap();
            let direct = spectra.chern_biorthogonal(j).unwrap();
            prop_assert!(range.deviation < 1e-6 && direct.deviation < 1e-6);
            prop_assert_eq!(range.rounded, direct.rounded);
            assert_abs_diff_eq!(range.value, spectra.chern(-j).unwrap().value * -1.0, epsilon = 1e-6);
            sum += range.value;
        }
        assert_abs_diff_eq!(sum, 0.0, epsilon = 1e-6);
    }
}

#[test]
fn unstable_operator_is_refused_by_diagonalize() {
    let op = random_bdg(&mut rng(11), 4);
    if !classify_stability(&op, None).unwrap().thermodynamically_stable {
        assert!(matches!(diagonalize(&op), Err(Error::Stability(_))));
    }
}
