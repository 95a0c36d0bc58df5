//! Structural invariants under randomized inputs.

use binding_core::bogoliubov::{e_b, e_b_dispersion, QpCoefficients};
use binding_core::fock::{ExcitationBasis, NBodyBasis, Sector};
use binding_core::lattice::{enumerate_ball, sum_closure, ModeSet, Momentum};
use binding_core::oracle::{build_nbody_hamiltonian, fit_polynomial};
use binding_core::perturbation::{compositions, FluctuationOps, Variant};
use binding_core::series::{e1_binding, e2_binding, e2_binding_qp_assembly, E1Form};
use binding_core::PotentialSpec;
use proptest::prelude::*;

fn tabulated() -> impl Strategy<Value = PotentialSpec> {
    (
        0.0..5.0f64,
        prop::collection::btree_map(1i64..6, 0.1..20.0f64, 1..4),
    )
        .prop_map(|(v0, table)| {
            let entries: Vec<(Momentum, f64)> = table
                .into_iter()
                .map(|(n, v)| (Momentum::new(&[n]).unwrap(), v))
                .collect();
            PotentialSpec::tabulated(v0, &entries).unwrap()
        })
}

fn binomial(n: u64, k: u64) -> u64 {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bogoliubov_coefficients(k2 in 1e-2..1e4f64, v in 0.0..1e3f64) {
        let q = QpCoefficients::from_values(k2, v);
        prop_assert!((q.sigma * q.sigma - q.gamma * q.gamma - 1.0).abs() < 1e-12);
        prop_assert!((0.0..1.0).contains(&q.alpha));
        prop_assert!(q.eps >= k2);
    }

    #[test]
    fn closed_forms_agree(spec in tabulated()) {
        let modes = spec.exact_domain().unwrap();
        let c = e1_binding(&modes, &spec, E1Form::Compact);
        let a = e1_binding(&modes, &spec, E1Form::E0MinusKinetic);
        prop_assert!((c - a).abs() <= 1e-12 * c.abs().max(1e-300));
        let eb = e_b(&modes, &spec);
        prop_assert!((eb - e_b_dispersion(&modes, &spec)).abs() <= 1e-12 * eb.abs().max(1e-300));
        let closed = e2_binding(&modes, &spec).value;
        let qp = e2_binding_qp_assembly(&modes, &spec).total;
        prop_assert!((closed - qp).abs() <= 1e-10 * closed.abs().max(1e-12));
    }

    #[test]
    fn enlarging_beyond_closure_is_inert(spec in tabulated()) {
        let exact = spec.exact_domain().unwrap();
        let wider = exact.union(&sum_closure(&exact));
        let a = e2_binding(&exact, &spec).value;
        let b = e2_binding(&wider, &spec).value;
        prop_assert!((a - b).abs() <= 1e-13 * a.abs().max(1.0));
    }

    #[test]
    fn operators_conserve_momentum(spec in tabulated(), n_max in 2u32..4) {
        let modes = spec.exact_domain().unwrap();
        let basis = ExcitationBasis::new(&modes, n_max, Sector::All).unwrap();
        let ops = FluctuationOps::new(&basis, &spec);
        for j in 1..=4 {
            let h = ops.h(j, Variant::Plain).unwrap();
            for (r, c, _) in h.matrix().triplets() {
                prop_assert_eq!(basis.basis().total_momentum(r), basis.basis().total_momentum(c));
            }
        }
    }

    #[test]
    fn nbody_hamiltonian_conserves_particles_and_momentum(spec in tabulated(), n in 2u32..5) {
        let modes = spec.support().unwrap();
        let basis = NBodyBasis::new(&modes, n, Sector::All).unwrap();
        let h = build_nbody_hamiltonian(&basis, 0.5, &spec).unwrap();
        for (r, c, _) in h.matrix().triplets() {
            prop_assert_eq!(basis.basis().particles(r), n);
            prop_assert_eq!(basis.basis().total_momentum(r), basis.basis().total_momentum(c));
        }
    }

    #[test]
    fn quadratic_fit_recovers_coefficients(b in prop::array::uniform3(-10.0..10.0f64)) {
        let x: Vec<f64> = [16.0, 24.0, 32.0, 48.0, 64.0].iter().map(|n: &f64| 1.0 / (n - 1.0)).collect();
        let y: Vec<f64> = x.iter().map(|x| b[0] + b[1] * x + b[2] * x * x).collect();
        let fit = fit_polynomial(&x, &y, 2).unwrap();
        for (f, t) in fit.coefficients.iter().zip(b) {
            prop_assert!((f - t).abs() < 1e-8 * t.abs().max(1.0));
        }
    }

    #[test]
    fn composition_counts(total in 1u32..8, parts in 1u32..5) {
        let got = compositions(total, parts, 1).len() as u64;
        let want = if total >= parts { binomial(total as u64 - 1, parts as u64 - 1) } else { 0 };
        prop_assert_eq!(got, want);
        prop_assert!(compositions(total, parts, 1).iter().all(|c| c.iter().sum::<u32>() == total));
    }

    #[test]
    fn mode_set_json_round_trip(cutoff in 6.5..20.0f64, dim in 1usize..3) {
        let m = enumerate_ball(dim, cutoff).unwrap();
        let back = ModeSet::from_json(&m.to_json()).unwrap();
        prop_assert_eq!(back.modes(), m.modes());
    }

    #[test]
    fn potential_json_round_trip(spec in tabulated(), g in 0.1..10.0f64, s in 0.5..50.0f64) {
        prop_assert_eq!(PotentialSpec::from_json(&spec.to_json()).unwrap(), spec);
        let gauss = PotentialSpec::gaussian(g, s).unwrap();
        prop_assert_eq!(PotentialSpec::from_json(&gauss.to_json()).unwrap(), gauss);
    }
}
