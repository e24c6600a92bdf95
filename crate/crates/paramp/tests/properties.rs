//! Randomised invariants of the state algebra, generators and pipelines.

use std::f64::consts::PI;

use paramp::collapse::{
    detector_counts, evolve_amplitudes, fock_overlaps, number_collapse_visibility, CoherentPoint,
};
use paramp::dynamics::{
    build_hamiltonian, evolve_lindblad_report, evolve_unitary, jump_operators, BathSpec,
    ComponentSpec,
};
use paramp::fock::{Arm, HilbertLayout, Mode, QuantumState};
use paramp::interferometer::{
    correlations_before_h2, interference_pattern, run_full, ExperimentConfig,
};
use paramp::C64;
use proptest::prelude::*;

const NS: f64 = 1e-9;

fn arm(n: usize) -> HilbertLayout {
    HilbertLayout::arm(Arm::Up, n).unwrap()
}

fn max_diff(a: &QuantumState, b: &QuantumState) -> f64 {
    (a.amplitudes().unwrap() - b.amplitudes().unwrap()).camax()
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 24,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn generators_are_hermitian(k in 0.0f64..2.0, dt in -PI..PI, phi in 0.0f64..PI) {
        let four = HilbertLayout::interferometer(4).unwrap();
        for spec in [
            ComponentSpec::hybrid(NS),
            ComponentSpec::phase_shifter(dt, NS),
            ComponentSpec::twpa(Arm::Low, k, NS),
        ] {
            let h = build_hamiltonian(&spec, &four).unwrap();
            prop_assert!(h.hermitian_defect() < 1e-12);
        }
        let single = HilbertLayout::new(vec![Mode::UP_S], 8).unwrap();
        let h = build_hamiltonian(&ComponentSpec::degenerate(Arm::Up, k, phi, NS), &single).unwrap();
        prop_assert!(h.hermitian_defect() < 1e-12);
    }

    #[test]
    fn twpa_conserves_norm_and_charge(k in 0.0f64..0.8, n in 0usize..3) {
        let l = arm(40);
        let h = build_hamiltonian(&ComponentSpec::twpa(Arm::Up, k, NS), &l).unwrap();
        let out = evolve_unitary(&QuantumState::fock(&l, &[n, 0]).unwrap(), &h, NS).unwrap();
        prop_assert!((out.trace() - 1.0).abs() < 1e-10);
        prop_assert!(out.truncation_tail() < 1e-6);
        for (occ, p) in out.number_distribution().entries() {
            if p > 1e-14 {
                prop_assert_eq!(occ[0], occ[1] + n);
            }
        }
    }

    #[test]
    fn generator_additivity(k in 0.0f64..0.8, eta in 0.0f64..1.0, n in 0usize..2) {
        let l = arm(30);
        let h = |g: f64| build_hamiltonian(&ComponentSpec::twpa(Arm::Up, g, NS), &l).unwrap();
        let psi = QuantumState::fock(&l, &[n, 0]).unwrap();
        let whole = evolve_unitary(&psi, &h(k), NS).unwrap();
        let split = evolve_unitary(
            &evolve_unitary(&psi, &h(eta * k), NS).unwrap(),
            &h((1.0 - eta) * k),
            NS,
        )
        .unwrap();
        prop_assert!(max_diff(&whole, &split) < 1e-9);
    }

    #[test]
    fn lindblad_keeps_trace_and_positivity(
        gamma in 1e6f64..1e9,
        temp in 0.0f64..0.2,
        k in 0.0f64..0.4,
    ) {
        let l = arm(6);
        let bath = BathSpec::new(gamma, temp, 2.0 * PI * 5e9).unwrap();
        let h = build_hamiltonian(&ComponentSpec::twpa(Arm::Up, k, 5.0 * NS), &l).unwrap();
        let psi = QuantumState::fock(&l, &[1, 0]).unwrap();
        let (rho, rep) =
            evolve_lindblad_report(&psi, &h, &jump_operators(&l, &bath), 5.0 * NS, 1e-10).unwrap();
        prop_assert!((rho.trace() - 1.0).abs() < 1e-10, "trace {}", rho.trace());
        prop_assert!(rep.trace_drift < 1e-10);
        prop_assert!(rep.min_eigenvalue > -1e-8);
        let dm = rho.density_matrix();
        let defect = (&dm - dm.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        prop_assert!(defect < 1e-12);
    }

    #[test]
    fn coherent_overlaps_are_normalised(re in -3.0f64..3.0, im in -3.0f64..3.0) {
        let alpha = C64::new(re, im);
        let sum: f64 = fock_overlaps(alpha, 120).iter().map(|c| c.norm_sqr()).sum();
        prop_assert!((sum - 1.0).abs() < 1e-10);
    }

    #[test]
    fn coherent_evolution_conserves_charge(
        z in prop::array::uniform8(-2.0f64..2.0),
        k in 0.0f64..2.0,
        eta in 0.0f64..1.0,
    ) {
        let p = CoherentPoint::new(
            C64::new(z[0], z[1]),
            C64::new(z[2], z[3]),
            C64::new(z[4], z[5]),
            C64::new(z[6], z[7]),
        )
        .unwrap();
        let q = evolve_amplitudes(&p, k, eta);
        let charge = |p: &CoherentPoint| {
            let a = p.as_array();
            a[0].norm_sqr() - a[1].norm_sqr() + a[2].norm_sqr() - a[3].norm_sqr()
        };
        prop_assert!((charge(&p) - charge(&q)).abs() < 1e-8 * (1.0 + charge(&p).abs()));
        // the hybrid preserves total intensity per species
        let d = detector_counts(&q);
        let a = q.as_array();
        prop_assert!((d.total_signal() - a[0].norm_sqr() - a[2].norm_sqr()).abs() < 1e-9 * (1.0 + d.total_signal()));
        prop_assert!((d.total_idler() - a[1].norm_sqr() - a[3].norm_sqr()).abs() < 1e-9 * (1.0 + d.total_idler()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 6,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn pipeline_invariants(k in 0.05f64..0.6, dt in 0.0f64..(2.0 * PI)) {
        let cfg = ExperimentConfig::lossless(k);
        let (state, r) = run_full(&cfg.clone().with_delta_theta(dt)).unwrap();
        prop_assert!((state.trace() - 1.0).abs() < 1e-9);
        prop_assert!(r.tail < 1e-6);

        // hybrids are passive: totals do not depend on the phase shift
        let pts = interference_pattern(&cfg, &[0.0, dt]).unwrap();
        for (a, b) in [
            (pts[0].means.total_signal(), pts[1].means.total_signal()),
            (pts[0].means.total_idler(), pts[1].means.total_idler()),
        ] {
            prop_assert!((a - b).abs() < 1e-9);
        }

        // one input photon: every arm holds n_i in {n_s, n_s - 1}
        let c = correlations_before_h2(&cfg).unwrap();
        for (occ, p) in c.upper_pair.entries() {
            if p > 1e-14 {
                prop_assert!(occ[1] == occ[0] || occ[1] + 1 == occ[0], "{occ:?}");
            }
        }

        // equal arms at zero phase: joint signal table symmetric under arm exchange
        for (occ, p) in c.signal_arms.entries() {
            prop_assert!((p - c.signal_arms.get(&[occ[1], occ[0]])).abs() < 1e-12);
        }
    }

    #[test]
    fn number_collapse_has_no_visibility(k in 0.0f64..1.2, eta in 0.0f64..=1.0) {
        let (vs, vi) = number_collapse_visibility(&ExperimentConfig::lossless(k), eta).unwrap();
        prop_assert!(vs.value().unwrap().abs() < 1e-9);
        prop_assert!(vi.value().unwrap().abs() < 1e-9);
    }
}
