//! Cross-module agreement between the numerical pipelines and closed forms.

use approx::assert_abs_diff_eq;
use paramp::analytic::{analytic_output_state, lossless_means, lossless_visibility};
use paramp::collapse::{
    coherent_collapse_means_quadrature, evaluate, number_collapse, CollapseSpec, Estimator,
    Phenomenology, PositionPdf,
};
use paramp::fock::Mode;
use paramp::interferometer::{run, run_full, Bath, Durations, ExperimentConfig, Method};
use paramp::lossmodel::{default_kappa_grid, fit_from_reduced, Channel};
use paramp::ErrorCategory;

#[test]
fn analytic_output_state_matches_full_pipeline() {
    for (k, kp, dt) in [
        (0.5, 0.5, 0.0),
        (0.5, 0.5, 0.7),
        (0.3, 0.6, 0.0),
        (0.3, 0.6, 1.9),
    ] {
        let mut cfg = ExperimentConfig::lossless(k).with_delta_theta(dt);
        cfg.kappa_low = kp;
        let (_, r) = run_full(&cfg).unwrap();
        let e = analytic_output_state(k, kp, dt, 30).unwrap();
        assert_abs_diff_eq!(e.mean(Mode::UP_S).unwrap(), r.means.n_as, epsilon = 1e-7);
        assert_abs_diff_eq!(e.mean(Mode::UP_I).unwrap(), r.means.n_ai, epsilon = 1e-7);
        assert_abs_diff_eq!(e.mean(Mode::LOW_S).unwrap(), r.means.n_bs, epsilon = 1e-7);
        assert_abs_diff_eq!(e.mean(Mode::LOW_I).unwrap(), r.means.n_bi, epsilon = 1e-7);
    }
}

#[test]
fn reduced_and_full_agree_without_loss() {
    for k in [0.2, 0.7] {
        let (_, full) = run_full(&ExperimentConfig::lossless(k)).unwrap();
        let red = run(&ExperimentConfig::lossless(k).with_method(Method::Reduced)).unwrap();
        let exact = lossless_means(k);
        for (a, b, c) in [
            (full.means.n_as, red.means.n_as, exact.n_as),
            (full.means.n_ai, red.means.n_ai, exact.n_ai),
            (full.means.n_bs, red.means.n_bs, exact.n_bs),
            (full.means.n_bi, red.means.n_bi, exact.n_bi),
        ] {
            assert_abs_diff_eq!(a, c, epsilon = 1e-8);
            assert_abs_diff_eq!(b, c, epsilon = 1e-8);
        }
    }
}

#[test]
fn reduced_tracks_full_lindblad_with_weak_loss() {
    let bath = Bath {
        gamma: 1e7,
        temperature: 0.05,
    };
    let mut cfg = ExperimentConfig::lossy(0.2, bath, Durations::default(), Method::FullLindblad)
        .with_cutoff(6);
    cfg.tail_limit = 1.0;
    let (_, full) = run_full(&cfg).unwrap();
    let red = run(&cfg.with_method(Method::Reduced)).unwrap();
    assert_abs_diff_eq!(
        full.v_s.value().unwrap(),
        red.v_s.value().unwrap(),
        epsilon = 1e-5
    );
    assert_abs_diff_eq!(
        full.v_i.value().unwrap(),
        red.v_i.value().unwrap(),
        epsilon = 1e-5
    );
}

#[test]
fn loss_lowers_visibility_and_fit_is_positive() {
    let bath = Bath {
        gamma: 1e8,
        temperature: 0.05,
    };
    let cfg = ExperimentConfig::lossy(0.0, bath, Durations::default(), Method::Reduced);
    let (fit, runs) = fit_from_reduced(&cfg, &default_kappa_grid()).unwrap();
    assert!(fit.accepted());
    for ch in [Channel::As, Channel::Ai, Channel::Bs, Channel::Bi] {
        assert!(fit.f(ch) > 0.0 && fit.f(ch) < 1.0, "{ch:?}: {}", fit.f(ch));
    }
    for (k, r) in default_kappa_grid().into_iter().zip(&runs) {
        let (vs, _) = lossless_visibility(k);
        assert!(r.v_s.value().unwrap() < vs.value().unwrap());
    }
}

#[test]
fn number_collapse_removes_interference() {
    let k = 0.6;
    let exact = lossless_means(k);
    for eta in [0.0, 0.4, 1.0] {
        let n = number_collapse(&ExperimentConfig::lossless(k), eta).unwrap();
        assert!(n.v_s.value().unwrap().abs() < 1e-9);
        assert!(n.v_i.value().unwrap().abs() < 1e-9);
        assert!((n.born_mass - 1.0).abs() < 1e-9);
    }
    // collapse before any gain removes only the interference term
    let start = number_collapse(&ExperimentConfig::lossless(k), 0.0).unwrap();
    assert_abs_diff_eq!(
        start.means.total_signal(),
        exact.total_signal(),
        epsilon = 1e-9
    );
    assert_abs_diff_eq!(
        start.means.total_idler(),
        exact.total_idler(),
        epsilon = 1e-9
    );
}

#[test]
fn coherent_collapse_interpolates_between_limits() {
    let k = 1.5;
    let mut last = f64::INFINITY;
    for eta in [0.0, 0.5, 1.0] {
        let q = coherent_collapse_means_quadrature(k, eta, 1e-6).unwrap();
        assert!(q.v_s.value().unwrap() > 0.0);
        assert_abs_diff_eq!(q.normalization, 1.0, epsilon = 1e-6);
        last = last.min(q.means.total_signal());
    }
    assert!(last > lossless_means(k).total_signal());
}

#[test]
fn collapse_spec_dispatch() {
    let q = evaluate(&CollapseSpec::new(Phenomenology::Coherent, 1.0), 0.8).unwrap();
    assert_abs_diff_eq!(q.v_s.value().unwrap(), 1.0 / 3.0, epsilon = 1e-6);
    assert!(q.stderr.is_none());

    let mut mc = CollapseSpec::new(Phenomenology::Coherent, 1.0);
    mc.estimator = Estimator::MonteCarlo;
    mc.samples = 20_000;
    mc.seed = 5;
    let m = evaluate(&mc, 0.8).unwrap();
    let se = m.v_s_se.unwrap();
    assert!(
        (m.v_s.value().unwrap() - 1.0 / 3.0).abs() < 4.0 * se,
        "{m:?}"
    );

    let mut mixed = CollapseSpec::new(Phenomenology::Number, 0.0);
    mixed.pdf = Some(PositionPdf::uniform(0.0));
    let none = evaluate(&mixed, 0.8).unwrap();
    let (vs, _) = lossless_visibility(0.8);
    assert_abs_diff_eq!(
        none.v_s.value().unwrap(),
        vs.value().unwrap(),
        epsilon = 1e-12
    );

    let mut bad = CollapseSpec::new(Phenomenology::Coherent, 1.5);
    bad.tol = 1e-6;
    let err = evaluate(&bad, 0.8).unwrap_err();
    assert_eq!(err.category(), ErrorCategory::Config);
}
