use fastvol::asymptotics::{
    fit_log_log, ks_statistic, ks_two_sample, loss_probability_error, small_volvol_field_rate, small_volvol_vol_rate,
    weak_convergence_study, Coupling, LargeStudy, SmallStudy, XLevel,
};
use fastvol::ergodic::StationaryMoments;
use fastvol::model::{CoefficientVector, InitialVolLaw, LevelFunction, VolFunction, VolFunctionSpec};
use fastvol::sde::VolScheme;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EPS: [f64; 4] = [0.2, 0.1, 0.05, 0.025];

fn small(xi: f64, initial_vol: InitialVolLaw<f64>) -> SmallStudy<f64> {
    SmallStudy {
        coeffs: CoefficientVector::new(0.05, 0.5, 0.5, 2.0, 0.3, xi).unwrap(),
        funcs: VolFunctionSpec { g: VolFunction::ConstantOne, h: LevelFunction::Identity },
        scheme: VolScheme::Euler,
        initial_vol,
        rho3: 0.0,
        beta: 0.5,
        dx: 0.1,
        x_max: 10.0,
    }
}

fn large(xi: f64, rho3: f64) -> LargeStudy<f64> {
    LargeStudy {
        coeffs: CoefficientVector::new(0.05, 0.5, 0.5, 1.0, 0.0, xi).unwrap(),
        funcs: VolFunctionSpec {
            g: VolFunction::ConstantOne,
            h: LevelFunction::BoundedSigmoid { h_min: 0.1, h_max: 0.5 },
        },
        scheme: VolScheme::Euler,
        initial_vol: InitialVolLaw::Fixed(0.0),
        rho3,
        beta: 0.5,
        limit_dt: 1e-3,
        n_bootstrap: 200,
        dx: 0.05,
        x_max: 10.0,
    }
}

#[test]
fn fitter_examples() {
    let eps = [0.1, 0.05, 0.025];
    let f = fit_log_log(&eps, &eps.map(f64::sqrt)).unwrap();
    assert!((f.slope - 0.5).abs() < 1e-12 && (f.r2 - 1.0).abs() < 1e-12);
    let f = fit_log_log(&eps, &[0.3; 3]).unwrap();
    assert!(f.slope.abs() < 1e-12);
    let f = fit_log_log(&eps, &eps.map(|e| 2.0 * e)).unwrap();
    assert!((f.slope - 1.0).abs() < 1e-12 && (f.intercept - 2.0_f64.ln()).abs() < 1e-12);
    assert!(fit_log_log(&eps, &[0.1, 0.0, 0.01]).is_err());
    assert!(fit_log_log(&eps[..2], &[0.1, 0.05]).is_err());
}

#[test]
fn ks_examples() {
    let a = [0.1, 0.2, 0.45];
    let b = [0.55, 0.7, 0.9, 0.95];
    assert_eq!(ks_statistic(&a, &a).unwrap(), 0.0);
    assert_eq!(ks_statistic(&a, &b).unwrap(), 1.0);
    assert!(ks_statistic::<f64>(&a, &[]).is_err());
}

#[test]
fn same_generator_split_is_below_null_band() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let xs: Vec<f64> = (0..20_000).map(|_| rng.random()).collect();
    let e = ks_two_sample(&xs[..10_000], &xs[10_000..], 200, 8).unwrap();
    assert!(e.statistic < e.null_q99);
}

#[test]
fn frozen_vol_error_is_the_relaxation_integral() {
    // p = 2, xi = 0: int_0^t (s0 - theta)^2 exp(-2 kappa s / eps) ds
    let s0 = 0.5;
    let study = small(0.0, InitialVolLaw::Fixed(s0));
    let t = 1.0;
    let r = small_volvol_vol_rate(&study, 2.0, &EPS, t, 4, 1).unwrap();
    for (&e, &err) in EPS.iter().zip(&r.errors) {
        let exact = (s0 - 0.3_f64).powi(2) * e / 4.0 * (1.0 - (-4.0 * t / e).exp());
        assert!((err / exact - 1.0).abs() < 0.03, "eps {e}: {err} vs {exact}");
    }
    assert!((r.slope().unwrap() - 1.0).abs() < 0.05);
    assert_eq!(r.coupling, Coupling::CommonNoise);
    assert!(r.monotone && r.strictly_decreasing());
}

#[test]
fn vol_rate_is_reproducible() {
    let study = small(0.5, InitialVolLaw::Stationary);
    let a = small_volvol_vol_rate(&study, 2.0, &EPS, 1.0, 64, 3).unwrap();
    let b = small_volvol_vol_rate(&study, 2.0, &EPS, 1.0, 64, 3).unwrap();
    assert_eq!(a, b);
}

#[test]
fn frozen_vol_at_mean_has_no_field_error() {
    let study = small(0.0, InitialVolLaw::Fixed(0.3));
    let (h1, l2) = small_volvol_field_rate(&study, &EPS, 0.5, 4, 2).unwrap();
    assert!(h1.errors.iter().chain(&l2.errors).all(|&e| e.abs() < 1e-12));
    assert!(h1.fit.is_none());
    let reports = loss_probability_error(&study, &[XLevel::LimitMedianAtHalfHorizon], &EPS, 0.5, 8, 2).unwrap();
    assert!(reports[0].rate.errors.iter().all(|&e| e == 0.0));
}

#[test]
fn h1_error_dominates_l2_error() {
    let study = small(0.5, InitialVolLaw::Stationary);
    let (h1, l2) = small_volvol_field_rate(&study, &[0.2, 0.1, 0.05], 0.5, 8, 4).unwrap();
    for (a, b) in h1.errors.iter().zip(&l2.errors) {
        assert!(a >= b);
    }
}

#[test]
fn zero_survival_level_is_degenerate() {
    let study = small(0.5, InitialVolLaw::Stationary);
    let reports = loss_probability_error(&study, &[XLevel::Fixed(0.0)], &[0.2, 0.1, 0.05], 0.5, 8, 5).unwrap();
    assert!(reports[0].degenerate);
    assert!(reports[0].rate.errors.iter().all(|&e| e == 0.0));
}

#[test]
fn weak_study_refuses_correlated_market_noise() {
    let m = StationaryMoments::degenerate(0.3);
    assert!(weak_convergence_study(&large(1.0, 0.5), &m, &[0.5, 0.2], 10, 10, 1.0, 0).is_err());
    let mut unbounded = large(1.0, 0.0);
    unbounded.funcs.h = LevelFunction::Identity;
    assert!(weak_convergence_study(&unbounded, &m, &[0.5, 0.2], 10, 10, 1.0, 0).is_err());
}

#[test]
fn weak_study_with_frozen_vol_sits_at_its_floor() {
    let study = large(0.0, 0.0);
    let h_theta = study.funcs.h.eval(0.0);
    let report = weak_convergence_study(&study, &StationaryMoments::degenerate(h_theta), &[0.5, 0.2, 0.1], 300, 50, 1.0, 6)
        .unwrap();
    for e in &report.entries {
        assert!(e.statistic < e.null_q99, "{e:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ks_is_a_symmetric_distance(a in prop::collection::vec(-5.0..5.0_f64, 1..60), b in prop::collection::vec(-5.0..5.0_f64, 1..60)) {
        let ab = ks_statistic(&a, &b).unwrap();
        prop_assert_eq!(ab, ks_statistic(&b, &a).unwrap());
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(ks_statistic(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn fitter_recovers_power_laws(order in 0.1..2.0_f64, scale in 0.01..10.0_f64) {
        let eps: [f64; 4] = EPS;
        let f = fit_log_log(&eps, &eps.map(|e| scale * e.powf(order))).unwrap();
        prop_assert!((f.slope - order).abs() < 1e-9);
        prop_assert!((f.intercept - scale.ln()).abs() < 1e-9);
    }
}
