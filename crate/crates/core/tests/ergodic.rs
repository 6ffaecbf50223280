use fastvol::ergodic::{derive_limit_correlations, estimate_stationary_moments, estimate_time_average, ErgodicConfig};
use fastvol::model::{CoefficientVector, LevelFunction, VolFunction, VolFunctionSpec};
use proptest::prelude::*;

fn ou(rho2: f64) -> ErgodicConfig<f64> {
    let c = CoefficientVector::new(0.05, 0.5, rho2, 2.0, 0.3, 0.5).unwrap();
    ErgodicConfig::new(c, VolFunctionSpec { g: VolFunction::ConstantOne, h: LevelFunction::Identity }, 500.0)
}

fn combined(a: f64, b: f64) -> f64 {
    (a * a + b * b).sqrt()
}

#[test]
fn ou_first_and_second_moments() {
    let cfg = ou(0.0);
    let m1 = estimate_time_average(&cfg, 1, |a, _| a).unwrap();
    assert!((m1.value / 0.3 - 1.0).abs() < 0.01);
    let m2 = estimate_time_average(&cfg, 2, |a, _| a * a).unwrap();
    assert!((m2.value / 0.1525 - 1.0).abs() < 0.01);
    assert_eq!(m2.n_batches, 256 * 50);
}

#[test]
fn cir_second_moment_of_sqrt_level() {
    let c = CoefficientVector::<f64>::new(0.05, 0.5, 0.0, 2.0, 0.3, 0.5).unwrap();
    let cfg = ErgodicConfig::new(c, VolFunctionSpec { g: VolFunction::CirSqrt, h: LevelFunction::SqrtAbs }, 500.0);
    let m = estimate_stationary_moments(&cfg, 3).unwrap();
    assert!((m.sigma21 * m.sigma21 / 0.3 - 1.0).abs() < 0.02);
}

#[test]
fn limit_correlation_of_independent_ou_pair() {
    let m = estimate_stationary_moments(&ou(0.0), 4).unwrap();
    let lc = derive_limit_correlations(&m, 0.5).unwrap();
    let exact = 0.5 * 0.3 / 0.390_512_483_795_332_7;
    assert!((lc.rho_tilde - exact).abs() < 3.0 * lc.se_rho_tilde.max(1e-4));
    let zero = derive_limit_correlations(&m, 0.0).unwrap();
    assert_eq!((zero.rho_tilde, zero.rho_prime), (0.0, 0.0));
}

#[test]
fn doubling_horizon_shrinks_error_by_root_two() {
    let mut cfg = ou(0.5);
    cfg.replicas = 64;
    cfg.horizon = 200.0;
    let short = estimate_time_average(&cfg, 5, |a, _| a).unwrap();
    cfg.horizon = 400.0;
    let long = estimate_time_average(&cfg, 5, |a, _| a).unwrap();
    let ratio = short.std_error / long.std_error;
    let target = 2.0_f64.sqrt();
    assert!(ratio > target / 1.5 && ratio < target * 1.5, "ratio {ratio}");
}

#[test]
fn same_seed_same_moments() {
    let mut cfg = ou(0.5);
    cfg.replicas = 8;
    cfg.horizon = 50.0;
    let a = estimate_stationary_moments(&cfg, 6).unwrap();
    let b = estimate_stationary_moments(&cfg, 6).unwrap();
    assert_eq!(a, b);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn pair_moment_never_exceeds_second_moment(seed in any::<u64>(), rho2 in 0.0..0.999_f64) {
        let mut cfg = ou(rho2);
        cfg.replicas = 4;
        cfg.horizon = 60.0;
        let m = estimate_stationary_moments(&cfg, seed).unwrap();
        prop_assert!(m.sigma_tilde <= m.sigma21 * (1.0 + 1e-12));
    }

    #[test]
    fn pair_moment_lies_between_first_and_second(seed in any::<u64>(), rho2 in 0.0..0.999_f64) {
        let mut cfg = ou(rho2);
        cfg.replicas = 32;
        cfg.horizon = 100.0;
        let m = estimate_stationary_moments(&cfg, seed).unwrap();
        prop_assert!(m.sigma_tilde >= m.sigma11 - 3.0 * combined(m.se_tilde, m.se11));
        prop_assert!(m.sigma_tilde <= m.sigma21 + 3.0 * combined(m.se_tilde, m.se21));
    }
}
