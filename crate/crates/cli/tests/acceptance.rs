//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! `ACCEPTANCE_ONLY=3,4` runs a subset.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use fastvol::asymptotics::{
    loss_probability_error, particle_spde_crossval, small_volvol_field_rate, small_volvol_vol_rate,
    strong_failure_study, weak_convergence_study, CrossvalSetup, LargeStudy, SmallStudy, XLevel,
};
use fastvol::ergodic::{estimate_stationary_moments, ErgodicConfig, StationaryMoments};
use fastvol::model::{CoefficientVector, InitialVolLaw, LevelFunction, ScalingRegime, VolFunction, VolFunctionSpec};
use fastvol::noise::NoiseBundle;
use fastvol::sde::{simulate_vol, VolScheme};
use fastvol::spde::{energy_residual, rayleigh_density, rayleigh_tail, solve_density, solve_survival, SpatialGrid, SpdeConfig};
use fastvol_cli::output::{RunManifest, MANIFEST};

/// Rayleigh(0.5)-averaged images survival at `T = 1`, `r = 0.05`, `h = 0.3`.
const IMAGES_SURVIVAL: f64 = 0.859_679_256_129_312_3;
const SMALL_EPS: [f64; 4] = [0.2, 0.1, 0.05, 0.025];
const LARGE_EPS: [f64; 4] = [0.5, 0.2, 0.1, 0.05];

type Outcome = (bool, String);

fn ou_funcs() -> VolFunctionSpec<f64> {
    VolFunctionSpec { g: VolFunction::ConstantOne, h: LevelFunction::Identity }
}

fn sci(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(" ")
}

fn combined(a: f64, b: f64) -> f64 {
    (a * a + b * b).sqrt()
}

fn spde_config(dx: f64, dt: f64, rho1: f64) -> SpdeConfig<f64> {
    SpdeConfig {
        grid: SpatialGrid::new(dx, 10.0).unwrap(),
        r: 0.05,
        rho1,
        dt,
        record_every: usize::MAX,
    }
}

fn max_residual(cfg: &SpdeConfig<f64>, h: &[f64], w: &[f64]) -> f64 {
    let u = solve_density(cfg, &rayleigh_density(&cfg.grid, 0.5), h, w).unwrap();
    energy_residual(&u, h, cfg.rho1, cfg.dt).unwrap().into_iter().fold(0.0, f64::max)
}

fn energy_identity() -> Outcome {
    let cfg = spde_config(0.02, 1e-4, 0.5);
    let n = 10_000;
    let b = NoiseBundle::sample(1, cfg.dt, n, 0.0, 1).unwrap();
    let constant = max_residual(&cfg, &vec![0.3; n], b.w0());
    let c = CoefficientVector::new(0.05, 0.5, 0.5, 2.0, 0.3, 0.5).unwrap();
    let vp = simulate_vol(&c, &VolFunction::ConstantOne, &ScalingRegime::Unscaled, &b, 0, VolScheme::ExactOu, 0.3).unwrap();
    let h: Vec<f64> = vp.values[..n].iter().map(|s| s.abs()).collect();
    let stochastic = max_residual(&cfg, &h, b.w0());
    (
        constant < 2e-2 && stochastic < 5e-2,
        format!("constant {constant:.3e} < 2e-2, OU {stochastic:.3e} < 5e-2"),
    )
}

fn images_oracle() -> Outcome {
    let cfg = spde_config(0.01, 1e-4, 0.0);
    let n = 10_000;
    let v = solve_survival(&cfg, &rayleigh_tail(&cfg.grid, 0.5), &vec![0.3; n], &vec![0.0; n]).unwrap();
    let err = (v.boundary[n] - IMAGES_SURVIVAL).abs();
    (err < 1e-3, format!("v(T,0) = {:.6}, oracle {IMAGES_SURVIVAL:.6}, |diff| {err:.2e} < 1e-3", v.boundary[n]))
}

fn ou_stationary_moments() -> Outcome {
    let c = CoefficientVector::new(0.05, 0.5, 0.0, 2.0, 0.3, 0.5).unwrap();
    let m = estimate_stationary_moments(&ErgodicConfig::new(c, ou_funcs(), 500.0), 0).unwrap();
    let s21 = (0.09_f64 + 0.25 / 4.0).sqrt();
    let e11 = (m.sigma11 / 0.3 - 1.0).abs();
    let e21 = (m.sigma21 / s21 - 1.0).abs();
    let cir = VolFunctionSpec { g: VolFunction::CirSqrt, h: LevelFunction::SqrtAbs };
    let mc = estimate_stationary_moments(&ErgodicConfig::new(c, cir, 500.0), 0).unwrap();
    let ec = (mc.sigma21 * mc.sigma21 / 0.3 - 1.0).abs();
    (
        e11 < 0.01 && e21 < 0.01 && ec < 0.02,
        format!("OU sigma11 {:.2}%, sigma21 {:.2}% (< 1%); CIR sigma21^2 {:.2}% (< 2%)", 100.0 * e11, 100.0 * e21, 100.0 * ec),
    )
}

fn pair_moment_bounds() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for rho2 in [0.0, 0.5, 0.999] {
        let c = CoefficientVector::new(0.05, 0.5, rho2, 2.0, 0.3, 0.5).unwrap();
        let m: StationaryMoments<f64> = estimate_stationary_moments(&ErgodicConfig::new(c, ou_funcs(), 500.0), 0).unwrap();
        let lo = m.sigma11 - 3.0 * combined(m.se_tilde, m.se11);
        let hi = m.sigma21 + 3.0 * combined(m.se_tilde, m.se21);
        ok &= m.sigma_tilde >= lo && m.sigma_tilde <= hi;
        let edge = if rho2 == 0.0 {
            (m.sigma_tilde - m.sigma11).abs() / combined(m.se_tilde, m.se11)
        } else if rho2 == 0.999 {
            (m.sigma_tilde - m.sigma21).abs() / combined(m.se_tilde, m.se21)
        } else {
            0.0
        };
        ok &= edge < 3.0;
        parts.push(format!("rho2 {rho2}: {:.4} <= {:.4} <= {:.4} (edge {edge:.2} se)", lo, m.sigma_tilde, hi));
    }
    (ok, parts.join("; "))
}

fn small_study() -> SmallStudy<f64> {
    SmallStudy {
        coeffs: CoefficientVector::new(0.05, 0.5, 0.5, 2.0, 0.3, 0.5).unwrap(),
        funcs: ou_funcs(),
        scheme: VolScheme::ExactOu,
        initial_vol: InitialVolLaw::Stationary,
        rho3: 0.0,
        beta: 0.5,
        dx: 0.05,
        x_max: 10.0,
    }
}

fn vol_rate() -> Outcome {
    let r = small_volvol_vol_rate(&small_study(), 2.0, &SMALL_EPS, 1.0, 10_000, 7).unwrap();
    let slope = r.slope().unwrap_or(f64::NAN);
    ((0.8..=1.2).contains(&slope), format!("slope {slope:.3} in [0.8, 1.2], errors {}", sci(&r.errors)))
}

fn field_rate() -> Outcome {
    let (h1, _) = small_volvol_field_rate(&small_study(), &SMALL_EPS, 1.0, 200, 7).unwrap();
    let slope = h1.slope().unwrap_or(f64::NAN);
    let dec = h1.strictly_decreasing();
    (slope >= 0.4 && dec, format!("H1 slope {slope:.3} >= 0.4, strictly decreasing {dec}, errors {:.4?}", h1.errors))
}

fn loss_probability_rate() -> Outcome {
    let reps = loss_probability_error(&small_study(), &[XLevel::LimitMedianAtHalfHorizon], &SMALL_EPS, 1.0, 200, 7).unwrap();
    let r = &reps[0];
    let slope = r.rate.slope().unwrap_or(f64::NAN);
    let dec = r.rate.strictly_decreasing();
    (
        slope >= 0.3 && dec && !r.degenerate,
        format!(
            "x {:.4}: slope {slope:.3} >= 0.3, strictly decreasing {dec}, density bounded {}, E {:.4?}",
            r.x, r.density_bounded, r.rate.errors
        ),
    )
}

fn large_study(rho2: f64, h: LevelFunction<f64>) -> (LargeStudy<f64>, StationaryMoments<f64>) {
    let c = CoefficientVector::new(0.05, 0.9, rho2, 1.0, 0.0, 1.5).unwrap();
    let funcs = VolFunctionSpec { g: VolFunction::ConstantOne, h };
    let m = estimate_stationary_moments(&ErgodicConfig::new(c, funcs, 500.0), 11).unwrap();
    let study = LargeStudy {
        coeffs: c,
        funcs,
        scheme: VolScheme::ExactOu,
        initial_vol: InitialVolLaw::Stationary,
        rho3: 0.0,
        beta: 0.5,
        limit_dt: 1e-3,
        n_bootstrap: 200,
        dx: 0.05,
        x_max: 10.0,
    };
    (study, m)
}

fn weak_convergence() -> Outcome {
    let (study, m) = large_study(0.5, LevelFunction::BoundedSigmoid { h_min: 0.1, h_max: 0.5 });
    let r = weak_convergence_study(&study, &m, &LARGE_EPS, 2000, 500, 1.0, 5).unwrap();
    let ks: Vec<f64> = r.entries.iter().map(|e| e.statistic).collect();
    (
        r.passed(),
        format!(
            "KS {ks:.4?}, nonincreasing within bands {}, final {:.4} < 2 x floor {:.4}",
            r.nonincreasing,
            ks[ks.len() - 1],
            r.floor.statistic
        ),
    )
}

fn strong_plateau() -> Outcome {
    let h = LevelFunction::BoundedSigmoid { h_min: 0.05, h_max: 1.0 };
    let mut ratios = Vec::new();
    for rho2 in [0.8, 0.0] {
        let (study, m) = large_study(rho2, h);
        let r = strong_failure_study(&study, &m, &LARGE_EPS, 400, 2000, 1.0, 5).unwrap();
        ratios.push(r.final_ratio);
    }
    (
        ratios[0] > 5.0 && ratios[1] <= 2.0,
        format!("distance / floor at eps 0.05: rho2 0.8 {:.2} > 5, rho2 0 {:.2} <= 2", ratios[0], ratios[1]),
    )
}

fn particle_spde_agreement() -> Outcome {
    let setup = CrossvalSetup {
        r: 0.05,
        rho1: 0.5,
        sigma: 0.3,
        beta: 0.5,
        t: 1.0,
        dt: 1e-3,
        dx: 0.02,
        x_max: 10.0,
        n_inner_grid: vec![100, 1000, 10_000],
        n_outer: 100,
        abs_slack: 2e-3,
    };
    let r = particle_spde_crossval(&setup, 3).unwrap();
    let slope: f64 = r.fit.slope;
    (
        r.all_within && (slope + 0.5).abs() <= 0.15,
        format!("all within tolerance {}, slope {slope:.3} in -0.5 +- 0.15, rms {}", r.all_within, sci(&r.rms)),
    )
}

const DETERMINISM_CONFIG: &str = r#"
schema = 1
[model]
h = "bounded_sigmoid"
[coeffs]
r = 0.05
rho1 = 0.5
rho2 = 0.5
kappa = 2.0
theta = 0.3
xi = 0.5
[market]
T = 0.5
[numerics]
dx = 0.05
dt = 0.005
n_outer = 20
n_inner = 50
eps_grid = [0.2, 0.1, 0.05]
T = 50.0
replicas = 8
n_paths = 200
n_bootstrap = 50
limit_dt = 0.005
"#;

/// CSV bodies below the two preamble lines.
fn csv_bodies(dir: &Path) -> Vec<(String, String)> {
    let m = RunManifest::read(&dir.join(MANIFEST)).unwrap();
    m.outputs
        .iter()
        .filter(|e| e.file.ends_with(".csv"))
        .map(|e| {
            let text = fs::read_to_string(dir.join(&e.file)).unwrap();
            let body: String = text.lines().skip_while(|l| l.starts_with('#')).collect::<Vec<_>>().join("\n");
            (e.file.clone(), body)
        })
        .collect()
}

fn determinism() -> Outcome {
    let tmp = tempfile::TempDir::new().unwrap();
    let cfg = tmp.path().join("config.toml");
    fs::write(&cfg, DETERMINISM_CONFIG).unwrap();
    let commands: [&[&str]; 5] = [
        &["spde", "--dx", "0.02", "--dt", "1e-4", "--rho1", "0.5", "--h", "0.3", "--form", "density"],
        &["stationary"],
        &["portfolio"],
        &["rates-small"],
        &["weak-large", "--plateau"],
    ];
    let mut compared = 0;
    for args in commands {
        let mut bodies = Vec::new();
        for (k, threads) in ["1", "2"].iter().enumerate() {
            let out = tmp.path().join(format!("run{k}"));
            let status = Command::new(env!("CARGO_BIN_EXE_fastvol"))
                .args(args)
                .args(["--config", cfg.to_str().unwrap(), "--seed", "17", "--threads", threads])
                .args(["--out", out.to_str().unwrap()])
                .output()
                .unwrap();
            if !matches!(status.status.code(), Some(0 | 3)) {
                return (false, format!("{} failed: {}", args[0], String::from_utf8_lossy(&status.stderr)));
            }
            bodies.push(csv_bodies(&out.join(args[0])));
        }
        if bodies[0] != bodies[1] {
            return (false, format!("{} outputs differ between runs", args[0]));
        }
        compared += bodies[0].len();
    }
    (true, format!("{compared} CSV bodies identical across two runs (1 and 2 threads)"))
}

fn main() {
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("energy identity", energy_identity),
        ("images-formula oracle", images_oracle),
        ("OU and CIR stationary moments", ou_stationary_moments),
        ("pair-moment bounds", pair_moment_bounds),
        ("small vol-of-vol volatility rate", vol_rate),
        ("small vol-of-vol field rate", field_rate),
        ("loss-probability error", loss_probability_rate),
        ("large vol-of-vol weak convergence", weak_convergence),
        ("strong-distance plateau", strong_plateau),
        ("particle vs SPDE losses", particle_spde_agreement),
        ("determinism", determinism),
    ];
    let mut failed = Vec::new();
    for (k, (name, run)) in criteria.iter().enumerate() {
        let id = k + 1;
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let t0 = Instant::now();
        let (pass, detail) = run();
        println!(
            "criterion {id:>2} {name}: {} ({detail}) [{:.1}s]",
            if pass { "PASS" } else { "FAIL" },
            t0.elapsed().as_secs_f64()
        );
        if !pass {
            failed.push(id);
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
