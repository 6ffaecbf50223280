//! Subcommand bodies. Each one reads its settings, writes its CSVs into the
//! run directory and adds rows to the summary block.

use std::path::Path;

use fastvol::asymptotics::{
    loss_probability_error, particle_spde_crossval, small_volvol_field_rate, small_volvol_vol_rate,
    strong_failure_study, weak_convergence_study, CrossvalSetup, LargeStudy, SmallStudy,
};
use fastvol::ergodic::{derive_limit_correlations, estimate_stationary_moments, ErgodicConfig};
use fastvol::model::{
    check_feller, check_drift_condition, check_pairwise_cir, default_probe_grid, ConditionReport, InitialVolLaw, LevelFunction, ScalingRegime,
};
use fastvol::noise::{sub_seed, NoiseBundle};
use fastvol::sde::{
    draw_initial_state, loss_at_step, portfolio_default_steps, simulate_asset, simulate_vol, PortfolioModel,
};
use fastvol::spde::{
    energy_residual, loss_from_field, rayleigh_density, rayleigh_tail, solve_density, solve_survival, SpatialGrid,
    SpdeConfig,
};
use fastvol::{mean, standard_error, Moments64, RateReport64};
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::output::{num, sha256_hex, Run, RunManifest, SummaryRow, MANIFEST};

/// Standard normal 97.5% quantile.
const Z975: f64 = 1.959_963_984_540_054;

fn steps_exact(horizon: f64, dt: f64, what: &str) -> Result<usize, CliError> {
    let n = (horizon / dt).round();
    if !(n >= 1.0) || (n * dt - horizon).abs() > 1e-9 * horizon.max(1.0) {
        return Err(CliError::Validation(vec![format!(
            "{what}: horizon {horizon} is not a whole number of steps of {dt}"
        )]));
    }
    Ok(n as usize)
}

fn portfolio_model(cfg: &ExperimentConfig) -> PortfolioModel<f64> {
    PortfolioModel {
        coeffs: cfg.coeffs,
        funcs: cfg.funcs,
        regime: cfg.regime,
        scheme: cfg.scheme,
        initial_vol: cfg.market.initial_vol,
        beta: cfg.market.beta,
    }
}

/// Records the initial volatility law, which the model leaves open.
fn note_initial_vol(run: &mut Run, study: &str, cfg: &ExperimentConfig) {
    let law = match cfg.market.initial_vol {
        InitialVolLaw::Stationary => "stationary".to_string(),
        InitialVolLaw::Fixed(x) => num(x),
    };
    run.summarize(SummaryRow::info(study, "initial_vol", law.as_str()));
}

fn ergodic_config(cfg: &ExperimentConfig) -> ErgodicConfig<f64> {
    let n = &cfg.numerics;
    let mut ec = ErgodicConfig::new(cfg.coeffs, cfg.funcs, n.t_ergodic);
    ec.scheme = cfg.scheme;
    ec.dt = n.ergodic_dt;
    ec.burn_in = n.burn_in;
    ec.replicas = n.replicas;
    ec.batches = n.batches;
    ec.allow_unverified = n.allow_unverified;
    ec
}

fn condition_detail(r: &ConditionReport<f64>) -> String {
    match &r.violation {
        None => format!("{} probes", r.checked),
        Some(v) => format!("{v:?}"),
    }
}

pub fn check(cfg: &ExperimentConfig, run: &mut Run) -> Result<(), CliError> {
    let c = &cfg.coeffs;
    let g = &cfg.funcs.g;
    let mut rows: Vec<[String; 3]> = Vec::new();
    let mut add = |run: &mut Run, name: &str, outcome: Option<(bool, String)>| match outcome {
        Some((holds, detail)) => {
            println!("{name:<20} {}  {detail}", if holds { "holds" } else { "VIOLATED" });
            run.summarize(SummaryRow::check("check", name, holds, "true", holds));
            rows.push([name.into(), holds.to_string(), detail]);
        }
        None => {
            println!("{name:<20} n/a");
            rows.push([name.into(), "n/a".into(), String::new()]);
        }
    };
    let drift = match check_drift_condition(c, g, &default_probe_grid(c)) {
        Ok(r) => Some((r.holds, condition_detail(&r))),
        Err(fastvol::Error::NotApplicable { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    add(run, "drift_inequality", drift);
    let pairwise = match check_pairwise_cir(&[*c], g, cfg.numerics.eta) {
        Ok(r) => Some((r.holds, condition_detail(&r))),
        Err(fastvol::Error::NotApplicable { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    add(run, "pairwise_cir", pairwise);
    let feller = g
        .is_sqrt_like()
        .then(|| (check_feller(c), format!("2 kappa theta = {}, xi^2 = {}", 2.0 * c.kappa * c.theta, c.xi * c.xi)));
    add(run, "feller", feller);
    let step = cfg.regime.max_dt().map(|max| {
        (cfg.regime.check_dt(cfg.numerics.dt).is_ok(), format!("dt = {} <= {}", cfg.numerics.dt, max))
    });
    add(run, "step_rule", step);
    run.csv("check.csv", &["condition", "holds", "detail"], rows)
}

pub fn stationary(cfg: &ExperimentConfig, run: &mut Run) -> Result<(), CliError> {
    let ec = ergodic_config(cfg);
    let seed = run.seed();
    let m = run.timed("moments", || estimate_stationary_moments(&ec, seed))?;
    let lc = derive_limit_correlations(&m, cfg.coeffs.rho1)?;
    let quantities = [
        ("sigma11", m.sigma11, m.se11),
        ("sigma21", m.sigma21, m.se21),
        ("sigma_tilde", m.sigma_tilde, m.se_tilde),
        ("rho_tilde", lc.rho_tilde, lc.se_rho_tilde),
        ("rho_prime", lc.rho_prime, lc.se_rho_prime),
    ];
    let rows: Vec<[String; 6]> = quantities
        .iter()
        .map(|(q, v, se)| [q.to_string(), num(*v), num(*se), num(m.horizon), num(m.burn_in), seed.to_string()])
        .collect();
    for (q, v, _) in &quantities {
        run.summarize(SummaryRow::info("stationary", q, *v));
    }
    run.csv("stationary.csv", &["quantity", "estimate", "std_error", "T", "burn_in", "seed"], rows)
}

#[derive(Debug, Clone, Default)]
pub struct SpdeArgs {
    pub dx: Option<f64>,
    pub dt: Option<f64>,
    pub x_max: Option<f64>,
    pub horizon: Option<f64>,
    pub rho1: Option<f64>,
    pub h: Option<f64>,
    pub density: bool,
    pub snapshots: usize,
}

/// One SPDE solve on one market path. Without `--h` the level follows
/// `h(sigma_t)` for a volatility path of the configured model.
pub fn spde(cfg: Option<&ExperimentConfig>, args: &SpdeArgs, run: &mut Run) -> Result<(), CliError> {
    let pick = |flag: Option<f64>, from_cfg: fn(&ExperimentConfig) -> f64, default: f64| {
        flag.or(cfg.map(from_cfg)).unwrap_or(default)
    };
    let dx = pick(args.dx, |c| c.numerics.dx, 0.02);
    let dt = pick(args.dt, |c| c.numerics.dt, 1e-4);
    let x_max = pick(args.x_max, |c| c.numerics.x_max, 10.0);
    let horizon = pick(args.horizon, |c| c.market.horizon, 1.0);
    let rho1 = pick(args.rho1, |c| c.coeffs.rho1, 0.5);
    let r = cfg.map(|c| c.coeffs.r).unwrap_or(0.05);
    let beta = cfg.map(|c| c.market.beta).unwrap_or(0.5);
    let rho3 = cfg.map(|c| c.market.rho3).unwrap_or(0.0);
    let n = steps_exact(horizon, dt, "spde")?;
    let settings = format!(
        "{} {dx:?} {dt:?} {x_max:?} {horizon:?} {rho1:?} {r:?} {beta:?} {rho3:?} {:?} {}",
        cfg.map(|c| c.hash()).unwrap_or_default(),
        args.h,
        args.density
    );
    run.set_config_hash(sha256_hex(settings.as_bytes()));
    let seed = run.seed();
    let bundle = NoiseBundle::sample(seed, dt, n, rho3, 1)?;
    let h_values: Vec<f64> = match (args.h, cfg) {
        (Some(h), _) => vec![h; n],
        (None, None) => vec![0.3; n],
        (None, Some(c)) => {
            c.regime.check_dt(dt)?;
            let model = portfolio_model(c);
            let (_, sigma0) = draw_initial_state(&model, &bundle, 0);
            let vp = simulate_vol(&c.coeffs, &c.funcs.g, &c.regime, &bundle, 0, c.scheme, sigma0)?;
            vp.values[..n].iter().map(|&s| c.funcs.h.eval(s)).collect()
        }
    };
    let h_max = h_values.iter().fold(0.0_f64, |a, h| a.max(h.abs()));
    let grid = SpatialGrid::covering(dx, x_max, beta, h_max, horizon)?;
    if grid.x_max() > x_max {
        log::warn!("x_max widened from {x_max} to {} to contain the field", grid.x_max());
    }
    let scfg = SpdeConfig {
        grid,
        r,
        rho1,
        dt,
        record_every: (n / args.snapshots.max(1)).max(1),
    };
    let w0 = bundle.w0();
    let field_rows = |times: &[f64], values: &[Vec<f64>]| -> Vec<[String; 3]> {
        let nodes = grid.nodes();
        times
            .iter()
            .zip(values)
            .flat_map(|(t, v)| nodes.iter().zip(v).map(move |(x, u)| [num(*t), num(*x), num(*u)]))
            .collect()
    };
    let (loss, clipped) = if args.density {
        let u = run.timed("solve", || solve_density(&scfg, &rayleigh_density(&grid, beta), &h_values, w0))?;
        let res = energy_residual(&u, &h_values, rho1, dt)?;
        let worst = res.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
        run.summarize(SummaryRow::info("spde", "max_energy_residual", worst));
        run.csv("spde_field.csv", &["t", "x", "value"], field_rows(&u.times, &u.values))?;
        let rows = u.step_times.iter().zip(&res).map(|(t, e)| [num(*t), num(*e)]);
        run.csv("spde_energy.csv", &["t", "residual"], rows)?;
        (loss_from_field(&u), u.clip.clipped_mass)
    } else {
        let v = run.timed("solve", || solve_survival(&scfg, &rayleigh_tail(&grid, beta), &h_values, w0))?;
        run.csv("spde_field.csv", &["t", "x", "value"], field_rows(&v.times, &v.values))?;
        (loss_from_field(&v), v.clip.clipped_mass)
    };
    run.summarize(SummaryRow::info("spde", "final_loss", loss.last().map(|l| l.1).unwrap_or(0.0)));
    run.summarize(SummaryRow::info("spde", "clipped_mass", clipped));
    let rows = loss.iter().map(|(t, l)| ["0".to_string(), num(*t), num(*l)]);
    run.csv("spde_loss.csv", &["outer_id", "t", "loss"], rows)
}

#[derive(Debug, Clone, Default)]
pub struct PortfolioArgs {
    pub dump_paths: Option<usize>,
    pub crossval: bool,
    pub points: usize,
}

pub fn portfolio(cfg: &ExperimentConfig, args: &PortfolioArgs, run: &mut Run) -> Result<(), CliError> {
    let num_cfg = &cfg.numerics;
    let dt = num_cfg.dt;
    let horizon = cfg.market.horizon;
    let n = steps_exact(horizon, dt, "portfolio")?;
    let model = portfolio_model(cfg);
    note_initial_vol(run, "portfolio", cfg);
    model.validate()?;
    cfg.regime.check_dt(dt)?;
    let stride = (n / args.points.max(1)).max(1);
    let mut ks: Vec<usize> = (0..=n).step_by(stride).collect();
    if ks.last() != Some(&n) {
        ks.push(n);
    }
    let seed = run.seed();
    let (n_outer, n_inner, rho3) = (num_cfg.n_outer, num_cfg.n_inner, cfg.market.rho3);
    let curves: Vec<Vec<f64>> = run.timed("particles", || {
        (0..n_outer)
            .into_par_iter()
            .map(|o| {
                let b = NoiseBundle::sample(sub_seed(seed, o as u64), dt, n, rho3, n_inner)?;
                let d = portfolio_default_steps(&model, &b, n_inner)?;
                Ok(ks.iter().map(|&k| loss_at_step(&d, k)).collect())
            })
            .collect::<fastvol::Result<_>>()
    })?;
    let rows = curves.iter().enumerate().flat_map(|(o, c)| {
        ks.iter().zip(c).map(move |(&k, l)| [o.to_string(), num(k as f64 * dt), num(*l)])
    });
    run.csv("portfolio_loss.csv", &["outer_id", "t", "loss"], rows)?;
    let finals: Vec<f64> = curves.iter().map(|c| *c.last().unwrap()).collect();
    run.summarize(SummaryRow::info("portfolio", "mean_final_loss", mean(&finals)));
    run.summarize(SummaryRow::info("portfolio", "se_final_loss", standard_error(&finals)));

    if let Some(k) = args.dump_paths {
        let b = NoiseBundle::sample(sub_seed(seed, 0), dt, n, rho3, n_inner.max(k))?;
        let mut series = Vec::with_capacity(2 * k);
        for i in 0..k {
            let (x0, sigma0) = draw_initial_state(&model, &b, i);
            let vp = simulate_vol(&cfg.coeffs, &cfg.funcs.g, &cfg.regime, &b, i, cfg.scheme, sigma0)?;
            let ap = simulate_asset(&cfg.coeffs, &cfg.funcs.h, x0, &vp, &b, i)?;
            series.push(ap.path);
            series.push(vp.values);
        }
        run.path_dump("paths.bin", dt, n, &series)?;
    }

    if args.crossval {
        let sigma = match cfg.funcs.h {
            LevelFunction::Constant(s) => s,
            other => {
                return Err(CliError::Validation(vec![format!(
                    "--crossval needs model.h = constant, got {}",
                    other.name()
                )]))
            }
        };
        let setup = CrossvalSetup {
            r: cfg.coeffs.r,
            rho1: cfg.coeffs.rho1,
            sigma,
            beta: cfg.market.beta,
            t: horizon,
            dt,
            dx: num_cfg.dx,
            x_max: num_cfg.x_max,
            n_inner_grid: num_cfg.n_inner_grid.clone(),
            n_outer,
            abs_slack: num_cfg.abs_slack,
        };
        let rep = run.timed("crossval", || particle_spde_crossval(&setup, seed))?;
        let rows = rep
            .n_inner_grid
            .iter()
            .zip(rep.rms.iter().zip(&rep.worst_ratio))
            .map(|(n, (e, w))| [n.to_string(), num(*e), num(*w)]);
        run.csv("crossval.csv", &["n_inner", "rms", "worst_ratio"], rows)?;
        let slope = rep.fit.slope;
        run.summarize(SummaryRow::check(
            "crossval",
            "slope",
            slope,
            "[-0.65, -0.35]",
            (-0.65..=-0.35).contains(&slope),
        ));
        run.summarize(SummaryRow::info("crossval", "r2", rep.fit.r2));
        run.summarize(SummaryRow::check("crossval", "all_within", rep.all_within, "true", rep.all_within));
    }
    Ok(())
}

fn rate_csv(run: &mut Run, name: &str, rep: &RateReport64) -> Result<(), CliError> {
    let rows = rep
        .eps_grid
        .iter()
        .zip(rep.errors.iter().zip(&rep.std_errors))
        .map(|(e, (x, s))| [num(*e), num(*x), num(*s)]);
    run.csv(name, &["eps", "error", "std_error"], rows)
}

/// Slope and R^2 rows; the slope is checked against `min..=max`.
fn rate_summary(run: &mut Run, study: &str, rep: &RateReport64, band: &str, min: f64, max: f64) {
    match rep.fit {
        Some(f) => {
            run.summarize(SummaryRow::check(study, "slope", f.slope, band, f.slope >= min && f.slope <= max));
            run.summarize(SummaryRow::info(study, "r2", f.r2));
        }
        None => run.summarize(SummaryRow::check(study, "slope", "n/a", band, false)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmallStudyKind {
    Vol,
    Field,
    Loss,
}

pub fn rates_small(cfg: &ExperimentConfig, studies: &[SmallStudyKind], deep: bool, run: &mut Run) -> Result<(), CliError> {
    cfg.check_deep(deep)?;
    if matches!(cfg.regime, ScalingRegime::LargeVolOfVol { .. }) {
        return Err(CliError::Validation(vec![
            "rates-small runs the small vol-of-vol scaling; regime.kind is large_vol_of_vol".into(),
        ]));
    }
    let n = &cfg.numerics;
    let study = SmallStudy {
        coeffs: cfg.coeffs,
        funcs: cfg.funcs,
        scheme: cfg.scheme,
        initial_vol: cfg.market.initial_vol,
        rho3: cfg.market.rho3,
        beta: cfg.market.beta,
        dx: n.dx,
        x_max: n.x_max,
    };
    note_initial_vol(run, "rates", cfg);
    let (eps, t, seed) = (&n.eps_grid, cfg.market.horizon, run.seed());
    if studies.contains(&SmallStudyKind::Vol) {
        let rep = run.timed("vol_rate", || small_volvol_vol_rate(&study, n.p, eps, t, n.n_paths, seed))?;
        rate_csv(run, "rates_vol.csv", &rep)?;
        rate_summary(run, "vol", &rep, "[0.8, 1.2]", 0.8, 1.2);
    }
    if studies.contains(&SmallStudyKind::Field) {
        let (h1, l2) = run.timed("field_rate", || small_volvol_field_rate(&study, eps, t, n.n_outer, seed))?;
        rate_csv(run, "rates_field_h1.csv", &h1)?;
        rate_csv(run, "rates_field_l2.csv", &l2)?;
        rate_summary(run, "field_h1", &h1, ">= 0.4", 0.4, f64::INFINITY);
        let dec = h1.strictly_decreasing();
        run.summarize(SummaryRow::check("field_h1", "strictly_decreasing", dec, "true", dec));
        if let Some(f) = l2.fit {
            run.summarize(SummaryRow::info("field_l2", "slope", f.slope));
        }
    }
    if studies.contains(&SmallStudyKind::Loss) {
        let reps = run.timed("loss_error", || loss_probability_error(&study, &n.x_levels, eps, t, n.n_outer, seed))?;
        for (k, rep) in reps.iter().enumerate() {
            let name = format!("loss_x{k}");
            rate_csv(run, &format!("rates_{name}.csv"), &rep.rate)?;
            run.summarize(SummaryRow::info(&name, "x", rep.x));
            run.summarize(SummaryRow::info(&name, "density_near_x", rep.density_near_x));
            if rep.degenerate {
                run.summarize(SummaryRow::info(&name, "degenerate", true));
                continue;
            }
            run.summarize(SummaryRow::check(
                &name,
                "density_bounded",
                rep.density_bounded,
                "true",
                rep.density_bounded,
            ));
            rate_summary(run, &name, &rep.rate, ">= 0.3", 0.3, f64::INFINITY);
            let dec = rep.rate.strictly_decreasing();
            run.summarize(SummaryRow::check(&name, "strictly_decreasing", dec, "true", dec));
        }
    }
    Ok(())
}

/// Refuses configurations the large vol-of-vol limit does not cover; runs
/// before any simulation.
pub fn weak_large_gate(cfg: &ExperimentConfig, deep: bool) -> Result<(), CliError> {
    let mut errors = Vec::new();
    if cfg.market.rho3 != 0.0 {
        errors.push(format!("weak-large requires market.rho3 = 0, got {}", cfg.market.rho3));
    }
    if !cfg.funcs.h.is_bounded() {
        errors.push(format!("weak-large needs a bounded model.h, got {}", cfg.funcs.h.name()));
    }
    if matches!(cfg.regime, ScalingRegime::SmallVolOfVol { .. }) {
        errors.push("weak-large runs the large vol-of-vol scaling; regime.kind is small_vol_of_vol".into());
    }
    if !errors.is_empty() {
        return Err(CliError::Validation(errors));
    }
    cfg.check_deep(deep)
}

pub fn weak_large(cfg: &ExperimentConfig, plateau: bool, deep: bool, run: &mut Run) -> Result<(), CliError> {
    weak_large_gate(cfg, deep)?;
    let n = &cfg.numerics;
    let study = LargeStudy {
        coeffs: cfg.coeffs,
        funcs: cfg.funcs,
        scheme: cfg.scheme,
        initial_vol: cfg.market.initial_vol,
        rho3: 0.0,
        beta: cfg.market.beta,
        limit_dt: n.limit_dt,
        n_bootstrap: n.n_bootstrap,
        dx: n.dx,
        x_max: n.x_max,
    };
    note_initial_vol(run, "weak", cfg);
    let seed = run.seed();
    let ec = ergodic_config(cfg);
    let m: Moments64 = run.timed("moments", || estimate_stationary_moments(&ec, sub_seed(seed, u64::MAX)))?;
    run.summarize(SummaryRow::info("moments", "sigma21", m.sigma21));
    run.summarize(SummaryRow::info("moments", "sigma_tilde", m.sigma_tilde));
    let (eps, t) = (&n.eps_grid, cfg.market.horizon);
    let ks = run.timed("weak", || weak_convergence_study(&study, &m, eps, n.n_outer, n.n_inner, t, seed))?;
    let rows = ks
        .eps_grid
        .iter()
        .zip(&ks.entries)
        .map(|(e, k)| [num(*e), num(k.statistic), num((k.band_hi - k.band_lo) / (2.0 * Z975))]);
    run.csv("weak_ks.csv", &["eps", "error", "std_error"], rows)?;
    let bands = ks
        .eps_grid
        .iter()
        .map(|e| num(*e))
        .chain(std::iter::once("limit_floor".to_string()))
        .zip(ks.entries.iter().chain(std::iter::once(&ks.floor)))
        .map(|(s, k)| [s, num(k.statistic), num(k.band_lo), num(k.band_hi), num(k.null_q99)]);
    run.csv("weak_ks_bands.csv", &["sample", "statistic", "band_lo", "band_hi", "null_q99"], bands)?;
    run.summarize(SummaryRow::info("weak", "floor", ks.floor.statistic));
    run.summarize(SummaryRow::check(
        "weak",
        "nonincreasing",
        ks.nonincreasing,
        "within bootstrap bands",
        ks.nonincreasing,
    ));
    let last = ks.entries.last().map(|e| e.statistic).unwrap_or(f64::NAN);
    run.summarize(SummaryRow::check("weak", "final_ks", last, "< 2 x floor", ks.final_below_floor));

    if plateau {
        let p = run.timed("plateau", || strong_failure_study(&study, &m, eps, n.n_outer, n.n_inner, t, seed))?;
        let rows = p
            .eps_grid
            .iter()
            .zip(p.distances.iter().zip(&p.std_errors))
            .map(|(e, (d, s))| [num(*e), num(*d), num(*s)]);
        run.csv("plateau.csv", &["eps", "error", "std_error"], rows)?;
        let rows = p
            .eps_grid
            .iter()
            .zip(p.floors.iter().zip(&p.floor_std_errors))
            .map(|(e, (d, s))| [num(*e), num(*d), num(*s)]);
        run.csv("plateau_floor.csv", &["eps", "error", "std_error"], rows)?;
        run.summarize(SummaryRow::info("plateau", "rho_prime", p.rho_prime));
        run.summarize(SummaryRow::info("plateau", "final_ratio", p.final_ratio));
    }
    Ok(())
}

/// Collects the manifests of earlier runs under `root` into one table and a
/// markdown digest.
pub fn report(root: &Path, run: &mut Run) -> Result<(), CliError> {
    let mut dirs: Vec<_> = std::fs::read_dir(root)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(MANIFEST).is_file() && p.as_path() != run.dir())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(CliError::Validation(vec![format!("no run manifests under {}", root.display())]));
    }
    let manifests = dirs
        .iter()
        .map(|d| RunManifest::read(&d.join(MANIFEST)))
        .collect::<Result<Vec<_>, _>>()?;
    let provenance: String = manifests
        .iter()
        .map(|m| format!("{} {} {}\n", m.command, m.config_hash, m.seed))
        .collect();
    run.set_config_hash(sha256_hex(provenance.as_bytes()));
    let mut rows: Vec<[String; 7]> = Vec::new();
    let mut md = String::from("# Run report\n");
    for m in &manifests {
        md.push_str(&format!(
            "\n## {}\n\nseed {}, config {}, {}\n\n| study | metric | value | band | pass |\n|---|---|---|---|---|\n",
            m.command,
            m.seed,
            m.config_hash,
            if m.complete { "complete" } else { "INCOMPLETE" }
        ));
        run.summarize(SummaryRow::check(&m.command, "complete", m.complete, "true", m.complete));
        if let Some(e) = &m.error {
            md.push_str(&format!("error: {e}\n\n"));
        }
        for r in &m.summary {
            let pass = r.pass.map(|p| if p { "pass" } else { "fail" }).unwrap_or("");
            md.push_str(&format!("| {} | {} | {} | {} | {} |\n", r.study, r.metric, r.value, r.band, pass));
            rows.push([
                m.command.clone(),
                r.study.clone(),
                r.metric.clone(),
                r.value.clone(),
                r.band.clone(),
                pass.to_string(),
                m.seed.to_string(),
            ]);
            if r.pass.is_some() {
                let label = format!("{}/{}", m.command, r.study);
                run.summarize(SummaryRow { study: label, ..r.clone() });
            }
        }
    }
    run.csv("report.csv", &["command", "study", "metric", "value", "band", "pass", "seed"], rows)?;
    run.text("report.md", &md)
}
