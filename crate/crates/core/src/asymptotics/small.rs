//! Strong rates in the small vol-of-vol scaling. Every `eps` of one outer
//! draw is driven by the same noise bundle, and the initial volatilities are
//! drawn from one shared stream so stationary starts are coupled too.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::model::{
    stationary_law, CoefficientVector, InitialVolLaw, ScalingRegime, StationaryLaw, VolFunctionSpec,
};
use crate::noise::{sub_seed, NoiseBundle, StreamKind};
use crate::scalar::{mean, standard_error, Real};
use crate::sde::{draw_initial_vol, VolScheme, VolStepper};
use crate::spde::{rayleigh_tail, FieldForm, SpatialGrid, SpdeSolver};

use super::{fine_steps, validate_eps_grid, Coupling, RateReport};

/// Model and discretisation of a small vol-of-vol study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmallStudy<T> {
    pub coeffs: CoefficientVector<T>,
    pub funcs: VolFunctionSpec<T>,
    pub scheme: VolScheme,
    pub initial_vol: InitialVolLaw<T>,
    pub rho3: T,
    /// Rayleigh scale of the initial law.
    pub beta: T,
    pub dx: T,
    /// Requested truncation; widened to the far-field rule when needed.
    pub x_max: T,
}

impl<T: Real> SmallStudy<T> {
    fn validate(&self, eps_grid: &[T]) -> Result<()> {
        self.coeffs.validate()?;
        self.funcs.validate()?;
        validate_eps_grid(eps_grid)?;
        if !(self.rho3 >= -T::one() && self.rho3 <= T::one()) {
            return Err(invalid("rho3", "rho3 must lie in [-1,1]"));
        }
        if !(self.beta > T::zero()) {
            return Err(invalid("beta", "Rayleigh scale must be > 0"));
        }
        Ok(())
    }

    /// Upper envelope of `h` for sizing the grid: the bound of `h` when it
    /// has one, else `|h|` six stationary deviations from `theta` at the
    /// largest `eps`.
    pub fn level_envelope(&self, eps_max: T) -> T {
        if let Some(b) = self.funcs.h.upper_bound() {
            return b;
        }
        let eff = ScalingRegime::SmallVolOfVol { epsilon: eps_max }.apply(&self.coeffs);
        let sd = match stationary_law(&eff, &self.funcs.g) {
            Some(StationaryLaw::Normal { sd, .. }) => sd,
            Some(StationaryLaw::Gamma { shape, scale }) => shape.sqrt() * scale,
            _ => eff.xi * self.funcs.g.eval(eff.theta) / (T::lit(2.0) * eff.kappa).sqrt(),
        };
        let reach = T::lit(6.0) * sd;
        let h = &self.funcs.h;
        h.eval(self.coeffs.theta + reach)
            .abs()
            .max(h.eval(self.coeffs.theta - reach).abs())
            .max(h.eval(self.coeffs.theta).abs())
    }

    pub fn grid(&self, eps_max: T, horizon: T) -> Result<SpatialGrid<T>> {
        SpatialGrid::covering(self.dx, self.x_max, self.beta, self.level_envelope(eps_max), horizon)
    }

    fn steppers(&self, eps_grid: &[T], dt: T) -> Result<Vec<VolStepper<T>>> {
        eps_grid
            .iter()
            .map(|&e| {
                VolStepper::new(
                    &self.coeffs,
                    &self.funcs.g,
                    &ScalingRegime::SmallVolOfVol { epsilon: e },
                    self.scheme,
                    dt,
                )
            })
            .collect()
    }

    /// Coupled initial volatilities, one per `eps`, from the same draws.
    fn initial_vols(&self, eps_grid: &[T], bundle: &NoiseBundle<T>) -> Vec<T> {
        eps_grid
            .iter()
            .map(|&e| {
                let eff = ScalingRegime::SmallVolOfVol { epsilon: e }.apply(&self.coeffs);
                draw_initial_vol(&self.initial_vol, &eff, &self.funcs.g, &mut bundle.init_rng(0))
            })
            .collect()
    }
}

fn per_eps_stats<T: Real>(rows: &[Vec<T>], n_eps: usize) -> (Vec<T>, Vec<T>) {
    (0..n_eps)
        .map(|e| {
            let col: Vec<T> = rows.iter().map(|r| r[e]).collect();
            (mean(&col), standard_error(&col))
        })
        .unzip()
}

/// `E int_0^t |sigma_s - theta|^p ds` for each `eps`, and the fitted order.
pub fn small_volvol_vol_rate<T: Real>(
    study: &SmallStudy<T>,
    p: T,
    eps_grid: &[T],
    t: T,
    n_paths: usize,
    seed: u64,
) -> Result<RateReport<T>> {
    study.validate(eps_grid)?;
    if !(p >= T::one()) {
        return Err(invalid("p", "exponent must be >= 1"));
    }
    if n_paths < 2 {
        return Err(invalid("n_paths", "need at least two paths"));
    }
    let (dt, n) = fine_steps(*eps_grid.last().unwrap(), t)?;
    let steppers = study.steppers(eps_grid, dt)?;
    let theta = study.coeffs.theta;
    let half_dt = T::lit(0.5) * dt;
    let rows: Result<Vec<Vec<T>>> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let bundle = NoiseBundle::sample(sub_seed(seed, i as u64), dt, n, study.rho3, 1)?;
            let mut s = study.initial_vols(eps_grid, &bundle);
            let dev = |st: &VolStepper<T>, x: T| (st.observe(x) - theta).abs().powf(p);
            let mut acc: Vec<T> = s.iter().zip(&steppers).map(|(&x, st)| half_dt * dev(st, x)).collect();
            let mut stream = bundle.stream(0, StreamKind::VolB);
            for (k, &db0) in bundle.b0().iter().enumerate() {
                let dbi = stream.next_increment();
                let w = if k + 1 == n { half_dt } else { dt };
                for ((x, st), a) in s.iter_mut().zip(&steppers).zip(acc.iter_mut()) {
                    *x = st.advance(*x, st.driver(dbi, db0));
                    *a = *a + w * dev(st, *x);
                }
            }
            Ok(acc)
        })
        .collect();
    let (errors, ses) = per_eps_stats(&rows?, eps_grid.len());
    Ok(RateReport::new(eps_grid, errors, ses, Coupling::CommonNoise))
}

/// Per-outer-draw output of the coupled survival solves.
struct OuterPass<T> {
    /// `int_0^T |v_eps - v_0|_{H1}^2 dt` per `eps`.
    h1: Vec<T>,
    /// `int_0^T |v_eps - v_0|_{L2}^2 dt` per `eps`.
    l2: Vec<T>,
    /// `v(t, 0)` at the requested steps; rows are the `eps` solvers then the limit.
    boundary: Vec<Vec<T>>,
}

fn diff_norms<T: Real>(a: &[T], b: &[T], dx: T) -> (T, T) {
    let mut l2 = T::zero();
    let mut grad = T::zero();
    let mut prev = T::zero();
    for (j, (x, y)) in a.iter().zip(b).enumerate() {
        let d = *x - *y;
        l2 = l2 + d * d;
        if j > 0 {
            grad = grad + (d - prev) * (d - prev);
        }
        prev = d;
    }
    (l2 * dx, grad / dx)
}

#[allow(clippy::too_many_arguments)]
fn outer_pass<T: Real>(
    study: &SmallStudy<T>,
    eps_grid: &[T],
    steppers: &[VolStepper<T>],
    grid: &SpatialGrid<T>,
    dt: T,
    n: usize,
    seed: u64,
    sample_steps: &[usize],
    track_norms: bool,
) -> Result<OuterPass<T>> {
    let bundle = NoiseBundle::sample(seed, dt, n, study.rho3, 1)?;
    let v0 = rayleigh_tail(grid, study.beta);
    let h = study.funcs.h;
    let c = &study.coeffs;
    let make = || SpdeSolver::new(*grid, FieldForm::Survival, c.r, c.rho1, dt, v0.clone());
    let mut solvers: Vec<SpdeSolver<T>> = (0..eps_grid.len()).map(|_| make()).collect::<Result<_>>()?;
    let mut limit = make()?;
    let h_limit = h.eval(c.theta);
    let mut s = study.initial_vols(eps_grid, &bundle);
    let mut stream = bundle.stream(0, StreamKind::VolB);
    let ne = eps_grid.len();
    let mut h1 = vec![T::zero(); ne];
    let mut l2 = vec![T::zero(); ne];
    let mut prev = vec![(T::zero(), T::zero()); ne];
    let mut boundary = vec![Vec::with_capacity(sample_steps.len()); ne + 1];
    let mut next_sample = 0;
    let half_dt = T::lit(0.5) * dt;
    let mut record = |k: usize, solvers: &[SpdeSolver<T>], limit: &SpdeSolver<T>, next: &mut usize| {
        while *next < sample_steps.len() && sample_steps[*next] == k {
            for (row, sv) in boundary.iter_mut().zip(solvers) {
                row.push(sv.boundary_value());
            }
            boundary[ne].push(limit.boundary_value());
            *next += 1;
        }
    };
    record(0, &solvers, &limit, &mut next_sample);
    for (k, (&dw, &db0)) in bundle.w0().iter().zip(bundle.b0()).enumerate() {
        let dbi = stream.next_increment();
        limit.step(h_limit, dw)?;
        for e in 0..ne {
            let st = &steppers[e];
            solvers[e].step(h.eval(st.observe(s[e])), dw)?;
            s[e] = st.advance(s[e], st.driver(dbi, db0));
            if track_norms {
                let (a, g) = diff_norms(solvers[e].values(), limit.values(), grid.dx());
                l2[e] = l2[e] + half_dt * (prev[e].0 + a);
                h1[e] = h1[e] + half_dt * (prev[e].0 + prev[e].1 + a + g);
                prev[e] = (a, g);
            }
        }
        record(k + 1, &solvers, &limit, &mut next_sample);
    }
    Ok(OuterPass { h1, l2, boundary })
}

/// `sqrt(E int_0^T |v_eps - v_0|^2_{H1} dt)` per `eps` with the fitted order.
/// The companion `L2` errors are returned as the second report.
pub fn small_volvol_field_rate<T: Real>(
    study: &SmallStudy<T>,
    eps_grid: &[T],
    horizon: T,
    n_outer: usize,
    seed: u64,
) -> Result<(RateReport<T>, RateReport<T>)> {
    study.validate(eps_grid)?;
    if n_outer < 2 {
        return Err(invalid("n_outer", "need at least two outer draws"));
    }
    let (dt, n) = fine_steps(*eps_grid.last().unwrap(), horizon)?;
    let steppers = study.steppers(eps_grid, dt)?;
    let grid = study.grid(eps_grid[0], horizon)?;
    let passes: Result<Vec<OuterPass<T>>> = (0..n_outer)
        .into_par_iter()
        .map(|o| outer_pass(study, eps_grid, &steppers, &grid, dt, n, sub_seed(seed, o as u64), &[], true))
        .collect();
    let passes = passes?;
    let report = |pick: fn(&OuterPass<T>) -> &Vec<T>| {
        let rows: Vec<Vec<T>> = passes.iter().map(|p| pick(p).clone()).collect();
        let (m, se) = per_eps_stats(&rows, eps_grid.len());
        let errors: Vec<T> = m.iter().map(|x| x.sqrt()).collect();
        let ses = se
            .iter()
            .zip(&errors)
            .map(|(s, e)| if *e > T::zero() { *s / (T::lit(2.0) * *e) } else { T::zero() })
            .collect();
        RateReport::new(eps_grid, errors, ses, Coupling::CommonNoise)
    };
    Ok((report(|p| &p.h1), report(|p| &p.l2)))
}

/// Survival threshold of the loss-probability error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum XLevel<T> {
    Fixed(T),
    /// Sample median of the limit survival `v0(T/2, 0)`.
    LimitMedianAtHalfHorizon,
}

/// `E(x, T)` along the grid for one level.
#[derive(Debug, Clone, PartialEq)]
pub struct LossErrorReport<T> {
    pub x: T,
    /// Both probabilities are constant at this level.
    pub degenerate: bool,
    /// Histogram estimate of the density of `v0(T/2, 0)` near `x`.
    pub density_near_x: T,
    /// No histogram bin around `x` carries an atom.
    pub density_bounded: bool,
    pub rate: RateReport<T>,
}

const QUADRATURE_NODES: usize = 50;
const HIST_BIN: f64 = 0.01;
const LOSS_BOOTSTRAP: usize = 200;

/// `E(x, T) = int_0^T |P[S_eps(t) > x] - P[S_0(t) > x]| dt` with the
/// survivals `S = v(t, 0)` of the coupled solves and a 50-point midpoint
/// rule; standard errors by bootstrap over outer draws.
pub fn loss_probability_error<T: Real>(
    study: &SmallStudy<T>,
    levels: &[XLevel<T>],
    eps_grid: &[T],
    horizon: T,
    n_outer: usize,
    seed: u64,
) -> Result<Vec<LossErrorReport<T>>> {
    study.validate(eps_grid)?;
    if levels.is_empty() {
        return Err(invalid("x_levels", "need at least one level"));
    }
    if n_outer < 2 {
        return Err(invalid("n_outer", "need at least two outer draws"));
    }
    let (dt, n) = fine_steps(*eps_grid.last().unwrap(), horizon)?;
    let steppers = study.steppers(eps_grid, dt)?;
    let grid = study.grid(eps_grid[0], horizon)?;
    let step_of = |t: T| (t / dt).round().to_usize().unwrap_or(0).min(n);
    let mut sample_steps: Vec<usize> = (0..QUADRATURE_NODES)
        .map(|q| step_of(horizon * (T::from_count(q) + T::lit(0.5)) / T::from_count(QUADRATURE_NODES)))
        .collect();
    let half_step = step_of(horizon * T::lit(0.5));
    sample_steps.push(half_step);
    let mut order: Vec<usize> = (0..sample_steps.len()).collect();
    order.sort_by_key(|&i| sample_steps[i]);
    let sorted: Vec<usize> = order.iter().map(|&i| sample_steps[i]).collect();
    let passes: Result<Vec<OuterPass<T>>> = (0..n_outer)
        .into_par_iter()
        .map(|o| outer_pass(study, eps_grid, &steppers, &grid, dt, n, sub_seed(seed, o as u64), &sorted, false))
        .collect();
    let passes = passes?;
    // samples[solver][node][outer], nodes in the original order
    let ne = eps_grid.len();
    let n_nodes = sample_steps.len();
    let mut samples = vec![vec![vec![T::zero(); n_outer]; n_nodes]; ne + 1];
    for (o, p) in passes.iter().enumerate() {
        for (s, row) in p.boundary.iter().enumerate() {
            for (pos, &node) in order.iter().enumerate() {
                samples[s][node][o] = row[pos];
            }
        }
    }
    let half_limit = &samples[ne][QUADRATURE_NODES];
    let weight = horizon / T::from_count(QUADRATURE_NODES);

    let mut out = Vec::with_capacity(levels.len());
    for level in levels {
        let x = match level {
            XLevel::Fixed(x) => *x,
            XLevel::LimitMedianAtHalfHorizon => median(half_limit),
        };
        let degenerate = !(x > T::zero() && x < T::one());
        let (density_near_x, density_bounded) = histogram_density(half_limit, x);
        let error_for = |idx: &[usize]| -> Vec<T> {
            let m = T::from_count(idx.len());
            (0..ne)
                .map(|e| {
                    (0..QUADRATURE_NODES)
                        .map(|q| {
                            let pe = idx.iter().filter(|&&o| samples[e][q][o] > x).count();
                            let p0 = idx.iter().filter(|&&o| samples[ne][q][o] > x).count();
                            (T::from_count(pe) - T::from_count(p0)).abs() / m * weight
                        })
                        .sum()
                })
                .collect()
        };
        let all: Vec<usize> = (0..n_outer).collect();
        let errors = error_for(&all);
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, u64::MAX));
        let boot: Vec<Vec<T>> = (0..LOSS_BOOTSTRAP)
            .map(|_| {
                let idx: Vec<usize> = (0..n_outer).map(|_| rng.random_range(0..n_outer)).collect();
                error_for(&idx)
            })
            .collect();
        let ses = (0..ne)
            .map(|e| {
                let col: Vec<T> = boot.iter().map(|b| b[e]).collect();
                crate::scalar::sample_variance(&col).sqrt()
            })
            .collect();
        out.push(LossErrorReport {
            x,
            degenerate,
            density_near_x,
            density_bounded,
            rate: RateReport::new(eps_grid, errors, ses, Coupling::CommonNoise),
        });
    }
    Ok(out)
}

fn median<T: Real>(xs: &[T]) -> T {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        T::lit(0.5) * (v[m - 1] + v[m])
    }
}

/// Density estimate from the bin of width `HIST_BIN` centred at `x` and its
/// two neighbours; bounded unless one of them holds half the sample.
fn histogram_density<T: Real>(xs: &[T], x: T) -> (T, bool) {
    let w = T::lit(HIST_BIN);
    let n = T::from_count(xs.len());
    let counts: Vec<usize> = (-1i32..=1)
        .map(|k| {
            let c = x + w * T::lit(k as f64);
            xs.iter()
                .filter(|&&s| s >= c - T::lit(0.5) * w && s < c + T::lit(0.5) * w)
                .count()
        })
        .collect();
    let density = T::from_count(counts.iter().sum()) / (n * T::lit(3.0) * w);
    let bounded = counts.iter().all(|&c| T::from_count(2 * c) < n);
    (density, bounded)
}
