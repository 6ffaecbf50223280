//! Particle and SPDE estimates of the same constant-volatility conditional
//! loss, compared draw by draw.

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::model::{CoefficientVector, InitialVolLaw, LevelFunction, ScalingRegime, VolFunction, VolFunctionSpec};
use crate::noise::{sub_seed, NoiseBundle};
use crate::scalar::Real;
use crate::sde::{loss_at_step, portfolio_default_steps, PortfolioModel, VolScheme};
use crate::spde::{rayleigh_tail, solve_survival, SpatialGrid, SpdeConfig};

use super::{fit_log_log, LogLogFit};

/// Constant-volatility comparison settings.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossvalSetup<T> {
    pub r: T,
    pub rho1: T,
    pub sigma: T,
    pub beta: T,
    pub t: T,
    pub dt: T,
    pub dx: T,
    pub x_max: T,
    pub n_inner_grid: Vec<usize>,
    pub n_outer: usize,
    /// Slack added to the binomial tolerance for discretisation error.
    pub abs_slack: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossvalReport<T> {
    pub n_inner_grid: Vec<usize>,
    /// Root-mean-square particle/SPDE difference per inner size.
    pub rms: Vec<T>,
    /// Worst `|diff| / tolerance` per inner size.
    pub worst_ratio: Vec<T>,
    /// Every draw within `4 binomial SE + slack`.
    pub all_within: bool,
    /// Fit of `rms` against `n_inner`.
    pub fit: LogLogFit<T>,
    pub spde_losses: Vec<T>,
}

pub fn particle_spde_crossval<T: Real>(setup: &CrossvalSetup<T>, seed: u64) -> Result<CrossvalReport<T>> {
    let coeffs = CoefficientVector::new(setup.r, setup.rho1, T::zero(), T::one(), setup.sigma, T::zero())?;
    if setup.n_inner_grid.len() < 3 || setup.n_inner_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("n_inner_grid", "need at least three increasing sizes"));
    }
    if setup.n_outer < 2 {
        return Err(invalid("n_outer", "need at least two outer draws"));
    }
    let model = PortfolioModel {
        coeffs,
        funcs: VolFunctionSpec {
            g: VolFunction::ConstantOne,
            h: LevelFunction::Constant(setup.sigma),
        },
        regime: ScalingRegime::Unscaled,
        scheme: VolScheme::Euler,
        initial_vol: InitialVolLaw::Fixed(setup.sigma),
        beta: setup.beta,
    };
    let n = (setup.t / setup.dt).round().to_usize().unwrap_or(0).max(1);
    let dt = setup.t / T::from_count(n);
    let grid = SpatialGrid::covering(setup.dx, setup.x_max, setup.beta, setup.sigma, setup.t)?;
    let cfg = SpdeConfig {
        grid,
        r: setup.r,
        rho1: setup.rho1,
        dt,
        record_every: n,
    };
    let v0 = rayleigh_tail(&grid, setup.beta);
    let h = vec![setup.sigma; n];
    let n_max = *setup.n_inner_grid.last().unwrap();
    let rows: Vec<(T, Vec<T>)> = (0..setup.n_outer)
        .into_par_iter()
        .map(|o| {
            let bundle = NoiseBundle::sample(sub_seed(seed, o as u64), dt, n, T::zero(), n_max)?;
            let spde = solve_survival(&cfg, &v0, &h, bundle.w0())?;
            let l_spde = T::one() - *spde.boundary.last().unwrap();
            // nested portfolios: the first n_inner assets of the largest one
            let defaults = portfolio_default_steps(&model, &bundle, n_max)?;
            let parts = setup
                .n_inner_grid
                .iter()
                .map(|&m| loss_at_step::<T>(&defaults[..m], n))
                .collect();
            Ok((l_spde, parts))
        })
        .collect::<Result<_>>()?;
    let mut rms = Vec::new();
    let mut worst_ratio = Vec::new();
    for (k, &m) in setup.n_inner_grid.iter().enumerate() {
        let mut ss = T::zero();
        let mut worst = T::zero();
        for (l_spde, parts) in &rows {
            let d = parts[k] - *l_spde;
            ss = ss + d * d;
            let p = l_spde.max(T::zero()).min(T::one());
            let tol = T::lit(4.0) * (p * (T::one() - p) / T::from_count(m)).sqrt() + setup.abs_slack;
            worst = worst.max(d.abs() / tol);
        }
        rms.push((ss / T::from_count(rows.len())).sqrt());
        worst_ratio.push(worst);
    }
    let sizes: Vec<T> = setup.n_inner_grid.iter().map(|&m| T::from_count(m)).collect();
    let fit = fit_log_log(&sizes, &rms)?;
    Ok(CrossvalReport {
        n_inner_grid: setup.n_inner_grid.clone(),
        all_within: worst_ratio.iter().all(|&w| w <= T::one()),
        rms,
        worst_ratio,
        fit,
        spde_losses: rows.iter().map(|r| r.0).collect(),
    })
}
