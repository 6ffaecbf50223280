//! Weak convergence of the conditional loss in the large vol-of-vol scaling
//! and the plateau of its mean-square distance to the SPDE limit.

use rayon::prelude::*;

use crate::ergodic::{derive_limit_correlations, StationaryMoments};
use crate::error::{invalid, Result};
use crate::model::{
    CoefficientVector, InitialVolLaw, LevelFunction, ScalingRegime, VolFunctionSpec,
};
use crate::noise::{sub_seed, NoiseBundle};
use crate::scalar::{mean, standard_error, Real};
use crate::sde::{loss_at_step, portfolio_default_steps, PortfolioModel, VolScheme};
use crate::spde::{rayleigh_tail, solve_survival, SpatialGrid, SpdeConfig};

use super::{fine_steps, ks_two_sample, validate_eps_grid, KsEntry, KsReport};

/// Salt separating the second limit sample from the first.
const FLOOR_SALT: u64 = 0xF100_D5EE_D000_0001;

/// Homogeneous large vol-of-vol portfolio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LargeStudy<T> {
    /// Unscaled `(r, rho1, rho2, kappa, theta, v)`.
    pub coeffs: CoefficientVector<T>,
    pub funcs: VolFunctionSpec<T>,
    pub scheme: VolScheme,
    pub initial_vol: InitialVolLaw<T>,
    pub rho3: T,
    pub beta: T,
    /// Step of the constant-volatility limit simulations.
    pub limit_dt: T,
    pub n_bootstrap: usize,
    /// SPDE spacing for the strong-distance study.
    pub dx: T,
    pub x_max: T,
}

impl<T: Real> LargeStudy<T> {
    fn validate(&self, eps_grid: &[T], n_outer: usize, n_inner: usize) -> Result<()> {
        self.coeffs.validate()?;
        self.funcs.validate()?;
        validate_eps_grid(eps_grid)?;
        if self.rho3 != T::zero() {
            return Err(invalid(
                "rho3",
                format!("large_vol_of_vol requires rho3 = 0, got {}", self.rho3),
            ));
        }
        if !self.funcs.h.is_bounded() {
            return Err(invalid(
                "h",
                format!("large_vol_of_vol needs a bounded h, got {}", self.funcs.h.name()),
            ));
        }
        if n_outer < 2 || n_inner == 0 {
            return Err(invalid("n_outer", "need n_outer >= 2 and n_inner >= 1"));
        }
        if !(self.limit_dt > T::zero()) {
            return Err(invalid("limit_dt", "must be > 0"));
        }
        Ok(())
    }

    fn scaled(&self, eps: T) -> PortfolioModel<T> {
        PortfolioModel {
            coeffs: self.coeffs,
            funcs: self.funcs,
            regime: ScalingRegime::LargeVolOfVol { epsilon: eps },
            scheme: self.scheme,
            initial_vol: self.initial_vol,
            beta: self.beta,
        }
    }

    /// Constant-volatility model with level `sigma` and correlation `rho1`.
    fn constant(&self, sigma: T, rho1: T) -> PortfolioModel<T> {
        let mut coeffs = self.coeffs;
        coeffs.rho1 = rho1;
        coeffs.xi = T::zero();
        PortfolioModel {
            coeffs,
            funcs: VolFunctionSpec {
                g: self.funcs.g,
                h: LevelFunction::Constant(sigma),
            },
            regime: ScalingRegime::Unscaled,
            scheme: VolScheme::Euler,
            initial_vol: InitialVolLaw::Fixed(self.coeffs.theta),
            beta: self.beta,
        }
    }
}

fn particle_loss<T: Real>(
    model: &PortfolioModel<T>,
    seed: u64,
    dt: T,
    n: usize,
    n_inner: usize,
) -> Result<T> {
    let bundle = NoiseBundle::sample(seed, dt, n, T::zero(), n_inner)?;
    let d = portfolio_default_steps(model, &bundle, n_inner)?;
    Ok(loss_at_step(&d, n))
}

fn limit_steps<T: Real>(dt: T, t: T) -> Result<(T, usize)> {
    let n = (t / dt * T::lit(1.0 - 1e-12)).ceil().to_usize().unwrap_or(0).max(1);
    Ok((t / T::from_count(n), n))
}

/// KS distance between `n_outer` conditional losses at time `t` of the
/// scaled model and of the limit model with volatility `sigma21` and
/// correlation `rho_tilde`, for every `eps`.
#[allow(clippy::too_many_arguments)]
pub fn weak_convergence_study<T: Real>(
    study: &LargeStudy<T>,
    moments: &StationaryMoments<T>,
    eps_grid: &[T],
    n_outer: usize,
    n_inner: usize,
    t: T,
    seed: u64,
) -> Result<KsReport<T>> {
    study.validate(eps_grid, n_outer, n_inner)?;
    let corr = derive_limit_correlations(moments, study.coeffs.rho1)?;
    let limit = study.constant(moments.sigma21, corr.rho_tilde);
    let (ldt, ln) = limit_steps(study.limit_dt, t)?;
    let limit_sample = |salt: u64| -> Result<Vec<T>> {
        (0..n_outer)
            .into_par_iter()
            .map(|o| particle_loss(&limit, sub_seed(seed ^ salt, o as u64), ldt, ln, n_inner))
            .collect()
    };
    let reference = limit_sample(0)?;
    let second = limit_sample(FLOOR_SALT)?;
    let floor = ks_two_sample(&reference, &second, study.n_bootstrap, sub_seed(seed, 1 << 40))?;
    let mut entries: Vec<KsEntry<T>> = Vec::with_capacity(eps_grid.len());
    for (k, &eps) in eps_grid.iter().enumerate() {
        let model = study.scaled(eps);
        let (dt, n) = fine_steps(eps, t)?;
        let sample: Vec<T> = (0..n_outer)
            .into_par_iter()
            .map(|o| particle_loss(&model, sub_seed(seed, o as u64), dt, n, n_inner))
            .collect::<Result<_>>()?;
        entries.push(ks_two_sample(&sample, &reference, study.n_bootstrap, sub_seed(seed, (1 << 40) + 1 + k as u64))?);
    }
    Ok(KsReport::new(eps_grid, entries, floor))
}

/// Root-mean-square distance between particle losses and the SPDE limit
/// loss on the same market noise, with the floor obtained by replacing the
/// scaled model with particles of the limit model itself.
#[derive(Debug, Clone, PartialEq)]
pub struct PlateauReport<T> {
    pub eps_grid: Vec<T>,
    pub distances: Vec<T>,
    pub std_errors: Vec<T>,
    pub floors: Vec<T>,
    pub floor_std_errors: Vec<T>,
    /// Noise coefficient `rho1 sigma11 / sigma21` of the SPDE limit.
    pub rho_prime: T,
    /// Distance over floor at the smallest `eps`.
    pub final_ratio: T,
}

/// Distances between `L_eps` and the limit SPDE loss on common `W0`.
#[allow(clippy::too_many_arguments)]
pub fn strong_failure_study<T: Real>(
    study: &LargeStudy<T>,
    moments: &StationaryMoments<T>,
    eps_grid: &[T],
    n_outer: usize,
    n_inner: usize,
    t: T,
    seed: u64,
) -> Result<PlateauReport<T>> {
    study.validate(eps_grid, n_outer, n_inner)?;
    let corr = derive_limit_correlations(moments, study.coeffs.rho1)?;
    let limit = study.constant(moments.sigma21, corr.rho_prime);
    let grid = SpatialGrid::covering(study.dx, study.x_max, study.beta, moments.sigma21, t)?;
    let v0 = rayleigh_tail(&grid, study.beta);
    let mut distances = Vec::new();
    let mut std_errors = Vec::new();
    let mut floors = Vec::new();
    let mut floor_std_errors = Vec::new();
    for &eps in eps_grid {
        let model = study.scaled(eps);
        let (dt, n) = fine_steps(eps, t)?;
        let cfg = SpdeConfig {
            grid,
            r: study.coeffs.r,
            rho1: corr.rho_prime,
            dt,
            record_every: n,
        };
        let h = vec![moments.sigma21; n];
        let rows: Vec<(T, T)> = (0..n_outer)
            .into_par_iter()
            .map(|o| {
                let bundle = NoiseBundle::sample(sub_seed(seed, o as u64), dt, n, T::zero(), n_inner)?;
                let spde = solve_survival(&cfg, &v0, &h, bundle.w0())?;
                let l_spde = T::one() - *spde.boundary.last().unwrap();
                let l_eps: T = loss_at_step(&portfolio_default_steps(&model, &bundle, n_inner)?, n);
                let l_lim: T = loss_at_step(&portfolio_default_steps(&limit, &bundle, n_inner)?, n);
                Ok(((l_eps - l_spde).powi(2), (l_lim - l_spde).powi(2)))
            })
            .collect::<Result<_>>()?;
        let (d, f): (Vec<T>, Vec<T>) = rows.into_iter().unzip();
        let root = |xs: &[T]| {
            let m = mean(xs).sqrt();
            let se = if m > T::zero() {
                standard_error(xs) / (T::lit(2.0) * m)
            } else {
                T::zero()
            };
            (m, se)
        };
        let (dm, ds) = root(&d);
        let (fm, fs) = root(&f);
        distances.push(dm);
        std_errors.push(ds);
        floors.push(fm);
        floor_std_errors.push(fs);
    }
    let final_ratio = *distances.last().unwrap() / *floors.last().unwrap();
    Ok(PlateauReport {
        eps_grid: eps_grid.to_vec(),
        distances,
        std_errors,
        floors,
        floor_std_errors,
        rho_prime: corr.rho_prime,
        final_ratio,
    })
}
