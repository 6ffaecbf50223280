use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::model::{CoefficientVector, InitialVolLaw, ScalingRegime, VolFunctionSpec};
use crate::noise::{NoiseBundle, StreamKind};
use crate::scalar::Real;

use super::asset::AssetStepper;
use super::vol::{draw_initial_vol, VolScheme, VolStepper};

/// Which estimator produced a conditional loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Estimator {
    Particle,
    Spde,
}

/// Conditional loss at time `t` for one systemic draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSample<T> {
    pub t: T,
    pub conditional_loss: T,
    pub estimator: Estimator,
    pub inner_size: usize,
}

/// Homogeneous portfolio: every asset shares the coefficient vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PortfolioModel<T> {
    pub coeffs: CoefficientVector<T>,
    pub funcs: VolFunctionSpec<T>,
    pub regime: ScalingRegime<T>,
    pub scheme: VolScheme,
    pub initial_vol: InitialVolLaw<T>,
    /// Rayleigh scale of the initial distance to default.
    pub beta: T,
}

impl<T: Real> PortfolioModel<T> {
    pub fn validate(&self) -> Result<()> {
        self.coeffs.validate()?;
        self.funcs.validate()?;
        self.regime.validate()?;
        if !(self.beta > T::zero()) {
            return Err(invalid("beta", "Rayleigh scale must be > 0"));
        }
        Ok(())
    }

    fn check_bundle(&self, bundle: &NoiseBundle<T>, n_inner: usize) -> Result<()> {
        if n_inner == 0 {
            return Err(invalid("n_inner", "need at least one asset"));
        }
        if n_inner > bundle.n_assets() {
            return Err(invalid(
                "n_inner",
                format!("bundle addresses {} assets, asked for {n_inner}", bundle.n_assets()),
            ));
        }
        if matches!(self.regime, ScalingRegime::LargeVolOfVol { .. }) && bundle.rho3() != T::zero() {
            return Err(invalid("rho3", "large_vol_of_vol requires rho3 = 0"));
        }
        Ok(())
    }
}

/// Rayleigh draw `beta * sqrt(-2 ln(1 - u))`.
pub fn draw_rayleigh<T: Real, R: Rng + ?Sized>(beta: T, rng: &mut R) -> T {
    let u: f64 = rng.random();
    beta * T::lit((-2.0 * (1.0 - u).ln()).sqrt())
}

/// Initial `(x0, sigma0)` of one asset, from the bundle's initial-state stream.
pub fn draw_initial_state<T: Real>(
    model: &PortfolioModel<T>,
    bundle: &NoiseBundle<T>,
    asset: usize,
) -> (T, T) {
    let mut rng = bundle.init_rng(asset);
    let x0 = draw_rayleigh(model.beta, &mut rng);
    let eff = model.regime.apply(&model.coeffs);
    let sigma0 = draw_initial_vol(&model.initial_vol, &eff, &model.funcs.g, &mut rng);
    (x0, sigma0)
}

/// Default step (index into the bundle grid) of each of the first `n_inner`
/// assets, `None` for survivors.
///
/// Consumes exactly the streams that `simulate_vol` followed by
/// `simulate_asset` would, so both routes give the same default times.
pub fn portfolio_default_steps<T: Real>(
    model: &PortfolioModel<T>,
    bundle: &NoiseBundle<T>,
    n_inner: usize,
) -> Result<Vec<Option<usize>>> {
    model.validate()?;
    model.check_bundle(bundle, n_inner)?;
    let vol = VolStepper::new(&model.coeffs, &model.funcs.g, &model.regime, model.scheme, bundle.dt())?;
    let asset = AssetStepper::new(&model.coeffs, bundle.dt());
    let h = model.funcs.h;
    let frozen = h.is_constant();
    let w0 = bundle.w0();
    let b0 = bundle.b0();
    let mut out = Vec::with_capacity(n_inner);
    for i in 0..n_inner {
        let (x0, sigma0) = draw_initial_state(model, bundle, i);
        if !(x0 > T::zero()) {
            out.push(Some(0));
            continue;
        }
        let mut wb = bundle.stream(i, StreamKind::VolB);
        let mut ww = bundle.stream(i, StreamKind::AssetW);
        let mut uu = bundle.uniforms(i);
        let mut x = x0;
        let mut s = sigma0;
        let mut default = None;
        for k in 0..bundle.n_steps() {
            let hv = h.eval(vol.observe(s));
            match asset.advance(x, hv, ww.next_increment(), w0[k], uu.next_uniform()) {
                Some(next) => x = next,
                None => {
                    default = Some(k + 1);
                    break;
                }
            }
            if !frozen {
                s = vol.advance(s, vol.driver(wb.next_increment(), b0[k]));
                if !s.is_finite() {
                    return Err(Error::Blowup {
                        step: k + 1,
                        detail: format!("volatility of asset {i} is not finite"),
                    });
                }
            }
        }
        out.push(default);
    }
    Ok(out)
}

/// Maps evaluation times onto bundle steps.
pub fn steps_for_times<T: Real>(bundle: &NoiseBundle<T>, t_grid: &[T]) -> Result<Vec<usize>> {
    let dt = bundle.dt();
    t_grid
        .iter()
        .map(|&t| {
            let k = (t / dt).round();
            let ks = k.to_usize().unwrap_or(usize::MAX);
            let tol = T::lit(1e-9) * t.abs().max(T::one());
            if !(t >= T::zero()) || (k * dt - t).abs() > tol || ks > bundle.n_steps() {
                Err(Error::GridMismatch(format!(
                    "evaluation time {t} is not a grid point of step {dt} within the horizon"
                )))
            } else {
                Ok(ks)
            }
        })
        .collect()
}

/// Fraction of defaults by step `k`.
pub fn loss_at_step<T: Real>(defaults: &[Option<usize>], k: usize) -> T {
    let n = defaults.iter().filter(|d| matches!(d, Some(s) if *s <= k)).count();
    T::from_count(n) / T::from_count(defaults.len())
}

/// Empirical conditional loss curve of `n_inner` assets sharing the
/// systemic noise of `bundle`.
pub fn simulate_portfolio_loss<T: Real>(
    model: &PortfolioModel<T>,
    bundle: &NoiseBundle<T>,
    n_inner: usize,
    t_grid: &[T],
) -> Result<Vec<LossSample<T>>> {
    let steps = steps_for_times(bundle, t_grid)?;
    let defaults = portfolio_default_steps(model, bundle, n_inner)?;
    Ok(t_grid
        .iter()
        .zip(steps)
        .map(|(&t, k)| LossSample {
            t,
            conditional_loss: loss_at_step(&defaults, k),
            estimator: Estimator::Particle,
            inner_size: n_inner,
        })
        .collect())
}
