use crate::error::{Error, Result};
use crate::model::{CoefficientVector, LevelFunction};
use crate::noise::{NoiseBundle, StreamKind};
use crate::scalar::Real;

use super::vol::VolPath;

/// An absorbed distance-to-default path.
#[derive(Debug, Clone, PartialEq)]
pub struct AssetPathResult<T> {
    pub path: Vec<T>,
    pub defaulted: bool,
    pub default_time: Option<T>,
    pub default_step: Option<usize>,
}

/// Below this log-probability the bridge crossing test cannot fire.
const NEGLIGIBLE_LOG_P: f64 = -40.0;

/// Euler step of the distance to default with a Brownian-bridge test.
#[derive(Debug, Clone, Copy)]
pub struct AssetStepper<T> {
    r_dt: T,
    half_dt: T,
    rho1: T,
    rho1c: T,
    dt: T,
}

impl<T: Real> AssetStepper<T> {
    pub fn new(coeffs: &CoefficientVector<T>, dt: T) -> Self {
        Self {
            r_dt: coeffs.r * dt,
            half_dt: T::lit(0.5) * dt,
            rho1: coeffs.rho1,
            rho1c: (T::one() - coeffs.rho1 * coeffs.rho1).sqrt(),
            dt,
        }
    }

    /// Returns the next level, or `None` if the path hit 0 during the step.
    /// `u` is a uniform draw, consumed whether or not it is needed.
    #[inline]
    pub fn advance(&self, x: T, hv: T, dw_idio: T, dw_sys: T, u: f64) -> Option<T> {
        let h2 = hv * hv;
        let next = x - h2 * self.half_dt + self.r_dt + hv * (self.rho1c * dw_idio + self.rho1 * dw_sys);
        if !(next > T::zero()) {
            return None;
        }
        if h2 > T::zero() {
            let log_p = (-T::lit(2.0) * x * next / (h2 * self.dt)).as_f64();
            if log_p > NEGLIGIBLE_LOG_P && u < log_p.exp() {
                return None;
            }
        }
        Some(next)
    }
}

pub(crate) fn check_same_grid<T: Real>(vol: &VolPath<T>, bundle: &NoiseBundle<T>) -> Result<()> {
    if vol.values.len() != bundle.n_steps() + 1 || vol.times.len() != vol.values.len() {
        return Err(Error::GridMismatch(format!(
            "vol path has {} points, bundle has {} steps",
            vol.values.len(),
            bundle.n_steps()
        )));
    }
    let dt = bundle.dt();
    let vol_dt = vol.times[1] - vol.times[0];
    if (vol_dt - dt).abs() > dt * T::lit(1e-9) {
        return Err(Error::GridMismatch(format!(
            "vol path step {vol_dt} differs from bundle step {dt}"
        )));
    }
    Ok(())
}

/// Simulates the distance to default of `asset_index` from `x0` along a
/// given volatility path; the path is absorbed at 0.
pub fn simulate_asset<T: Real>(
    coeffs: &CoefficientVector<T>,
    h: &LevelFunction<T>,
    x0: T,
    vol_path: &VolPath<T>,
    bundle: &NoiseBundle<T>,
    asset_index: usize,
) -> Result<AssetPathResult<T>> {
    coeffs.validate()?;
    h.validate()?;
    check_same_grid(vol_path, bundle)?;
    let n = bundle.n_steps();
    let mut path = vec![T::zero(); n + 1];
    if !(x0 > T::zero()) {
        return Ok(AssetPathResult {
            path,
            defaulted: true,
            default_time: Some(T::zero()),
            default_step: Some(0),
        });
    }
    let stepper = AssetStepper::new(coeffs, bundle.dt());
    let mut w = bundle.stream(asset_index, StreamKind::AssetW);
    let mut u = bundle.uniforms(asset_index);
    path[0] = x0;
    let mut x = x0;
    for k in 0..n {
        let hv = h.eval(vol_path.values[k]);
        match stepper.advance(x, hv, w.next_increment(), bundle.w0()[k], u.next_uniform()) {
            Some(next) => {
                x = next;
                path[k + 1] = x;
            }
            None => {
                return Ok(AssetPathResult {
                    path,
                    defaulted: true,
                    default_time: Some(vol_path.times[k + 1]),
                    default_step: Some(k + 1),
                });
            }
        }
    }
    Ok(AssetPathResult {
        path,
        defaulted: false,
        default_time: None,
        default_step: None,
    })
}
