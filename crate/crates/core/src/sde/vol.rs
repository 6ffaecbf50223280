use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::model::{
    stationary_law, CoefficientVector, InitialVolLaw, ScalingRegime, StationaryLaw, VolFunction,
};
use crate::noise::{NoiseBundle, StreamKind};
use crate::scalar::Real;

/// Discretisation of the volatility equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VolScheme {
    Euler,
    /// Euler with `x+` inside `g` and the drift; observed values are `x+`.
    FullTruncationEuler,
    /// Exact Gaussian transition; only for `g = 1`.
    ExactOu,
}

impl VolScheme {
    /// Natural scheme for a given `g`.
    pub fn default_for<T: Real>(g: &VolFunction<T>) -> Self {
        if g.is_sqrt_like() {
            VolScheme::FullTruncationEuler
        } else {
            VolScheme::Euler
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            VolScheme::Euler => "euler",
            VolScheme::FullTruncationEuler => "full_truncation_euler",
            VolScheme::ExactOu => "exact_ou",
        }
    }
}

/// A simulated volatility path on the bundle grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VolPath<T> {
    pub times: Vec<T>,
    pub values: Vec<T>,
    pub regime: ScalingRegime<T>,
    pub scheme: VolScheme,
}

/// One-step update of the regime-scaled volatility equation, with all
/// per-step constants precomputed.
#[derive(Debug, Clone, Copy)]
pub struct VolStepper<T> {
    scheme: VolScheme,
    g: VolFunction<T>,
    kappa_dt: T,
    theta: T,
    xi: T,
    rho2: T,
    rho2c: T,
    decay: T,
    exact_sd_per_unit: T,
}

impl<T: Real> VolStepper<T> {
    pub fn new(
        coeffs: &CoefficientVector<T>,
        g: &VolFunction<T>,
        regime: &ScalingRegime<T>,
        scheme: VolScheme,
        dt: T,
    ) -> Result<Self> {
        regime.validate()?;
        regime.check_dt(dt)?;
        if scheme == VolScheme::ExactOu && *g != VolFunction::ConstantOne {
            return Err(invalid("scheme", "exact_ou requires g = constant_one"));
        }
        let eff = regime.apply(coeffs);
        let decay = (-eff.kappa * dt).exp();
        // exact OU: sd of the transition divided by sqrt(dt), applied to the
        // normalised composite increment
        let var = eff.xi * eff.xi * (T::one() - decay * decay) / (T::lit(2.0) * eff.kappa);
        Ok(Self {
            scheme,
            g: *g,
            kappa_dt: eff.kappa * dt,
            theta: eff.theta,
            xi: eff.xi,
            rho2: eff.rho2,
            rho2c: (T::one() - eff.rho2 * eff.rho2).sqrt(),
            decay,
            exact_sd_per_unit: (var / dt).sqrt(),
        })
    }

    /// Composite driver `sqrt(1 - rho2^2) dB^i + rho2 dB0`.
    #[inline]
    pub fn driver(&self, db_idio: T, db_sys: T) -> T {
        self.rho2c * db_idio + self.rho2 * db_sys
    }

    /// Advances the internal state by one step given the composite increment.
    #[inline]
    pub fn advance(&self, x: T, db: T) -> T {
        match self.scheme {
            VolScheme::Euler => x + self.kappa_dt * (self.theta - x) + self.xi * self.g.eval(x) * db,
            VolScheme::FullTruncationEuler => {
                let xp = x.positive_part();
                x + self.kappa_dt * (self.theta - xp) + self.xi * self.g.eval(xp) * db
            }
            VolScheme::ExactOu => {
                self.theta + (x - self.theta) * self.decay + self.exact_sd_per_unit * db
            }
        }
    }

    /// Volatility level seen by `h` for an internal state.
    #[inline]
    pub fn observe(&self, x: T) -> T {
        match self.scheme {
            VolScheme::FullTruncationEuler => x.positive_part(),
            _ => x,
        }
    }
}

/// Draws an initial volatility from `law` for effective coefficients `eff`.
///
/// Stationary start uses the closed-form law when one exists (OU, CIR) and
/// falls back to `theta`.
pub fn draw_initial_vol<T: Real, R: Rng + ?Sized>(
    law: &InitialVolLaw<T>,
    eff: &CoefficientVector<T>,
    g: &VolFunction<T>,
    rng: &mut R,
) -> T {
    match law {
        InitialVolLaw::Fixed(x) => *x,
        InitialVolLaw::Stationary => match stationary_law(eff, g) {
            Some(StationaryLaw::Normal { mean, sd }) => {
                let z: f64 = rng.sample(StandardNormal);
                mean + sd * T::lit(z)
            }
            Some(StationaryLaw::Gamma { shape, scale }) => {
                match Gamma::new(shape.as_f64(), scale.as_f64()) {
                    Ok(d) => T::lit(d.sample(rng)),
                    Err(_) => eff.theta,
                }
            }
            Some(StationaryLaw::PointMass(x)) => x,
            None => eff.theta,
        },
    }
}

/// Simulates the volatility of `asset_index` on the bundle grid, starting
/// from `sigma0`.
pub fn simulate_vol<T: Real>(
    coeffs: &CoefficientVector<T>,
    g: &VolFunction<T>,
    regime: &ScalingRegime<T>,
    bundle: &NoiseBundle<T>,
    asset_index: usize,
    scheme: VolScheme,
    sigma0: T,
) -> Result<VolPath<T>> {
    coeffs.validate()?;
    g.validate()?;
    let stepper = VolStepper::new(coeffs, g, regime, scheme, bundle.dt())?;
    let mut stream = bundle.stream(asset_index, StreamKind::VolB);
    let n = bundle.n_steps();
    let mut values = Vec::with_capacity(n + 1);
    let mut x = sigma0;
    values.push(stepper.observe(x));
    for (k, &db0) in bundle.b0().iter().enumerate() {
        let db = stepper.driver(stream.next_increment(), db0);
        x = stepper.advance(x, db);
        if !x.is_finite() {
            return Err(Error::Blowup {
                step: k + 1,
                detail: "volatility is not finite".into(),
            });
        }
        values.push(stepper.observe(x));
    }
    Ok(VolPath {
        times: bundle.times(),
        values,
        regime: *regime,
        scheme,
    })
}
