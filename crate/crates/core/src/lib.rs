//! Large-portfolio credit model with fast mean-reverting stochastic
//! volatility: simulators, an SPDE solver for the loss, ergodic estimators
//! of the limit constants and convergence studies for both scalings.
//!
//! Numerical kernels are generic over [`Real`] (`f32` or `f64`); the
//! aliases at the bottom of this file fix `f64`, which the studies and the
//! command-line tool use.

pub mod asymptotics;
pub mod ergodic;
mod error;
pub mod model;
pub mod noise;
mod scalar;
pub mod sde;
pub mod spde;

pub use error::{Error, Result};
pub use scalar::{mean, sample_variance, standard_error, Real};

pub type Coefficients64 = model::CoefficientVector<f64>;
pub type VolFunctions64 = model::VolFunctionSpec<f64>;
pub type Regime64 = model::ScalingRegime<f64>;
pub type Market64 = model::MarketConfig<f64>;
pub type Bundle64 = noise::NoiseBundle<f64>;
pub type VolPath64 = sde::VolPath<f64>;
pub type AssetPath64 = sde::AssetPathResult<f64>;
pub type Portfolio64 = sde::PortfolioModel<f64>;
pub type Grid64 = spde::SpatialGrid<f64>;
pub type DensityField64 = spde::DensityField<f64>;
pub type SurvivalField64 = spde::SurvivalField<f64>;
pub type Moments64 = ergodic::StationaryMoments<f64>;
pub type RateReport64 = asymptotics::RateReport<f64>;
pub type KsReport64 = asymptotics::KsReport<f64>;
