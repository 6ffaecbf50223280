//! Volatility paths, absorbed distance-to-default paths and finite
//! portfolios sharing systemic noise.

mod asset;
mod portfolio;
mod vol;

pub use asset::{simulate_asset, AssetPathResult, AssetStepper};
pub use portfolio::{
    draw_initial_state, draw_rayleigh, loss_at_step, portfolio_default_steps,
    simulate_portfolio_loss, steps_for_times, Estimator, LossSample, PortfolioModel,
};
pub use vol::{draw_initial_vol, simulate_vol, VolPath, VolScheme, VolStepper};
