//! Convergence experiments for both scalings, with the log-log fitter and
//! the two-sample KS machinery they report through.

mod crossval;
mod fit;
mod ks;
mod large;
mod small;

pub use crossval::{particle_spde_crossval, CrossvalReport, CrossvalSetup};
pub use fit::{fit_log_log, LogLogFit};
pub use ks::{ks_statistic, ks_two_sample, KsEntry};
pub use large::{strong_failure_study, weak_convergence_study, LargeStudy, PlateauReport};
pub use small::{
    loss_probability_error, small_volvol_field_rate, small_volvol_vol_rate, LossErrorReport,
    SmallStudy, XLevel,
};

use crate::error::{invalid, Result};
use crate::scalar::Real;

/// How the runs at different `eps` are coupled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Coupling {
    /// One noise bundle per outer draw shared by every `eps`.
    CommonNoise,
    /// Matched outer seeds, no pathwise coupling.
    MatchedSeeds,
}

/// Errors along an `eps` grid with a fitted power law.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport<T> {
    pub eps_grid: Vec<T>,
    pub errors: Vec<T>,
    pub std_errors: Vec<T>,
    /// `None` when some error is not positive.
    pub fit: Option<LogLogFit<T>>,
    pub coupling: Coupling,
    /// Errors decrease along the grid, each step allowed to rise by at most
    /// one combined standard error.
    pub monotone: bool,
}

impl<T: Real> RateReport<T> {
    pub(crate) fn new(eps_grid: &[T], errors: Vec<T>, std_errors: Vec<T>, coupling: Coupling) -> Self {
        let fit = fit_log_log(eps_grid, &errors).ok();
        let monotone = errors.windows(2).zip(std_errors.windows(2)).all(|(e, s)| {
            let tol = (s[0] * s[0] + s[1] * s[1]).sqrt();
            e[1] < e[0] + tol
        });
        Self {
            eps_grid: eps_grid.to_vec(),
            errors,
            std_errors,
            fit,
            coupling,
            monotone,
        }
    }

    /// Errors strictly decreasing along the grid, with no tolerance.
    pub fn strictly_decreasing(&self) -> bool {
        self.errors.windows(2).all(|e| e[1] < e[0])
    }

    pub fn slope(&self) -> Option<T> {
        self.fit.map(|f| f.slope)
    }
}

/// KS distances between the scaled model and its weak limit along the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct KsReport<T> {
    pub eps_grid: Vec<T>,
    pub entries: Vec<KsEntry<T>>,
    /// KS between two independent samples of the limit model.
    pub floor: KsEntry<T>,
    /// `ks[k+1] <= band_hi[k]` along the grid.
    pub nonincreasing: bool,
    /// Last KS below twice the floor.
    pub final_below_floor: bool,
}

impl<T: Real> KsReport<T> {
    pub(crate) fn new(eps_grid: &[T], entries: Vec<KsEntry<T>>, floor: KsEntry<T>) -> Self {
        let nonincreasing = entries
            .windows(2)
            .all(|w| w[1].statistic <= w[0].band_hi);
        let final_below_floor = entries
            .last()
            .map(|e| e.statistic < T::lit(2.0) * floor.statistic)
            .unwrap_or(false);
        Self {
            eps_grid: eps_grid.to_vec(),
            entries,
            floor,
            nonincreasing,
            final_below_floor,
        }
    }

    pub fn passed(&self) -> bool {
        self.nonincreasing && self.final_below_floor
    }
}

/// `eps` grids must be nonempty, positive and strictly decreasing.
pub fn validate_eps_grid<T: Real>(eps_grid: &[T]) -> Result<()> {
    if eps_grid.is_empty() {
        return Err(invalid("eps_grid", "grid is empty"));
    }
    if eps_grid.iter().any(|e| !(*e > T::zero())) {
        return Err(invalid("eps_grid", "every eps must be > 0"));
    }
    if eps_grid.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(invalid("eps_grid", "grid must be strictly decreasing"));
    }
    Ok(())
}

/// Uniform step no coarser than `eps_min / 50` that divides `t` exactly.
pub(crate) fn fine_steps<T: Real>(eps_min: T, t: T) -> Result<(T, usize)> {
    if !(t > T::zero()) {
        return Err(invalid("t", "evaluation time must be > 0"));
    }
    let target = eps_min / T::lit(50.0);
    let n = (t / target * T::lit(1.0 - 1e-12)).ceil().to_usize().unwrap_or(0).max(1);
    Ok((t / T::from_count(n), n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eps_grid_rules() {
        assert!(validate_eps_grid(&[0.2_f64, 0.1, 0.05]).is_ok());
        assert!(validate_eps_grid(&[0.1_f64, 0.2]).is_err());
        assert!(validate_eps_grid(&[0.1_f64, 0.1]).is_err());
        assert!(validate_eps_grid::<f64>(&[]).is_err());
        assert!(validate_eps_grid(&[0.1_f64, 0.0]).is_err());
    }

    #[test]
    fn fine_step_divides_horizon() {
        let (dt, n) = fine_steps(0.025_f64, 1.0).unwrap();
        assert_eq!(n, 2000);
        assert!((dt - 5e-4).abs() < 1e-15);
        let (dt, n) = fine_steps(0.03_f64, 1.0).unwrap();
        assert!(dt <= 0.03 / 50.0);
        assert!((dt * n as f64 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn monotone_flag_allows_one_standard_error() {
        let eps = [0.2_f64, 0.1, 0.05];
        let r = RateReport::new(&eps, vec![1.0, 1.05, 0.5], vec![0.1, 0.1, 0.1], Coupling::CommonNoise);
        assert!(r.monotone);
        assert!(!r.strictly_decreasing());
        let r = RateReport::new(&eps, vec![1.0, 1.5, 0.5], vec![0.1, 0.1, 0.1], Coupling::CommonNoise);
        assert!(!r.monotone);
    }
}
