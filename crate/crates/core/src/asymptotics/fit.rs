use crate::error::{invalid, Result};
use crate::scalar::Real;

/// Least-squares line through `(ln eps, ln error)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLogFit<T> {
    pub slope: T,
    pub intercept: T,
    pub r2: T,
}

pub fn fit_log_log<T: Real>(eps_grid: &[T], errors: &[T]) -> Result<LogLogFit<T>> {
    if eps_grid.len() != errors.len() {
        return Err(invalid("errors", "one error per grid point is required"));
    }
    if eps_grid.len() < 3 {
        return Err(invalid("eps_grid", "need at least three points"));
    }
    if let Some(e) = eps_grid.iter().chain(errors).find(|v| !(**v > T::zero())) {
        return Err(invalid("errors", format!("values must be positive, got {e}")));
    }
    let xs: Vec<T> = eps_grid.iter().map(|e| e.ln()).collect();
    let ys: Vec<T> = errors.iter().map(|e| e.ln()).collect();
    let n = T::from_count(xs.len());
    let mx = xs.iter().copied().sum::<T>() / n;
    let my = ys.iter().copied().sum::<T>() / n;
    let sxx: T = xs.iter().map(|x| (*x - mx) * (*x - mx)).sum();
    let sxy: T = xs.iter().zip(&ys).map(|(x, y)| (*x - mx) * (*y - my)).sum();
    if !(sxx > T::zero()) {
        return Err(invalid("eps_grid", "grid points must not all coincide"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: T = ys.iter().map(|y| (*y - my) * (*y - my)).sum();
    let ss_res: T = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let e = *y - (intercept + slope * *x);
            e * e
        })
        .sum();
    let r2 = if ss_tot > T::zero() {
        T::one() - ss_res / ss_tot
    } else {
        T::one()
    };
    Ok(LogLogFit {
        slope,
        intercept,
        r2,
    })
}
