//! Long-run time averages of the unscaled volatility pair and the limit
//! constants built from them.
//!
//! Two volatility paths share `B0` through `rho2`. Each replica runs the pair
//! over `[0, T]`, discards the burn-in and splits the rest into batches; the
//! estimate is the mean of all batch means and its standard error comes from
//! their spread.

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::model::{
    check_drift_condition, check_pairwise_cir, default_probe_grid, CoefficientVector, InitialVolLaw, ScalingRegime,
    VolFunction, VolFunctionSpec,
};
use crate::noise::{sub_seed, NoiseBundle, StreamKind};
use crate::scalar::{mean, standard_error, Real};
use crate::sde::{draw_initial_vol, VolScheme, VolStepper};

/// Settings of a time-averaging run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErgodicConfig<T> {
    pub coeffs: CoefficientVector<T>,
    pub funcs: VolFunctionSpec<T>,
    pub scheme: VolScheme,
    pub dt: T,
    /// Horizon of each replica.
    pub horizon: T,
    /// Defaults to `10 / kappa`.
    pub burn_in: Option<T>,
    /// Independent replicas pooled into one estimate.
    pub replicas: usize,
    /// Batches per replica.
    pub batches: usize,
    /// Proceed (with a warning) when the recurrence condition cannot be verified.
    pub allow_unverified: bool,
}

impl<T: Real> ErgodicConfig<T> {
    pub fn new(coeffs: CoefficientVector<T>, funcs: VolFunctionSpec<T>, horizon: T) -> Self {
        let scheme = match funcs.g {
            VolFunction::ConstantOne => VolScheme::ExactOu,
            g => VolScheme::default_for(&g),
        };
        Self {
            coeffs,
            funcs,
            scheme,
            dt: T::lit(0.01),
            horizon,
            burn_in: None,
            replicas: 256,
            batches: 50,
            allow_unverified: false,
        }
    }

    pub fn burn_in(&self) -> T {
        self.burn_in.unwrap_or(T::lit(10.0) / self.coeffs.kappa)
    }

    fn validate(&self) -> Result<(usize, usize)> {
        self.coeffs.validate()?;
        self.funcs.validate()?;
        let burn = self.burn_in();
        if !(self.horizon > burn) {
            return Err(invalid(
                "T",
                format!("horizon {} must exceed the burn-in {burn}", self.horizon),
            ));
        }
        if !(self.dt > T::zero()) {
            return Err(invalid("dt", "time step must be > 0"));
        }
        if self.replicas == 0 || self.batches == 0 {
            return Err(invalid("replicas", "need at least one replica and one batch"));
        }
        let n_steps = (self.horizon / self.dt).round().to_usize().unwrap_or(0);
        let n_burn = (burn / self.dt).ceil().to_usize().unwrap_or(0);
        if n_steps <= n_burn || n_steps - n_burn < self.batches {
            return Err(invalid("T", "too few post-burn-in steps for the batch count"));
        }
        self.check_recurrence()?;
        Ok((n_steps, n_burn))
    }

    fn check_recurrence(&self) -> Result<()> {
        let g = &self.funcs.g;
        let verdict = if g.is_sqrt_like() {
            check_pairwise_cir(&[self.coeffs], g, T::epsilon()).map(|r| r.holds)
        } else {
            check_drift_condition(&self.coeffs, g, &default_probe_grid(&self.coeffs)).map(|r| r.holds)
        };
        match verdict {
            Ok(true) => Ok(()),
            Ok(false) | Err(_) if self.allow_unverified => {
                log::warn!("recurrence condition not verified for g = {}; continuing", g.name());
                Ok(())
            }
            Ok(false) => Err(Error::RecurrenceUnverified(format!(
                "recurrence condition fails for g = {} and {:?}",
                g.name(),
                self.coeffs
            ))),
            Err(e) => Err(Error::RecurrenceUnverified(e.to_string())),
        }
    }
}

/// A time average with its batch-means standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate<T> {
    pub value: T,
    pub std_error: T,
    pub n_batches: usize,
}

/// Runs the pair and returns one row of `k` batch-mean observables per batch,
/// replicas concatenated in order.
fn batch_means<T: Real, F>(cfg: &ErgodicConfig<T>, seed: u64, k: usize, observe: F) -> Result<Vec<Vec<T>>>
where
    F: Fn(T, T, &mut [T]) + Sync,
{
    let (n_steps, n_burn) = cfg.validate()?;
    let stepper = VolStepper::new(&cfg.coeffs, &cfg.funcs.g, &ScalingRegime::Unscaled, cfg.scheme, cfg.dt)?;
    let usable = n_steps - n_burn;
    let per_batch = usable / cfg.batches;
    let start = n_steps - per_batch * cfg.batches;
    let per_replica: Result<Vec<Vec<Vec<T>>>> = (0..cfg.replicas)
        .into_par_iter()
        .map(|rep| {
            let bundle = NoiseBundle::sample(sub_seed(seed, rep as u64), cfg.dt, n_steps, T::zero(), 2)?;
            let mut s = [T::zero(); 2];
            let mut streams = [bundle.stream(0, StreamKind::VolB), bundle.stream(1, StreamKind::VolB)];
            for (i, si) in s.iter_mut().enumerate() {
                *si = draw_initial_vol(&InitialVolLaw::Stationary, &cfg.coeffs, &cfg.funcs.g, &mut bundle.init_rng(i));
            }
            let mut rows = Vec::with_capacity(cfg.batches);
            let mut acc = vec![T::zero(); k];
            let mut obs = vec![T::zero(); k];
            let inv = T::one() / T::from_count(per_batch);
            for (n, &db0) in bundle.b0().iter().enumerate() {
                if n >= start {
                    observe(stepper.observe(s[0]), stepper.observe(s[1]), &mut obs);
                    for (a, o) in acc.iter_mut().zip(&obs) {
                        *a = *a + *o;
                    }
                    if (n + 1 - start) % per_batch == 0 {
                        rows.push(acc.iter().map(|&a| a * inv).collect());
                        acc.iter_mut().for_each(|a| *a = T::zero());
                    }
                }
                for (si, st) in s.iter_mut().zip(streams.iter_mut()) {
                    *si = stepper.advance(*si, stepper.driver(st.next_increment(), db0));
                }
                if !(s[0].is_finite() && s[1].is_finite()) {
                    return Err(Error::Blowup {
                        step: n + 1,
                        detail: format!("volatility pair diverged in replica {rep}"),
                    });
                }
            }
            Ok(rows)
        })
        .collect();
    Ok(per_replica?.into_iter().flatten().collect())
}

fn column<T: Real>(rows: &[Vec<T>], c: usize) -> Vec<T> {
    rows.iter().map(|r| r[c]).collect()
}

/// Time average of `f(sigma1, sigma2)` over the unscaled pair.
pub fn estimate_time_average<T: Real, F>(cfg: &ErgodicConfig<T>, seed: u64, f: F) -> Result<Estimate<T>>
where
    F: Fn(T, T) -> T + Sync,
{
    let rows = batch_means(cfg, seed, 1, |a, b, out| out[0] = f(a, b))?;
    let xs = column(&rows, 0);
    Ok(Estimate {
        value: mean(&xs),
        std_error: standard_error(&xs),
        n_batches: xs.len(),
    })
}

/// `E h`, `sqrt(E h^2)` and `sqrt(E h(s1) h(s2))` with standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryMoments<T> {
    pub sigma11: T,
    pub sigma21: T,
    pub sigma_tilde: T,
    pub se11: T,
    pub se21: T,
    pub se_tilde: T,
    /// Standard error of `sigma_tilde - sigma11` from paired batches.
    pub se_tilde_minus_11: T,
    /// Standard error of `sigma21 - sigma_tilde` from paired batches.
    pub se_21_minus_tilde: T,
    pub horizon: T,
    pub burn_in: T,
    pub replicas: usize,
    pub n_batches: usize,
}

impl<T: Real> StationaryMoments<T> {
    /// Exact moments of a model whose `h(sigma)` is the constant `c`.
    pub fn degenerate(c: T) -> Self {
        Self {
            sigma11: c,
            sigma21: c,
            sigma_tilde: c,
            se11: T::zero(),
            se21: T::zero(),
            se_tilde: T::zero(),
            se_tilde_minus_11: T::zero(),
            se_21_minus_tilde: T::zero(),
            horizon: T::zero(),
            burn_in: T::zero(),
            replicas: 0,
            n_batches: 0,
        }
    }
}

/// Estimates all three constants from one coupled pair simulation per replica.
///
/// `sigma11` and `sigma21` pool both paths, so the sample version of
/// `E[h h] <= sigma21^2` holds exactly.
pub fn estimate_stationary_moments<T: Real>(cfg: &ErgodicConfig<T>, seed: u64) -> Result<StationaryMoments<T>> {
    let h = cfg.funcs.h;
    let half = T::lit(0.5);
    let rows = batch_means(cfg, seed, 3, |a, b, out| {
        let (ha, hb) = (h.eval(a), h.eval(b));
        out[0] = half * (ha + hb);
        out[1] = half * (ha * ha + hb * hb);
        out[2] = ha * hb;
    })?;
    let m1 = column(&rows, 0);
    let m2 = column(&rows, 1);
    let m12 = column(&rows, 2);
    let sigma11 = mean(&m1);
    let sigma21 = mean(&m2).max(T::zero()).sqrt();
    let sigma_tilde = mean(&m12).max(T::zero()).sqrt();
    let two = T::lit(2.0);
    let lin = |x: T| if x > T::zero() { T::one() / (two * x) } else { T::zero() };
    let (l21, lt) = (lin(sigma21), lin(sigma_tilde));
    let d1: Vec<T> = rows.iter().map(|r| r[2] * lt - r[0]).collect();
    let d2: Vec<T> = rows.iter().map(|r| r[1] * l21 - r[2] * lt).collect();
    Ok(StationaryMoments {
        sigma11,
        sigma21,
        sigma_tilde,
        se11: standard_error(&m1),
        se21: standard_error(&m2) * l21,
        se_tilde: standard_error(&m12) * lt,
        se_tilde_minus_11: standard_error(&d1),
        se_21_minus_tilde: standard_error(&d2),
        horizon: cfg.horizon,
        burn_in: cfg.burn_in(),
        replicas: cfg.replicas,
        n_batches: rows.len(),
    })
}

/// Correlations of the two constant-volatility limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitCorrelations<T> {
    /// `rho1 sigma_tilde / sigma21`: weak limit of the loss.
    pub rho_tilde: T,
    /// `rho1 sigma11 / sigma21`: limit of the SPDE noise coefficient.
    pub rho_prime: T,
    pub se_rho_tilde: T,
    pub se_rho_prime: T,
}

pub fn derive_limit_correlations<T: Real>(m: &StationaryMoments<T>, rho1: T) -> Result<LimitCorrelations<T>> {
    if !(m.sigma21 > T::zero()) {
        return Err(invalid("sigma21", "second moment of h must be positive"));
    }
    if !(rho1 >= T::zero() && rho1 < T::one()) {
        return Err(invalid("rho1", format!("rho1 must lie in [0,1), got {rho1}")));
    }
    let s = m.sigma21;
    let ratio_se = |num: T, se_num: T| {
        let a = se_num / s;
        let b = num * m.se21 / (s * s);
        rho1 * (a * a + b * b).sqrt()
    };
    Ok(LimitCorrelations {
        rho_tilde: rho1 * m.sigma_tilde / s,
        rho_prime: rho1 * m.sigma11 / s,
        se_rho_tilde: ratio_se(m.sigma_tilde, m.se_tilde),
        se_rho_prime: ratio_se(m.sigma11, m.se11),
    })
}
