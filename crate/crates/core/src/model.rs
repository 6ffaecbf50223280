//! Model parameters, the functional forms of the volatility coefficient `g`
//! and the level map `h`, the two fast mean-reversion scalings, and the
//! executable recurrence / Feller condition checks.

use std::fmt;

use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

/// Per-asset coefficients `(r, rho1, rho2, kappa, theta, xi)`.
///
/// `rho1` couples the asset to the market Brownian motion `W0`, `rho2`
/// couples the volatility to `B0`. `xi` is the vol-of-vol, written `v` when
/// the large vol-of-vol scaling is in force.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientVector<T> {
    pub r: T,
    pub rho1: T,
    pub rho2: T,
    pub kappa: T,
    pub theta: T,
    pub xi: T,
}

impl<T: Real> CoefficientVector<T> {
    pub fn new(r: T, rho1: T, rho2: T, kappa: T, theta: T, xi: T) -> Result<Self> {
        let c = Self {
            r,
            rho1,
            rho2,
            kappa,
            theta,
            xi,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name, v: T| {
            if v >= T::zero() && v < T::one() {
                Ok(())
            } else {
                Err(invalid(name, format!("{name} must lie in [0,1), got {v}")))
            }
        };
        unit("rho1", self.rho1)?;
        unit("rho2", self.rho2)?;
        if !(self.kappa > T::zero()) {
            return Err(invalid("kappa", format!("kappa must be > 0, got {}", self.kappa)));
        }
        if !(self.xi >= T::zero()) {
            return Err(invalid("xi", format!("xi must be >= 0, got {}", self.xi)));
        }
        if !self.r.is_finite() || !self.theta.is_finite() {
            return Err(invalid("r/theta", "must be finite"));
        }
        Ok(())
    }

    fn as_array(&self) -> [T; 6] {
        [self.r, self.rho1, self.rho2, self.kappa, self.theta, self.xi]
    }

    /// Sup-norm distance between two coefficient vectors.
    pub fn distance_inf(&self, other: &Self) -> T {
        self.as_array()
            .iter()
            .zip(other.as_array().iter())
            .map(|(a, b)| (*a - *b).abs())
            .fold(T::zero(), T::max)
    }
}

/// Capability needed by the Prop.-2.2-type drift condition: value and the
/// first two derivatives of `g`, plus a positive lower bound.
pub trait SmoothVolFunction<T: Real> {
    fn value(&self, x: T) -> T;
    /// `None` when `g` is not differentiable somewhere on the real line.
    fn derivative(&self, x: T) -> Option<T>;
    fn second_derivative(&self, x: T) -> Option<T>;
    /// Claimed global lower bound `c_g`, if any.
    fn lower_bound(&self) -> Option<T>;
    fn describe(&self) -> String;
}

/// The diffusion coefficient `g` of the volatility equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VolFunction<T> {
    /// `g = 1`: Ornstein-Uhlenbeck volatility.
    ConstantOne,
    /// `g = sqrt(|x|)`: CIR volatility.
    CirSqrt,
    /// `g = sqrt(|x|) * gt(x)` with `gt(x) = c_g + (1 - c_g) / (1 + exp(-steepness * x))`,
    /// a smooth increasing damping factor with range in `[c_g, 1]`.
    DampedSqrt { c_g: T, steepness: T },
}

impl<T: Real> VolFunction<T> {
    pub fn validate(&self) -> Result<()> {
        if let VolFunction::DampedSqrt { c_g, steepness } = *self {
            if !(c_g > T::zero() && c_g <= T::one()) {
                return Err(invalid("c_g", format!("c_g must lie in (0,1], got {c_g}")));
            }
            if !(steepness > T::zero()) {
                return Err(invalid("steepness", "must be > 0"));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn eval(&self, x: T) -> T {
        match *self {
            VolFunction::ConstantOne => T::one(),
            VolFunction::CirSqrt => x.abs().sqrt(),
            VolFunction::DampedSqrt { c_g, steepness } => {
                let damp = c_g + (T::one() - c_g) / (T::one() + (-steepness * x).exp());
                x.abs().sqrt() * damp
            }
        }
    }

    /// True for the square-root family (CIR-like), where Feller and the
    /// pairwise recurrence condition are the relevant checks.
    pub fn is_sqrt_like(&self) -> bool {
        matches!(self, VolFunction::CirSqrt | VolFunction::DampedSqrt { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            VolFunction::ConstantOne => "constant_one",
            VolFunction::CirSqrt => "cir_sqrt",
            VolFunction::DampedSqrt { .. } => "damped_sqrt",
        }
    }
}

impl<T: Real> SmoothVolFunction<T> for VolFunction<T> {
    fn value(&self, x: T) -> T {
        self.eval(x)
    }

    fn derivative(&self, _x: T) -> Option<T> {
        match self {
            VolFunction::ConstantOne => Some(T::zero()),
            _ => None,
        }
    }

    fn second_derivative(&self, _x: T) -> Option<T> {
        match self {
            VolFunction::ConstantOne => Some(T::zero()),
            _ => None,
        }
    }

    fn lower_bound(&self) -> Option<T> {
        match self {
            VolFunction::ConstantOne => Some(T::one()),
            _ => None,
        }
    }

    fn describe(&self) -> String {
        self.name().to_string()
    }
}

/// The level map `h` turning the volatility state into the asset's
/// instantaneous volatility.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LevelFunction<T> {
    Identity,
    SqrtAbs,
    /// `h(x) = h_min + (h_max - h_min) / (1 + exp(-x))`.
    BoundedSigmoid { h_min: T, h_max: T },
    /// Constant volatility, used for limit models and degenerate checks.
    Constant(T),
}

impl<T: Real> LevelFunction<T> {
    pub fn validate(&self) -> Result<()> {
        match *self {
            LevelFunction::BoundedSigmoid { h_min, h_max } => {
                if !(h_min > T::zero() && h_max >= h_min) {
                    return Err(invalid(
                        "h",
                        format!("bounded_sigmoid needs 0 < h_min <= h_max, got ({h_min}, {h_max})"),
                    ));
                }
            }
            LevelFunction::Constant(c) => {
                if !(c >= T::zero()) {
                    return Err(invalid("h", "constant level must be >= 0"));
                }
            }
            _ => {}
        }
        Ok(())
    }

    #[inline]
    pub fn eval(&self, x: T) -> T {
        match *self {
            LevelFunction::Identity => x,
            LevelFunction::SqrtAbs => x.abs().sqrt(),
            LevelFunction::BoundedSigmoid { h_min, h_max } => {
                h_min + (h_max - h_min) / (T::one() + (-x).exp())
            }
            LevelFunction::Constant(c) => c,
        }
    }

    /// Global bound `sup |h|`, when one exists.
    pub fn upper_bound(&self) -> Option<T> {
        match *self {
            LevelFunction::BoundedSigmoid { h_max, .. } => Some(h_max),
            LevelFunction::Constant(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_bounded(&self) -> bool {
        self.upper_bound().is_some()
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, LevelFunction::Constant(_))
    }

    pub fn name(&self) -> &'static str {
        match self {
            LevelFunction::Identity => "identity",
            LevelFunction::SqrtAbs => "sqrt_abs",
            LevelFunction::BoundedSigmoid { .. } => "bounded_sigmoid",
            LevelFunction::Constant(_) => "constant",
        }
    }
}

/// The pair `(g, h)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolFunctionSpec<T> {
    pub g: VolFunction<T>,
    pub h: LevelFunction<T>,
}

impl<T: Real> VolFunctionSpec<T> {
    pub fn validate(&self) -> Result<()> {
        self.g.validate()?;
        self.h.validate()
    }
}

/// Fast mean-reversion scalings of the volatility equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalingRegime<T> {
    Unscaled,
    /// `(kappa, xi) -> (kappa / eps, xi / sqrt(eps))`.
    LargeVolOfVol { epsilon: T },
    /// `(kappa, xi) -> (kappa / eps, xi)`.
    SmallVolOfVol { epsilon: T },
}

impl<T: Real> ScalingRegime<T> {
    pub fn validate(&self) -> Result<()> {
        match self.epsilon() {
            Some(e) if !(e > T::zero()) => {
                Err(invalid("epsilon", format!("epsilon must be > 0, got {e}")))
            }
            _ => Ok(()),
        }
    }

    pub fn epsilon(&self) -> Option<T> {
        match *self {
            ScalingRegime::Unscaled => None,
            ScalingRegime::LargeVolOfVol { epsilon } | ScalingRegime::SmallVolOfVol { epsilon } => {
                Some(epsilon)
            }
        }
    }

    /// Effective coefficients of the scaled volatility equation.
    pub fn apply(&self, c: &CoefficientVector<T>) -> CoefficientVector<T> {
        let mut out = *c;
        match *self {
            ScalingRegime::Unscaled => {}
            ScalingRegime::LargeVolOfVol { epsilon } => {
                out.kappa = c.kappa / epsilon;
                out.xi = c.xi / epsilon.sqrt();
            }
            ScalingRegime::SmallVolOfVol { epsilon } => {
                out.kappa = c.kappa / epsilon;
            }
        }
        out
    }

    /// Largest admissible time step, `eps / 50` for the scaled regimes.
    pub fn max_dt(&self) -> Option<T> {
        self.epsilon().map(|e| e / T::lit(50.0))
    }

    pub fn check_dt(&self, dt: T) -> Result<()> {
        if let Some(max_dt) = self.max_dt() {
            // relative slack so that dt = eps/50 computed elsewhere passes
            if dt > max_dt * T::lit(1.0 + 1e-9) {
                return Err(Error::StepTooCoarse {
                    dt: dt.as_f64(),
                    epsilon: self.epsilon().unwrap().as_f64(),
                    required: max_dt.as_f64(),
                });
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            ScalingRegime::Unscaled => "unscaled",
            ScalingRegime::LargeVolOfVol { .. } => "large_vol_of_vol",
            ScalingRegime::SmallVolOfVol { .. } => "small_vol_of_vol",
        }
    }
}

impl<T: Real> fmt::Display for ScalingRegime<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.epsilon() {
            Some(e) => write!(f, "{}(eps={})", self.name(), e),
            None => f.write_str(self.name()),
        }
    }
}

/// Law of the initial volatility state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialVolLaw<T> {
    /// Stationary law of the (scaled) volatility equation when it is known in
    /// closed form (OU, CIR); `theta` otherwise.
    Stationary,
    Fixed(T),
}

/// Systemic-noise correlation, initial laws and horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketConfig<T> {
    /// Correlation of `W0` and `B0`.
    pub rho3: T,
    /// Scale of the Rayleigh law of the initial distance to default.
    pub beta: T,
    pub initial_vol: InitialVolLaw<T>,
    pub horizon: T,
}

impl<T: Real> MarketConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho3 >= -T::one() && self.rho3 <= T::one()) {
            return Err(invalid("rho3", format!("rho3 must lie in [-1,1], got {}", self.rho3)));
        }
        if !(self.beta > T::zero()) {
            return Err(invalid("beta", "Rayleigh scale must be > 0"));
        }
        if !(self.horizon > T::zero()) {
            return Err(invalid("T", "horizon must be > 0"));
        }
        Ok(())
    }

    /// The large vol-of-vol limit separates time scales only for `rho3 = 0`.
    pub fn check_regime(&self, regime: &ScalingRegime<T>) -> Result<()> {
        if matches!(regime, ScalingRegime::LargeVolOfVol { .. }) && self.rho3 != T::zero() {
            return Err(invalid(
                "rho3",
                format!("large_vol_of_vol requires rho3 = 0, got {}", self.rho3),
            ));
        }
        Ok(())
    }
}

/// Closed-form stationary law of the volatility equation, when available.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StationaryLaw<T> {
    Normal { mean: T, sd: T },
    Gamma { shape: T, scale: T },
    PointMass(T),
}

impl<T: Real> StationaryLaw<T> {
    pub fn mean(&self) -> T {
        match *self {
            StationaryLaw::Normal { mean, .. } => mean,
            StationaryLaw::Gamma { shape, scale } => shape * scale,
            StationaryLaw::PointMass(x) => x,
        }
    }
}

/// Stationary law for effective (already scaled) coefficients.
pub fn stationary_law<T: Real>(
    effective: &CoefficientVector<T>,
    g: &VolFunction<T>,
) -> Option<StationaryLaw<T>> {
    if effective.xi == T::zero() {
        return Some(StationaryLaw::PointMass(effective.theta));
    }
    let two = T::lit(2.0);
    match g {
        VolFunction::ConstantOne => Some(StationaryLaw::Normal {
            mean: effective.theta,
            sd: effective.xi / (two * effective.kappa).sqrt(),
        }),
        VolFunction::CirSqrt if effective.theta > T::zero() => {
            let xi2 = effective.xi * effective.xi;
            Some(StationaryLaw::Gamma {
                shape: two * effective.kappa * effective.theta / xi2,
                scale: xi2 / (two * effective.kappa),
            })
        }
        _ => None,
    }
}

/// Outcome of a condition check on a finite set of probe points or pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport<T> {
    pub holds: bool,
    pub checked: usize,
    pub violation: Option<Violation<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation<T> {
    /// The drift inequality fails at this volatility level.
    Inequality { x: T, lhs: T, rhs: T },
    /// `g` falls below its lower bound (or the bound is not positive).
    LowerBound { x: T, value: T },
    /// `kappa_i / xi_j^2` does not exceed the threshold.
    Threshold { i: usize, j: usize, ratio: T },
    /// The two coefficient vectors are not `eta`-close.
    Distance { i: usize, j: usize, distance: T },
}

/// Threshold `1/4 + 1/sqrt(2)` of the pairwise CIR recurrence condition.
pub fn pairwise_cir_threshold<T: Real>() -> T {
    T::lit(0.25) + T::FRAC_1_SQRT_2()
}

/// Default probe grid: `10^4` points on `[theta - 10 xi, theta + 10 xi]`.
pub fn default_probe_grid<T: Real>(c: &CoefficientVector<T>) -> Vec<T> {
    let half = T::lit(10.0) * c.xi.max(T::lit(0.1));
    let n = 10_000;
    let lo = c.theta - half;
    let step = (half + half) / T::from_count(n - 1);
    (0..n).map(|k| lo + step * T::from_count(k)).collect()
}

/// Checks `g'(x) kappa (theta - x) < kappa g(x) + (xi/2) g''(x) g(x)^2` and
/// the positive lower bound of `g` at every probe point.
pub fn check_drift_condition<T: Real, G: SmoothVolFunction<T> + ?Sized>(
    coeffs: &CoefficientVector<T>,
    g: &G,
    probe_grid: &[T],
) -> Result<ConditionReport<T>> {
    if !(coeffs.kappa > T::zero()) {
        return Err(invalid("kappa", format!("kappa must be > 0, got {}", coeffs.kappa)));
    }
    if probe_grid.is_empty() {
        return Err(Error::Empty("probe grid"));
    }
    let c_g = g.lower_bound();
    let half = T::lit(0.5);
    for &x in probe_grid {
        let (d1, d2) = match (g.derivative(x), g.second_derivative(x)) {
            (Some(d1), Some(d2)) => (d1, d2),
            _ => {
                return Err(Error::NotApplicable {
                    check: "drift",
                    reason: format!(
                        "g = {} is not twice differentiable on the real line (sqrt kink at 0); use the pairwise CIR check",
                        g.describe()
                    ),
                })
            }
        };
        let gx = g.value(x);
        let bound_ok = match c_g {
            Some(c) => c > T::zero() && gx >= c,
            None => gx > T::zero(),
        };
        if !bound_ok {
            return Ok(ConditionReport {
                holds: false,
                checked: probe_grid.len(),
                violation: Some(Violation::LowerBound { x, value: gx }),
            });
        }
        let lhs = d1 * coeffs.kappa * (coeffs.theta - x);
        let rhs = coeffs.kappa * gx + half * coeffs.xi * d2 * gx * gx;
        if !(lhs < rhs) {
            return Ok(ConditionReport {
                holds: false,
                checked: probe_grid.len(),
                violation: Some(Violation::Inequality { x, lhs, rhs }),
            });
        }
    }
    Ok(ConditionReport {
        holds: true,
        checked: probe_grid.len(),
        violation: None,
    })
}

/// Pairwise condition for square-root volatility: every ordered pair must
/// satisfy `kappa_i / xi_j^2 > 1/4 + 1/sqrt(2)` and be `eta`-close.
///
/// `eta` is caller-supplied; passing says nothing about whether that `eta`
/// is small enough for recurrence to follow.
pub fn check_pairwise_cir<T: Real>(
    coeffs_list: &[CoefficientVector<T>],
    g: &VolFunction<T>,
    eta: T,
) -> Result<ConditionReport<T>> {
    if !g.is_sqrt_like() {
        return Err(Error::NotApplicable {
            check: "pairwise_cir",
            reason: format!("g = {} is not of square-root type", g.name()),
        });
    }
    if coeffs_list.is_empty() {
        return Err(Error::Empty("coefficient list"));
    }
    if !(eta > T::zero()) {
        return Err(invalid("eta", "closeness tolerance must be > 0"));
    }
    let threshold = pairwise_cir_threshold::<T>();
    let mut checked = 0;
    for (i, ci) in coeffs_list.iter().enumerate() {
        for (j, cj) in coeffs_list.iter().enumerate() {
            checked += 1;
            let ratio = ci.kappa / (cj.xi * cj.xi);
            if !(ratio > threshold) {
                return Ok(ConditionReport {
                    holds: false,
                    checked,
                    violation: Some(Violation::Threshold { i, j, ratio }),
                });
            }
            let distance = ci.distance_inf(cj);
            if !(distance < eta) {
                return Ok(ConditionReport {
                    holds: false,
                    checked,
                    violation: Some(Violation::Distance { i, j, distance }),
                });
            }
        }
    }
    Ok(ConditionReport {
        holds: true,
        checked,
        violation: None,
    })
}

/// Feller condition `2 kappa theta >= xi^2` (boundary included, with a warning).
pub fn check_feller<T: Real>(coeffs: &CoefficientVector<T>) -> bool {
    let lhs = T::lit(2.0) * coeffs.kappa * coeffs.theta;
    let rhs = coeffs.xi * coeffs.xi;
    if lhs == rhs {
        log::warn!("Feller condition holds with equality (2 kappa theta = xi^2 = {rhs})");
    }
    lhs >= rhs
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> CoefficientVector<f64> {
        CoefficientVector::new(0.05, 0.5, 0.5, 2.0, 0.3, 0.5).unwrap()
    }

    #[test]
    fn coefficient_invariants() {
        assert!(CoefficientVector::new(0.0, 1.0, 0.0, 1.0, 0.3, 0.5).is_err());
        assert!(CoefficientVector::new(0.0, 0.0, 1.0, 1.0, 0.3, 0.5).is_err());
        assert!(CoefficientVector::new(0.0, -0.1, 0.0, 1.0, 0.3, 0.5).is_err());
        assert!(CoefficientVector::new(0.0, 0.0, 0.0, 0.0, 0.3, 0.5).is_err());
        assert!(CoefficientVector::new(0.0, 0.0, 0.0, 1.0, 0.3, -0.5).is_err());
        assert!(CoefficientVector::new(0.0, 0.0, 0.0, 1.0, 0.3, 0.0).is_ok());
    }

    #[test]
    fn drift_condition_constant_one_holds() {
        let c = base();
        let r = check_drift_condition(&c, &VolFunction::ConstantOne, &default_probe_grid(&c)).unwrap();
        assert!(r.holds);
        assert_eq!(r.checked, 10_000);
    }

    #[test]
    fn drift_condition_rejects_zero_kappa() {
        let mut c = base();
        c.kappa = 0.0;
        let err = check_drift_condition(&c, &VolFunction::ConstantOne, &[0.0]).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter { name: "kappa", .. }));
    }

    #[test]
    fn drift_condition_rejects_sqrt_kinds() {
        let c = base();
        for g in [
            VolFunction::CirSqrt,
            VolFunction::DampedSqrt {
                c_g: 0.5,
                steepness: 1.0,
            },
        ] {
            let err = check_drift_condition(&c, &g, &[0.1, 0.2]).unwrap_err();
            assert!(matches!(err, Error::NotApplicable { .. }));
        }
    }

    #[test]
    fn pairwise_cir_examples() {
        let g = VolFunction::CirSqrt;
        let one = CoefficientVector::new(0.0, 0.0, 0.0, 1.0, 0.3, 1.0).unwrap();
        assert!(check_pairwise_cir(&[one], &g, 1e-6).unwrap().holds);

        let weak = CoefficientVector::new(0.0, 0.0, 0.0, 0.9, 0.3, 1.0).unwrap();
        let r = check_pairwise_cir(&[weak], &g, 1e-6).unwrap();
        assert!(!r.holds);
        assert!(matches!(r.violation, Some(Violation::Threshold { .. })));

        let c = CoefficientVector::new(0.0, 0.0, 0.0, 2.0, 0.3, 0.5).unwrap();
        let r = check_pairwise_cir(&[c, c], &g, 0.1).unwrap();
        assert!(r.holds);
        assert_eq!(r.checked, 4);
    }

    #[test]
    fn pairwise_cir_errors() {
        assert!(matches!(
            check_pairwise_cir::<f64>(&[], &VolFunction::CirSqrt, 0.1),
            Err(Error::Empty(_))
        ));
        assert!(matches!(
            check_pairwise_cir(&[base()], &VolFunction::ConstantOne, 0.1),
            Err(Error::NotApplicable { .. })
        ));
    }

    #[test]
    fn pairwise_cir_distance_violation() {
        let a = CoefficientVector::new(0.0, 0.0, 0.0, 2.0, 0.3, 0.5).unwrap();
        let mut b = a;
        b.theta = 0.5;
        let r = check_pairwise_cir(&[a, b], &VolFunction::CirSqrt, 0.1).unwrap();
        assert!(!r.holds);
        assert!(matches!(r.violation, Some(Violation::Distance { .. })));
    }

    #[test]
    fn feller_examples() {
        let c = CoefficientVector::new(0.0, 0.0, 0.0, 2.0, 0.3, 0.5).unwrap();
        assert!(check_feller(&c));
        let c = CoefficientVector::new(0.0, 0.0, 0.0, 0.1, 0.1, 1.0).unwrap();
        assert!(!check_feller(&c));
        let c = CoefficientVector::new(0.0, 0.0, 0.0, 0.5, 1.0, 1.0).unwrap();
        assert!(check_feller(&c));
    }

    #[test]
    fn regimes_scale_kappa_and_xi() {
        let c = base();
        let large = ScalingRegime::LargeVolOfVol { epsilon: 0.25 }.apply(&c);
        assert_eq!(large.kappa, 8.0);
        assert_eq!(large.xi, 1.0);
        let small = ScalingRegime::SmallVolOfVol { epsilon: 0.25 }.apply(&c);
        assert_eq!(small.kappa, 8.0);
        assert_eq!(small.xi, 0.5);
        assert_eq!(ScalingRegime::Unscaled.apply(&c), c);
    }

    #[test]
    fn dt_rule() {
        let reg = ScalingRegime::SmallVolOfVol { epsilon: 0.1 };
        assert!(reg.check_dt(0.002).is_ok());
        let err = reg.check_dt(0.01).unwrap_err();
        assert!(matches!(err, Error::StepTooCoarse { .. }));
        assert!(ScalingRegime::<f64>::Unscaled.check_dt(10.0).is_ok());
    }

    #[test]
    fn market_requires_zero_rho3_for_large_regime() {
        let m = MarketConfig {
            rho3: 0.5,
            beta: 0.5,
            initial_vol: InitialVolLaw::Stationary,
            horizon: 1.0,
        };
        m.validate().unwrap();
        assert!(m
            .check_regime(&ScalingRegime::LargeVolOfVol { epsilon: 0.1 })
            .is_err());
        assert!(m
            .check_regime(&ScalingRegime::SmallVolOfVol { epsilon: 0.1 })
            .is_ok());
    }

    #[test]
    fn level_functions() {
        let h: LevelFunction<f64> = LevelFunction::BoundedSigmoid {
            h_min: 0.1,
            h_max: 0.5,
        };
        assert!((h.eval(0.0) - 0.3).abs() < 1e-15);
        assert!(h.eval(-50.0) >= 0.1 && h.eval(50.0) <= 0.5);
        assert!(LevelFunction::BoundedSigmoid {
            h_min: 0.0,
            h_max: 0.5
        }
        .validate()
        .is_err());
        assert_eq!(LevelFunction::SqrtAbs.eval(-0.09_f64), 0.3);
    }

    #[test]
    fn damped_sqrt_factor_range() {
        let g = VolFunction::DampedSqrt {
            c_g: 0.4,
            steepness: 3.0,
        };
        for k in -100..=100 {
            let x = k as f64 * 0.1;
            let ratio = if x == 0.0 { continue } else { g.eval(x) / x.abs().sqrt() };
            assert!((0.4..=1.0).contains(&ratio));
        }
    }

    #[test]
    fn stationary_laws() {
        let c = base();
        match stationary_law(&c, &VolFunction::ConstantOne).unwrap() {
            StationaryLaw::Normal { mean, sd } => {
                assert_eq!(mean, 0.3);
                assert!((sd - 0.25).abs() < 1e-15);
            }
            other => panic!("{other:?}"),
        }
        let law = stationary_law(&c, &VolFunction::CirSqrt).unwrap();
        assert!((law.mean() - 0.3).abs() < 1e-12);
        assert!(stationary_law(
            &c,
            &VolFunction::DampedSqrt {
                c_g: 0.5,
                steepness: 1.0
            }
        )
        .is_none());
    }
}
