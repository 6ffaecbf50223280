//! Finite differences for the one-dimensional loss SPDE on a truncated
//! half-line, in density form (`u`, Dirichlet at 0) and tail form
//! (`v = int_x^inf u`, Neumann at 0).

mod stepper;

pub use stepper::{ClipStats, FieldForm, SpdeSolver, MAX_CLIPPED_MASS};

use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

/// Uniform grid `x_j = j dx`, `j = 0..n_x`, ending at `x_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialGrid<T> {
    dx: T,
    n_x: usize,
}

impl<T: Real> SpatialGrid<T> {
    /// Grid with spacing `dx` reaching at least `x_max`.
    pub fn new(dx: T, x_max: T) -> Result<Self> {
        if !(dx > T::zero()) || !dx.is_finite() {
            return Err(invalid("dx", format!("dx must be > 0, got {dx}")));
        }
        if !(x_max > dx + dx) {
            return Err(invalid("x_max", "need at least three nodes"));
        }
        let cells = (x_max / dx - T::lit(1e-9)).ceil();
        let n_x = cells.to_usize().ok_or_else(|| invalid("x_max", "grid too large"))? + 1;
        Ok(Self { dx, n_x })
    }

    /// Grid wide enough for the Rayleigh initial law of scale `beta` under
    /// volatility at most `h_max` up to `horizon`, and at least `x_max`.
    pub fn covering(dx: T, x_max: T, beta: T, h_max: T, horizon: T) -> Result<Self> {
        Self::new(dx, x_max.max(Self::min_extent(beta, h_max, horizon)))
    }

    /// `10 (beta + h_max sqrt(T))`.
    pub fn min_extent(beta: T, h_max: T, horizon: T) -> T {
        T::lit(10.0) * (beta + h_max * horizon.sqrt())
    }

    pub fn check_extent(&self, beta: T, h_max: T, horizon: T) -> Result<()> {
        let need = Self::min_extent(beta, h_max, horizon);
        if self.x_max() < need * T::lit(1.0 - 1e-12) {
            return Err(invalid(
                "x_max",
                format!("x_max = {} is below 10 (beta + h_max sqrt(T)) = {need}", self.x_max()),
            ));
        }
        Ok(())
    }

    pub fn dx(&self) -> T {
        self.dx
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn x_max(&self) -> T {
        self.dx * T::from_count(self.n_x - 1)
    }

    pub fn x(&self, j: usize) -> T {
        self.dx * T::from_count(j)
    }

    pub fn nodes(&self) -> Vec<T> {
        (0..self.n_x).map(|j| self.x(j)).collect()
    }
}

/// Rayleigh density `(x / beta^2) exp(-x^2 / (2 beta^2))` on the grid.
pub fn rayleigh_density<T: Real>(grid: &SpatialGrid<T>, beta: T) -> Vec<T> {
    let b2 = beta * beta;
    grid.nodes()
        .into_iter()
        .map(|x| x / b2 * (-x * x / (b2 + b2)).exp())
        .collect()
}

/// Rayleigh tail `exp(-x^2 / (2 beta^2))` on the grid.
pub fn rayleigh_tail<T: Real>(grid: &SpatialGrid<T>, beta: T) -> Vec<T> {
    let b2 = beta * beta;
    grid.nodes()
        .into_iter()
        .map(|x| (-x * x / (b2 + b2)).exp())
        .collect()
}

/// Tail sums `v_j = sum_{k > j} (u_k + u_{k-1}) dx / 2` of a nodal density.
pub fn tail_integral<T: Real>(u: &[T], dx: T) -> Vec<T> {
    let n = u.len();
    let mut v = vec![T::zero(); n];
    for j in (0..n - 1).rev() {
        v[j] = v[j + 1] + T::lit(0.5) * dx * (u[j] + u[j + 1]);
    }
    v
}

/// Solver settings shared by both forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpdeConfig<T> {
    pub grid: SpatialGrid<T>,
    pub r: T,
    pub rho1: T,
    pub dt: T,
    /// Snapshot every this many steps (the final state is always kept).
    pub record_every: usize,
}

/// Density snapshots with per-step diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField<T> {
    pub grid: SpatialGrid<T>,
    pub times: Vec<T>,
    pub values: Vec<Vec<T>>,
    /// `t_0, ..., t_n` for the per-step diagnostics below.
    pub step_times: Vec<T>,
    pub mass: Vec<T>,
    pub l2_sq: Vec<T>,
    pub grad_sq: Vec<T>,
    pub clip: ClipStats<T>,
}

/// Tail-field snapshots with the boundary value `v(t, 0)` at every step.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalField<T> {
    pub grid: SpatialGrid<T>,
    pub times: Vec<T>,
    pub values: Vec<Vec<T>>,
    pub step_times: Vec<T>,
    pub boundary: Vec<T>,
    pub clip: ClipStats<T>,
}

fn check_inputs<T: Real>(cfg: &SpdeConfig<T>, h_values: &[T], w0: &[T]) -> Result<()> {
    if h_values.len() != w0.len() {
        return Err(Error::GridMismatch(format!(
            "{} volatility values for {} noise increments",
            h_values.len(),
            w0.len()
        )));
    }
    if w0.is_empty() {
        return Err(Error::Empty("noise increments"));
    }
    if cfg.record_every == 0 {
        return Err(invalid("record_every", "must be >= 1"));
    }
    // fail before doing any work if some step violates a restriction
    let (lo, hi) = h_values
        .iter()
        .fold((T::infinity(), T::neg_infinity()), |(a, b), &h| (a.min(h.abs()), b.max(h.abs())));
    for h in [lo, hi] {
        SpdeSolver::check_stability(&cfg.grid, cfg.r, cfg.rho1, cfg.dt, h)?;
    }
    Ok(())
}

fn should_record(k: usize, every: usize, last: usize) -> bool {
    k % every == 0 || k == last
}

/// Solves the density form from `u0`, with `h_values[k]` and `w0[k]` the
/// volatility level and market increment of step `k`.
pub fn solve_density<T: Real>(
    cfg: &SpdeConfig<T>,
    u0: &[T],
    h_values: &[T],
    w0: &[T],
) -> Result<DensityField<T>> {
    check_inputs(cfg, h_values, w0)?;
    let mut s = SpdeSolver::new(cfg.grid, FieldForm::Density, cfg.r, cfg.rho1, cfg.dt, u0.to_vec())?;
    let n = w0.len();
    let mut field = DensityField {
        grid: cfg.grid,
        times: vec![T::zero()],
        values: vec![s.values().to_vec()],
        step_times: Vec::with_capacity(n + 1),
        mass: Vec::with_capacity(n + 1),
        l2_sq: Vec::with_capacity(n + 1),
        grad_sq: Vec::with_capacity(n + 1),
        clip: ClipStats::default(),
    };
    let record = |s: &SpdeSolver<T>, f: &mut DensityField<T>| {
        f.step_times.push(s.time());
        f.mass.push(s.mass());
        f.l2_sq.push(s.l2_sq());
        f.grad_sq.push(s.grad_sq());
    };
    record(&s, &mut field);
    for k in 0..n {
        s.step(h_values[k], w0[k])?;
        record(&s, &mut field);
        if should_record(k + 1, cfg.record_every, n) {
            field.times.push(s.time());
            field.values.push(s.values().to_vec());
        }
    }
    field.clip = s.clip_stats();
    Ok(field)
}

/// Solves the tail form from `v0`; same scheme as [`solve_density`].
pub fn solve_survival<T: Real>(
    cfg: &SpdeConfig<T>,
    v0: &[T],
    h_values: &[T],
    w0: &[T],
) -> Result<SurvivalField<T>> {
    check_inputs(cfg, h_values, w0)?;
    let mut s = SpdeSolver::new(cfg.grid, FieldForm::Survival, cfg.r, cfg.rho1, cfg.dt, v0.to_vec())?;
    let n = w0.len();
    let mut field = SurvivalField {
        grid: cfg.grid,
        times: vec![T::zero()],
        values: vec![s.values().to_vec()],
        step_times: Vec::with_capacity(n + 1),
        boundary: Vec::with_capacity(n + 1),
        clip: ClipStats::default(),
    };
    field.step_times.push(T::zero());
    field.boundary.push(s.boundary_value());
    for k in 0..n {
        s.step(h_values[k], w0[k])?;
        field.step_times.push(s.time());
        field.boundary.push(s.boundary_value());
        if should_record(k + 1, cfg.record_every, n) {
            field.times.push(s.time());
            field.values.push(s.values().to_vec());
        }
    }
    field.clip = s.clip_stats();
    Ok(field)
}

/// Relative residual of the discrete energy balance
/// `|u(t)|^2 + (1 - rho1^2) int h^2 |u_x|^2 ds = |u0|^2` at every step,
/// with the time integral taken by the trapezoid rule.
pub fn energy_residual<T: Real>(
    field: &DensityField<T>,
    h_values: &[T],
    rho1: T,
    dt: T,
) -> Result<Vec<T>> {
    if h_values.len() + 1 != field.l2_sq.len() {
        return Err(Error::GridMismatch(format!(
            "{} volatility values for {} recorded steps",
            h_values.len(),
            field.l2_sq.len()
        )));
    }
    let e0 = field.l2_sq[0];
    if !(e0 > T::zero()) {
        return Err(invalid("u0", "initial field has zero norm"));
    }
    let pref = T::one() - rho1 * rho1;
    let half = T::lit(0.5);
    let mut dissipated = T::zero();
    let mut out = Vec::with_capacity(field.l2_sq.len());
    out.push(T::zero());
    for (k, &h) in h_values.iter().enumerate() {
        dissipated = dissipated + pref * h * h * half * (field.grad_sq[k] + field.grad_sq[k + 1]) * dt;
        out.push((field.l2_sq[k + 1] + dissipated - e0).abs() / e0);
    }
    Ok(out)
}

/// Anything from which a loss curve `t -> L_t` can be read.
pub trait LossCurve<T: Real> {
    /// `(t, L_t)` at every solver step.
    fn loss_curve(&self) -> Vec<(T, T)>;
}

impl<T: Real> LossCurve<T> for DensityField<T> {
    /// `1 - m(t) / m(0)`.
    fn loss_curve(&self) -> Vec<(T, T)> {
        let m0 = self.mass[0];
        monotone_losses(&self.step_times, self.mass.iter().map(|&m| T::one() - m / m0))
    }
}

impl<T: Real> LossCurve<T> for SurvivalField<T> {
    /// `1 - v(t, 0)`.
    fn loss_curve(&self) -> Vec<(T, T)> {
        monotone_losses(&self.step_times, self.boundary.iter().map(|&v| T::one() - v))
    }
}

/// Clamps raw losses to `[0, 1]` and takes the running maximum: the
/// explicit noise step can lift `v(t, 0)` by a discretisation-sized amount
/// although defaults are never undone.
fn monotone_losses<T: Real>(times: &[T], raw: impl Iterator<Item = T>) -> Vec<(T, T)> {
    let mut level = T::zero();
    times
        .iter()
        .zip(raw)
        .map(|(&t, l)| {
            level = level.max(l.max(T::zero()).min(T::one()));
            (t, level)
        })
        .collect()
}

/// Loss curve of a solved field.
pub fn loss_from_field<T: Real, F: LossCurve<T>>(field: &F) -> Vec<(T, T)> {
    field.loss_curve()
}
