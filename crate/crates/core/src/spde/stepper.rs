use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

use super::SpatialGrid;

/// Boundary treatment at `x = 0`; the far end is always a zero Dirichlet node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FieldForm {
    /// Density `u` with `u(t, 0) = 0`.
    Density,
    /// Tail integral `v` with `v_x(t, 0) = 0` (ghost node `v_-1 = v_1`).
    Survival,
}

/// Negative undershoots removed by clipping.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ClipStats<T> {
    /// `sum |min(u, 0)| dx` over all steps.
    pub clipped_mass: T,
    /// Nodes clipped below `-1e-8`.
    pub clipped_nodes: usize,
}

/// Clipped mass above which a run is aborted.
pub const MAX_CLIPPED_MASS: f64 = 1e-4;

/// Semi-implicit stepper for
/// `du = -(r - h^2/2) u_x dt + (h^2/2) u_xx dt - rho1 h u_x dW`:
/// implicit centred diffusion, explicit upwind drift, explicit centred
/// transport noise with a Milstein correction.
#[derive(Debug, Clone)]
pub struct SpdeSolver<T> {
    grid: SpatialGrid<T>,
    form: FieldForm,
    r: T,
    rho1: T,
    dt: T,
    u: Vec<T>,
    rhs: Vec<T>,
    scratch: Vec<T>,
    steps: usize,
    clip: ClipStats<T>,
}

impl<T: Real> SpdeSolver<T> {
    pub fn new(
        grid: SpatialGrid<T>,
        form: FieldForm,
        r: T,
        rho1: T,
        dt: T,
        initial: Vec<T>,
    ) -> Result<Self> {
        if initial.len() != grid.n_x() {
            return Err(Error::GridMismatch(format!(
                "initial field has {} nodes, grid has {}",
                initial.len(),
                grid.n_x()
            )));
        }
        if !(dt > T::zero()) {
            return Err(invalid("dt", "time step must be > 0"));
        }
        if !(rho1 >= T::zero() && rho1 < T::one()) {
            return Err(invalid("rho1", format!("rho1 must lie in [0,1), got {rho1}")));
        }
        if form == FieldForm::Density && initial[0].abs() > T::lit(1e-12) {
            return Err(invalid("u0", "initial density must vanish at x = 0"));
        }
        let mut u = initial;
        if form == FieldForm::Density {
            u[0] = T::zero();
        }
        let last = u.len() - 1;
        u[last] = T::zero();
        let n = u.len();
        Ok(Self {
            grid,
            form,
            r,
            rho1,
            dt,
            u,
            rhs: vec![T::zero(); n],
            scratch: vec![T::zero(); n],
            steps: 0,
            clip: ClipStats::default(),
        })
    }

    /// Largest stable step for a volatility level `h`, if any restriction binds.
    pub fn max_stable_dt(grid: &SpatialGrid<T>, r: T, rho1: T, h: T) -> (Option<T>, Option<T>) {
        let drift = (r - T::lit(0.5) * h * h).abs();
        let a = rho1 * h;
        let transport = (drift > T::zero()).then(|| grid.dx() / (T::lit(2.0) * drift));
        let noise = (a > T::zero()).then(|| grid.dx() * grid.dx() / (a * a));
        (transport, noise)
    }

    /// Checks both step restrictions for volatility level `h`.
    pub fn check_stability(grid: &SpatialGrid<T>, r: T, rho1: T, dt: T, h: T) -> Result<()> {
        let (transport, noise) = Self::max_stable_dt(grid, r, rho1, h);
        let suggested = [transport, noise].into_iter().flatten().fold(T::infinity(), T::min);
        if let Some(lim) = transport {
            if dt > lim {
                return Err(Error::Unstable {
                    rule: "dt <= dx / (2 max|r - h^2/2|)",
                    dt: dt.as_f64(),
                    suggested: suggested.as_f64(),
                });
            }
        }
        if let Some(lim) = noise {
            if dt > lim {
                return Err(Error::Unstable {
                    rule: "dt <= dx^2 / (rho1^2 h_max^2)",
                    dt: dt.as_f64(),
                    suggested: suggested.as_f64(),
                });
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> &SpatialGrid<T> {
        &self.grid
    }

    pub fn form(&self) -> FieldForm {
        self.form
    }

    pub fn values(&self) -> &[T] {
        &self.u
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn time(&self) -> T {
        self.dt * T::from_count(self.steps)
    }

    pub fn clip_stats(&self) -> ClipStats<T> {
        self.clip
    }

    /// Value at `x = 0` (the survival probability in survival form).
    pub fn boundary_value(&self) -> T {
        self.u[0]
    }

    /// `sum u dx`.
    pub fn mass(&self) -> T {
        self.u.iter().copied().sum::<T>() * self.grid.dx()
    }

    /// `sum u^2 dx`.
    pub fn l2_sq(&self) -> T {
        self.u.iter().map(|&x| x * x).sum::<T>() * self.grid.dx()
    }

    /// `sum ((u_{j+1} - u_j) / dx)^2 dx`.
    pub fn grad_sq(&self) -> T {
        grad_sq(&self.u, self.grid.dx())
    }

    /// Advances one step with volatility level `h` and market increment `dw`.
    pub fn step(&mut self, h: T, dw: T) -> Result<()> {
        Self::check_stability(&self.grid, self.r, self.rho1, self.dt, h)?;
        let n = self.u.len();
        let dx = self.grid.dx();
        let dt = self.dt;
        let mu = self.r - T::lit(0.5) * h * h;
        let a = self.rho1 * h;
        let two = T::lit(2.0);
        let noise_c = a * dw / (two * dx);
        let milstein_c = T::lit(0.5) * a * a * (dw * dw - dt) / (dx * dx);
        let drift_c = dt * mu / dx;
        let u = &self.u;
        let rhs = &mut self.rhs;

        let first = match self.form {
            FieldForm::Density => {
                rhs[0] = T::zero();
                1
            }
            FieldForm::Survival => {
                // ghost node v_-1 = v_1: no drift or first-order noise at 0
                rhs[0] = u[0] + milstein_c * two * (u[1] - u[0]);
                1
            }
        };
        for j in first..n - 1 {
            let (um, u0, up) = (u[j - 1], u[j], u[j + 1]);
            let upwind = if mu > T::zero() { u0 - um } else { up - u0 };
            rhs[j] = u0 - drift_c * upwind - noise_c * (up - um) + milstein_c * (up - two * u0 + um);
        }
        rhs[n - 1] = T::zero();

        // implicit diffusion (I - lambda D2) u = rhs on the unknown nodes
        let lambda = dt * T::lit(0.5) * h * h / (dx * dx);
        let lo = match self.form {
            FieldForm::Density => 1,
            FieldForm::Survival => 0,
        };
        let hi = n - 2;
        thomas(
            &mut self.scratch,
            &mut self.rhs,
            lo,
            hi,
            lambda,
            self.form == FieldForm::Survival,
        );
        self.u[..].copy_from_slice(&self.rhs);
        if self.form == FieldForm::Density {
            self.u[0] = T::zero();
        }
        self.u[n - 1] = T::zero();

        self.steps += 1;
        let tiny = T::lit(-1e-8);
        let mut clipped = T::zero();
        for x in self.u.iter_mut() {
            if !x.is_finite() {
                return Err(Error::Blowup {
                    step: self.steps,
                    detail: "field is not finite".into(),
                });
            }
            if *x < T::zero() {
                if *x < tiny {
                    self.clip.clipped_nodes += 1;
                }
                clipped = clipped - *x;
                *x = T::zero();
            }
        }
        self.clip.clipped_mass = self.clip.clipped_mass + clipped * dx;
        if self.clip.clipped_mass > T::lit(MAX_CLIPPED_MASS) {
            return Err(Error::Blowup {
                step: self.steps,
                detail: format!(
                    "clipped negative mass {} exceeds {MAX_CLIPPED_MASS:e} ({} nodes below -1e-8)",
                    self.clip.clipped_mass, self.clip.clipped_nodes
                ),
            });
        }
        Ok(())
    }
}

pub(crate) fn grad_sq<T: Real>(u: &[T], dx: T) -> T {
    u.windows(2)
        .map(|w| {
            let d = w[1] - w[0];
            d * d
        })
        .sum::<T>()
        / dx
}

/// Solves `(1 + 2 lambda) x_j - lambda (x_{j-1} + x_{j+1}) = d_j` for
/// `j in lo..=hi` in place, with zero values outside the range. With
/// `reflect_first`, row `lo` couples to `x_{lo+1}` with weight `2 lambda`.
fn thomas<T: Real>(c: &mut [T], d: &mut [T], lo: usize, hi: usize, lambda: T, reflect_first: bool) {
    let diag = T::one() + T::lit(2.0) * lambda;
    let off = -lambda;
    let first_upper = if reflect_first { off + off } else { off };
    c[lo] = first_upper / diag;
    d[lo] = d[lo] / diag;
    for j in lo + 1..=hi {
        let m = diag - off * c[j - 1];
        c[j] = off / m;
        d[j] = (d[j] - off * d[j - 1]) / m;
    }
    for j in (lo..hi).rev() {
        d[j] = d[j] - c[j] * d[j + 1];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thomas_solves_small_system() {
        // (1+2l) x - l (neighbours) = d with l = 1 on 3 unknowns
        let mut c = vec![0.0_f64; 5];
        let x_true = [0.0_f64, 1.0, -2.0, 0.5, 0.0];
        let mut d = vec![0.0; 5];
        for j in 1..4 {
            d[j] = 3.0 * x_true[j] - x_true[j - 1] - x_true[j + 1];
        }
        thomas(&mut c, &mut d, 1, 3, 1.0, false);
        for j in 1..4 {
            assert!((d[j] - x_true[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn thomas_reflecting_row() {
        let mut c = vec![0.0_f64; 4];
        let x_true = [1.0_f64, 0.5, 0.25, 0.0];
        let l = 0.5;
        let mut d = vec![0.0; 4];
        d[0] = (1.0 + 2.0 * l) * x_true[0] - 2.0 * l * x_true[1];
        for j in 1..3 {
            d[j] = (1.0 + 2.0 * l) * x_true[j] - l * (x_true[j - 1] + x_true[j + 1]);
        }
        thomas(&mut c, &mut d, 0, 2, l, true);
        for j in 0..3 {
            assert!((d[j] - x_true[j]).abs() < 1e-12);
        }
    }
}
