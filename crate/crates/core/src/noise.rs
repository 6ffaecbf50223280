//! Seeded Brownian increment streams.
//!
//! Every stream is a ChaCha8 generator keyed by the bundle seed and selected
//! by a stream id built from `(asset slot, kind)`, so any stream can be
//! regenerated on its own, on any thread, without touching the others.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

/// Purpose of a stream. Distinct kinds never share random numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamKind {
    /// Brownian motion driving the asset (`W0` for the systemic slot).
    AssetW = 1,
    /// Brownian motion driving the volatility (`Z` in `B0` for the systemic slot).
    VolB = 2,
    /// Uniforms for the Brownian-bridge crossing test.
    Bridge = 3,
    /// Draws of initial states.
    Init = 4,
}

const KINDS_PER_SLOT: u64 = 8;

fn stream_id(slot: u64, kind: StreamKind) -> u64 {
    slot * KINDS_PER_SLOT + kind as u64
}

/// SplitMix64 finaliser; derives independent seeds for outer draws or replicas.
pub fn sub_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn generator(seed: u64, slot: u64, kind: StreamKind) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(slot, kind));
    rng
}

/// Brownian increments over steps of length `dt`, each the sum of
/// `factor` finer increments of length `dt / factor`.
#[derive(Debug, Clone)]
pub struct IncrementStream<T> {
    rng: ChaCha8Rng,
    scale: T,
    factor: usize,
}

impl<T: Real> IncrementStream<T> {
    #[inline]
    pub fn next_increment(&mut self) -> T {
        if self.factor == 1 {
            let z: f64 = self.rng.sample(StandardNormal);
            return T::lit(z) * self.scale;
        }
        let mut s = 0.0_f64;
        for _ in 0..self.factor {
            let z: f64 = self.rng.sample(StandardNormal);
            s += z;
        }
        T::lit(s) * self.scale
    }
}

/// Uniform draws on `[0, 1)`.
#[derive(Debug, Clone)]
pub struct UniformStream {
    rng: ChaCha8Rng,
}

impl UniformStream {
    #[inline]
    pub fn next_uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }
}

/// Systemic increments `(dW0, dB0)` on a uniform grid, plus on-demand
/// idiosyncratic streams for `n_assets` assets.
#[derive(Debug, Clone)]
pub struct NoiseBundle<T> {
    seed: u64,
    dt: T,
    n_steps: usize,
    rho3: T,
    n_assets: usize,
    /// Number of base increments summed into one step.
    factor: usize,
    base_scale: T,
    w0: Vec<T>,
    b0: Vec<T>,
}

impl<T: Real> NoiseBundle<T> {
    pub fn sample(seed: u64, dt: T, n_steps: usize, rho3: T, n_assets: usize) -> Result<Self> {
        if !(dt > T::zero()) || !dt.is_finite() {
            return Err(invalid("dt", format!("time step must be > 0, got {dt}")));
        }
        if n_steps == 0 {
            return Err(invalid("n_steps", "need at least one step"));
        }
        if !(rho3 >= -T::one() && rho3 <= T::one()) {
            return Err(invalid("rho3", format!("rho3 must lie in [-1,1], got {rho3}")));
        }
        let scale = dt.sqrt();
        let mut w_rng = generator(seed, 0, StreamKind::AssetW);
        let mut z_rng = generator(seed, 0, StreamKind::VolB);
        let rho3c = (T::one() - rho3 * rho3).max(T::zero()).sqrt();
        let mut w0 = Vec::with_capacity(n_steps);
        let mut b0 = Vec::with_capacity(n_steps);
        for _ in 0..n_steps {
            let zw: f64 = w_rng.sample(StandardNormal);
            let zz: f64 = z_rng.sample(StandardNormal);
            let dw = T::lit(zw) * scale;
            let dz = T::lit(zz) * scale;
            w0.push(dw);
            b0.push(rho3 * dw + rho3c * dz);
        }
        Ok(Self {
            seed,
            dt,
            n_steps,
            rho3,
            n_assets,
            factor: 1,
            base_scale: scale,
            w0,
            b0,
        })
    }

    /// Same Brownian paths observed on a grid `factor` times coarser.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || self.n_steps % factor != 0 {
            return Err(Error::GridMismatch(format!(
                "cannot coarsen {} steps by a factor {factor}",
                self.n_steps
            )));
        }
        let sum = |xs: &[T]| -> Vec<T> {
            xs.chunks(factor)
                .map(|c| c.iter().copied().sum())
                .collect()
        };
        Ok(Self {
            seed: self.seed,
            dt: self.dt * T::from_count(factor),
            n_steps: self.n_steps / factor,
            rho3: self.rho3,
            n_assets: self.n_assets,
            factor: self.factor * factor,
            base_scale: self.base_scale,
            w0: sum(&self.w0),
            b0: sum(&self.b0),
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn rho3(&self) -> T {
        self.rho3
    }

    pub fn n_assets(&self) -> usize {
        self.n_assets
    }

    pub fn horizon(&self) -> T {
        self.dt * T::from_count(self.n_steps)
    }

    pub fn w0(&self) -> &[T] {
        &self.w0
    }

    pub fn b0(&self) -> &[T] {
        &self.b0
    }

    /// Grid times `t_0 = 0, ..., t_n`.
    pub fn times(&self) -> Vec<T> {
        (0..=self.n_steps)
            .map(|k| self.dt * T::from_count(k))
            .collect()
    }

    fn check_asset(&self, asset: usize) {
        assert!(
            asset < self.n_assets,
            "asset index {asset} out of range for a bundle of {} assets",
            self.n_assets
        );
    }

    /// Idiosyncratic Brownian increments (`W^i` or `B^i`) of one asset.
    pub fn stream(&self, asset: usize, kind: StreamKind) -> IncrementStream<T> {
        self.check_asset(asset);
        IncrementStream {
            rng: generator(self.seed, asset as u64 + 1, kind),
            scale: self.base_scale,
            factor: self.factor,
        }
    }

    /// Bridge-test uniforms of one asset.
    pub fn uniforms(&self, asset: usize) -> UniformStream {
        self.check_asset(asset);
        UniformStream {
            rng: generator(self.seed, asset as u64 + 1, StreamKind::Bridge),
        }
    }

    /// Generator for the initial state of one asset.
    pub fn init_rng(&self, asset: usize) -> ChaCha8Rng {
        self.check_asset(asset);
        generator(self.seed, asset as u64 + 1, StreamKind::Init)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_inputs() {
        assert!(NoiseBundle::<f64>::sample(1, 0.0, 10, 0.0, 1).is_err());
        assert!(NoiseBundle::<f64>::sample(1, -1.0, 10, 0.0, 1).is_err());
        assert!(NoiseBundle::<f64>::sample(1, 0.1, 0, 0.0, 1).is_err());
        assert!(NoiseBundle::<f64>::sample(1, 0.1, 10, 1.5, 1).is_err());
    }

    #[test]
    fn perfect_correlation_copies_w0() {
        let b = NoiseBundle::<f64>::sample(7, 0.01, 1000, 1.0, 1).unwrap();
        assert_eq!(b.w0(), b.b0());
    }

    #[test]
    fn same_seed_same_streams() {
        let a = NoiseBundle::<f64>::sample(42, 0.01, 100, 0.3, 4).unwrap();
        let b = NoiseBundle::<f64>::sample(42, 0.01, 100, 0.3, 4).unwrap();
        assert_eq!(a.w0(), b.w0());
        assert_eq!(a.b0(), b.b0());
        let mut sa = a.stream(3, StreamKind::VolB);
        let mut sb = b.stream(3, StreamKind::VolB);
        for _ in 0..50 {
            assert_eq!(sa.next_increment(), sb.next_increment());
        }
    }

    #[test]
    fn coarsening_sums_increments() {
        let fine = NoiseBundle::<f64>::sample(3, 0.001, 120, 0.5, 2).unwrap();
        let coarse = fine.coarsen(4).unwrap();
        assert_eq!(coarse.n_steps(), 30);
        assert!((coarse.dt() - 0.004).abs() < 1e-15);
        let s: f64 = fine.w0()[4..8].iter().sum();
        assert!((coarse.w0()[1] - s).abs() < 1e-15);

        let mut f = fine.stream(1, StreamKind::AssetW);
        let mut c = coarse.stream(1, StreamKind::AssetW);
        for _ in 0..30 {
            let sum: f64 = (0..4).map(|_| f.next_increment()).sum();
            assert!((c.next_increment() - sum).abs() < 1e-12);
        }
        assert!(fine.coarsen(7).is_err());
    }

    #[test]
    fn sub_seeds_are_distinct() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|i| sub_seed(5, i)).collect();
        assert_eq!(seeds.len(), 1000);
    }

    #[test]
    #[should_panic]
    fn asset_range_is_checked() {
        let b = NoiseBundle::<f64>::sample(1, 0.1, 10, 0.0, 2).unwrap();
        let _ = b.stream(2, StreamKind::AssetW);
    }
}
