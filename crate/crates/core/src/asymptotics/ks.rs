use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Two-sample Kolmogorov-Smirnov distance with bootstrap summaries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsEntry<T> {
    pub statistic: T,
    /// 2.5% and 97.5% percentiles of the statistic over bootstrap resamples.
    pub band_lo: T,
    pub band_hi: T,
    /// 99% quantile of the statistic under the pooled-sample null.
    pub null_q99: T,
    pub n_a: usize,
    pub n_b: usize,
}

/// `sup_x |F_a(x) - F_b(x)|` for the empirical CDFs.
pub fn ks_statistic<T: Real>(a: &[T], b: &[T]) -> Result<T> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("KS sample"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(|x, y| x.partial_cmp(y).expect("NaN in KS sample"));
    b.sort_by(|x, y| x.partial_cmp(y).expect("NaN in KS sample"));
    Ok(sorted_distance(&a, &b))
}

fn sorted_distance<T: Real>(a: &[T], b: &[T]) -> T {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0_f64;
    while i < a.len() && j < b.len() {
        let x = if a[i] <= b[j] { a[i] } else { b[j] };
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    T::lit(d)
}

fn resample<T: Real, R: Rng>(src: &[T], n: usize, rng: &mut R, out: &mut Vec<T>) {
    out.clear();
    out.extend((0..n).map(|_| src[rng.random_range(0..src.len())]));
    out.sort_by(|x, y| x.partial_cmp(y).unwrap());
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let idx = ((sorted.len() - 1) as f64 * q).round() as usize;
    sorted[idx]
}

/// KS statistic with a percentile band from independent resampling of
/// each sample and a null quantile from resampling the pooled sample.
pub fn ks_two_sample<T: Real>(a: &[T], b: &[T], n_bootstrap: usize, seed: u64) -> Result<KsEntry<T>> {
    let statistic = ks_statistic(a, b)?;
    if n_bootstrap == 0 {
        return Ok(KsEntry {
            statistic,
            band_lo: statistic,
            band_hi: statistic,
            null_q99: T::nan(),
            n_a: a.len(),
            n_b: b.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut ra, mut rb) = (Vec::new(), Vec::new());
    let mut boot = Vec::with_capacity(n_bootstrap);
    for _ in 0..n_bootstrap {
        resample(a, a.len(), &mut rng, &mut ra);
        resample(b, b.len(), &mut rng, &mut rb);
        boot.push(sorted_distance(&ra, &rb).as_f64());
    }
    let pooled: Vec<T> = a.iter().chain(b).copied().collect();
    let mut null = Vec::with_capacity(n_bootstrap);
    for _ in 0..n_bootstrap {
        resample(&pooled, a.len(), &mut rng, &mut ra);
        resample(&pooled, b.len(), &mut rng, &mut rb);
        null.push(sorted_distance(&ra, &rb).as_f64());
    }
    boot.sort_by(|x, y| x.partial_cmp(y).unwrap());
    null.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Ok(KsEntry {
        statistic,
        band_lo: T::lit(percentile(&boot, 0.025)),
        band_hi: T::lit(percentile(&boot, 0.975)),
        null_q99: T::lit(percentile(&null, 0.99)),
        n_a: a.len(),
        n_b: b.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_and_disjoint() {
        let a = [0.1_f64, 0.2, 0.3, 0.3];
        assert_eq!(ks_statistic(&a, &a).unwrap(), 0.0);
        let b = [0.6_f64, 0.7, 0.9];
        assert_eq!(ks_statistic(&a, &b).unwrap(), 1.0);
    }

    #[test]
    fn ties_across_samples() {
        // F_a jumps to 1 at 1.0, F_b reaches 1/2 there
        let a = [1.0_f64, 1.0];
        let b = [1.0_f64, 2.0];
        assert!((ks_statistic(&a, &b).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn empty_is_rejected() {
        assert!(matches!(ks_statistic::<f64>(&[], &[1.0]), Err(Error::Empty(_))));
    }

    #[test]
    fn band_brackets_statistic_scale() {
        let a: Vec<f64> = (0..200).map(|i| i as f64 / 200.0).collect();
        let b: Vec<f64> = (20..220).map(|i| i as f64 / 200.0).collect();
        let e = ks_two_sample(&a, &b, 200, 3).unwrap();
        assert!((e.statistic - 0.1).abs() < 1e-12);
        assert!(e.band_lo <= e.band_hi);
        assert!(e.band_hi > 0.1);
        assert!(e.null_q99 > 0.0);
    }
}
