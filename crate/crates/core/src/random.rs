//! RNG plumbing: categorical draws, binomial draws and stream splitting.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};

/// Deterministic generator used for every seeded run.
pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Draws `count` child seeds so work items get independent streams whose
/// values do not depend on how the work is scheduled.
pub fn split_seeds<R: RngCore + ?Sized>(rng: &mut R, count: usize) -> Vec<u64> {
    (0..count).map(|_| rng.next_u64()).collect()
}

/// Inverse-CDF draw from an unnormalized nonnegative weight vector.
pub fn sample_categorical<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    debug_assert!(total > 0.0, "categorical weights sum to zero");
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (k, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last_positive = k;
            if u < acc {
                return k;
            }
        }
    }
    last_positive
}

/// Exact binomial draw (inversion / BTPE).
pub fn sample_binomial<R: Rng + ?Sized>(trials: u64, p: f64, rng: &mut R) -> Result<u64> {
    if trials == 0 || p <= 0.0 {
        return Ok(0);
    }
    if p >= 1.0 {
        return Ok(trials);
    }
    let dist = Binomial::new(trials, p)
        .map_err(|e| Error::arg(format!("binomial({trials}, {p}): {e}")))?;
    Ok(dist.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn categorical_never_picks_zero_weight() {
        let mut rng = seeded(3);
        for _ in 0..10_000 {
            let k = sample_categorical(&[0.0, 0.3, 0.0, 0.7, 0.0], &mut rng);
            assert!(k == 1 || k == 3);
        }
    }

    #[test]
    fn categorical_frequencies() {
        let mut rng = seeded(11);
        let mut counts = [0usize; 3];
        let trials = 200_000;
        for _ in 0..trials {
            counts[sample_categorical(&[1.0, 2.0, 7.0], &mut rng)] += 1;
        }
        for (c, p) in counts.iter().zip([0.1, 0.2, 0.7]) {
            let sd = (p * (1.0 - p) / trials as f64).sqrt();
            assert!((*c as f64 / trials as f64 - p).abs() < 5.0 * sd);
        }
    }

    #[test]
    fn binomial_edge_cases() {
        let mut rng = seeded(1);
        assert_eq!(sample_binomial(0, 0.5, &mut rng).unwrap(), 0);
        assert_eq!(sample_binomial(10, 0.0, &mut rng).unwrap(), 0);
        assert_eq!(sample_binomial(10, 1.0, &mut rng).unwrap(), 10);
    }
}
