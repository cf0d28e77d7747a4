//! Goodness-of-fit helpers shared by the verification suites.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Result of a goodness-of-fit test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GofResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson chi-square test of observed counts against expected probabilities.
///
/// Cells with expected count below 5 are pooled into one cell. A positive
/// count in a zero-probability cell yields p = 0.
pub fn chi_square(observed: &[u64], expected_probs: &[f64]) -> GofResult {
    assert_eq!(observed.len(), expected_probs.len());
    let total: u64 = observed.iter().sum();
    let total_f = total as f64;
    let psum: f64 = expected_probs.iter().sum();
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let mut pooled = (0.0, 0.0);
    for (&o, &p) in observed.iter().zip(expected_probs) {
        let e = p / psum * total_f;
        if p <= 0.0 {
            if o > 0 {
                return GofResult {
                    statistic: f64::INFINITY,
                    dof: 0,
                    p_value: 0.0,
                };
            }
            continue;
        }
        if e < 5.0 {
            pooled.0 += o as f64;
            pooled.1 += e;
        } else {
            cells.push((o as f64, e));
        }
    }
    if pooled.1 > 0.0 {
        if pooled.1 >= 5.0 || cells.is_empty() {
            cells.push(pooled);
        } else if let Some(smallest) = cells
            .iter_mut()
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        {
            smallest.0 += pooled.0;
            smallest.1 += pooled.1;
        }
    }
    if cells.len() < 2 {
        return GofResult {
            statistic: 0.0,
            dof: 0,
            p_value: 1.0,
        };
    }
    let statistic: f64 = cells.iter().map(|&(o, e)| (o - e) * (o - e) / e).sum();
    let dof = cells.len() - 1;
    let dist = ChiSquared::new(dof as f64).expect("positive degrees of freedom");
    GofResult {
        statistic,
        dof,
        p_value: 1.0 - dist.cdf(statistic),
    }
}

pub fn chi_square_uniform(observed: &[u64]) -> GofResult {
    let p = vec![1.0 / observed.len() as f64; observed.len()];
    chi_square(observed, &p)
}

/// Kolmogorov distribution survival function `P(K > x)`.
fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 0.3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * x * x).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample Kolmogorov-Smirnov test of integer samples against a discrete
/// CDF. Conservative for discrete laws.
pub fn ks_discrete(samples: &[u64], cdf: impl Fn(u64) -> f64) -> GofResult {
    let mut sorted = samples.to_vec();
    sorted.sort_unstable();
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let v = sorted[i];
        let mut j = i;
        while j < sorted.len() && sorted[j] == v {
            j += 1;
        }
        let f = cdf(v);
        let below = if v == 0 { 0.0 } else { cdf(v - 1) };
        d = d
            .max((j as f64 / n - f).abs())
            .max((i as f64 / n - below).abs());
        i = j;
    }
    GofResult {
        statistic: d,
        dof: 0,
        p_value: kolmogorov_sf(n.sqrt() * d),
    }
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}
