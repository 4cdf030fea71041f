//! Exact comparisons of empirical performance distributions.
//!
//! Sample sets carry uniform weights, so the 1-Wasserstein distance between
//! them is the integral of the absolute quantile difference over (0, 1). We
//! evaluate that integral exactly on the merged probability breakpoints
//! `{i/n} U {j/m}`, with segment lengths kept as integers in units of
//! `1 / lcm(n, m)` until the final division. The result carries performance
//! units: no normalization is applied.

use crate::error::{Error, Result};

/// A non-empty, unordered collection of performance values in [0, 1].
/// Values are held sorted; construction order carries no meaning.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    values: Vec<f64>,
}

impl SampleSet {
    /// Validates and sorts the values. Empty input and values outside
    /// [0, 1] are rejected loudly; callers decide what an empty batch means.
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySampleSet);
        }
        for &v in &values {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(Error::SampleOutOfRange(v));
            }
        }
        values.sort_by(f64::total_cmp);
        Ok(SampleSet { values })
    }

    /// Values in ascending order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false // non-empty by construction
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Exact 1-Wasserstein (earth mover's) distance between two empirical
/// distributions with uniform weights. Sizes may differ. Interpretable as
/// the average difference between the distributions, in performance units.
pub fn wasserstein1(a: &SampleSet, b: &SampleSet) -> f64 {
    let n = a.len() as u64;
    let m = b.len() as u64;
    // Work in probability units of 1/l so every breakpoint is an integer.
    let l = n / gcd(n, m) * m;
    let step_a = l / n;
    let step_b = l / m;

    let mut i = 0usize;
    let mut j = 0usize;
    let mut pos = 0u64;
    let mut total = 0.0;
    while pos < l {
        let next_a = (i as u64 + 1) * step_a;
        let next_b = (j as u64 + 1) * step_b;
        let next = next_a.min(next_b);
        let segment = (next - pos) as f64;
        total += segment * (a.values[i] - b.values[j]).abs();
        if next == next_a {
            i += 1;
        }
        if next == next_b {
            j += 1;
        }
        pos = next;
    }
    total / l as f64
}

/// Absolute difference of the sample means. Separates a mean shift from a
/// variance difference, which `wasserstein1` alone cannot attribute.
pub fn mean_abs_diff_of_means(a: &SampleSet, b: &SampleSet) -> f64 {
    (a.mean() - b.mean()).abs()
}

/// Mean absolute difference over aligned performance pairs.
pub fn pointwise_mean_diff(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyPairs);
    }
    let sum: f64 = pairs.iter().map(|(a, b)| (a - b).abs()).sum();
    Ok(sum / pairs.len() as f64)
}
