//! Running and sample statistics.

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// Welford running mean and variance of a vector-valued sample stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Welford<T: Real> {
    count: usize,
    mean: Vec<T>,
    m2: Vec<T>,
}

impl<T: Real> Welford<T> {
    pub fn new(dim: usize) -> Self {
        Self {
            count: 0,
            mean: vec![T::zero(); dim],
            m2: vec![T::zero(); dim],
        }
    }

    pub fn push(&mut self, x: &[T]) {
        debug_assert_eq!(x.len(), self.mean.len());
        self.count += 1;
        let n = T::from_count(self.count);
        for ((m, s), &v) in self.mean.iter_mut().zip(&mut self.m2).zip(x) {
            let d = v - *m;
            *m += d / n;
            *s += d * (v - *m);
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    /// Unbiased sample variance; zero with fewer than two samples.
    pub fn variance(&self) -> Vec<T> {
        if self.count < 2 {
            return vec![T::zero(); self.m2.len()];
        }
        let d = T::from_count(self.count - 1);
        self.m2.iter().map(|&s| (s / d).max(T::zero())).collect()
    }
}

pub fn mean<T: Real>(x: &[T]) -> T {
    if x.is_empty() {
        return T::zero();
    }
    x.iter().copied().sum::<T>() / T::from_count(x.len())
}

/// Unbiased sample variance (two-pass).
pub fn variance<T: Real>(x: &[T]) -> T {
    if x.len() < 2 {
        return T::zero();
    }
    let m = mean(x);
    x.iter().map(|&v| (v - m) * (v - m)).sum::<T>() / T::from_count(x.len() - 1)
}

/// Fourth standardized central moment `m4 / m2²` (population moments).
/// `None` with fewer than four samples or zero spread.
pub fn kurtosis<T: Real>(x: &[T]) -> Option<T> {
    if x.len() < 4 {
        return None;
    }
    let m = mean(x);
    let n = T::from_count(x.len());
    let m2 = x.iter().map(|&v| (v - m).powi(2)).sum::<T>() / n;
    let m4 = x.iter().map(|&v| (v - m).powi(4)).sum::<T>() / n;
    let scale = x.iter().fold(T::zero(), |a, v| a.max(v.abs()));
    (m2 > (T::epsilon() * scale).powi(2)).then(|| m4 / (m2 * m2))
}

/// Least-squares slope of `y` against `x`.
pub fn slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn welford_matches_two_pass() {
        let xs = [1.0f64, 4.0, -2.0, 7.5, 3.25];
        let mut w = Welford::new(1);
        for &x in &xs {
            w.push(&[x]);
        }
        assert!((w.mean()[0] - mean(&xs)).abs() < 1e-14);
        assert!((w.variance()[0] - variance(&xs)).abs() < 1e-13);
    }

    #[test]
    fn kurtosis_of_two_points_is_one() {
        let xs = [1.0f64, -1.0, 1.0, -1.0, 1.0, -1.0];
        assert!((kurtosis(&xs).unwrap() - 1.0).abs() < 1e-14);
        assert!(kurtosis(&[2.0; 10]).is_none());
        assert!(kurtosis(&[1.0, 2.0, 3.0]).is_none());
    }

    #[test]
    fn slope_of_line() {
        let x = [1.0, 2.0, 3.0];
        let y = [5.0, 3.0, 1.0];
        assert!((slope(&x, &y).unwrap() + 2.0).abs() < 1e-14);
        assert!(slope(&[1.0], &[1.0]).is_none());
    }
}
