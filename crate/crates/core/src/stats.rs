//! Monte Carlo summaries.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

/// Mean, standard error and replicate count of a Monte Carlo scalar.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate {
            mean: value,
            stderr: 0.0,
            n: 1,
        }
    }

    /// Samples are folded in the given order, so callers fix the order to get
    /// bit-identical results.
    pub fn from_samples(samples: &[f64]) -> Self {
        let mut acc = Accumulator::default();
        samples.iter().for_each(|&x| acc.push(x));
        acc.estimate()
    }

    /// Standard error of `self − other` for independent estimates.
    pub fn pooled_stderr(&self, other: &Estimate) -> f64 {
        self.stderr.hypot(other.stderr)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Estimate {
            mean: self.mean * factor,
            stderr: self.stderr * factor.abs(),
            n: self.n,
        }
    }
}

/// Welford running mean and variance.
#[derive(Clone, Copy, Debug, Default)]
pub struct Accumulator {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Accumulator {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Combines two accumulators as if all samples had been pushed to one.
    pub fn merge(&mut self, other: &Accumulator) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        self.mean += delta * other.n as f64 / n as f64;
        self.m2 += other.m2 + delta * delta * (self.n as f64 * other.n as f64) / n as f64;
        self.n = n;
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn estimate(&self) -> Estimate {
        let stderr = if self.n >= 2 {
            (self.m2 / (self.n - 1) as f64).sqrt() / (self.n as f64).sqrt()
        } else {
            0.0
        };
        Estimate {
            mean: self.mean,
            stderr,
            n: self.n,
        }
    }
}

/// Clopper–Pearson interval for `successes` out of `trials`.
pub fn binomial_interval(successes: usize, trials: usize, confidence: f64) -> (f64, f64) {
    assert!(trials > 0 && successes <= trials);
    let alpha = 1.0 - confidence;
    let (k, n) = (successes as f64, trials as f64);
    let lo = if successes == 0 {
        0.0
    } else {
        Beta::new(k, n - k + 1.0).unwrap().inverse_cdf(alpha / 2.0)
    };
    let hi = if successes == trials {
        1.0
    } else {
        Beta::new(k + 1.0, n - k).unwrap().inverse_cdf(1.0 - alpha / 2.0)
    };
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn estimate_matches_textbook_formula() {
        let xs = [1.0, 2.0, 4.0, 7.0];
        let e = Estimate::from_samples(&xs);
        assert!((e.mean - 3.5).abs() < 1e-15);
        let var = xs.iter().map(|x| (x - 3.5f64).powi(2)).sum::<f64>() / 3.0;
        assert!((e.stderr - (var / 4.0).sqrt()).abs() < 1e-14);
        assert_eq!(Estimate::from_samples(&[5.0]).stderr, 0.0);
    }

    #[test]
    fn merge_agrees_with_sequential() {
        let xs: Vec<f64> = (0..50).map(|i| ((i * 37) % 11) as f64 * 0.3).collect();
        let mut a = Accumulator::default();
        let mut b = Accumulator::default();
        xs[..20].iter().for_each(|&x| a.push(x));
        xs[20..].iter().for_each(|&x| b.push(x));
        a.merge(&b);
        let s = Estimate::from_samples(&xs);
        let m = a.estimate();
        assert_eq!(m.n, 50);
        assert!((m.mean - s.mean).abs() < 1e-12);
        assert!((m.stderr - s.stderr).abs() < 1e-12);
    }

    #[test]
    fn clopper_pearson() {
        // reference values from the beta quantile definition
        let (lo, hi) = binomial_interval(0, 10, 0.95);
        assert_eq!(lo, 0.0);
        assert!((hi - (1.0 - 0.025f64.powf(0.1))).abs() < 1e-9);
        let (lo, hi) = binomial_interval(10, 10, 0.95);
        assert!((lo - 0.025f64.powf(0.1)).abs() < 1e-9);
        assert_eq!(hi, 1.0);
        let (lo, hi) = binomial_interval(50, 100, 0.95);
        assert!(lo < 0.5 && hi > 0.5 && (0.5 - lo - (hi - 0.5)).abs() < 1e-9);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn merge_matches_sequential(xs in proptest::collection::vec(-1e3f64..1e3, 0..40), split in 0usize..40) {
                let split = split.min(xs.len());
                let mut all = Accumulator::default();
                xs.iter().for_each(|&x| all.push(x));
                let (mut a, mut b) = (Accumulator::default(), Accumulator::default());
                xs[..split].iter().for_each(|&x| a.push(x));
                xs[split..].iter().for_each(|&x| b.push(x));
                a.merge(&b);
                let (e, f) = (all.estimate(), a.estimate());
                prop_assert_eq!(e.n, f.n);
                prop_assert!((e.mean - f.mean).abs() <= 1e-9 * (1.0 + e.mean.abs()));
                prop_assert!((e.stderr - f.stderr).abs() <= 1e-9 * (1.0 + e.stderr));
                if xs.len() >= 2 {
                    let direct = Estimate::from_samples(&xs);
                    prop_assert!((direct.stderr - e.stderr).abs() <= 1e-9 * (1.0 + e.stderr));
                }
            }
        }
    }
}
