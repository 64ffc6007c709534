//! Acquisition functions for minimization. Larger utility is better.

use rand::Rng;
use statrs::function::erf::erfc;
use std::f64::consts::{PI, SQRT_2};

/// Standard normal cdf.
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

pub fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// Expected improvement over `c_min` of a normal prediction
/// `N(mean, sd^2)`; at `sd = 0` it is `max(c_min - mean, 0)`.
pub fn expected_improvement(mean: f64, sd: f64, c_min: f64) -> f64 {
    let gap = c_min - mean;
    if sd <= 0.0 {
        return gap.max(0.0);
    }
    let z = gap / sd;
    (gap * norm_cdf(z) + sd * norm_pdf(z)).max(0.0)
}

/// Negated lower confidence bound `-(mean - kappa * sd)`.
pub fn lcb_utility(mean: f64, sd: f64, kappa: f64) -> f64 {
    -(mean - kappa * sd)
}

/// One exploration weight per batch slot, drawn from Exp(1).
pub fn qlcb_kappas<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_limits() {
        assert_eq!(expected_improvement(0.5, 0.0, 1.0), 0.5);
        assert_eq!(expected_improvement(1.5, 0.0, 1.0), 0.0);
        assert!((expected_improvement(1.0, 1.0, 1.0) - 0.398_942_280_401_432_7).abs() < 1e-12);
        assert_eq!(lcb_utility(2.0, 3.0, 0.0), -2.0);
    }

    #[test]
    fn monotone_in_mean_and_sd() {
        let mut prev = f64::INFINITY;
        for i in 0..50 {
            let ei = expected_improvement(-2.0 + 0.1 * i as f64, 0.7, 0.0);
            assert!(ei < prev);
            prev = ei;
        }
        let mut prev = 0.0;
        for i in 1..50 {
            let ei = expected_improvement(0.5, 0.05 * i as f64, 0.0);
            assert!(ei > prev);
            prev = ei;
        }
    }
}
