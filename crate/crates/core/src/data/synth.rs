//! Deterministic synthetic datasets.

use super::{Dataset, Matrix, Target};
use crate::rng;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

fn normal(r: &mut rng::Rng) -> f64 {
    StandardNormal.sample(r)
}

/// Balanced binary labels `0..n` in random order.
fn balanced_labels(n: usize, r: &mut rng::Rng) -> Vec<usize> {
    let mut y: Vec<usize> = (0..n).map(|i| usize::from(i >= n / 2)).collect();
    y.shuffle(r);
    y
}

/// Two classes separated by a margin of 2 along `x1`; `x2` is noise.
pub fn separable(n: usize, seed: u64) -> Dataset {
    let mut r = rng::stream(seed, &[rng::label::DATA, 1]);
    let y = balanced_labels(n, &mut r);
    let rows: Vec<Vec<f64>> = y
        .iter()
        .map(|&c| {
            let side = if c == 1 { 1.0 } else { -1.0 };
            vec![side * (1.0 + 2.0 * r.random::<f64>()), normal(&mut r)]
        })
        .collect();
    Dataset::from_matrix(&Matrix::from_rows(&rows), Target::classes(y, 2)).expect("valid")
}

/// `y = 2 x1 - x2 + 0.5 x3 + noise * e` with standard normal features
/// (coefficients beyond the third are zero).
pub fn linear(n: usize, p: usize, noise: f64, seed: u64) -> Dataset {
    let mut r = rng::stream(seed, &[rng::label::DATA, 2]);
    let beta = [2.0, -1.0, 0.5];
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| normal(&mut r)).collect()).collect();
    let y = rows
        .iter()
        .map(|x| x.iter().zip(beta.iter().chain(std::iter::repeat(&0.0))).map(|(a, b)| a * b).sum::<f64>() + noise * normal(&mut r))
        .collect();
    Dataset::from_matrix(&Matrix::from_rows(&rows), Target::Regression(y)).expect("valid")
}

/// Exactly balanced binary labels independent of `p` standard normal
/// features: no learner can beat an error of 0.5 in expectation.
pub fn random_labels(n: usize, p: usize, seed: u64) -> Dataset {
    let mut r = rng::stream(seed, &[rng::label::DATA, 3]);
    let y = balanced_labels(n, &mut r);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| normal(&mut r)).collect()).collect();
    Dataset::from_matrix(&Matrix::from_rows(&rows), Target::classes(y, 2)).expect("valid")
}

/// Uniform points on the unit square labelled by a smooth boundary
/// `x2 > 0.5 + 0.25 sin(2 pi x1)`, each label flipped with probability
/// `flip`.
pub fn smooth_classification(n: usize, flip: f64, seed: u64) -> Dataset {
    let mut r = rng::stream(seed, &[rng::label::DATA, 4]);
    let mut rows = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let (a, b): (f64, f64) = (r.random(), r.random());
        let mut c = usize::from(b > 0.5 + 0.25 * (2.0 * std::f64::consts::PI * a).sin());
        if r.random::<f64>() < flip {
            c = 1 - c;
        }
        rows.push(vec![a, b]);
        y.push(c);
    }
    Dataset::from_matrix(&Matrix::from_rows(&rows), Target::classes(y, 2)).expect("valid")
}

/// Bundled datasets addressable by name.
pub fn bundled(name: &str) -> Option<Dataset> {
    match name {
        "separable" => Some(separable(150, 1)),
        "linear" => Some(linear(150, 5, 0.5, 1)),
        "smooth" => Some(smooth_classification(200, 0.05, 1)),
        "random_labels" => Some(random_labels(100, 2, 1)),
        _ => None,
    }
}

pub const BUNDLED: [&str; 4] = ["separable", "linear", "smooth", "random_labels"];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_and_balance() {
        let d = separable(150, 1);
        assert_eq!((d.n(), d.p()), (150, 2));
        assert_eq!(d.target().class_counts(), vec![75, 75]);
        assert_eq!(random_labels(100, 2, 5).target().class_counts(), vec![50, 50]);
        assert_eq!(separable(20, 3), separable(20, 3));
        for name in BUNDLED {
            assert!(bundled(name).is_some());
        }
    }
}
