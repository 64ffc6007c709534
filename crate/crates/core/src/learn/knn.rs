use super::{Capabilities, LearnError, Learner, Predictor};
use crate::data::{Dataset, Matrix, PredictionMatrix, Target};
use crate::space::{ParamSpec, Params, SearchSpace, Trafo};

/// Distance weighting of the k nearest neighbors.
///
/// Distances are divided by the distance to the (k+1)-th neighbor (the
/// k-th when the whole training set is used) and capped below one before
/// the kernel is applied.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kernel {
    Rectangular,
    /// Rank-based weights that are asymptotically optimal for the
    /// feature dimension (Samworth 2012).
    Optimal,
    Epanechnikov,
    Gaussian,
    Inv,
    Rank,
}

impl Kernel {
    pub const ALL: [Kernel; 6] =
        [Kernel::Rectangular, Kernel::Optimal, Kernel::Epanechnikov, Kernel::Gaussian, Kernel::Inv, Kernel::Rank];

    pub fn name(self) -> &'static str {
        match self {
            Kernel::Rectangular => "rectangular",
            Kernel::Optimal => "optimal",
            Kernel::Epanechnikov => "epanechnikov",
            Kernel::Gaussian => "gaussian",
            Kernel::Inv => "inv",
            Kernel::Rank => "rank",
        }
    }

    pub fn from_name(s: &str) -> Option<Kernel> {
        Kernel::ALL.into_iter().find(|k| k.name() == s)
    }

    /// Weights for neighbors at normalized distances `d` (sorted
    /// ascending) in a `dim`-dimensional feature space.
    fn weights(self, d: &[f64], dim: usize) -> Vec<f64> {
        let k = d.len();
        match self {
            Kernel::Rectangular => vec![1.0; k],
            Kernel::Epanechnikov => d.iter().map(|x| 0.75 * (1.0 - x * x)).collect(),
            Kernel::Gaussian => {
                let q = statrs_quantile(1.0 / (2.0 * (k + 1) as f64)).abs();
                d.iter().map(|x| (-(x * q).powi(2) / 2.0).exp()).collect()
            }
            Kernel::Inv => d.iter().map(|x| 1.0 / x.max(1e-6)).collect(),
            Kernel::Rank => {
                // average ranks for tied distances
                let mut w = vec![0.0; k];
                let mut i = 0;
                while i < k {
                    let mut j = i;
                    while j + 1 < k && d[j + 1] == d[i] {
                        j += 1;
                    }
                    let rank = (i + j + 2) as f64 / 2.0;
                    w[i..=j].fill((k + 1) as f64 - rank);
                    i = j + 1;
                }
                w
            }
            Kernel::Optimal => {
                let dd = dim.max(1) as f64;
                let kf = k as f64;
                let e = 1.0 + 2.0 / dd;
                (1..=k)
                    .map(|i| {
                        let i = i as f64;
                        (1.0 + dd / 2.0 - dd / (2.0 * kf.powf(2.0 / dd)) * (i.powf(e) - (i - 1.0).powf(e))) / kf
                    })
                    .collect()
            }
        }
    }
}

fn statrs_quantile(p: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    Normal::standard().inverse_cdf(p)
}

/// Weighted k-nearest-neighbors for regression and classification.
/// Features are scaled by their training standard deviation.
#[derive(Clone, Copy, Debug, Default)]
pub struct Knn;

pub const DEFAULT_K: usize = 7;

impl Learner for Knn {
    fn id(&self) -> String {
        "knn".into()
    }

    fn space(&self) -> SearchSpace {
        SearchSpace::new(vec![
            ParamSpec::real("k", 1f64.ln(), 50f64.ln()).with_trafo(Trafo::ExpFloor),
            ParamSpec::real("distance", 1.0, 5.0),
            ParamSpec::categorical("kernel", Kernel::ALL.map(Kernel::name)),
        ])
        .expect("valid preset")
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            regression: true,
            classification: true,
            multiclass: true,
            missing: false,
            categorical: false,
            probabilities: true,
        }
    }

    fn fit(&self, data: &Dataset, params: &Params, _seed: u64) -> Result<Box<dyn Predictor>, LearnError> {
        let k = params.usize_or("k", DEFAULT_K);
        let p = params.f64_or("distance", 2.0);
        let kernel_name = params.str_or("kernel", "optimal");
        let kernel = Kernel::from_name(kernel_name).ok_or_else(|| LearnError::Param(format!("kernel `{kernel_name}`")))?;
        if k == 0 || k > data.n() {
            return Err(LearnError::Param(format!("k = {k} with {} training rows", data.n())));
        }
        if !(p >= 1.0 && p.is_finite()) {
            return Err(LearnError::Param(format!("distance power {p}")));
        }
        let x = data.numeric_matrix()?;
        let scale: Vec<f64> = (0..x.ncols())
            .map(|j| {
                let n = x.nrows() as f64;
                let mean = x.column(j).sum::<f64>() / n;
                let var = x.column(j).map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
                if var > 0.0 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        let scaled = Matrix::new(
            x.nrows(),
            x.ncols(),
            x.as_slice().iter().enumerate().map(|(i, v)| v / scale[i % x.ncols()]).collect(),
        );
        Ok(Box::new(KnnModel { k, p, kernel, scale, x: scaled, target: data.target().clone() }))
    }
}

#[derive(Debug)]
struct KnnModel {
    k: usize,
    p: f64,
    kernel: Kernel,
    scale: Vec<f64>,
    x: Matrix,
    target: Target,
}

impl KnnModel {
    fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        let s: f64 = a.iter().zip(b).zip(&self.scale).map(|((x, y), s)| ((x / s) - y).abs().powf(self.p)).sum();
        s.powf(1.0 / self.p)
    }

    /// Neighbor indices and their kernel weights for one query row.
    fn neighbors(&self, q: &[f64]) -> (Vec<usize>, Vec<f64>) {
        let n = self.x.nrows();
        let mut d: Vec<(f64, usize)> = (0..n).map(|i| (self.distance(q, self.x.row(i)), i)).collect();
        let take = (self.k + 1).min(n);
        d.select_nth_unstable_by(take - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        d.truncate(take);
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let norm = d[take - 1].0.max(1e-6);
        let nd: Vec<f64> = d[..self.k].iter().map(|(x, _)| (x / norm).min(1.0 - 1e-6)).collect();
        let w = self.kernel.weights(&nd, self.x.ncols());
        (d[..self.k].iter().map(|&(_, i)| i).collect(), w)
    }
}

impl Predictor for KnnModel {
    fn predict(&self, data: &Dataset) -> Result<PredictionMatrix, LearnError> {
        let q = data.numeric_matrix()?;
        if q.ncols() != self.x.ncols() {
            return Err(LearnError::Schema(format!("{} features, trained on {}", q.ncols(), self.x.ncols())));
        }
        match &self.target {
            Target::Regression(y) => Ok(PredictionMatrix::regression(
                (0..q.nrows())
                    .map(|r| {
                        let (idx, w) = self.neighbors(q.row(r));
                        let sw: f64 = w.iter().sum();
                        idx.iter().zip(&w).map(|(&i, wi)| y[i] * wi).sum::<f64>() / sw
                    })
                    .collect(),
            )),
            Target::Classes { classes, labels } => {
                let g = classes.len();
                let mut out = Vec::with_capacity(q.nrows() * g);
                for r in 0..q.nrows() {
                    let (idx, w) = self.neighbors(q.row(r));
                    let mut votes = vec![0.0; g];
                    for (&i, wi) in idx.iter().zip(&w) {
                        votes[labels[i]] += wi;
                    }
                    let s: f64 = votes.iter().sum();
                    if s > 0.0 {
                        out.extend(votes.iter().map(|v| v / s));
                    } else {
                        out.extend(std::iter::repeat_n(1.0 / g as f64, g));
                    }
                }
                Ok(PredictionMatrix::probabilities(q.nrows(), g, out)?)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth;
    use crate::data::{Metric, TaskKind};

    fn params(k: usize, kernel: &str) -> Params {
        Params::new().with("k", k as i64).with("kernel", kernel)
    }

    #[test]
    fn one_nn_memorizes() {
        let d = synth::smooth_classification(60, 0.1, 3);
        let m = Knn.train(&d, &params(1, "optimal"), 0).unwrap();
        let f = m.predict(&d).unwrap();
        assert_eq!(Metric::Ce.score(d.target(), &f).unwrap(), 0.0);
    }

    #[test]
    fn rectangular_full_k_is_majority_and_mean() {
        let d = synth::smooth_classification(31, 0.0, 4);
        let m = Knn.train(&d, &params(31, "rectangular"), 0).unwrap();
        let f = m.predict(&d).unwrap();
        let counts = d.target().class_counts();
        let p1 = counts[1] as f64 / 31.0;
        for i in 0..f.nrows() {
            assert!((f.row(i)[1] - p1).abs() < 1e-12);
        }
        let r = synth::linear(20, 2, 0.5, 1);
        let m = Knn.train(&r, &params(20, "rectangular"), 0).unwrap();
        let mean = r.target().values().unwrap().iter().sum::<f64>() / 20.0;
        assert!(m.predict(&r).unwrap().values().iter().all(|v| (v - mean).abs() < 1e-12));
    }

    #[test]
    fn rejects_k_above_n() {
        let d = synth::smooth_classification(5, 0.0, 1);
        assert!(matches!(Knn.train(&d, &params(6, "rank"), 0), Err(LearnError::Param(_))));
    }

    #[test]
    fn every_kernel_gives_probabilities() {
        let d = synth::smooth_classification(40, 0.1, 2);
        for kernel in Kernel::ALL {
            let f = Knn.train(&d, &params(7, kernel.name()).with("distance", 1.5), 0).unwrap().predict(&d).unwrap();
            assert!(f.is_probabilities());
            assert_eq!(d.task(), TaskKind::Classification);
        }
    }

    #[test]
    fn optimal_weights_sum_to_one() {
        for dim in 1..6 {
            for k in 1..30 {
                let w = Kernel::Optimal.weights(&vec![0.5; k], dim);
                assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                assert!(w.iter().all(|&x| x >= -1e-12));
            }
        }
    }
}
