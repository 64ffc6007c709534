use super::{Capabilities, LearnError, Learner, Predictor};
use crate::data::{Dataset, Matrix, PredictionMatrix, Target};
use crate::space::{ParamSpec, Params, SearchSpace, Trafo};
use nalgebra::{DMatrix, DVector};

/// Elastic-net penalized linear regression and binary logistic regression.
///
/// Minimizes `loss + lambda * (0.5 * (1 - alpha) * |theta|_2^2 + alpha * |theta|_1)`
/// where `loss` is `|y - b0 - X theta|^2 / (2n)` or the mean logistic
/// negative log-likelihood. The intercept `b0` is unpenalized. Solved by
/// proximal gradient descent with step `1/L`, `L` the largest eigenvalue
/// of the loss Hessian bound plus the ridge term.
#[derive(Clone, Debug)]
pub struct ElasticNet {
    pub intercept: bool,
    pub max_iter: usize,
    /// Stop when no coefficient moves by more than this.
    pub tol: f64,
}

impl Default for ElasticNet {
    fn default() -> Self {
        Self { intercept: true, max_iter: 10_000, tol: 1e-8 }
    }
}

/// Fitted coefficients on the original feature scale.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearModel {
    pub intercept: f64,
    pub coef: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    logistic: bool,
}

impl LinearModel {
    pub fn linear_predictor(&self, row: &[f64]) -> f64 {
        self.intercept + row.iter().zip(&self.coef).map(|(x, b)| x * b).sum::<f64>()
    }
}

fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn largest_eigenvalue(gram: &DMatrix<f64>) -> f64 {
    if gram.nrows() == 0 {
        return 0.0;
    }
    gram.clone().symmetric_eigen().eigenvalues.max().max(0.0)
}

impl ElasticNet {
    /// Fits on a numeric design. `lambda >= 0`, `alpha` in `[0, 1]`.
    pub fn fit_linear(&self, x: &Matrix, y: &Target, lambda: f64, alpha: f64) -> Result<LinearModel, LearnError> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(LearnError::Param(format!("regularization {lambda}")));
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(LearnError::Param(format!("alpha {alpha}")));
        }
        let model = match y {
            Target::Regression(v) => self.fit_squared(x, v, lambda, alpha),
            Target::Classes { classes, labels } => {
                if classes.len() != 2 {
                    return Err(LearnError::Unsupported { learner: "elastic_net".into(), what: "multiclass targets".into() });
                }
                let yb: Vec<f64> = labels.iter().map(|&l| l as f64).collect();
                self.fit_logistic(x, &yb, lambda, alpha)
            }
        };
        if !model.intercept.is_finite() || model.coef.iter().any(|b| !b.is_finite()) {
            return Err(LearnError::Degenerate("non-finite coefficients".into()));
        }
        Ok(model)
    }

    fn fit_squared(&self, x: &Matrix, y: &[f64], lambda: f64, alpha: f64) -> LinearModel {
        let (n, p) = (x.nrows(), x.ncols());
        let nf = n as f64;
        let xm: Vec<f64> =
            if self.intercept { (0..p).map(|j| x.column(j).sum::<f64>() / nf).collect() } else { vec![0.0; p] };
        let ym = if self.intercept { y.iter().sum::<f64>() / nf } else { 0.0 };
        let xc = DMatrix::from_fn(n, p, |i, j| x.get(i, j) - xm[j]);
        let yc = DVector::from_iterator(n, y.iter().map(|v| v - ym));
        let gram = xc.transpose() * &xc / nf;
        let xty = xc.transpose() * yc / nf;
        let ridge = lambda * (1.0 - alpha);
        let l = largest_eigenvalue(&gram) + ridge;
        let mut theta = DVector::zeros(p);
        let (mut iterations, mut converged) = (0, l == 0.0);
        if l > 0.0 {
            while iterations < self.max_iter {
                iterations += 1;
                let grad = &gram * &theta - &xty + &theta * ridge;
                let mut delta = 0.0f64;
                for j in 0..p {
                    let new = soft_threshold(theta[j] - grad[j] / l, lambda * alpha / l);
                    delta = delta.max((new - theta[j]).abs());
                    theta[j] = new;
                }
                if delta < self.tol {
                    converged = true;
                    break;
                }
            }
        }
        let coef: Vec<f64> = theta.iter().copied().collect();
        let intercept = ym - xm.iter().zip(&coef).map(|(m, b)| m * b).sum::<f64>();
        LinearModel { intercept, coef, iterations, converged, logistic: false }
    }

    fn fit_logistic(&self, x: &Matrix, y: &[f64], lambda: f64, alpha: f64) -> LinearModel {
        let (n, p) = (x.nrows(), x.ncols());
        let nf = n as f64;
        let off = usize::from(self.intercept);
        // design with an optional leading column of ones
        let a = DMatrix::from_fn(n, p + off, |i, j| if j < off { 1.0 } else { x.get(i, j - off) });
        let ridge = lambda * (1.0 - alpha);
        let l = largest_eigenvalue(&(a.transpose() * &a)) / (4.0 * nf) + ridge;
        let yv = DVector::from_column_slice(y);
        let mut beta = DVector::zeros(p + off);
        let (mut iterations, mut converged) = (0, l == 0.0);
        if l > 0.0 {
            while iterations < self.max_iter {
                iterations += 1;
                let eta = &a * &beta;
                let resid = DVector::from_iterator(n, eta.iter().map(|&e| sigmoid(e))) - &yv;
                let grad = a.transpose() * resid / nf;
                let mut delta = 0.0f64;
                for j in 0..p + off {
                    let new = if j < off {
                        beta[j] - grad[j] / l
                    } else {
                        soft_threshold(beta[j] - (grad[j] + ridge * beta[j]) / l, lambda * alpha / l)
                    };
                    delta = delta.max((new - beta[j]).abs());
                    beta[j] = new;
                }
                if delta < self.tol {
                    converged = true;
                    break;
                }
            }
        }
        let intercept = if off == 1 { beta[0] } else { 0.0 };
        LinearModel { intercept, coef: beta.iter().skip(off).copied().collect(), iterations, converged, logistic: true }
    }
}

impl Learner for ElasticNet {
    fn id(&self) -> String {
        "elastic_net".into()
    }

    fn space(&self) -> SearchSpace {
        SearchSpace::new(vec![ParamSpec::real("s", -12.0, 12.0).with_trafo(Trafo::Pow2), ParamSpec::real("alpha", 0.0, 1.0)])
            .expect("valid preset")
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            regression: true,
            classification: true,
            multiclass: false,
            missing: false,
            categorical: false,
            probabilities: true,
        }
    }

    fn fit(&self, data: &Dataset, params: &Params, _seed: u64) -> Result<Box<dyn Predictor>, LearnError> {
        let x = data.numeric_matrix()?;
        let m = self.fit_linear(&x, data.target(), params.f64_or("s", 1.0), params.f64_or("alpha", 1.0))?;
        Ok(Box::new(m))
    }
}

impl Predictor for LinearModel {
    fn predict(&self, data: &Dataset) -> Result<PredictionMatrix, LearnError> {
        let x = data.numeric_matrix()?;
        if x.ncols() != self.coef.len() {
            return Err(LearnError::Schema(format!("{} features, trained on {}", x.ncols(), self.coef.len())));
        }
        let eta = (0..x.nrows()).map(|i| self.linear_predictor(x.row(i)));
        if self.logistic {
            let data = eta.flat_map(|e| {
                let p = sigmoid(e);
                [1.0 - p, p]
            });
            Ok(PredictionMatrix::probabilities(x.nrows(), 2, data.collect())?)
        } else {
            Ok(PredictionMatrix::regression(eta.collect()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth;

    #[test]
    fn huge_penalty_zeroes_slopes() {
        let d = synth::linear(50, 3, 0.1, 7);
        let x = d.numeric_matrix().unwrap();
        for alpha in [0.0, 0.3, 1.0] {
            let m = ElasticNet::default().fit_linear(&x, d.target(), 1e12, alpha).unwrap();
            assert!(m.coef.iter().all(|b| b.abs() < 1e-8), "{alpha}: {:?}", m.coef);
        }
    }

    #[test]
    fn logistic_separates() {
        let d = synth::separable(80, 1);
        let m = ElasticNet::default().train(&d, &Params::new().with("s", 0.01).with("alpha", 0.5), 0).unwrap();
        let f = m.predict(&d).unwrap();
        let ce = crate::data::Metric::Ce.score(d.target(), &f).unwrap();
        assert_eq!(ce, 0.0);
    }

    #[test]
    fn zero_variance_column_is_handled() {
        let x = Matrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 1.0], vec![1.0, 2.0], vec![1.0, 3.0]]);
        let y = Target::Regression(vec![1.0, 3.0, 5.0, 7.0]);
        let m = ElasticNet::default().fit_linear(&x, &y, 0.0, 0.0).unwrap();
        assert!((m.coef[1] - 2.0).abs() < 1e-6);
        assert!((m.intercept + m.coef[0] - 1.0).abs() < 1e-6);
    }
}
