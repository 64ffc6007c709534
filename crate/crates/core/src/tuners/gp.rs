//! Gaussian process regression with an anisotropic squared-exponential
//! kernel on `[0, 1]`-scaled inputs.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;

/// Smallest noise variance (standardized units) for noisy fits.
pub const NOISE_FLOOR: f64 = 1e-8;
const MAX_JITTER: f64 = 1e-4;

const LOG_LS: (f64, f64) = (-4.605_170_185_988_091, 2.302_585_092_994_046); // ln 1e-2, ln 10
const LOG_SIGNAL: (f64, f64) = (-6.907_755_278_982_137, 2.302_585_092_994_046); // ln 1e-3, ln 10
const LOG_NOISE: (f64, f64) = (-13.815_510_557_964_274, 0.0); // ln 1e-6, ln 1

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NoiseMode {
    /// No noise term; only the jitter needed for a stable factorization.
    Noiseless,
    /// Noise sd fitted in `[1e-6, 1]` target sds.
    Estimated,
}

/// Kernel hyperparameters on the standardized target scale.
#[derive(Clone, Debug, PartialEq)]
pub struct Hyper {
    pub lengthscales: Vec<f64>,
    pub signal_sd: f64,
    pub noise_sd: f64,
}

#[derive(Clone, Debug)]
pub struct GpOptions {
    pub restarts: usize,
    pub noise: NoiseMode,
    /// Likelihood evaluations allowed per local search.
    pub max_evals: usize,
}

impl Default for GpOptions {
    fn default() -> Self {
        Self { restarts: 10, noise: NoiseMode::Estimated, max_evals: 300 }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GpError {
    #[error("need at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("inconsistent input dimension")]
    Dimension,
    #[error("kernel matrix not positive definite after jitter {0:e}")]
    NotPositiveDefinite(f64),
}

#[derive(Clone, Debug)]
pub struct Gp {
    x: Vec<Vec<f64>>,
    y_mean: f64,
    y_sd: f64,
    hyper: Hyper,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    log_likelihood: f64,
}

fn sq_exp(a: &[f64], b: &[f64], ls: &[f64], signal_var: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).zip(ls).map(|((x, y), l)| ((x - y) / l).powi(2)).sum();
    signal_var * (-0.5 * d2).exp()
}

/// Cholesky factor of `K + noise I`, escalating diagonal jitter up to
/// `1e-4` when the factorization fails. A zero noise sd adds no floor, so
/// noiseless fits interpolate up to the jitter. Returns the jitter used.
fn factor(x: &[Vec<f64>], h: &Hyper) -> Result<(Cholesky<f64, Dyn>, f64), GpError> {
    let n = x.len();
    let sv = h.signal_sd * h.signal_sd;
    let noise = if h.noise_sd > 0.0 { (h.noise_sd * h.noise_sd).max(NOISE_FLOOR) } else { 0.0 };
    let k = DMatrix::from_fn(n, n, |i, j| sq_exp(&x[i], &x[j], &h.lengthscales, sv));
    let mut jitter = 0.0;
    loop {
        let mut m = k.clone();
        for i in 0..n {
            m[(i, i)] += noise + jitter;
        }
        if let Some(c) = Cholesky::new(m) {
            return Ok((c, jitter));
        }
        jitter = if jitter == 0.0 { 1e-12 } else { jitter * 10.0 };
        if jitter > MAX_JITTER * 1.000_001 {
            return Err(GpError::NotPositiveDefinite(MAX_JITTER));
        }
    }
}

/// Log marginal likelihood of standardized targets `y`.
fn log_likelihood(x: &[Vec<f64>], y: &DVector<f64>, h: &Hyper) -> Result<(f64, Cholesky<f64, Dyn>, DVector<f64>), GpError> {
    let (chol, _) = factor(x, h)?;
    let alpha = chol.solve(y);
    let log_det: f64 = chol.l_dirty().diagonal().iter().take(y.len()).map(|d| d.ln()).sum::<f64>() * 2.0;
    let n = y.len() as f64;
    let ll = -0.5 * y.dot(&alpha) - 0.5 * log_det - 0.5 * n * (2.0 * std::f64::consts::PI).ln();
    Ok((ll, chol, alpha))
}

fn standardize(y: &[f64]) -> (f64, f64) {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    (mean, if sd > 1e-12 { sd } else { 1.0 })
}

impl Gp {
    /// Fits with fixed hyperparameters.
    pub fn with_hyper(x: Vec<Vec<f64>>, y: &[f64], hyper: Hyper) -> Result<Self, GpError> {
        check_inputs(&x, y)?;
        let (y_mean, y_sd) = standardize(y);
        let ys = DVector::from_iterator(y.len(), y.iter().map(|v| (v - y_mean) / y_sd));
        let (ll, chol, alpha) = log_likelihood(&x, &ys, &hyper)?;
        Ok(Self { x, y_mean, y_sd, hyper, chol, alpha, log_likelihood: ll })
    }

    /// Fits hyperparameters by maximizing the log marginal likelihood:
    /// a compass search in log space from a default start plus
    /// `restarts - 1` random starts inside fixed boxes.
    pub fn fit<R: Rng + ?Sized>(x: Vec<Vec<f64>>, y: &[f64], opts: &GpOptions, rng: &mut R) -> Result<Self, GpError> {
        check_inputs(&x, y)?;
        let d = x[0].len();
        let (y_mean, y_sd) = standardize(y);
        let ys = DVector::from_iterator(y.len(), y.iter().map(|v| (v - y_mean) / y_sd));
        let estimate_noise = opts.noise == NoiseMode::Estimated;
        let mut boxes = vec![LOG_LS; d];
        boxes.push(LOG_SIGNAL);
        if estimate_noise {
            boxes.push(LOG_NOISE);
        }
        let to_hyper = |t: &[f64]| Hyper {
            lengthscales: t[..d].iter().map(|v| v.exp()).collect(),
            signal_sd: t[d].exp(),
            noise_sd: if estimate_noise { t[d + 1].exp() } else { 0.0 },
        };
        let objective = |t: &[f64]| log_likelihood(&x, &ys, &to_hyper(t)).map(|r| r.0).unwrap_or(f64::NEG_INFINITY);

        let mut best: Option<(f64, Vec<f64>)> = None;
        for r in 0..opts.restarts.max(1) {
            let start: Vec<f64> = if r == 0 {
                let mut s = vec![(0.3f64).ln(); d];
                s.push(0.0);
                if estimate_noise {
                    s.push((1e-2f64).ln());
                }
                s
            } else {
                boxes.iter().map(|&(lo, hi)| rng.random_range(lo..=hi)).collect()
            };
            let (v, t) = compass_search(&objective, start, &boxes, opts.max_evals);
            if best.as_ref().is_none_or(|(b, _)| v > *b) {
                best = Some((v, t));
            }
        }
        let (_, t) = best.expect("at least one restart");
        let hyper = to_hyper(&t);
        let (ll, chol, alpha) = log_likelihood(&x, &ys, &hyper)?;
        Ok(Self { x, y_mean, y_sd, hyper, chol, alpha, log_likelihood: ll })
    }

    pub fn hyper(&self) -> &Hyper {
        &self.hyper
    }

    pub fn log_likelihood(&self) -> f64 {
        self.log_likelihood
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    /// Posterior mean and sd of the latent function at `p`, on the
    /// original target scale.
    pub fn predict(&self, p: &[f64]) -> (f64, f64) {
        let sv = self.hyper.signal_sd * self.hyper.signal_sd;
        let k = DVector::from_iterator(self.x.len(), self.x.iter().map(|xi| sq_exp(xi, p, &self.hyper.lengthscales, sv)));
        let mean = k.dot(&self.alpha);
        let v = self.chol.l_dirty().solve_lower_triangular(&k).expect("non-singular factor");
        let var = (sv - v.dot(&v)).max(0.0);
        (self.y_mean + self.y_sd * mean, self.y_sd * var.sqrt())
    }

    /// Prior sd of the latent function on the original scale.
    pub fn prior_sd(&self) -> f64 {
        self.y_sd * self.hyper.signal_sd
    }
}

fn check_inputs(x: &[Vec<f64>], y: &[f64]) -> Result<(), GpError> {
    if x.len() < 2 || y.len() != x.len() {
        return Err(GpError::TooFewPoints(x.len().min(y.len())));
    }
    let d = x[0].len();
    if d == 0 || x.iter().any(|r| r.len() != d) {
        return Err(GpError::Dimension);
    }
    Ok(())
}

/// Coordinate-wise pattern search maximizing `f` inside `boxes`.
fn compass_search(f: &impl Fn(&[f64]) -> f64, mut t: Vec<f64>, boxes: &[(f64, f64)], max_evals: usize) -> (f64, Vec<f64>) {
    let mut best = f(&t);
    let mut step = 1.0;
    let mut evals = 1;
    while step > 1e-3 && evals < max_evals {
        let mut improved = false;
        for i in 0..t.len() {
            for dir in [1.0, -1.0] {
                let mut c = t.clone();
                c[i] = (c[i] + dir * step).clamp(boxes[i].0, boxes[i].1);
                if c[i] == t[i] {
                    continue;
                }
                let v = f(&c);
                evals += 1;
                if v > best {
                    best = v;
                    t = c;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (best, t)
}
