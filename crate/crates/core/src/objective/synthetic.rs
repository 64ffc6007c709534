use super::{FidelityRange, Objective};
use crate::data::Direction;
use crate::rng;
use crate::space::{Config, ParamSpec, SearchSpace};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Synthetic test functions over real parameters `x1..xd`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "function", rename_all = "snake_case")]
pub enum SyntheticFn {
    /// `sum x_i^2` on `[-5, 5]^d`.
    Sphere { dim: usize },
    /// Two-dimensional function with three global minima, on
    /// `[-5, 10] x [0, 15]`.
    Branin,
    /// Only `x1` matters: an inverted Gaussian well centred at 0.27 on
    /// `[0, 1]^d`.
    LowEffDim { dim: usize },
}

impl SyntheticFn {
    pub fn dim(&self) -> usize {
        match *self {
            SyntheticFn::Sphere { dim } | SyntheticFn::LowEffDim { dim } => dim,
            SyntheticFn::Branin => 2,
        }
    }

    pub fn id(&self) -> String {
        match self {
            SyntheticFn::Sphere { dim } => format!("sphere{dim}"),
            SyntheticFn::Branin => "branin".into(),
            SyntheticFn::LowEffDim { dim } => format!("low_eff_dim{dim}"),
        }
    }

    pub fn bounds(&self) -> Vec<(f64, f64)> {
        match *self {
            SyntheticFn::Sphere { dim } => vec![(-5.0, 5.0); dim],
            SyntheticFn::Branin => vec![(-5.0, 10.0), (0.0, 15.0)],
            SyntheticFn::LowEffDim { dim } => vec![(0.0, 1.0); dim],
        }
    }

    pub fn space(&self) -> SearchSpace {
        let specs = self.bounds().into_iter().enumerate().map(|(i, (l, u))| ParamSpec::real(format!("x{}", i + 1), l, u));
        SearchSpace::new(specs.collect()).expect("distinct names")
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            SyntheticFn::Sphere { .. } => x.iter().map(|v| v * v).sum(),
            SyntheticFn::Branin => {
                let (a, b, c, r, s, t) = (1.0, 5.1 / (4.0 * PI * PI), 5.0 / PI, 6.0, 10.0, 1.0 / (8.0 * PI));
                a * (x[1] - b * x[0] * x[0] + c * x[0] - r).powi(2) + s * (1.0 - t) * x[0].cos() + s
            }
            SyntheticFn::LowEffDim { .. } => 1.0 - (-(x[0] - 0.27).powi(2) / (2.0 * 0.05 * 0.05)).exp(),
        }
    }

    /// Known minimizers, used to compute the reference optimum.
    pub fn minimizers(&self) -> Vec<Vec<f64>> {
        match *self {
            SyntheticFn::Sphere { dim } => vec![vec![0.0; dim]],
            SyntheticFn::Branin => vec![vec![-PI, 12.275], vec![PI, 2.275], vec![9.42478, 2.475]],
            SyntheticFn::LowEffDim { dim } => {
                let mut x = vec![0.5; dim];
                x[0] = 0.27;
                vec![x]
            }
        }
    }

    /// Reference optimum value, computed at the minimizers.
    pub fn optimum(&self) -> f64 {
        self.minimizers().iter().map(|x| self.value(x)).fold(f64::INFINITY, f64::min)
    }

    pub fn point(&self, cfg: &Config) -> Result<Vec<f64>, String> {
        (1..=self.dim())
            .map(|i| {
                cfg.get(&format!("x{i}")).and_then(|v| v.as_f64()).ok_or_else(|| format!("missing numeric x{i}"))
            })
            .collect()
    }
}

/// A synthetic function exposed as an objective. With `noise_sd > 0`
/// each instance adds independent Gaussian noise drawn from the
/// instance's seed, so instances act as noisy replicates.
#[derive(Clone, Debug)]
pub struct SyntheticObjective {
    pub function: SyntheticFn,
    pub noise_sd: f64,
    pub instances: usize,
    pub fidelity: Option<FidelityRange>,
    space: SearchSpace,
}

impl SyntheticObjective {
    pub fn new(function: SyntheticFn) -> Self {
        Self { function, noise_sd: 0.0, instances: 1, fidelity: None, space: function.space() }
    }

    pub fn with_noise(mut self, sd: f64, instances: usize) -> Self {
        self.noise_sd = sd;
        self.instances = instances.max(1);
        self
    }

    /// Declares a fidelity range. Evaluating below the upper bound adds a
    /// deterministic bias `(1 - f / upper)` shrinking to zero at full
    /// fidelity, which makes low-fidelity rankings informative but biased.
    pub fn with_fidelity(mut self, lower: f64, upper: f64) -> Self {
        self.fidelity = Some(FidelityRange { lower, upper });
        self
    }
}

impl Objective for SyntheticObjective {
    fn id(&self) -> String {
        self.function.id()
    }

    fn space(&self) -> &SearchSpace {
        &self.space
    }

    fn direction(&self) -> Direction {
        Direction::Minimize
    }

    fn fidelity(&self) -> Option<FidelityRange> {
        self.fidelity
    }

    fn n_instances(&self) -> usize {
        self.instances
    }

    fn evaluate_instance(&self, cfg: &Config, instance: usize, fidelity: f64, seed: u64) -> Result<Option<f64>, String> {
        if instance >= self.instances {
            return Err(format!("no instance {instance}"));
        }
        self.space.check(cfg).map_err(|e| e.to_string())?;
        let x = self.function.point(cfg)?;
        let mut v = self.function.value(&x);
        if let Some(r) = self.fidelity {
            if !(fidelity > 0.0 && fidelity <= r.upper) {
                return Err(format!("fidelity {fidelity} outside (0, {}]", r.upper));
            }
            v += 1.0 - fidelity / r.upper;
        }
        if self.noise_sd > 0.0 {
            let z: f64 = StandardNormal.sample(&mut rng::stream(seed, &[rng::label::NOISE]));
            v += self.noise_sd * z;
        }
        Ok(Some(v))
    }
}
