use super::{Config, Domain, SearchSpace, SpaceError, Value};
use std::collections::BTreeMap;

impl SearchSpace {
    /// Full-factorial grid with `resolution` points per numeric parameter.
    ///
    /// Reals get equidistant points including both bounds, integers the
    /// rounded equivalent (deduplicated), categoricals all levels. On
    /// hierarchical spaces the unconditional product is canonicalized and
    /// duplicates are removed, keeping the first occurrence.
    pub fn grid(&self, resolution: usize) -> Result<Vec<Config>, SpaceError> {
        let axes: Vec<Vec<Value>> = self
            .specs()
            .iter()
            .map(|s| axis(&s.domain, resolution))
            .collect::<Result<_, _>>()?;
        let total: usize = axes.iter().map(Vec::len).product();
        let mut out = Vec::with_capacity(total);
        let mut seen = std::collections::HashSet::new();
        let mut digits = vec![0usize; axes.len()];
        for _ in 0..total {
            let mut raw = BTreeMap::new();
            for (spec, (axis, &d)) in self.specs().iter().zip(axes.iter().zip(&digits)) {
                raw.insert(spec.name.clone(), axis[d].clone());
            }
            let cfg = self
                .canonicalize(&Config { values: raw })
                .expect("every parameter is present before canonicalization");
            if seen.insert(format!("{cfg:?}")) {
                out.push(cfg);
            }
            // odometer, last spec fastest
            for k in (0..digits.len()).rev() {
                digits[k] += 1;
                if digits[k] < axes[k].len() {
                    break;
                }
                digits[k] = 0;
            }
        }
        Ok(out)
    }
}

fn axis(domain: &Domain, resolution: usize) -> Result<Vec<Value>, SpaceError> {
    match domain {
        Domain::Real { lower, upper } => {
            if resolution < 2 {
                return Err(SpaceError::Resolution(resolution));
            }
            Ok((0..resolution)
                .map(|i| {
                    let x = if i + 1 == resolution {
                        *upper
                    } else {
                        lower + (upper - lower) * i as f64 / (resolution - 1) as f64
                    };
                    Value::Real(x)
                })
                .collect())
        }
        Domain::Integer { lower, upper } => {
            if resolution < 2 {
                return Err(SpaceError::Resolution(resolution));
            }
            let mut v: Vec<i64> = (0..resolution)
                .map(|i| (*lower as f64 + (*upper - *lower) as f64 * i as f64 / (resolution - 1) as f64).round() as i64)
                .collect();
            v.dedup();
            Ok(v.into_iter().map(Value::Int).collect())
        }
        Domain::Categorical { levels } => Ok(levels.iter().cloned().map(Value::Cat).collect()),
    }
}

#[cfg(test)]
mod tests {
    use super::super::{ParamSpec, Trafo};
    use super::*;

    #[test]
    fn real_axis_equidistant() {
        let s = SearchSpace::new(vec![ParamSpec::real("x", 0.0, 1.0)]).unwrap();
        let g = s.grid(3).unwrap();
        let xs: Vec<f64> = g.iter().map(|c| c.get("x").unwrap().as_f64().unwrap()).collect();
        assert_eq!(xs, vec![0.0, 0.5, 1.0]);
        assert!(matches!(s.grid(1), Err(SpaceError::Resolution(1))));
    }

    #[test]
    fn product_with_categorical() {
        let s = SearchSpace::new(vec![ParamSpec::real("x", 0.0, 1.0), ParamSpec::categorical("y", ["a", "b"])]).unwrap();
        assert_eq!(s.grid(3).unwrap().len(), 6);
    }

    #[test]
    fn log_scale_grid() {
        let s = SearchSpace::new(vec![ParamSpec::real("k", 1f64.ln(), 50f64.ln()).with_trafo(Trafo::ExpFloor)]).unwrap();
        let ks: Vec<Value> = s.grid(3).unwrap().iter().map(|c| s.transform(c).get("k").unwrap().clone()).collect();
        assert_eq!(ks, vec![Value::Int(1), Value::Int(7), Value::Int(50)]);
    }

    #[test]
    fn integer_grid_dedups() {
        let s = SearchSpace::new(vec![ParamSpec::integer("n", 1, 3)]).unwrap();
        let g = s.grid(10).unwrap();
        assert_eq!(g.len(), 3);
    }

    #[test]
    fn hierarchical_grid_canonicalized() {
        let s = SearchSpace::new(vec![
            ParamSpec::categorical("kernel", ["lin", "rbf"]),
            ParamSpec::real("gamma", 0.0, 1.0).when("kernel", ["rbf"]),
        ])
        .unwrap();
        let g = s.grid(3).unwrap();
        // lin (gamma dropped, deduplicated) + rbf × 3 gammas
        assert_eq!(g.len(), 4);
        assert!(g.iter().all(|c| s.is_valid(c)));
        assert_eq!(g[0], Config::new().with("kernel", "lin"));
    }
}
