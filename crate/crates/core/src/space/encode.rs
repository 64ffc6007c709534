use super::{Config, Domain, SearchSpace, SpaceError, Value};

impl SearchSpace {
    /// Length of [`SearchSpace::encode`] output.
    pub fn encoded_len(&self) -> usize {
        self.specs()
            .iter()
            .map(|s| {
                let base = match &s.domain {
                    Domain::Categorical { levels } => levels.len(),
                    _ => 1,
                };
                base + usize::from(s.condition.is_some())
            })
            .sum()
    }

    /// Fixed-length numeric encoding in spec order.
    ///
    /// Numeric values are min-max scaled to `[0, 1]` on the tuner scale,
    /// categoricals are one-hot. Every conditional spec is followed by a 0/1
    /// activity slot; an inactive numeric is imputed at 0.5 and an inactive
    /// categorical at its first level.
    pub fn encode(&self, cfg: &Config) -> Result<Vec<f64>, SpaceError> {
        self.check(cfg)?;
        Ok(self.encode_unchecked(cfg))
    }

    pub(crate) fn encode_unchecked(&self, cfg: &Config) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.encoded_len());
        for s in self.specs() {
            let v = cfg.get(&s.name);
            match &s.domain {
                Domain::Categorical { levels } => {
                    let hot = match v {
                        Some(Value::Cat(l)) => levels.iter().position(|x| x == l).unwrap_or(0),
                        _ => 0,
                    };
                    out.extend((0..levels.len()).map(|i| if i == hot { 1.0 } else { 0.0 }));
                }
                d => {
                    let (lo, hi) = d.bounds().expect("numeric domain");
                    let x = v.and_then(Value::as_f64).map(|x| (x - lo) / (hi - lo)).unwrap_or(0.5);
                    out.push(x);
                }
            }
            if s.condition.is_some() {
                out.push(if v.is_some() { 1.0 } else { 0.0 });
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::super::ParamSpec;
    use super::*;

    #[test]
    fn midpoint() {
        let s = SearchSpace::new(vec![ParamSpec::real("x", 0.0, 10.0)]).unwrap();
        assert_eq!(s.encode(&Config::new().with("x", 5.0)).unwrap(), vec![0.5]);
    }

    #[test]
    fn one_hot() {
        let s = SearchSpace::new(vec![ParamSpec::categorical("c", ["a", "b", "c"])]).unwrap();
        assert_eq!(s.encode(&Config::new().with("c", "b")).unwrap(), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn inactive_imputed() {
        let s = SearchSpace::new(vec![
            ParamSpec::categorical("kernel", ["lin", "rbf"]),
            ParamSpec::real("gamma", 0.0, 1.0).when("kernel", ["rbf"]),
        ])
        .unwrap();
        let e = s.encode(&Config::new().with("kernel", "lin")).unwrap();
        assert_eq!(e, vec![1.0, 0.0, 0.5, 0.0]);
        let e = s.encode(&Config::new().with("kernel", "rbf").with("gamma", 0.25)).unwrap();
        assert_eq!(e, vec![0.0, 1.0, 0.25, 1.0]);
        assert_eq!(s.encoded_len(), 4);
        assert!(s.encode(&Config::new().with("kernel", "rbf")).is_err());
    }
}
