use super::LearnError;
use crate::data::{self, Column, ColumnData, Dataset, Target};
use crate::rng;
use crate::space::{ParamSpec, Params, SearchSpace};
use std::fmt;
use std::sync::Arc;

/// Fitted state of a preprocessing operator, applied to new data.
pub trait Transform: Send + Sync + fmt::Debug {
    fn apply(&self, data: &Dataset) -> Result<Dataset, LearnError>;
}

/// A data-dependent preprocessing step. Fitting sees only the training
/// data flowing into it and returns both the fitted state and the
/// transformed training data.
pub trait Preprocessor: Send + Sync + fmt::Debug {
    fn id(&self) -> String;

    fn space(&self) -> SearchSpace {
        SearchSpace::new(Vec::new()).expect("empty space")
    }

    fn fit_transform(&self, data: &Dataset, params: &Params, seed: u64) -> Result<(Box<dyn Transform>, Dataset), LearnError>;

    /// Output never contains missing cells.
    fn removes_missing(&self) -> bool {
        false
    }

    /// Output never contains categorical columns.
    fn removes_categorical(&self) -> bool {
        false
    }
}

pub(crate) fn by_id(id: &str) -> Result<Arc<dyn Preprocessor>, LearnError> {
    Ok(match id {
        "impute" => Arc::new(Impute { method: ImputeMethod::Mean, indicator: false }),
        "impute_median" => Arc::new(Impute { method: ImputeMethod::Median, indicator: false }),
        "impute_indicator" => Arc::new(Impute { method: ImputeMethod::Mean, indicator: true }),
        "onehot" => Arc::new(OneHot { drop_first: false }),
        "standardize" => Arc::new(Standardize),
        "filter" => Arc::new(CorrelationFilter),
        "subsample" => Arc::new(Subsample),
        other => return Err(LearnError::UnknownId(other.to_string())),
    })
}

fn numeric(c: &Column) -> Option<&[Option<f64>]> {
    match &c.data {
        ColumnData::Numeric(v) => Some(v),
        _ => None,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ImputeMethod {
    Mean,
    Median,
    Constant(f64),
}

/// Fills missing numeric cells with a training statistic and missing
/// categorical cells with a dedicated `NA` level. With `indicator`, every
/// numeric column that had missing training cells gains a 0/1 column
/// `<name>.missing`.
#[derive(Clone, Debug)]
pub struct Impute {
    pub method: ImputeMethod,
    pub indicator: bool,
}

pub const MISSING_LEVEL: &str = "NA";

#[derive(Debug)]
struct ImputeState {
    fill: Vec<Option<f64>>,
    indicator: Vec<bool>,
    /// Replacement level per categorical column.
    level: Vec<Option<String>>,
}

impl Preprocessor for Impute {
    fn id(&self) -> String {
        match (self.method, self.indicator) {
            (_, true) => "impute_indicator".into(),
            (ImputeMethod::Median, false) => "impute_median".into(),
            _ => "impute".into(),
        }
    }

    fn fit_transform(&self, data: &Dataset, _params: &Params, _seed: u64) -> Result<(Box<dyn Transform>, Dataset), LearnError> {
        let mut fill = Vec::new();
        let mut indicator = Vec::new();
        let mut level = Vec::new();
        for c in data.columns() {
            match &c.data {
                ColumnData::Numeric(v) => {
                    let mut present: Vec<f64> = v.iter().flatten().copied().collect();
                    let value = match self.method {
                        ImputeMethod::Constant(x) => x,
                        _ if present.is_empty() => 0.0,
                        ImputeMethod::Mean => present.iter().sum::<f64>() / present.len() as f64,
                        ImputeMethod::Median => {
                            present.sort_by(f64::total_cmp);
                            let m = present.len();
                            if m % 2 == 1 {
                                present[m / 2]
                            } else {
                                0.5 * (present[m / 2 - 1] + present[m / 2])
                            }
                        }
                    };
                    fill.push(Some(value));
                    indicator.push(self.indicator && v.iter().any(Option::is_none));
                    level.push(None);
                }
                ColumnData::Categorical { levels, codes } => {
                    fill.push(None);
                    indicator.push(false);
                    // new level when training had missing cells, else the mode
                    let lv = if codes.iter().any(Option::is_none) {
                        MISSING_LEVEL.to_string()
                    } else {
                        let mut counts = vec![0usize; levels.len()];
                        codes.iter().flatten().for_each(|&k| counts[k] += 1);
                        let mode = (0..levels.len()).fold(0, |b, k| if counts[k] > counts[b] { k } else { b });
                        levels[mode].clone()
                    };
                    level.push(Some(lv));
                }
            }
        }
        let state = ImputeState { fill, indicator, level };
        let out = state.apply(data)?;
        Ok((Box::new(state), out))
    }

    fn removes_missing(&self) -> bool {
        true
    }
}

impl Transform for ImputeState {
    fn apply(&self, data: &Dataset) -> Result<Dataset, LearnError> {
        if data.p() != self.fill.len() {
            return Err(LearnError::Schema(format!("{} columns, fitted on {}", data.p(), self.fill.len())));
        }
        let mut cols = Vec::with_capacity(data.p());
        for (j, c) in data.columns().iter().enumerate() {
            match &c.data {
                ColumnData::Numeric(v) => {
                    let f = self.fill[j].ok_or_else(|| LearnError::Schema(format!("column `{}` changed kind", c.name)))?;
                    cols.push(Column { name: c.name.clone(), data: ColumnData::Numeric(v.iter().map(|x| Some(x.unwrap_or(f))).collect()) });
                    if self.indicator[j] {
                        cols.push(Column {
                            name: format!("{}.missing", c.name),
                            data: ColumnData::Numeric(v.iter().map(|x| Some(if x.is_none() { 1.0 } else { 0.0 })).collect()),
                        });
                    }
                }
                ColumnData::Categorical { levels, codes } => {
                    let lv = self.level[j].as_ref().ok_or_else(|| LearnError::Schema(format!("column `{}` changed kind", c.name)))?;
                    let mut levels = levels.clone();
                    let code = match levels.iter().position(|l| l == lv) {
                        Some(k) => k,
                        None => {
                            levels.push(lv.clone());
                            levels.len() - 1
                        }
                    };
                    let codes = codes.iter().map(|c| Some(c.unwrap_or(code))).collect();
                    cols.push(Column { name: c.name.clone(), data: ColumnData::Categorical { levels, codes } });
                }
            }
        }
        Ok(data.with_columns(cols)?)
    }
}

/// Replaces each categorical column with one 0/1 column per level
/// (`<name>.<level>`), or per level except the first with `drop_first`.
#[derive(Clone, Debug)]
pub struct OneHot {
    pub drop_first: bool,
}

#[derive(Debug)]
struct OneHotState {
    /// Levels per column; `None` for numeric columns.
    levels: Vec<Option<Vec<String>>>,
    drop_first: bool,
}

impl Preprocessor for OneHot {
    fn id(&self) -> String {
        "onehot".into()
    }

    fn fit_transform(&self, data: &Dataset, _params: &Params, _seed: u64) -> Result<(Box<dyn Transform>, Dataset), LearnError> {
        let levels = data
            .columns()
            .iter()
            .map(|c| match &c.data {
                ColumnData::Categorical { levels, .. } => Some(levels.clone()),
                ColumnData::Numeric(_) => None,
            })
            .collect();
        let state = OneHotState { levels, drop_first: self.drop_first };
        let out = state.apply(data)?;
        Ok((Box::new(state), out))
    }

    fn removes_categorical(&self) -> bool {
        true
    }
}

impl Transform for OneHotState {
    fn apply(&self, data: &Dataset) -> Result<Dataset, LearnError> {
        if data.p() != self.levels.len() {
            return Err(LearnError::Schema(format!("{} columns, fitted on {}", data.p(), self.levels.len())));
        }
        let mut cols = Vec::new();
        for (c, fitted) in data.columns().iter().zip(&self.levels) {
            match (&c.data, fitted) {
                (ColumnData::Numeric(_), None) => cols.push(c.clone()),
                (ColumnData::Categorical { levels, codes }, Some(fitted)) => {
                    for lv in fitted.iter().skip(usize::from(self.drop_first)) {
                        let local = levels.iter().position(|l| l == lv);
                        let v = codes
                            .iter()
                            .map(|code| match code {
                                None => Err(LearnError::Unsupported { learner: "onehot".into(), what: "missing values".into() }),
                                Some(c) => Ok(Some(if Some(*c) == local { 1.0 } else { 0.0 })),
                            })
                            .collect::<Result<Vec<_>, _>>()?;
                        cols.push(Column { name: format!("{}.{}", c.name, lv), data: ColumnData::Numeric(v) });
                    }
                }
                _ => return Err(LearnError::Schema(format!("column `{}` changed kind", c.name))),
            }
        }
        Ok(data.with_columns(cols)?)
    }
}

/// Centers and scales numeric columns with training means and standard
/// deviations (constant columns are only centered).
#[derive(Clone, Copy, Debug)]
pub struct Standardize;

#[derive(Debug)]
struct Affine {
    shift: Vec<f64>,
    scale: Vec<f64>,
}

impl Preprocessor for Standardize {
    fn id(&self) -> String {
        "standardize".into()
    }

    fn fit_transform(&self, data: &Dataset, _params: &Params, _seed: u64) -> Result<(Box<dyn Transform>, Dataset), LearnError> {
        let (mut shift, mut scale) = (Vec::new(), Vec::new());
        for c in data.columns() {
            let (m, s) = match numeric(c) {
                Some(v) => {
                    let x: Vec<f64> = v.iter().flatten().copied().collect();
                    let n = x.len() as f64;
                    if x.is_empty() {
                        (0.0, 1.0)
                    } else {
                        let mean = x.iter().sum::<f64>() / n;
                        let sd = (x.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt();
                        (mean, if sd > 0.0 { sd } else { 1.0 })
                    }
                }
                None => (0.0, 1.0),
            };
            shift.push(m);
            scale.push(s);
        }
        let state = Affine { shift, scale };
        let out = state.apply(data)?;
        Ok((Box::new(state), out))
    }
}

impl Transform for Affine {
    fn apply(&self, data: &Dataset) -> Result<Dataset, LearnError> {
        if data.p() != self.shift.len() {
            return Err(LearnError::Schema(format!("{} columns, fitted on {}", data.p(), self.shift.len())));
        }
        let cols = data
            .columns()
            .iter()
            .enumerate()
            .map(|(j, c)| match &c.data {
                ColumnData::Numeric(v) => Column {
                    name: c.name.clone(),
                    data: ColumnData::Numeric(v.iter().map(|x| x.map(|x| (x - self.shift[j]) / self.scale[j])).collect()),
                },
                _ => c.clone(),
            })
            .collect();
        Ok(data.with_columns(cols)?)
    }
}

/// Keeps the fraction `frac` of numeric features with the largest absolute
/// correlation with the target (at least one); categorical columns pass.
/// For class targets a feature's score is its largest absolute correlation
/// with any class indicator.
#[derive(Clone, Copy, Debug)]
pub struct CorrelationFilter;

#[derive(Debug)]
struct Select {
    keep: Vec<usize>,
    p: usize,
}

fn abs_corr(x: &[Option<f64>], y: &[f64]) -> f64 {
    let pairs: Vec<(f64, f64)> = x.iter().zip(y).filter_map(|(a, b)| a.map(|a| (a, *b))).collect();
    let n = pairs.len() as f64;
    if pairs.len() < 2 {
        return 0.0;
    }
    let (mx, my) = (pairs.iter().map(|p| p.0).sum::<f64>() / n, pairs.iter().map(|p| p.1).sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in pairs {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        0.0
    } else {
        (sxy / (sxx * syy).sqrt()).abs()
    }
}

/// Filter score of each column; `None` for categorical columns.
pub fn correlation_scores(data: &Dataset) -> Vec<Option<f64>> {
    let targets: Vec<Vec<f64>> = match data.target() {
        Target::Regression(y) => vec![y.clone()],
        Target::Classes { classes, labels } => {
            (0..classes.len()).map(|k| labels.iter().map(|&l| if l == k { 1.0 } else { 0.0 }).collect()).collect()
        }
    };
    data.columns()
        .iter()
        .map(|c| numeric(c).map(|x| targets.iter().map(|y| abs_corr(x, y)).fold(0.0, f64::max)))
        .collect()
}

impl Preprocessor for CorrelationFilter {
    fn id(&self) -> String {
        "filter".into()
    }

    fn space(&self) -> SearchSpace {
        SearchSpace::new(vec![ParamSpec::real("frac", 0.1, 1.0)]).expect("valid preset")
    }

    fn fit_transform(&self, data: &Dataset, params: &Params, _seed: u64) -> Result<(Box<dyn Transform>, Dataset), LearnError> {
        let frac = params.f64_or("frac", 1.0);
        if !(frac > 0.0 && frac <= 1.0) {
            return Err(LearnError::Param(format!("filter fraction {frac}")));
        }
        let scores = correlation_scores(data);
        let mut numeric: Vec<(usize, f64)> = scores.iter().enumerate().filter_map(|(j, s)| s.map(|s| (j, s))).collect();
        let n_keep = ((frac * numeric.len() as f64).ceil() as usize).max(1).min(numeric.len());
        numeric.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let mut keep: Vec<usize> = numeric[..n_keep].iter().map(|&(j, _)| j).collect();
        keep.extend(scores.iter().enumerate().filter(|(_, s)| s.is_none()).map(|(j, _)| j));
        keep.sort_unstable();
        let state = Select { keep, p: data.p() };
        let out = state.apply(data)?;
        Ok((Box::new(state), out))
    }
}

impl Transform for Select {
    fn apply(&self, data: &Dataset) -> Result<Dataset, LearnError> {
        if data.p() != self.p {
            return Err(LearnError::Schema(format!("{} columns, fitted on {}", data.p(), self.p)));
        }
        Ok(data.with_columns(self.keep.iter().map(|&j| data.columns()[j].clone()).collect())?)
    }
}

/// Trains downstream nodes on a random fraction `frac` of the training rows
/// (stratified for class targets); prediction data passes unchanged.
#[derive(Clone, Copy, Debug)]
pub struct Subsample;

#[derive(Debug)]
struct Identity;

impl Transform for Identity {
    fn apply(&self, data: &Dataset) -> Result<Dataset, LearnError> {
        Ok(data.clone())
    }
}

impl Preprocessor for Subsample {
    fn id(&self) -> String {
        "subsample".into()
    }

    fn space(&self) -> SearchSpace {
        SearchSpace::new(vec![ParamSpec::real("frac", 0.1, 1.0)]).expect("valid preset")
    }

    fn fit_transform(&self, data: &Dataset, params: &Params, seed: u64) -> Result<(Box<dyn Transform>, Dataset), LearnError> {
        let frac = params.f64_or("frac", 1.0);
        let rows: Vec<usize> = (0..data.n()).collect();
        let keep = data::subsample(&rows, frac, Some(data.target()), &mut rng::stream(seed, &[rng::label::SUBSAMPLE]));
        Ok((Box::new(Identity), data.subset(&keep)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn with_missing() -> Dataset {
        Dataset::new(
            vec![
                Column { name: "a".into(), data: ColumnData::Numeric(vec![Some(1.0), None, Some(3.0), Some(8.0)]) },
                Column { name: "b".into(), data: ColumnData::Numeric(vec![Some(1.0), Some(2.0), Some(3.0), Some(4.0)]) },
                Column {
                    name: "c".into(),
                    data: ColumnData::Categorical { levels: vec!["x".into(), "y".into()], codes: vec![Some(0), Some(1), None, Some(1)] },
                },
            ],
            "y",
            Target::Regression(vec![1.0, 2.0, 3.0, 4.0]),
        )
        .unwrap()
    }

    #[test]
    fn impute_with_indicator() {
        let d = with_missing();
        let (_, out) = Impute { method: ImputeMethod::Mean, indicator: true }.fit_transform(&d, &Params::new(), 0).unwrap();
        assert_eq!(out.p(), 4);
        assert_eq!(out.columns()[1].name, "a.missing");
        assert_eq!(out.columns()[0].data, ColumnData::Numeric(vec![Some(1.0), Some(4.0), Some(3.0), Some(8.0)]));
        let ColumnData::Categorical { levels, codes } = &out.columns()[3].data else { panic!() };
        assert_eq!(levels[codes[2].unwrap()], MISSING_LEVEL);
        let (_, med) = Impute { method: ImputeMethod::Median, indicator: false }.fit_transform(&d, &Params::new(), 0).unwrap();
        assert_eq!(med.columns()[0].data, ColumnData::Numeric(vec![Some(1.0), Some(3.0), Some(3.0), Some(8.0)]));
    }

    #[test]
    fn onehot_full_and_reference() {
        let d = with_missing();
        let (_, imp) = Impute { method: ImputeMethod::Mean, indicator: false }.fit_transform(&d, &Params::new(), 0).unwrap();
        let (_, full) = OneHot { drop_first: false }.fit_transform(&imp, &Params::new(), 0).unwrap();
        assert_eq!(full.p(), 2 + 3);
        let (_, reference) = OneHot { drop_first: true }.fit_transform(&imp, &Params::new(), 0).unwrap();
        assert_eq!(reference.p(), 2 + 2);
        assert!(!full.has_categorical());
        assert!(OneHot { drop_first: false }.fit_transform(&d, &Params::new(), 0).is_err());
    }

    #[test]
    fn standardize_reuses_training_moments() {
        let train = crate::data::synth::linear(30, 2, 0.1, 1);
        let (t, out) = Standardize.fit_transform(&train, &Params::new(), 0).unwrap();
        let col: Vec<f64> = out.numeric_matrix().unwrap().column(0).collect();
        assert!(col.iter().sum::<f64>().abs() < 1e-9);
        // shifting the prediction data shifts the output by shift/sd
        let x = train.numeric_matrix().unwrap();
        let shifted = crate::data::Matrix::new(x.nrows(), x.ncols(), x.as_slice().iter().map(|v| v + 10.0).collect());
        let shifted = Dataset::from_matrix(&shifted, train.target().clone()).unwrap();
        let a = t.apply(&shifted).unwrap().numeric_matrix().unwrap();
        let b = out.numeric_matrix().unwrap();
        let sd: f64 = {
            let m = x.column(0).sum::<f64>() / 30.0;
            (x.column(0).map(|v| (v - m).powi(2)).sum::<f64>() / 29.0).sqrt()
        };
        assert!((a.get(3, 0) - b.get(3, 0) - 10.0 / sd).abs() < 1e-9);
    }

    #[test]
    fn filter_keeps_informative_features() {
        let d = crate::data::synth::linear(200, 4, 0.1, 9);
        let (_, out) = CorrelationFilter.fit_transform(&d, &Params::new().with("frac", 0.25), 0).unwrap();
        assert_eq!(out.p(), 1);
        assert_eq!(out.columns()[0].name, "x1");
    }
}
