use super::{TaskKind, Target};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Model output for `nrows` observations.
///
/// Regression: one column of predicted values. Classification: either one
/// probability column per class (`probabilities = true`), or for binary
/// tasks a single column of positive-class scores.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionMatrix {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
    probabilities: bool,
}

impl PredictionMatrix {
    pub fn regression(values: Vec<f64>) -> Self {
        Self { nrows: values.len(), ncols: 1, data: values, probabilities: false }
    }

    /// Row-major class probabilities. Rows must sum to one within 1e-9.
    pub fn probabilities(nrows: usize, ncols: usize, data: Vec<f64>) -> Result<Self, MetricError> {
        if data.len() != nrows * ncols || ncols < 2 {
            return Err(MetricError::Shape(format!("{} cells for {nrows} x {ncols}", data.len())));
        }
        for row in data.chunks(ncols) {
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-9 || row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(MetricError::Shape(format!("row {row:?} is not a probability vector")));
            }
        }
        Ok(Self { nrows, ncols, data, probabilities: true })
    }

    /// Binary positive-class scores (any real scale).
    pub fn scores(values: Vec<f64>) -> Self {
        Self { nrows: values.len(), ncols: 1, data: values, probabilities: false }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn is_probabilities(&self) -> bool {
        self.probabilities
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    /// The single value column (regression values or binary scores).
    pub fn values(&self) -> &[f64] {
        &self.data
    }

    /// Positive-class score per row: the class-1 probability, or the raw
    /// score in single-column mode.
    pub fn positive_scores(&self) -> Option<Vec<f64>> {
        match (self.probabilities, self.ncols) {
            (true, 2) => Some((0..self.nrows).map(|i| self.data[i * 2 + 1]).collect()),
            (false, 1) => Some(self.data.clone()),
            _ => None,
        }
    }

    /// Default hard labels: argmax for probabilities (ties to the lower
    /// class), `p1 >= 0.5` for binary probabilities, `score >= 0` in score mode.
    pub fn labels(&self) -> Vec<usize> {
        if self.probabilities && self.ncols == 2 {
            return self.labels_at(0.5);
        }
        if !self.probabilities {
            return self.labels_at(0.0);
        }
        (0..self.nrows)
            .map(|i| {
                let row = self.row(i);
                (0..row.len()).fold(0, |best, k| if row[k] > row[best] { k } else { best })
            })
            .collect()
    }

    /// Binary labels with threshold `t`: positive iff score `>= t`.
    pub fn labels_at(&self, t: f64) -> Vec<usize> {
        self.positive_scores()
            .expect("binary prediction")
            .into_iter()
            .map(|s| usize::from(s >= t))
            .collect()
    }

    pub fn subset(&self, rows: &[usize]) -> PredictionMatrix {
        let data = rows.iter().flat_map(|&i| self.row(i).iter().copied()).collect();
        Self { nrows: rows.len(), ncols: self.ncols, data, probabilities: self.probabilities }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    /// The metric's formula has a zero denominator on this input.
    #[error("metric `{metric}` is undefined here: {reason}")]
    Undefined { metric: &'static str, reason: &'static str },
    #[error("metric `{metric}` needs {needs}")]
    Requirement { metric: &'static str, needs: &'static str },
    #[error("prediction shape: {0}")]
    Shape(String),
    #[error("unknown metric id `{0}`")]
    Unknown(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Minimize,
    Maximize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Requirement {
    Labels,
    Scores,
    Probabilities,
}

/// The performance-measure catalogue. For binary metrics the positive class
/// is class index 1.
#[derive(Clone, Debug, PartialEq)]
pub enum Metric {
    Mse,
    Mae,
    R2,
    Acc,
    Ba,
    Ce,
    Tpr,
    Fpr,
    Tnr,
    Fnr,
    Ppv,
    Npv,
    F1,
    /// Total cost: `cost[true][predicted]` summed over the test set.
    Cost(Vec<Vec<f64>>),
    Brier,
    LogLoss,
    Auc,
}

pub const LOG_LOSS_EPS: f64 = 1e-15;

impl Metric {
    pub const IDS: [&'static str; 17] = [
        "mse", "mae", "r2", "acc", "ba", "ce", "tpr", "fpr", "tnr", "fnr", "ppv", "npv", "f1", "cost", "brier", "logloss",
        "auc",
    ];

    /// Parses a stable id. `cost` needs [`Metric::Cost`] built directly.
    pub fn from_id(id: &str) -> Result<Metric, MetricError> {
        Ok(match id {
            "mse" => Metric::Mse,
            "mae" => Metric::Mae,
            "r2" => Metric::R2,
            "acc" => Metric::Acc,
            "ba" => Metric::Ba,
            "ce" => Metric::Ce,
            "tpr" => Metric::Tpr,
            "fpr" => Metric::Fpr,
            "tnr" => Metric::Tnr,
            "fnr" => Metric::Fnr,
            "ppv" => Metric::Ppv,
            "npv" => Metric::Npv,
            "f1" => Metric::F1,
            "brier" => Metric::Brier,
            "logloss" => Metric::LogLoss,
            "auc" => Metric::Auc,
            other => return Err(MetricError::Unknown(other.to_string())),
        })
    }

    pub fn id(&self) -> &'static str {
        match self {
            Metric::Mse => "mse",
            Metric::Mae => "mae",
            Metric::R2 => "r2",
            Metric::Acc => "acc",
            Metric::Ba => "ba",
            Metric::Ce => "ce",
            Metric::Tpr => "tpr",
            Metric::Fpr => "fpr",
            Metric::Tnr => "tnr",
            Metric::Fnr => "fnr",
            Metric::Ppv => "ppv",
            Metric::Npv => "npv",
            Metric::F1 => "f1",
            Metric::Cost(_) => "cost",
            Metric::Brier => "brier",
            Metric::LogLoss => "logloss",
            Metric::Auc => "auc",
        }
    }

    pub fn direction(&self) -> Direction {
        match self {
            Metric::Mse | Metric::Mae | Metric::Ce | Metric::Fpr | Metric::Fnr | Metric::Cost(_) => Direction::Minimize,
            Metric::Brier | Metric::LogLoss => Direction::Minimize,
            _ => Direction::Maximize,
        }
    }

    pub fn requirement(&self) -> Requirement {
        match self {
            Metric::Brier | Metric::LogLoss => Requirement::Probabilities,
            Metric::Auc => Requirement::Scores,
            _ => Requirement::Labels,
        }
    }

    pub fn task(&self) -> TaskKind {
        match self {
            Metric::Mse | Metric::Mae | Metric::R2 => TaskKind::Regression,
            _ => TaskKind::Classification,
        }
    }

    fn binary_only(&self) -> bool {
        matches!(
            self,
            Metric::Tpr | Metric::Fpr | Metric::Tnr | Metric::Fnr | Metric::Ppv | Metric::Npv | Metric::F1 | Metric::Auc
        )
    }

    /// Score with the prediction's default labelling rule.
    pub fn score(&self, y: &Target, f: &PredictionMatrix) -> Result<f64, MetricError> {
        self.check(y, f)?;
        match y {
            Target::Regression(v) => self.score_regression(v, f.values()),
            Target::Classes { classes, labels } => {
                if self.requirement() == Requirement::Labels {
                    self.score_labels(labels, &f.labels(), classes.len())
                } else {
                    self.score_soft(labels, f, classes.len())
                }
            }
        }
    }

    /// Label metric with binary threshold `t` (positive iff score `>= t`).
    pub fn score_at(&self, y: &Target, f: &PredictionMatrix, t: f64) -> Result<f64, MetricError> {
        self.check(y, f)?;
        let (Target::Classes { classes, labels }, Requirement::Labels) = (y, self.requirement()) else {
            return self.score(y, f);
        };
        if f.positive_scores().is_none() {
            return Err(MetricError::Requirement { metric: self.id(), needs: "binary scores" });
        }
        self.score_labels(labels, &f.labels_at(t), classes.len())
    }

    fn check(&self, y: &Target, f: &PredictionMatrix) -> Result<(), MetricError> {
        if y.len() != f.nrows() {
            return Err(MetricError::Shape(format!("{} targets vs {} prediction rows", y.len(), f.nrows())));
        }
        if y.kind() != self.task() {
            return Err(MetricError::Requirement {
                metric: self.id(),
                needs: match self.task() {
                    TaskKind::Regression => "a regression target",
                    TaskKind::Classification => "a class target",
                },
            });
        }
        if let Target::Classes { classes, .. } = y {
            if self.binary_only() && classes.len() != 2 {
                return Err(MetricError::Requirement { metric: self.id(), needs: "a binary target" });
            }
            if self.requirement() == Requirement::Probabilities && !f.is_probabilities() {
                return Err(MetricError::Requirement { metric: self.id(), needs: "probabilities" });
            }
            if f.is_probabilities() && f.ncols() != classes.len() {
                return Err(MetricError::Shape(format!("{} columns for {} classes", f.ncols(), classes.len())));
            }
            if let Metric::Cost(c) = self {
                if c.len() != classes.len() || c.iter().any(|r| r.len() != classes.len()) {
                    return Err(MetricError::Shape("cost matrix must be g x g".into()));
                }
            }
        }
        if y.is_empty() {
            return Err(MetricError::Undefined { metric: self.id(), reason: "empty test set" });
        }
        Ok(())
    }

    fn score_regression(&self, y: &[f64], yh: &[f64]) -> Result<f64, MetricError> {
        let n = y.len() as f64;
        Ok(match self {
            Metric::Mse => y.iter().zip(yh).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n,
            Metric::Mae => y.iter().zip(yh).map(|(a, b)| (a - b).abs()).sum::<f64>() / n,
            Metric::R2 => {
                let mean = y.iter().sum::<f64>() / n;
                let sst: f64 = y.iter().map(|a| (a - mean).powi(2)).sum();
                if sst == 0.0 {
                    return Err(MetricError::Undefined { metric: "r2", reason: "constant test targets" });
                }
                let sse: f64 = y.iter().zip(yh).map(|(a, b)| (a - b).powi(2)).sum();
                1.0 - sse / sst
            }
            _ => unreachable!("checked task kind"),
        })
    }

    /// Label-based metrics from true and predicted class indices.
    pub fn score_labels(&self, y: &[usize], yh: &[usize], g: usize) -> Result<f64, MetricError> {
        let n = y.len() as f64;
        let undefined = |reason| Err(MetricError::Undefined { metric: self.id(), reason });
        let ratio = |num: usize, den: usize, reason| {
            if den == 0 {
                undefined(reason)
            } else {
                Ok(num as f64 / den as f64)
            }
        };
        let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
        for (&a, &b) in y.iter().zip(yh) {
            match (a == 1, b == 1) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (false, false) => tn += 1,
                (true, false) => fn_ += 1,
            }
        }
        let correct = y.iter().zip(yh).filter(|(a, b)| a == b).count();
        match self {
            Metric::Acc => Ok(correct as f64 / n),
            Metric::Ce => Ok((y.len() - correct) as f64 / n),
            Metric::Ba => {
                let mut hit = vec![0usize; g];
                let mut tot = vec![0usize; g];
                for (&a, &b) in y.iter().zip(yh) {
                    tot[a] += 1;
                    hit[a] += usize::from(a == b);
                }
                if tot.iter().any(|&t| t == 0) {
                    return undefined("a class is absent from the test set");
                }
                Ok(hit.iter().zip(&tot).map(|(&h, &t)| h as f64 / t as f64).sum::<f64>() / g as f64)
            }
            Metric::Tpr => ratio(tp, tp + fn_, "no positives"),
            Metric::Fnr => ratio(fn_, tp + fn_, "no positives"),
            Metric::Fpr => ratio(fp, tn + fp, "no negatives"),
            Metric::Tnr => ratio(tn, tn + fp, "no negatives"),
            Metric::Ppv => ratio(tp, tp + fp, "no predicted positives"),
            Metric::Npv => ratio(tn, tn + fn_, "no predicted negatives"),
            Metric::F1 => {
                if tp + fn_ == 0 || tp + fp == 0 {
                    return undefined("no positives or no predicted positives");
                }
                if tp == 0 {
                    return Ok(0.0);
                }
                let ppv = tp as f64 / (tp + fp) as f64;
                let tpr = tp as f64 / (tp + fn_) as f64;
                Ok(2.0 * ppv * tpr / (ppv + tpr))
            }
            Metric::Cost(c) => Ok(y.iter().zip(yh).map(|(&a, &b)| c[a][b]).sum()),
            _ => unreachable!("label metric"),
        }
    }

    fn score_soft(&self, y: &[usize], f: &PredictionMatrix, g: usize) -> Result<f64, MetricError> {
        let n = y.len() as f64;
        match self {
            Metric::Brier => Ok(y
                .iter()
                .enumerate()
                .map(|(i, &c)| (0..g).map(|k| (f.row(i)[k] - if k == c { 1.0 } else { 0.0 }).powi(2)).sum::<f64>())
                .sum::<f64>()
                / n),
            Metric::LogLoss => Ok(y
                .iter()
                .enumerate()
                .map(|(i, &c)| -f.row(i)[c].clamp(LOG_LOSS_EPS, 1.0 - LOG_LOSS_EPS).ln())
                .sum::<f64>()
                / n),
            Metric::Auc => {
                let s = f.positive_scores().ok_or(MetricError::Requirement { metric: "auc", needs: "binary scores" })?;
                auc(y, &s)
            }
            _ => unreachable!("soft metric"),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// Rank-based AUC (Mann-Whitney U with midranks for ties).
pub fn auc(y: &[usize], scores: &[f64]) -> Result<f64, MetricError> {
    let n_pos = y.iter().filter(|&&c| c == 1).count();
    let n_neg = y.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricError::Undefined { metric: "auc", reason: "needs both classes" });
    }
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Sum of doubled midranks of the positives keeps everything integral.
    let mut rank2_pos: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1..=j+1, doubled midrank = i + j + 2
        let mid2 = (i + j + 2) as u64;
        rank2_pos += order[i..=j].iter().filter(|&&k| y[k] == 1).count() as u64 * mid2;
        i = j + 1;
    }
    let u2 = rank2_pos - (n_pos * (n_pos + 1)) as u64;
    Ok(u2 as f64 / (2 * n_pos * n_neg) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bin(labels: Vec<usize>) -> Target {
        Target::classes(labels, 2)
    }

    #[test]
    fn accuracy_example() {
        let y = bin(vec![1, 0, 1]);
        let f = PredictionMatrix::scores(vec![1.0, 1.0, 1.0]);
        assert!((Metric::Acc.score(&y, &f).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((Metric::Ce.score(&y, &f).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn auc_example_with_ties() {
        let y = bin(vec![1, 0, 1, 0]);
        let f = PredictionMatrix::scores(vec![0.8, 0.8, 0.3, 0.1]);
        assert_eq!(Metric::Auc.score(&y, &f).unwrap(), 0.625);
    }

    #[test]
    fn perfect_probabilities() {
        let y = Target::classes(vec![0, 2, 1], 3);
        let f = PredictionMatrix::probabilities(3, 3, vec![1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0]).unwrap();
        assert_eq!(Metric::Brier.score(&y, &f).unwrap(), 0.0);
        assert!(Metric::LogLoss.score(&y, &f).unwrap() < 1e-14);
        assert!(PredictionMatrix::probabilities(1, 2, vec![0.5, 0.6]).is_err());
    }

    #[test]
    fn r2_of_mean_is_zero() {
        let y = Target::Regression(vec![1.0, 2.0, 6.0]);
        let f = PredictionMatrix::regression(vec![3.0; 3]);
        assert_eq!(Metric::R2.score(&y, &f).unwrap(), 0.0);
        let c = Target::Regression(vec![2.0; 3]);
        assert!(matches!(Metric::R2.score(&c, &f), Err(MetricError::Undefined { .. })));
    }

    #[test]
    fn undefined_ratios() {
        let y = bin(vec![0, 0]);
        let f = PredictionMatrix::scores(vec![-1.0, 1.0]);
        assert!(matches!(Metric::Tpr.score(&y, &f), Err(MetricError::Undefined { .. })));
        assert_eq!(Metric::Fpr.score(&y, &f).unwrap(), 0.5);
        assert!(matches!(Metric::Auc.score(&y, &f), Err(MetricError::Undefined { .. })));
    }

    #[test]
    fn cost_sums() {
        let y = bin(vec![0, 1, 1]);
        let f = PredictionMatrix::scores(vec![1.0, -1.0, 1.0]);
        let m = Metric::Cost(vec![vec![0.0, 1.0], vec![5.0, 0.0]]);
        assert_eq!(m.score(&y, &f).unwrap(), 6.0);
    }

    #[test]
    fn ids_round_trip() {
        for id in Metric::IDS.iter().filter(|&&i| i != "cost") {
            assert_eq!(Metric::from_id(id).unwrap().id(), *id);
        }
        assert!(Metric::from_id("rmse").is_err());
    }
}
