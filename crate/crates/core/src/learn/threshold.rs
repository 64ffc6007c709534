use super::LearnError;
use crate::data::{Direction, Metric, PredictionMatrix};
use rand::Rng;

/// Maps scores or probabilities to hard labels.
#[derive(Clone, Debug, PartialEq)]
pub enum ThresholdRule {
    /// Positive iff the positive-class score is `>= t`.
    Binary(f64),
    /// Label `argmax_k p_k / w_k` with all `w_k > 0`.
    Weights(Vec<f64>),
}

impl ThresholdRule {
    pub fn apply(&self, f: &PredictionMatrix) -> Vec<usize> {
        match self {
            ThresholdRule::Binary(t) => f.labels_at(*t),
            ThresholdRule::Weights(w) => (0..f.nrows())
                .map(|i| {
                    let row = f.row(i);
                    (0..row.len()).fold(0, |b, k| if row[k] / w[k] > row[b] / w[b] { k } else { b })
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TunedThreshold {
    pub rule: ThresholdRule,
    /// Metric value achieved on the tuning data (raw scale).
    pub score: f64,
    /// Metric value of the default rule on the same data.
    pub default_score: f64,
}

fn better(metric: &Metric, a: f64, b: f64) -> bool {
    match metric.direction() {
        Direction::Minimize => a < b,
        Direction::Maximize => a > b,
    }
}

/// Line search for a binary threshold.
///
/// Candidates are the midpoints between consecutive distinct scores plus
/// `-inf` and `+inf`; the best one wins, ties going to the smallest
/// threshold. Thresholds where the metric is undefined are skipped. When
/// all scores are equal the default threshold is returned.
pub fn tune_threshold(y: &[usize], scores: &[f64], metric: &Metric, default: f64) -> Result<TunedThreshold, LearnError> {
    if y.len() != scores.len() {
        return Err(LearnError::Schema(format!("{} labels vs {} scores", y.len(), scores.len())));
    }
    if y.iter().all(|&c| c == y[0]) {
        return Err(LearnError::Param("threshold tuning needs both classes".into()));
    }
    let eval = |t: f64| -> Option<f64> {
        let labels: Vec<usize> = scores.iter().map(|&s| usize::from(s >= t)).collect();
        metric.score_labels(y, &labels, 2).ok()
    };
    let default_score = eval(default).unwrap_or(f64::NAN);
    let mut uniq: Vec<f64> = scores.to_vec();
    uniq.sort_by(f64::total_cmp);
    uniq.dedup();
    if uniq.len() == 1 {
        return Ok(TunedThreshold { rule: ThresholdRule::Binary(default), score: default_score, default_score });
    }
    let mut candidates = vec![f64::NEG_INFINITY];
    candidates.extend(uniq.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    candidates.push(f64::INFINITY);
    let mut best: Option<(f64, f64)> = None;
    for t in candidates {
        if let Some(v) = eval(t) {
            if best.is_none_or(|(_, b)| better(metric, v, b)) {
                best = Some((t, v));
            }
        }
    }
    let (t, score) = best.ok_or_else(|| LearnError::Param(format!("`{metric}` is undefined at every threshold")))?;
    Ok(TunedThreshold { rule: ThresholdRule::Binary(t), score, default_score })
}

/// Multiclass weights: uniform start, `draws` random points on the
/// simplex, then coordinate-wise refinement over a multiplicative grid.
/// Only strict improvements are accepted, so the result is never worse
/// than equal weights.
pub fn tune_weights<R: Rng + ?Sized>(
    y: &[usize],
    f: &PredictionMatrix,
    metric: &Metric,
    draws: usize,
    rng: &mut R,
) -> Result<TunedThreshold, LearnError> {
    let g = f.ncols();
    if !f.is_probabilities() || y.len() != f.nrows() {
        return Err(LearnError::Schema("weight tuning needs a probability matrix".into()));
    }
    if y.iter().all(|&c| c == y[0]) {
        return Err(LearnError::Param("threshold tuning needs at least two classes".into()));
    }
    let eval = |w: &[f64]| metric.score_labels(y, &ThresholdRule::Weights(w.to_vec()).apply(f), g).ok();
    let mut w = vec![1.0 / g as f64; g];
    let default_score = eval(&w).unwrap_or(f64::NAN);
    let mut score = default_score;
    let consider = |cand: Vec<f64>, w: &mut Vec<f64>, score: &mut f64| {
        if let Some(v) = eval(&cand) {
            if score.is_nan() || better(metric, v, *score) {
                *w = cand;
                *score = v;
            }
        }
    };
    for _ in 0..draws {
        // normalized exponentials are uniform on the simplex
        let e: Vec<f64> = (0..g).map(|_| -(1.0 - rng.random::<f64>()).ln() + 1e-12).collect();
        let s: f64 = e.iter().sum();
        consider(e.iter().map(|x| x / s).collect(), &mut w, &mut score);
    }
    const FACTORS: [f64; 8] = [0.25, 0.5, 0.7, 0.85, 1.2, 1.4, 2.0, 4.0];
    for _ in 0..2 {
        for k in 0..g {
            for f in FACTORS {
                let mut cand = w.clone();
                cand[k] *= f;
                let s: f64 = cand.iter().sum();
                cand.iter_mut().for_each(|x| *x /= s);
                consider(cand, &mut w, &mut score);
            }
        }
    }
    Ok(TunedThreshold { rule: ThresholdRule::Weights(w), score, default_score })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn worked_example() {
        let r = tune_threshold(&[0, 0, 1, 1], &[0.1, 0.4, 0.6, 0.9], &Metric::Acc, 0.5).unwrap();
        assert_eq!(r.rule, ThresholdRule::Binary(0.5));
        assert_eq!(r.score, 1.0);
    }

    #[test]
    fn constant_scores_return_default() {
        let r = tune_threshold(&[0, 1, 1], &[0.3; 3], &Metric::Acc, 0.5).unwrap();
        assert_eq!(r.rule, ThresholdRule::Binary(0.5));
        assert_eq!(r.score, r.default_score);
        assert!(tune_threshold(&[1, 1], &[0.3, 0.4], &Metric::Acc, 0.5).is_err());
    }

    #[test]
    fn ties_prefer_smallest_threshold() {
        // every threshold in the middle gap gives the same accuracy
        let r = tune_threshold(&[0, 1, 0, 1], &[0.1, 0.2, 0.3, 0.4], &Metric::Acc, 0.5).unwrap();
        assert_eq!(r.score, 0.75);
        assert_eq!(r.rule, ThresholdRule::Binary(0.5 * (0.1 + 0.2)));
    }

    #[test]
    fn weights_never_worse() {
        let probs = vec![0.5, 0.3, 0.2, 0.4, 0.35, 0.25, 0.45, 0.2, 0.35, 0.1, 0.6, 0.3];
        let f = PredictionMatrix::probabilities(4, 3, probs).unwrap();
        let y = [0, 1, 2, 1];
        let r = tune_weights(&y, &f, &Metric::Acc, 100, &mut rng::stream(1, &[])).unwrap();
        assert!(r.score >= r.default_score);
        assert_eq!(r.score, 1.0);
        let ThresholdRule::Weights(w) = &r.rule else { panic!() };
        assert!(w.iter().all(|&x| x > 0.0));
    }
}
