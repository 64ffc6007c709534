//! Racing: evaluate candidates fold by fold and drop those that are
//! significantly worse than the current best.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, StudentsT};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RaceTest {
    /// Paired t-test of each candidate against the current best.
    #[default]
    TTest,
    /// Friedman test with Conover post-hoc comparisons against the best;
    /// falls back to the t-test with fewer than three candidates alive.
    Friedman,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RaceSettings {
    /// Folds evaluated before the first test.
    pub t_first: usize,
    /// Folds between subsequent tests.
    pub t_each: usize,
    pub alpha: f64,
    pub test: RaceTest,
    /// The race stops once this many candidates remain.
    pub n_min: usize,
}

impl Default for RaceSettings {
    fn default() -> Self {
        Self { t_first: 5, t_each: 1, alpha: 0.05, test: RaceTest::TTest, n_min: 2 }
    }
}

/// Two-sided paired t-test p-value for `mean(a - b) = 0`; `None` with
/// fewer than two pairs. Zero variance gives p = 0 for a nonzero mean
/// difference and p = 1 otherwise.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len().min(b.len());
    if n < 2 {
        return None;
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    if var <= 0.0 {
        return Some(if mean == 0.0 { 1.0 } else { 0.0 });
    }
    let t = mean / (var / n as f64).sqrt();
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("df >= 1");
    Some(2.0 * (1.0 - dist.cdf(t.abs())))
}

/// Midranks of `v` (1-based).
fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            r[idx[k]] = mid;
        }
        i = j + 1;
    }
    r
}

/// Friedman test on `scores[config][block]` followed by Conover
/// comparisons against the candidate with the smallest rank sum. Returns
/// the candidates significantly worse than the best (empty when the
/// global test does not reject).
pub fn friedman_worse(scores: &[Vec<f64>], alpha: f64) -> Vec<usize> {
    let k = scores.len();
    let n = scores.first().map_or(0, Vec::len);
    if k < 3 || n < 2 {
        return Vec::new();
    }
    let mut rank_sums = vec![0.0; k];
    let mut a = 0.0;
    for b in 0..n {
        let block: Vec<f64> = scores.iter().map(|s| s[b]).collect();
        for (j, r) in ranks(&block).into_iter().enumerate() {
            rank_sums[j] += r;
            a += r * r;
        }
    }
    let (kf, nf) = (k as f64, n as f64);
    let c = nf * kf * (kf + 1.0).powi(2) / 4.0;
    let denom = a - c;
    if denom <= 0.0 {
        return Vec::new();
    }
    let stat = (kf - 1.0) * rank_sums.iter().map(|r| (r - nf * (kf + 1.0) / 2.0).powi(2)).sum::<f64>() / denom;
    let p = 1.0 - ChiSquared::new(kf - 1.0).expect("k >= 2").cdf(stat);
    if p >= alpha {
        return Vec::new();
    }
    let best = (0..k).min_by(|&x, &y| rank_sums[x].total_cmp(&rank_sums[y])).expect("k >= 3");
    let sum_sq: f64 = rank_sums.iter().map(|r| r * r).sum();
    let df = (nf - 1.0) * (kf - 1.0);
    let crit = StudentsT::new(0.0, 1.0, df).expect("df >= 1").inverse_cdf(1.0 - alpha / 2.0)
        * (2.0 * (nf * a - sum_sq) / df).max(0.0).sqrt();
    (0..k).filter(|&j| j != best && rank_sums[j] - rank_sums[best] > crit).collect()
}

/// Progress of one race over `n_configs` candidates.
#[derive(Clone, Debug)]
pub struct Race {
    settings: RaceSettings,
    /// Fold ids in evaluation order.
    folds: Vec<usize>,
    /// `scores[config][position in folds]`.
    scores: Vec<Vec<Option<f64>>>,
    alive: Vec<bool>,
    /// Folds completed by every alive candidate.
    pub done: usize,
    /// Folds seen when each candidate was eliminated.
    pub eliminated_at: Vec<Option<usize>>,
}

impl Race {
    pub fn new(n_configs: usize, folds: Vec<usize>, settings: RaceSettings) -> Result<Self, String> {
        if folds.len() < settings.t_first.max(1) {
            return Err(format!("race needs at least {} folds, got {}", settings.t_first.max(1), folds.len()));
        }
        Ok(Self {
            settings,
            scores: vec![vec![None; folds.len()]; n_configs],
            alive: vec![true; n_configs],
            eliminated_at: vec![None; n_configs],
            folds,
            done: 0,
        })
    }

    pub fn n_alive(&self) -> usize {
        self.alive.iter().filter(|a| **a).count()
    }

    pub fn is_alive(&self, c: usize) -> bool {
        self.alive[c]
    }

    pub fn is_finished(&self) -> bool {
        self.done >= self.folds.len() || self.n_alive() <= self.settings.n_min.max(1)
    }

    /// Positions (into the fold order) of the next block to evaluate.
    pub fn next_block(&self) -> std::ops::Range<usize> {
        let size = if self.done == 0 { self.settings.t_first.max(1) } else { self.settings.t_each.max(1) };
        self.done..(self.done + size).min(self.folds.len())
    }

    pub fn fold(&self, pos: usize) -> usize {
        self.folds[pos]
    }

    pub fn score(&self, c: usize, pos: usize) -> Option<f64> {
        self.scores[c][pos]
    }

    /// Records a fold score; `None` marks a failed evaluation, which
    /// eliminates the candidate.
    pub fn record(&mut self, c: usize, pos: usize, score: Option<f64>) {
        self.scores[c][pos] = score;
        if score.is_none() && self.alive[c] {
            self.alive[c] = false;
            self.eliminated_at[c] = Some(pos + 1);
        }
    }

    /// Mean over the completed folds.
    pub fn mean(&self, c: usize) -> f64 {
        let v: Vec<f64> = self.scores[c][..self.done].iter().flatten().copied().collect();
        if v.is_empty() {
            f64::INFINITY
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    }

    /// Marks a block complete and runs the elimination test.
    pub fn complete_block(&mut self, block: std::ops::Range<usize>) {
        self.done = block.end;
        let alive: Vec<usize> = (0..self.alive.len()).filter(|&c| self.alive[c]).collect();
        if alive.len() <= self.settings.n_min.max(1) || self.done < 2 {
            return;
        }
        let rows: Vec<Vec<f64>> = alive.iter().map(|&c| self.scores[c][..self.done].iter().map(|s| s.unwrap_or(f64::INFINITY)).collect()).collect();
        let worse: Vec<usize> = if self.settings.test == RaceTest::Friedman && alive.len() >= 3 {
            friedman_worse(&rows, self.settings.alpha).into_iter().map(|j| alive[j]).collect()
        } else {
            let best = *alive.iter().min_by(|&&a, &&b| self.mean(a).total_cmp(&self.mean(b)).then(a.cmp(&b))).expect("nonempty");
            let best_row = &self.scores[best][..self.done];
            alive
                .iter()
                .copied()
                .filter(|&c| c != best)
                .filter(|&c| {
                    let (a, b): (Vec<f64>, Vec<f64>) =
                        self.scores[c][..self.done].iter().zip(best_row).filter_map(|(x, y)| Some(((*x)?, (*y)?))).unzip();
                    let diff = a.iter().sum::<f64>() - b.iter().sum::<f64>();
                    diff > 0.0 && paired_t_test(&a, &b).is_some_and(|p| p < self.settings.alpha)
                })
                .collect()
        };
        // never drop below the survivor floor: keep the best of the doomed
        let floor = self.settings.n_min.max(1);
        let mut worse = worse;
        worse.sort_by(|&a, &b| self.mean(b).total_cmp(&self.mean(a)).then(b.cmp(&a)));
        let allowed = alive.len().saturating_sub(floor);
        for c in worse.into_iter().take(allowed) {
            self.alive[c] = false;
            self.eliminated_at[c] = Some(self.done);
        }
    }

    /// Alive candidates ordered by mean score, ties to the lower id.
    pub fn ranking(&self) -> Vec<usize> {
        let mut a: Vec<usize> = (0..self.alive.len()).filter(|&c| self.alive[c]).collect();
        a.sort_by(|&x, &y| self.mean(x).total_cmp(&self.mean(y)).then(x.cmp(&y)));
        a
    }
}

/// Runs a complete race with a score oracle `eval(config, fold)`.
pub fn race(n_configs: usize, folds: Vec<usize>, settings: RaceSettings, mut eval: impl FnMut(usize, usize) -> Option<f64>) -> Result<Race, String> {
    let mut r = Race::new(n_configs, folds, settings)?;
    while !r.is_finished() {
        let block = r.next_block();
        for c in 0..n_configs {
            for pos in block.clone() {
                if r.is_alive(c) {
                    let s = eval(c, r.fold(pos));
                    r.record(c, pos, s);
                }
            }
        }
        r.complete_block(block);
    }
    Ok(r)
}
