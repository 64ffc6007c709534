use super::{DataError, Target};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// One train/test split. Both index vectors are sorted ascending.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// An ordered list of train/test splits over rows `0..n`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResamplingPlan {
    n: usize,
    splits: Vec<Split>,
}

impl ResamplingPlan {
    /// Builds a plan, checking bounds and train/test disjointness.
    pub fn new(n: usize, mut splits: Vec<Split>) -> Result<Self, DataError> {
        if splits.is_empty() {
            return Err(DataError::Resampling("plan has no splits".into()));
        }
        for (b, s) in splits.iter_mut().enumerate() {
            s.train.sort_unstable();
            s.test.sort_unstable();
            if s.train.is_empty() || s.test.is_empty() {
                return Err(DataError::Resampling(format!("split {b} has an empty side")));
            }
            if s.train.iter().chain(&s.test).any(|&i| i >= n) {
                return Err(DataError::Resampling(format!("split {b} indexes beyond {n} rows")));
            }
            if s.train.windows(2).any(|w| w[0] == w[1]) || s.test.windows(2).any(|w| w[0] == w[1]) {
                return Err(DataError::Resampling(format!("split {b} repeats an index")));
            }
            if intersects(&s.train, &s.test) {
                return Err(DataError::Resampling(format!("split {b}: train and test overlap")));
            }
        }
        Ok(Self { n, splits })
    }

    /// A plan whose test sets may overlap training rows. Only useful for
    /// demonstrating leakage.
    pub fn new_unchecked(n: usize, splits: Vec<Split>) -> Self {
        Self { n, splits }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.splits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.splits.is_empty()
    }

    pub fn splits(&self) -> &[Split] {
        &self.splits
    }

    /// Average training-set size over the splits (reported, not used).
    pub fn mean_train_size(&self) -> f64 {
        self.splits.iter().map(|s| s.train.len() as f64).sum::<f64>() / self.splits.len() as f64
    }

    /// Re-indexes the plan through `rows`, e.g. to express inner splits
    /// of an outer training set in terms of the full dataset.
    pub fn mapped(&self, rows: &[usize], n: usize) -> ResamplingPlan {
        let map = |v: &Vec<usize>| {
            let mut m: Vec<usize> = v.iter().map(|&i| rows[i]).collect();
            m.sort_unstable();
            m
        };
        ResamplingPlan {
            n,
            splits: self.splits.iter().map(|s| Split { train: map(&s.train), test: map(&s.test) }).collect(),
        }
    }
}

fn intersects(a: &[usize], b: &[usize]) -> bool {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => return true,
        }
    }
    false
}

fn complement(n: usize, test: &[usize]) -> Vec<usize> {
    let mut in_test = vec![false; n];
    for &i in test {
        in_test[i] = true;
    }
    (0..n).filter(|&i| !in_test[i]).collect()
}

fn strata_of(target: Option<&Target>) -> Option<(&[usize], usize)> {
    match target {
        Some(Target::Classes { classes, labels }) => Some((labels.as_slice(), classes.len())),
        _ => None,
    }
}

/// Largest-remainder allocation of `total` over `sizes` proportionally.
fn allocate(sizes: &[usize], total: usize) -> Vec<usize> {
    let n: usize = sizes.iter().sum();
    let exact: Vec<f64> = sizes.iter().map(|&s| s as f64 * total as f64 / n as f64).collect();
    let mut alloc: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let mut left = total - alloc.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    for &k in &order {
        if left == 0 {
            break;
        }
        if alloc[k] < sizes[k] {
            alloc[k] += 1;
            left -= 1;
        }
    }
    alloc
}

/// Single train/test split with `|train| = round(train_fraction * n)`.
///
/// With a class target, the split is stratified: each class contributes
/// its proportional share (rounded by largest remainder) to the training
/// side.
pub fn make_holdout<R: Rng + ?Sized>(
    n: usize,
    train_fraction: f64,
    stratify: Option<&Target>,
    rng: &mut R,
) -> Result<ResamplingPlan, DataError> {
    if n < 2 {
        return Err(DataError::Resampling(format!("cannot split {n} rows")));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DataError::Resampling(format!("train fraction {train_fraction} not in (0, 1)")));
    }
    let n_train = ((train_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut train = Vec::with_capacity(n_train);
    match strata_of(stratify) {
        Some((labels, g)) => {
            let groups = groups(labels, g);
            for (k, members) in groups.iter().enumerate() {
                if members.len() == 1 {
                    return Err(DataError::StratumTooSmall(class_name(stratify, k)));
                }
            }
            let sizes: Vec<usize> = groups.iter().map(Vec::len).collect();
            let alloc = allocate(&sizes, n_train);
            for (mut members, take) in groups.into_iter().zip(alloc) {
                members.shuffle(rng);
                train.extend_from_slice(&members[..take]);
            }
        }
        None => {
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(rng);
            train.extend_from_slice(&perm[..n_train]);
        }
    }
    train.sort_unstable();
    let test = complement(n, &train);
    ResamplingPlan::new(n, vec![Split { train, test }])
}

/// Repeated k-fold cross-validation; each repetition reshuffles.
///
/// Fold sizes differ by at most one (the first `n % k` folds are larger).
/// With a class target, each class's shuffled members are dealt across
/// folds in turn so per-class fold counts also differ by at most one.
pub fn make_kfold<R: Rng + ?Sized>(
    n: usize,
    k: usize,
    repeats: usize,
    stratify: Option<&Target>,
    rng: &mut R,
) -> Result<ResamplingPlan, DataError> {
    if k < 2 || k > n {
        return Err(DataError::Resampling(format!("need 2 <= k <= n, got k = {k}, n = {n}")));
    }
    if repeats == 0 {
        return Err(DataError::Resampling("repeats must be positive".into()));
    }
    let mut splits = Vec::with_capacity(k * repeats);
    for _ in 0..repeats {
        let mut folds: Vec<Vec<usize>> = vec![Vec::new(); k];
        match strata_of(stratify) {
            Some((labels, g)) => {
                let mut pos = 0usize;
                for mut members in groups(labels, g) {
                    members.shuffle(rng);
                    for i in members {
                        folds[pos % k].push(i);
                        pos += 1;
                    }
                }
            }
            None => {
                let mut perm: Vec<usize> = (0..n).collect();
                perm.shuffle(rng);
                let (base, extra) = (n / k, n % k);
                let mut start = 0;
                for (f, fold) in folds.iter_mut().enumerate() {
                    let len = base + usize::from(f < extra);
                    fold.extend_from_slice(&perm[start..start + len]);
                    start += len;
                }
            }
        }
        for mut test in folds {
            test.sort_unstable();
            let train = complement(n, &test);
            splits.push(Split { train, test });
        }
    }
    ResamplingPlan::new(n, splits)
}

/// Draws `max(2, floor(fraction * |rows|))` of `rows` without replacement,
/// stratified by class when a target is given. Returns sorted indices.
pub fn subsample<R: Rng + ?Sized>(rows: &[usize], fraction: f64, stratify: Option<&Target>, rng: &mut R) -> Vec<usize> {
    let m = rows.len();
    // the small slack keeps e.g. 0.29 * 100 from flooring to 28
    let want = ((fraction * m as f64 + 1e-9).floor() as usize).max(2).min(m);
    if want == m {
        return rows.to_vec();
    }
    let mut out = match strata_of(stratify) {
        Some((labels, g)) => {
            let mut groups: Vec<Vec<usize>> = vec![Vec::new(); g];
            for &i in rows {
                groups[labels[i]].push(i);
            }
            let sizes: Vec<usize> = groups.iter().map(Vec::len).collect();
            let alloc = allocate(&sizes, want);
            let mut out = Vec::with_capacity(want);
            for (mut members, take) in groups.into_iter().zip(alloc) {
                members.shuffle(rng);
                out.extend_from_slice(&members[..take]);
            }
            out
        }
        None => {
            let mut perm = rows.to_vec();
            perm.shuffle(rng);
            perm.truncate(want);
            perm
        }
    };
    out.sort_unstable();
    out
}

fn groups(labels: &[usize], g: usize) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); g];
    for (i, &l) in labels.iter().enumerate() {
        groups[l].push(i);
    }
    groups.retain(|m| !m.is_empty());
    groups
}

fn class_name(target: Option<&Target>, k: usize) -> String {
    match target {
        Some(Target::Classes { classes, labels }) => {
            let mut present: Vec<usize> = labels.to_vec();
            present.sort_unstable();
            present.dedup();
            classes[present[k]].clone()
        }
        _ => k.to_string(),
    }
}

/// Serializable description of a resampling strategy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum ResamplingSpec {
    Holdout {
        #[serde(default = "default_ratio")]
        ratio: f64,
        #[serde(default = "yes")]
        stratify: bool,
    },
    Cv {
        folds: usize,
        #[serde(default = "one")]
        repeats: usize,
        #[serde(default = "yes")]
        stratify: bool,
    },
}

fn default_ratio() -> f64 {
    2.0 / 3.0
}
fn yes() -> bool {
    true
}
fn one() -> usize {
    1
}

impl ResamplingSpec {
    pub fn holdout(ratio: f64) -> Self {
        ResamplingSpec::Holdout { ratio, stratify: true }
    }

    pub fn cv(folds: usize) -> Self {
        ResamplingSpec::Cv { folds, repeats: 1, stratify: true }
    }

    /// Number of splits this spec produces.
    pub fn len(&self) -> usize {
        match self {
            ResamplingSpec::Holdout { .. } => 1,
            ResamplingSpec::Cv { folds, repeats, .. } => folds * repeats,
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Draws a concrete plan for a dataset with this target. Stratification
    /// only applies to class targets.
    pub fn instantiate<R: Rng + ?Sized>(&self, target: &Target, rng: &mut R) -> Result<ResamplingPlan, DataError> {
        let n = target.len();
        match *self {
            ResamplingSpec::Holdout { ratio, stratify } => make_holdout(n, ratio, stratify.then_some(target), rng),
            ResamplingSpec::Cv { folds, repeats, stratify } => make_kfold(n, folds, repeats, stratify.then_some(target), rng),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn holdout_sizes() {
        let p = make_holdout(9, 2.0 / 3.0, None, &mut rng::stream(1, &[])).unwrap();
        assert_eq!(p.splits()[0].train.len(), 6);
        assert_eq!(p.splits()[0].test.len(), 3);
        assert!(make_holdout(1, 0.5, None, &mut rng::stream(1, &[])).is_err());
    }

    #[test]
    fn stratified_holdout_exact_balance() {
        let t = Target::classes(vec![1, 1, 0, 0], 2);
        for seed in 0..20 {
            let p = make_holdout(4, 0.5, Some(&t), &mut rng::stream(seed, &[])).unwrap();
            let s = &p.splits()[0];
            let ones = |v: &[usize]| v.iter().filter(|&&i| i < 2).count();
            assert_eq!(ones(&s.train), 1);
            assert_eq!(ones(&s.test), 1);
        }
        let t = Target::classes(vec![1, 0, 0, 0], 2);
        assert!(matches!(make_holdout(4, 0.5, Some(&t), &mut rng::stream(0, &[])), Err(DataError::StratumTooSmall(_))));
    }

    #[test]
    fn kfold_partitions() {
        let p = make_kfold(6, 3, 2, None, &mut rng::stream(3, &[])).unwrap();
        assert_eq!(p.len(), 6);
        for rep in p.splits().chunks(3) {
            let mut all: Vec<usize> = rep.iter().flat_map(|s| s.test.clone()).collect();
            all.sort_unstable();
            assert_eq!(all, (0..6).collect::<Vec<_>>());
            assert!(rep.iter().all(|s| s.test.len() == 2 && s.train.len() == 4));
        }
        let p = make_kfold(5, 3, 1, None, &mut rng::stream(3, &[])).unwrap();
        let sizes: Vec<usize> = p.splits().iter().map(|s| s.test.len()).collect();
        assert_eq!(sizes, vec![2, 2, 1]);
        assert!(make_kfold(3, 4, 1, None, &mut rng::stream(3, &[])).is_err());
    }

    #[test]
    fn subsample_floor_and_stratification() {
        let rows: Vec<usize> = (0..10).collect();
        let s = subsample(&rows, 0.01, None, &mut rng::stream(0, &[]));
        assert_eq!(s.len(), 2);
        let t = Target::classes((0..10).map(|i| i % 2).collect(), 2);
        let s = subsample(&rows, 0.4, Some(&t), &mut rng::stream(0, &[]));
        assert_eq!(s.len(), 4);
        assert_eq!(s.iter().filter(|&&i| i % 2 == 0).count(), 2);
    }

    #[test]
    fn plan_rejects_overlap() {
        assert!(ResamplingPlan::new(3, vec![Split { train: vec![0, 1], test: vec![1, 2] }]).is_err());
    }

    #[test]
    fn spec_parses() {
        let s: ResamplingSpec = toml::from_str("method = 'cv'\nfolds = 5").unwrap();
        assert_eq!(s, ResamplingSpec::cv(5));
        assert_eq!(s.len(), 5);
    }
}
