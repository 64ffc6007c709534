use super::{Capabilities, LearnError, Learner, Predictor};
use crate::data::{Dataset, Matrix, PredictionMatrix, Target};
use crate::space::{ParamSpec, Params, SearchSpace, Trafo};

/// Greedy binary tree with axis-aligned splits (Gini impurity for
/// classification, sum of squares for regression).
///
/// A node is split only if it has at least `minsplit` rows, both children
/// keep at least `minbucket` rows, and the total impurity decrease is at
/// least `cp` times the root impurity.
#[derive(Clone, Copy, Debug, Default)]
pub struct Cart;

pub const MAX_DEPTH: usize = 30;

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Leaf {
        /// Mean response, or class proportions.
        value: Vec<f64>,
        n: usize,
    },
    Split {
        feature: usize,
        /// Rows with `x[feature] <= threshold` go left.
        threshold: f64,
        /// Impurity decrease (node total minus children totals).
        decrease: f64,
        n: usize,
        left: Box<Node>,
        right: Box<Node>,
    },
}

/// A fitted tree.
#[derive(Clone, Debug, PartialEq)]
pub struct Tree {
    pub root: Node,
    /// Total impurity of the training data at the root.
    pub root_impurity: f64,
    n_features: usize,
    n_classes: usize,
}

impl Tree {
    fn leaf(&self, row: &[f64]) -> &[f64] {
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf { value, .. } => return value,
                Node::Split { feature, threshold, left, right, .. } => {
                    node = if row[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }

    /// All internal nodes, depth-first.
    pub fn splits(&self) -> Vec<&Node> {
        fn walk<'a>(n: &'a Node, out: &mut Vec<&'a Node>) {
            if let Node::Split { left, right, .. } = n {
                out.push(n);
                walk(left, out);
                walk(right, out);
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut out);
        out
    }

    pub fn leaf_sizes(&self) -> Vec<usize> {
        fn walk(n: &Node, out: &mut Vec<usize>) {
            match n {
                Node::Leaf { n, .. } => out.push(*n),
                Node::Split { left, right, .. } => {
                    walk(left, out);
                    walk(right, out);
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut out);
        out
    }
}

#[derive(Clone, Copy, Debug)]
pub struct CartParams {
    pub minsplit: usize,
    pub minbucket: usize,
    pub cp: f64,
}

impl CartParams {
    pub fn from_params(p: &Params) -> Self {
        let minsplit = p.usize_or("minsplit", 20).max(1);
        let minbucket = p.usize_or("minbucket", ((minsplit as f64) / 3.0).round() as usize).max(1);
        Self { minsplit, minbucket, cp: p.f64_or("cp", 0.01) }
    }
}

/// Response summary used for impurity computations.
enum Resp<'a> {
    Reg(&'a [f64]),
    Cls(&'a [usize], usize),
}

impl Resp<'_> {
    /// Total impurity (n times Gini, or sum of squared deviations).
    fn impurity(&self, rows: &[usize]) -> f64 {
        match *self {
            Resp::Reg(y) => {
                let n = rows.len() as f64;
                let mean = rows.iter().map(|&i| y[i]).sum::<f64>() / n;
                rows.iter().map(|&i| (y[i] - mean).powi(2)).sum()
            }
            Resp::Cls(y, g) => {
                let mut c = vec![0usize; g];
                for &i in rows {
                    c[y[i]] += 1;
                }
                gini_total(&c, rows.len())
            }
        }
    }

    fn leaf_value(&self, rows: &[usize]) -> Vec<f64> {
        let n = rows.len() as f64;
        match *self {
            Resp::Reg(y) => vec![rows.iter().map(|&i| y[i]).sum::<f64>() / n],
            Resp::Cls(y, g) => {
                let mut c = vec![0.0; g];
                for &i in rows {
                    c[y[i]] += 1.0;
                }
                c.iter().map(|v| v / n).collect()
            }
        }
    }
}

fn gini_total(counts: &[usize], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let nf = n as f64;
    nf * (1.0 - counts.iter().map(|&c| (c as f64 / nf).powi(2)).sum::<f64>())
}

struct Builder<'a> {
    x: &'a Matrix,
    resp: Resp<'a>,
    params: CartParams,
    min_decrease: f64,
}

impl Builder<'_> {
    fn build(&self, rows: Vec<usize>, depth: usize) -> Node {
        let n = rows.len();
        let leaf = |rows: &[usize]| Node::Leaf { value: self.resp.leaf_value(rows), n: rows.len() };
        if n < self.params.minsplit || n < 2 * self.params.minbucket || depth >= MAX_DEPTH {
            return leaf(&rows);
        }
        let parent = self.resp.impurity(&rows);
        if parent <= 0.0 {
            return leaf(&rows);
        }
        let Some((feature, threshold, children)) = self.best_split(&rows) else {
            return leaf(&rows);
        };
        let decrease = parent - children;
        if decrease < self.min_decrease || decrease <= 0.0 {
            return leaf(&rows);
        }
        let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| self.x.get(i, feature) <= threshold);
        Node::Split {
            feature,
            threshold,
            decrease,
            n,
            left: Box::new(self.build(l, depth + 1)),
            right: Box::new(self.build(r, depth + 1)),
        }
    }

    /// Best (feature, cut, children impurity) honoring `minbucket`; ties
    /// go to the lower feature index, then the lower cut.
    fn best_split(&self, rows: &[usize]) -> Option<(usize, f64, f64)> {
        let n = rows.len();
        let mb = self.params.minbucket;
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.x.ncols() {
            let mut order = rows.to_vec();
            order.sort_by(|&a, &b| self.x.get(a, j).total_cmp(&self.x.get(b, j)));
            match self.resp {
                Resp::Reg(y) => {
                    let total: f64 = order.iter().map(|&i| y[i]).sum();
                    let total_sq: f64 = order.iter().map(|&i| y[i] * y[i]).sum();
                    let (mut s, mut sq) = (0.0, 0.0);
                    for k in 0..n - 1 {
                        let yi = y[order[k]];
                        s += yi;
                        sq += yi * yi;
                        let nl = k + 1;
                        let (a, b) = (self.x.get(order[k], j), self.x.get(order[k + 1], j));
                        if a == b || nl < mb || n - nl < mb {
                            continue;
                        }
                        let nr = (n - nl) as f64;
                        let sse_l = (sq - s * s / nl as f64).max(0.0);
                        let sse_r = ((total_sq - sq) - (total - s).powi(2) / nr).max(0.0);
                        consider(&mut best, j, 0.5 * (a + b), sse_l + sse_r);
                    }
                }
                Resp::Cls(y, g) => {
                    let mut right = vec![0usize; g];
                    for &i in &order {
                        right[y[i]] += 1;
                    }
                    let mut left = vec![0usize; g];
                    for k in 0..n - 1 {
                        let c = y[order[k]];
                        left[c] += 1;
                        right[c] -= 1;
                        let nl = k + 1;
                        let (a, b) = (self.x.get(order[k], j), self.x.get(order[k + 1], j));
                        if a == b || nl < mb || n - nl < mb {
                            continue;
                        }
                        consider(&mut best, j, 0.5 * (a + b), gini_total(&left, nl) + gini_total(&right, n - nl));
                    }
                }
            }
        }
        best
    }
}

fn consider(best: &mut Option<(usize, f64, f64)>, j: usize, cut: f64, imp: f64) {
    // strict improvement beyond rounding noise keeps ties on the first candidate
    if best.is_none_or(|(_, _, b)| imp < b - 1e-12 * b.abs().max(1.0)) {
        *best = Some((j, cut, imp));
    }
}

impl Cart {
    pub fn fit_tree(&self, x: &Matrix, y: &Target, params: CartParams) -> Result<Tree, LearnError> {
        if !(params.cp >= 0.0) {
            return Err(LearnError::Param(format!("cp {}", params.cp)));
        }
        let resp = match y {
            Target::Regression(v) => Resp::Reg(v),
            Target::Classes { classes, labels } => Resp::Cls(labels, classes.len()),
        };
        let rows: Vec<usize> = (0..x.nrows()).collect();
        let root_impurity = resp.impurity(&rows);
        let b = Builder { x, resp, params, min_decrease: params.cp * root_impurity };
        Ok(Tree { root: b.build(rows, 0), root_impurity, n_features: x.ncols(), n_classes: y.n_classes() })
    }
}

impl Learner for Cart {
    fn id(&self) -> String {
        "cart".into()
    }

    fn space(&self) -> SearchSpace {
        SearchSpace::new(vec![
            ParamSpec::integer("minsplit", 1, 7).with_trafo(Trafo::Pow2),
            ParamSpec::integer("minbucket", 0, 6).with_trafo(Trafo::Pow2),
            ParamSpec::real("cp", -4.0, -1.0).with_trafo(Trafo::Pow10),
        ])
        .expect("valid preset")
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            regression: true,
            classification: true,
            multiclass: true,
            missing: false,
            categorical: false,
            probabilities: true,
        }
    }

    fn fit(&self, data: &Dataset, params: &Params, _seed: u64) -> Result<Box<dyn Predictor>, LearnError> {
        let x = data.numeric_matrix()?;
        Ok(Box::new(self.fit_tree(&x, data.target(), CartParams::from_params(params))?))
    }
}

impl Predictor for Tree {
    fn predict(&self, data: &Dataset) -> Result<PredictionMatrix, LearnError> {
        let x = data.numeric_matrix()?;
        if x.ncols() != self.n_features {
            return Err(LearnError::Schema(format!("{} features, trained on {}", x.ncols(), self.n_features)));
        }
        if self.n_classes == 0 {
            return Ok(PredictionMatrix::regression((0..x.nrows()).map(|i| self.leaf(x.row(i))[0]).collect()));
        }
        let data = (0..x.nrows()).flat_map(|i| self.leaf(x.row(i)).to_vec()).collect();
        Ok(PredictionMatrix::probabilities(x.nrows(), self.n_classes, data)?)
    }
}
