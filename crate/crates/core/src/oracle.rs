//! Binary learning oracle used by double-sample clustering.
//!
//! The oracle receives two weighted samples, labels the first `+1` and the
//! second `−1`, fits a classifier and reports an estimate of its error. The
//! error is measured on a stratified holdout under the balanced mixture in
//! which each sample carries total weight ½, so `e = ½` means the classifier
//! does no better than chance at telling the samples apart.
//!
//! The default learner is an axis-aligned CART tree grown by weighted Gini
//! impurity over every threshold of every feature.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::RngHandle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Pos,
    Neg,
}

impl Label {
    pub fn sign(self) -> f64 {
        match self {
            Label::Pos => 1.0,
            Label::Neg => -1.0,
        }
    }

    pub fn flip(self) -> Label {
        match self {
            Label::Pos => Label::Neg,
            Label::Neg => Label::Pos,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub max_depth: usize,
    /// Minimum total weight of a tree leaf, as a fraction of the training
    /// weight at the root.
    pub min_leaf_weight: f64,
    /// Fraction of each sample held out for the error estimate.
    pub holdout_fraction: f64,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self {
            max_depth: 6,
            min_leaf_weight: 0.01,
            holdout_fraction: 0.3,
        }
    }
}

impl TreeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..0.5).contains(&self.min_leaf_weight) {
            return Err(Error::invalid("min_leaf_weight must lie in [0, 0.5)"));
        }
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            return Err(Error::invalid("holdout_fraction must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// A node of an axis-aligned decision tree. Points with
/// `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum TreeNode {
    Leaf {
        label: Label,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn predict(&self, x: &[f64]) -> Label {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { label } => return *label,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if x[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, TreeNode::Leaf { .. })
    }

    fn negated(&self) -> TreeNode {
        match self {
            TreeNode::Leaf { label } => TreeNode::Leaf { label: label.flip() },
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } => TreeNode::Split {
                feature: *feature,
                threshold: *threshold,
                left: Box::new(left.negated()),
                right: Box::new(right.negated()),
            },
        }
    }
}

/// The hypothesis `h : X → {±1}` returned by the oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedClassifier {
    pub model: TreeNode,
    pub training_config: TreeConfig,
    pub dim: usize,
}

impl TrainedClassifier {
    pub fn predict(&self, x: &[f64]) -> Label {
        self.model.predict(x)
    }

    /// Real-valued decision score, `±1` for trees.
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.predict(x).sign()
    }

    pub fn depth(&self) -> usize {
        self.model.depth()
    }

    /// The same classifier with both labels exchanged.
    pub fn negated(&self) -> TrainedClassifier {
        TrainedClassifier {
            model: self.model.negated(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleOutput {
    pub classifier: TrainedClassifier,
    /// Estimated balanced error, in `[0, 1]`.
    pub error_estimate: f64,
}

/// Any binary learner that returns a classifier and an error estimate.
pub trait Learner: Sync {
    fn train(&self, s1: &Dataset, s2: &Dataset, w1: f64, w2: f64, rng: RngHandle) -> Result<OracleOutput>;
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CartLearner {
    pub config: TreeConfig,
}

impl Learner for CartLearner {
    fn train(&self, s1: &Dataset, s2: &Dataset, w1: f64, w2: f64, rng: RngHandle) -> Result<OracleOutput> {
        train(s1, s2, w1, w2, &self.config, rng)
    }
}

/// Index split of one sample into training and holdout parts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HoldoutSplit {
    pub train: Vec<usize>,
    pub holdout: Vec<usize>,
}

/// Hold out `round(fraction · n)` points chosen uniformly, always keeping at
/// least one point for training.
pub fn stratified_holdout(n: usize, fraction: f64, rng: RngHandle) -> HoldoutSplit {
    let mut idx: Vec<usize> = (0..n).collect();
    let h = ((fraction * n as f64).round() as usize).min(n.saturating_sub(1));
    if h == 0 {
        return HoldoutSplit {
            train: idx,
            holdout: Vec::new(),
        };
    }
    idx.shuffle(&mut rng.rng());
    let mut holdout = idx[..h].to_vec();
    let mut train = idx[h..].to_vec();
    holdout.sort_unstable();
    train.sort_unstable();
    HoldoutSplit { train, holdout }
}

/// Fit the default CART oracle. `s1` is labelled `+1`, `s2` is `−1`; point
/// weights are the dataset weights times `w1` or `w2`.
pub fn train(
    s1: &Dataset,
    s2: &Dataset,
    w1: f64,
    w2: f64,
    cfg: &TreeConfig,
    rng: RngHandle,
) -> Result<OracleOutput> {
    cfg.validate()?;
    check_pair(s1, s2)?;
    if !(w1 > 0.0 && w2 > 0.0 && w1.is_finite() && w2.is_finite()) {
        return Err(Error::invalid("sample weights w1, w2 must be positive"));
    }
    let split1 = stratified_holdout(s1.len(), cfg.holdout_fraction, rng.split(1));
    let split2 = stratified_holdout(s2.len(), cfg.holdout_fraction, rng.split(2));
    train_with_split(s1, s2, w1, w2, cfg, &split1, &split2)
}

/// Same as [`train`] with an explicit holdout partition of each sample.
pub fn train_with_split(
    s1: &Dataset,
    s2: &Dataset,
    w1: f64,
    w2: f64,
    cfg: &TreeConfig,
    split1: &HoldoutSplit,
    split2: &HoldoutSplit,
) -> Result<OracleOutput> {
    cfg.validate()?;
    check_pair(s1, s2)?;
    let dim = s1.dim();

    let mut points: Vec<&[f64]> = Vec::with_capacity(split1.train.len() + split2.train.len());
    let mut labels = Vec::with_capacity(points.capacity());
    let mut weights = Vec::with_capacity(points.capacity());
    for &i in &split1.train {
        points.push(s1.point(i));
        labels.push(Label::Pos);
        weights.push(s1.weight(i) * w1);
    }
    for &i in &split2.train {
        points.push(s2.point(i));
        labels.push(Label::Neg);
        weights.push(s2.weight(i) * w2);
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::ZeroWeight);
    }

    let grower = Grower {
        points: &points,
        labels: &labels,
        weights: &weights,
        dim,
        max_depth: cfg.max_depth,
        min_leaf: cfg.min_leaf_weight * total,
    };
    let all: Vec<usize> = (0..points.len()).collect();
    let model = grower.grow(all, 0);

    let side1 = if split1.holdout.is_empty() { &split1.train } else { &split1.holdout };
    let side2 = if split2.holdout.is_empty() { &split2.train } else { &split2.holdout };
    let err1 = miss_rate(s1, side1, |x| model.predict(x) != Label::Pos)?;
    let err2 = miss_rate(s2, side2, |x| model.predict(x) != Label::Neg)?;
    let error_estimate = (0.5 * err1 + 0.5 * err2).clamp(0.0, 1.0);

    Ok(OracleOutput {
        classifier: TrainedClassifier {
            model,
            training_config: *cfg,
            dim,
        },
        error_estimate,
    })
}

fn check_pair(s1: &Dataset, s2: &Dataset) -> Result<()> {
    if s1.is_empty() || s2.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if s1.dim() != s2.dim() {
        return Err(Error::DimensionMismatch {
            expected: s1.dim(),
            found: s2.dim(),
        });
    }
    if !(s1.total_weight() > 0.0 && s2.total_weight() > 0.0) {
        return Err(Error::ZeroWeight);
    }
    Ok(())
}

fn miss_rate(d: &Dataset, idx: &[usize], wrong: impl Fn(&[f64]) -> bool) -> Result<f64> {
    let mut miss = 0.0;
    let mut tot = 0.0;
    for &i in idx {
        let w = d.weight(i);
        tot += w;
        if wrong(d.point(i)) {
            miss += w;
        }
    }
    if tot > 0.0 {
        Ok(miss / tot)
    } else {
        // holdout drew only zero-weight points; fall back to all points
        let all: Vec<usize> = (0..d.len()).collect();
        if idx.len() == d.len() {
            return Err(Error::ZeroWeight);
        }
        miss_rate(d, &all, wrong)
    }
}

/// Balanced error of a fixed classifier on two samples, each sample weighted
/// to total ½.
pub fn balanced_error(h: &TrainedClassifier, s1: &Dataset, s2: &Dataset) -> Result<f64> {
    check_pair(s1, s2)?;
    let all1: Vec<usize> = (0..s1.len()).collect();
    let all2: Vec<usize> = (0..s2.len()).collect();
    let e1 = miss_rate(s1, &all1, |x| h.predict(x) != Label::Pos)?;
    let e2 = miss_rate(s2, &all2, |x| h.predict(x) != Label::Neg)?;
    Ok(0.5 * (e1 + e2))
}

struct Grower<'a> {
    points: &'a [&'a [f64]],
    labels: &'a [Label],
    weights: &'a [f64],
    dim: usize,
    max_depth: usize,
    min_leaf: f64,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

impl Grower<'_> {
    fn class_weights(&self, idx: &[usize]) -> (f64, f64) {
        idx.iter().fold((0.0, 0.0), |(p, n), &i| match self.labels[i] {
            Label::Pos => (p + self.weights[i], n),
            Label::Neg => (p, n + self.weights[i]),
        })
    }

    fn grow(&self, idx: Vec<usize>, depth: usize) -> TreeNode {
        let (pos, neg) = self.class_weights(&idx);
        let total = pos + neg;
        let leaf = TreeNode::Leaf {
            label: if pos >= neg { Label::Pos } else { Label::Neg },
        };
        if depth >= self.max_depth || pos == 0.0 || neg == 0.0 || total < 2.0 * self.min_leaf {
            return leaf;
        }
        let parent = gini_weighted(pos, neg);
        let Some(best) = self.best_split(&idx, pos, neg) else {
            return leaf;
        };
        if best.impurity >= parent - 1e-12 * total {
            return leaf;
        }
        let (left, right): (Vec<usize>, Vec<usize>) = idx
            .into_iter()
            .partition(|&i| self.points[i][best.feature] <= best.threshold);
        let left = self.grow(left, depth + 1);
        let right = self.grow(right, depth + 1);
        if left == right {
            // both halves predict the same constant; the split is useless
            return left;
        }
        TreeNode::Split {
            feature: best.feature,
            threshold: best.threshold,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    fn best_split(&self, idx: &[usize], pos: f64, neg: f64) -> Option<BestSplit> {
        let total = pos + neg;
        let mut best: Option<BestSplit> = None;
        let mut order = idx.to_vec();
        for f in 0..self.dim {
            order.sort_unstable_by(|&a, &b| self.points[a][f].total_cmp(&self.points[b][f]));
            let (mut lp, mut ln) = (0.0, 0.0);
            for k in 0..order.len() - 1 {
                let i = order[k];
                match self.labels[i] {
                    Label::Pos => lp += self.weights[i],
                    Label::Neg => ln += self.weights[i],
                }
                let v = self.points[i][f];
                let next = self.points[order[k + 1]][f];
                if v >= next {
                    continue;
                }
                let wl = lp + ln;
                let wr = total - wl;
                if wl < self.min_leaf || wr < self.min_leaf || wl <= 0.0 || wr <= 0.0 {
                    continue;
                }
                let imp = gini_weighted(lp, ln) + gini_weighted(pos - lp, neg - ln);
                if best.as_ref().is_none_or(|b| imp < b.impurity) {
                    let mut threshold = v + (next - v) / 2.0;
                    if threshold >= next {
                        threshold = v;
                    }
                    best = Some(BestSplit {
                        feature: f,
                        threshold,
                        impurity: imp,
                    });
                }
            }
        }
        best
    }
}

/// `W · (1 − p² − q²)` for class weights `a`, `b` with `W = a + b`.
fn gini_weighted(a: f64, b: f64) -> f64 {
    let w = a + b;
    if w <= 0.0 {
        0.0
    } else {
        w - (a * a + b * b) / w
    }
}
