//! Double-sample clustering.
//!
//! Two samples drawn from mixtures of the same disjoint-support components
//! with different weights are separated recursively: the oracle is trained to
//! tell the samples apart, the space is split by its prediction, and each
//! side is processed again with the points that reached it. A node becomes a
//! leaf once no classifier does noticeably better than chance, i.e. the
//! estimated error reaches `½ − τ`. Each leaf is a cluster.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, LabeledDataset};
use crate::error::{Error, Result};
use crate::oracle::{CartLearner, Label, Learner, TrainedClassifier, TreeConfig};
use crate::rng::RngHandle;

pub const DEFAULT_TAU: f64 = 0.1;
pub const DEFAULT_MIN_POINTS_PER_SIDE: usize = 20;
pub const DEFAULT_MAX_SPLITS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DscConfig {
    pub tau: f64,
    pub min_points_per_side: usize,
    /// Maximum depth of any root-to-leaf path.
    pub max_splits: usize,
    pub oracle: TreeConfig,
}

impl Default for DscConfig {
    fn default() -> Self {
        Self {
            tau: DEFAULT_TAU,
            min_points_per_side: DEFAULT_MIN_POINTS_PER_SIDE,
            max_splits: DEFAULT_MAX_SPLITS,
            oracle: TreeConfig::default(),
        }
    }
}

impl DscConfig {
    /// Defaults for a known number of components: `max_splits = 4K`.
    pub fn for_components(k: usize) -> Self {
        Self {
            max_splits: 4 * k.max(1),
            ..Self::default()
        }
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau < 0.5) {
            return Err(Error::invalid(format!("tau must lie in (0, 1/2), got {}", self.tau)));
        }
        if self.min_points_per_side == 0 {
            return Err(Error::invalid("min_points_per_side must be at least 1"));
        }
        self.oracle.validate()
    }
}

/// Why a node was not split further.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// The oracle's error estimate reached `½ − τ`.
    Estimator,
    /// A sample, or one side of the proposed split, had too few points.
    MinPoints,
    /// The path reached `max_splits`.
    Depth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Node {
    Leaf {
        leaf_id: usize,
        n1: usize,
        n2: usize,
        stop: StopReason,
        /// The rejected oracle's error estimate, when one was trained.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        error_estimate: Option<f64>,
    },
    Internal {
        classifier: TrainedClassifier,
        error_estimate: f64,
        /// Points with `h(x) < 0`.
        neg_child: Box<Node>,
        /// Points with `h(x) ≥ 0`.
        pos_child: Box<Node>,
    },
}

/// A binary tree of classifiers whose leaves are clusters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringTree {
    pub dim: usize,
    pub tau: f64,
    pub num_leaves: usize,
    pub root: Node,
}

impl ClusteringTree {
    /// Leaf reached by `p`. A zero decision routes to the positive child.
    pub fn assign(&self, p: &[f64]) -> Result<usize> {
        if p.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: p.len(),
            });
        }
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf { leaf_id, .. } => return Ok(*leaf_id),
                Node::Internal {
                    classifier,
                    neg_child,
                    pos_child,
                    ..
                } => {
                    node = if classifier.decision(p) < 0.0 { neg_child } else { pos_child };
                }
            }
        }
    }

    pub fn assign_all(&self, d: &Dataset) -> Result<Vec<usize>> {
        d.rows().map(|r| self.assign(r)).collect()
    }

    pub fn depth(&self) -> usize {
        fn go(n: &Node) -> usize {
            match n {
                Node::Leaf { .. } => 0,
                Node::Internal { neg_child, pos_child, .. } => 1 + go(neg_child).max(go(pos_child)),
            }
        }
        go(&self.root)
    }

    /// Internal nodes in pre-order (root first, negative side before positive).
    pub fn internal_nodes(&self) -> Vec<&Node> {
        fn go<'a>(n: &'a Node, out: &mut Vec<&'a Node>) {
            if let Node::Internal { neg_child, pos_child, .. } = n {
                out.push(n);
                go(neg_child, out);
                go(pos_child, out);
            }
        }
        let mut out = Vec::new();
        go(&self.root, &mut out);
        out
    }

    pub fn leaves(&self) -> Vec<&Node> {
        fn go<'a>(n: &'a Node, out: &mut Vec<&'a Node>) {
            match n {
                Node::Leaf { .. } => out.push(n),
                Node::Internal { neg_child, pos_child, .. } => {
                    go(neg_child, out);
                    go(pos_child, out);
                }
            }
        }
        let mut out = Vec::new();
        go(&self.root, &mut out);
        out
    }

    /// The root classifier, if the root was split.
    pub fn root_classifier(&self) -> Option<&TrainedClassifier> {
        match &self.root {
            Node::Internal { classifier, .. } => Some(classifier),
            Node::Leaf { .. } => None,
        }
    }
}

/// Build the tree with the default CART oracle.
pub fn build_tree(s1: &Dataset, s2: &Dataset, cfg: &DscConfig, rng: RngHandle) -> Result<ClusteringTree> {
    build_tree_with(s1, s2, cfg, &CartLearner { config: cfg.oracle }, rng)
}

/// Build the tree with any oracle.
pub fn build_tree_with<L: Learner>(
    s1: &Dataset,
    s2: &Dataset,
    cfg: &DscConfig,
    learner: &L,
    rng: RngHandle,
) -> Result<ClusteringTree> {
    cfg.validate()?;
    if s1.is_empty() || s2.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if s1.dim() != s2.dim() {
        return Err(Error::DimensionMismatch {
            expected: s1.dim(),
            found: s2.dim(),
        });
    }
    let builder = Builder { s1, s2, cfg, learner };
    let idx1: Vec<usize> = (0..s1.len()).collect();
    let idx2: Vec<usize> = (0..s2.len()).collect();
    let mut root = builder.build(idx1, idx2, 0, rng)?;
    let mut next = 0;
    number_leaves(&mut root, &mut next);
    Ok(ClusteringTree {
        dim: s1.dim(),
        tau: cfg.tau,
        num_leaves: next,
        root,
    })
}

fn number_leaves(n: &mut Node, next: &mut usize) {
    match n {
        Node::Leaf { leaf_id, .. } => {
            *leaf_id = *next;
            *next += 1;
        }
        Node::Internal { neg_child, pos_child, .. } => {
            number_leaves(neg_child, next);
            number_leaves(pos_child, next);
        }
    }
}

struct Builder<'a, L> {
    s1: &'a Dataset,
    s2: &'a Dataset,
    cfg: &'a DscConfig,
    learner: &'a L,
}

impl<L: Learner> Builder<'_, L> {
    fn build(&self, idx1: Vec<usize>, idx2: Vec<usize>, depth: usize, rng: RngHandle) -> Result<Node> {
        let (n1, n2) = (idx1.len(), idx2.len());
        let leaf = |stop, error_estimate| Node::Leaf {
            leaf_id: 0,
            n1,
            n2,
            stop,
            error_estimate,
        };
        if depth >= self.cfg.max_splits {
            return Ok(leaf(StopReason::Depth, None));
        }
        let min = self.cfg.min_points_per_side;
        if n1 < 2 * min || n2 < 2 * min {
            return Ok(leaf(StopReason::MinPoints, None));
        }
        let sub1 = self.s1.select(&idx1);
        let sub2 = self.s2.select(&idx2);
        if !(sub1.total_weight() > 0.0 && sub2.total_weight() > 0.0) {
            return Ok(leaf(StopReason::MinPoints, None));
        }
        let w2 = n1 as f64 / n2 as f64;
        let out = self.learner.train(&sub1, &sub2, 1.0, w2, rng.split(0))?;
        let e = out.error_estimate;
        if e >= 0.5 - self.cfg.tau {
            return Ok(leaf(StopReason::Estimator, Some(e)));
        }

        let h = &out.classifier;
        let (neg1, pos1) = partition(self.s1, idx1, h);
        let (neg2, pos2) = partition(self.s2, idx2, h);
        if [neg1.len(), pos1.len(), neg2.len(), pos2.len()].iter().any(|c| *c < min) {
            return Ok(Node::Leaf {
                leaf_id: 0,
                n1,
                n2,
                stop: StopReason::MinPoints,
                error_estimate: Some(e),
            });
        }
        let (neg_child, pos_child) = rayon::join(
            || self.build(neg1, neg2, depth + 1, rng.split(1)),
            || self.build(pos1, pos2, depth + 1, rng.split(2)),
        );
        Ok(Node::Internal {
            classifier: out.classifier,
            error_estimate: e,
            neg_child: Box::new(neg_child?),
            pos_child: Box::new(pos_child?),
        })
    }
}

fn partition(d: &Dataset, idx: Vec<usize>, h: &TrainedClassifier) -> (Vec<usize>, Vec<usize>) {
    idx.into_iter().partition(|&i| h.decision(d.point(i)) < 0.0)
}

/// Per-component summary of the ε-clustering check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentReport {
    pub component: usize,
    /// Leaf holding the largest share of this component.
    pub best_leaf: Option<usize>,
    /// Share of the component's weight in `best_leaf`.
    pub captured: f64,
    /// Largest share of any other component's weight in `best_leaf`.
    pub max_other: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonClusterReport {
    pub epsilon: f64,
    pub passed: bool,
    pub components: Vec<ComponentReport>,
}

/// Whether `tree` ε-clusters the labelled components: every component `i`
/// has a leaf holding at least `1 − ε` of its weight and less than `ε` of the
/// weight of every other component. Empirical shares stand in for the
/// component measures; a component with no points cannot be certified.
pub fn epsilon_clusters(
    tree: &ClusteringTree,
    labeled: &LabeledDataset,
    num_components: usize,
    epsilon: f64,
) -> Result<EpsilonClusterReport> {
    let k = num_components.max(labeled.labels.iter().map(|l| l + 1).max().unwrap_or(0));
    let leaves = tree.num_leaves;
    // mass[i][leaf]
    let mut mass = vec![vec![0.0; leaves]; k];
    let mut totals = vec![0.0; k];
    for (i, row) in labeled.data.rows().enumerate() {
        let leaf = tree.assign(row)?;
        let (c, w) = (labeled.labels[i], labeled.data.weight(i));
        mass[c][leaf] += w;
        totals[c] += w;
    }
    let share = |c: usize, leaf: usize| {
        if totals[c] > 0.0 {
            mass[c][leaf] / totals[c]
        } else {
            0.0
        }
    };

    let mut components = Vec::with_capacity(k);
    for c in 0..k {
        if totals[c] <= 0.0 {
            components.push(ComponentReport {
                component: c,
                best_leaf: None,
                captured: 0.0,
                max_other: 0.0,
                ok: false,
            });
            continue;
        }
        let best = (0..leaves)
            .max_by(|&a, &b| share(c, a).total_cmp(&share(c, b)).then(b.cmp(&a)))
            .expect("a tree has at least one leaf");
        let captured = share(c, best);
        let max_other = (0..k)
            .filter(|&o| o != c)
            .map(|o| share(o, best))
            .fold(0.0, f64::max);
        components.push(ComponentReport {
            component: c,
            best_leaf: Some(best),
            captured,
            max_other,
            ok: captured >= 1.0 - epsilon && max_other < epsilon,
        });
    }
    Ok(EpsilonClusterReport {
        epsilon,
        passed: components.iter().all(|r| r.ok),
        components,
    })
}

/// Side of the root split a point falls on, if the root was split.
pub fn root_side(tree: &ClusteringTree, p: &[f64]) -> Option<Label> {
    tree.root_classifier().map(|h| h.predict(p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{OracleOutput, TreeNode};

    fn line(xs: Vec<f64>) -> Dataset {
        Dataset::from_flat(1, xs, "s").unwrap()
    }

    /// Oracle that always returns a fixed threshold classifier and error.
    struct Fixed {
        threshold: f64,
        error: f64,
    }

    impl Learner for Fixed {
        fn train(&self, s1: &Dataset, _s2: &Dataset, _w1: f64, _w2: f64, _rng: RngHandle) -> Result<OracleOutput> {
            Ok(OracleOutput {
                classifier: TrainedClassifier {
                    model: TreeNode::Split {
                        feature: 0,
                        threshold: self.threshold,
                        left: Box::new(TreeNode::Leaf { label: Label::Neg }),
                        right: Box::new(TreeNode::Leaf { label: Label::Pos }),
                    },
                    training_config: TreeConfig::default(),
                    dim: s1.dim(),
                },
                error_estimate: self.error,
            })
        }
    }

    #[test]
    fn high_error_gives_single_leaf() {
        let s = line((0..100).map(|i| i as f64).collect());
        let t = build_tree_with(&s, &s, &DscConfig::default(), &Fixed { threshold: 50.0, error: 0.45 }, RngHandle::new(0, 0))
            .unwrap();
        assert_eq!(t.num_leaves, 1);
        assert_eq!(t.assign(&[3.0]).unwrap(), 0);
        match &t.root {
            Node::Leaf { stop, error_estimate, .. } => {
                assert_eq!(*stop, StopReason::Estimator);
                assert_eq!(*error_estimate, Some(0.45));
            }
            _ => panic!(),
        }
    }

    #[test]
    fn depth_cap_and_leaf_numbering() {
        let s = line((0..400).map(|i| i as f64).collect());
        let cfg = DscConfig {
            max_splits: 2,
            ..DscConfig::default()
        };
        // always splits at 200, so after the first split one side is empty
        let t = build_tree_with(&s, &s, &cfg, &Fixed { threshold: 200.0, error: 0.1 }, RngHandle::new(0, 0)).unwrap();
        assert!(t.depth() <= 2);
        let ids: Vec<usize> = t
            .leaves()
            .iter()
            .map(|n| match n {
                Node::Leaf { leaf_id, .. } => *leaf_id,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(ids, (0..t.num_leaves).collect::<Vec<_>>());
        assert_eq!(t.assign(&[10.0]).unwrap(), 0);
        assert_eq!(t.assign(&[300.0]).unwrap(), t.num_leaves - 1);
        // zero decision is impossible for trees; a point on the threshold goes left
        assert_eq!(t.assign(&[200.0]).unwrap(), 0);
    }

    #[test]
    fn min_points_stops() {
        let s = line((0..30).map(|i| i as f64).collect());
        let t = build_tree_with(&s, &s, &DscConfig::default(), &Fixed { threshold: 15.0, error: 0.0 }, RngHandle::new(0, 0))
            .unwrap();
        assert_eq!(t.num_leaves, 1);
        assert!(matches!(t.root, Node::Leaf { stop: StopReason::MinPoints, .. }));
    }

    #[test]
    fn rejects_bad_inputs() {
        let s = line(vec![1.0, 2.0]);
        let e = Dataset::from_flat(1, vec![], "e").unwrap();
        assert!(build_tree(&s, &e, &DscConfig::default(), RngHandle::new(0, 0)).is_err());
        let two = Dataset::from_rows(&[[1.0, 2.0]], "t").unwrap();
        assert!(build_tree(&s, &two, &DscConfig::default(), RngHandle::new(0, 0)).is_err());
        let bad = DscConfig::default().with_tau(0.7);
        assert!(build_tree(&s, &s, &bad, RngHandle::new(0, 0)).is_err());
        let t = build_tree(&s, &s, &DscConfig::default(), RngHandle::new(0, 0)).unwrap();
        assert!(t.assign(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn epsilon_cluster_report() {
        let s = line((0..200).map(|i| i as f64).collect());
        let t = build_tree_with(
            &s,
            &s,
            &DscConfig { max_splits: 1, ..DscConfig::default() },
            &Fixed { threshold: 99.5, error: 0.1 },
            RngHandle::new(0, 0),
        )
        .unwrap();
        assert_eq!(t.num_leaves, 2);
        let labels: Vec<usize> = (0..200).map(|i| usize::from(i >= 100)).collect();
        let labeled = LabeledDataset::new(s.clone(), labels).unwrap();
        assert!(epsilon_clusters(&t, &labeled, 2, 0.01).unwrap().passed);

        let single = build_tree_with(&s, &s, &DscConfig::default(), &Fixed { threshold: 0.0, error: 0.5 }, RngHandle::new(0, 0))
            .unwrap();
        let r = epsilon_clusters(&single, &labeled, 2, 0.49).unwrap();
        assert!(!r.passed);
        assert_eq!(r.components[0].max_other, 1.0);

        // a missing component cannot be certified
        let r = epsilon_clusters(&t, &labeled, 3, 0.01).unwrap();
        assert!(!r.passed);
        assert!(!r.components[2].ok);
    }
}
