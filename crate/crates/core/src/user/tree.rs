//! Binary decision trees grown best-first. The same builder serves
//! classification trees (weighted Gini impurity, leaf = positive fraction)
//! and the Newton regression trees used by gradient boosting.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf { value: f64 },
    Split { feature: usize, threshold: f64, gain: f64, left: usize, right: usize },
}

/// Nodes in an arena; index 0 is the root. Samples with
/// `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split { feature, threshold, left, right, .. } => {
                    i = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }

    /// Total split gain per feature.
    pub fn gain_by_feature(&self, n_features: usize) -> Vec<f64> {
        let mut out = vec![0.0; n_features];
        for n in &self.nodes {
            if let Node::Split { feature, gain, .. } = *n {
                out[feature] += gain;
            }
        }
        out
    }

    /// Preorder node list; every split is followed by its left then right
    /// subtree.
    pub fn preorder(&self) -> Vec<Node> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![0];
        while let Some(i) = stack.pop() {
            out.push(self.nodes[i]);
            if let Node::Split { left, right, .. } = self.nodes[i] {
                stack.push(right);
                stack.push(left);
            }
        }
        out
    }

    /// Rebuilds a tree from [`Tree::preorder`] output; child indices in the
    /// input are ignored.
    pub fn from_preorder(list: &[Node]) -> Option<Tree> {
        fn build(list: &[Node], pos: &mut usize, nodes: &mut Vec<Node>) -> Option<usize> {
            let n = *list.get(*pos)?;
            *pos += 1;
            let me = nodes.len();
            nodes.push(n);
            if let Node::Split { feature, threshold, gain, .. } = n {
                let left = build(list, pos, nodes)?;
                let right = build(list, pos, nodes)?;
                nodes[me] = Node::Split { feature, threshold, gain, left, right };
            }
            Some(me)
        }
        let mut nodes = Vec::new();
        let mut pos = 0;
        build(list, &mut pos, &mut nodes)?;
        (pos == list.len()).then_some(Tree { nodes })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub max_leaf_nodes: Option<usize>,
    /// Features drawn per split; `None` means all.
    pub max_features: Option<usize>,
}

/// Split statistics of a node. `score` is chosen so that the gain of a
/// split is `score(left) + score(right) - score(parent)`.
pub(crate) trait SplitStats: Copy {
    fn add(&mut self, i: usize);
    fn sub(&mut self, i: usize);
    fn score(&self) -> f64;
    fn leaf_value(&self) -> f64;
    fn count(&self) -> usize;
    fn pure(&self) -> bool;
    /// Whether a split that does not improve the score may still be taken.
    fn allow_zero_gain(&self) -> bool;
}

/// Weighted class counts; `score` is minus the weighted Gini impurity.
#[derive(Clone, Copy)]
pub(crate) struct GiniStats<'a> {
    labels: &'a [bool],
    weights: &'a [f64],
    pos: f64,
    neg: f64,
    n: usize,
}

impl<'a> GiniStats<'a> {
    pub fn empty(labels: &'a [bool], weights: &'a [f64]) -> Self {
        GiniStats { labels, weights, pos: 0.0, neg: 0.0, n: 0 }
    }
}

impl SplitStats for GiniStats<'_> {
    fn add(&mut self, i: usize) {
        let w = self.weights[i];
        if self.labels[i] {
            self.pos += w;
        } else {
            self.neg += w;
        }
        self.n += 1;
    }
    fn sub(&mut self, i: usize) {
        let w = self.weights[i];
        if self.labels[i] {
            self.pos -= w;
        } else {
            self.neg -= w;
        }
        self.n -= 1;
    }
    fn score(&self) -> f64 {
        let w = self.pos + self.neg;
        if w <= 0.0 {
            return 0.0;
        }
        (self.pos * self.pos + self.neg * self.neg) / w - w
    }
    fn leaf_value(&self) -> f64 {
        let w = self.pos + self.neg;
        if w <= 0.0 {
            0.5
        } else {
            (self.pos / w).clamp(0.0, 1.0)
        }
    }
    fn count(&self) -> usize {
        self.n
    }
    fn pure(&self) -> bool {
        self.pos <= 1e-12 || self.neg <= 1e-12
    }
    fn allow_zero_gain(&self) -> bool {
        true
    }
}

/// Gradient and Hessian sums for a Newton step on the log-loss.
#[derive(Clone, Copy)]
pub(crate) struct NewtonStats<'a> {
    grad: &'a [f64],
    hess: &'a [f64],
    g: f64,
    h: f64,
    n: usize,
}

pub(crate) const NEWTON_L2: f64 = 1e-3;
const MAX_LEAF_STEP: f64 = 8.0;

impl<'a> NewtonStats<'a> {
    pub fn empty(grad: &'a [f64], hess: &'a [f64]) -> Self {
        NewtonStats { grad, hess, g: 0.0, h: 0.0, n: 0 }
    }
}

impl SplitStats for NewtonStats<'_> {
    fn add(&mut self, i: usize) {
        self.g += self.grad[i];
        self.h += self.hess[i];
        self.n += 1;
    }
    fn sub(&mut self, i: usize) {
        self.g -= self.grad[i];
        self.h -= self.hess[i];
        self.n -= 1;
    }
    fn score(&self) -> f64 {
        self.g * self.g / (self.h.max(0.0) + NEWTON_L2)
    }
    fn leaf_value(&self) -> f64 {
        (-self.g / (self.h.max(0.0) + NEWTON_L2)).clamp(-MAX_LEAF_STEP, MAX_LEAF_STEP)
    }
    fn count(&self) -> usize {
        self.n
    }
    fn pure(&self) -> bool {
        false
    }
    fn allow_zero_gain(&self) -> bool {
        false
    }
}

struct Candidate {
    gain: f64,
    node: usize,
    feature: usize,
    threshold: f64,
    left: Vec<usize>,
    right: Vec<usize>,
    depth: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    // Max-heap on gain; the older node wins ties.
    fn cmp(&self, other: &Self) -> Ordering {
        self.gain.total_cmp(&other.gain).then_with(|| other.node.cmp(&self.node))
    }
}

// Zero-gain splits are allowed on impure nodes, so symmetric problems such
// as XOR can still be separated one level further down.
const GAIN_TOLERANCE: f64 = 1e-12;

fn best_split<S: SplitStats>(
    x: &[Vec<f64>],
    samples: &[usize],
    empty: S,
    params: &TreeParams,
    rng: &mut ChaCha8Rng,
) -> Option<(f64, usize, f64, Vec<usize>, Vec<usize>)> {
    let n_features = x.first()?.len();
    let mut features: Vec<usize> = (0..n_features).collect();
    let take = params.max_features.unwrap_or(n_features).clamp(1, n_features);
    if take < n_features {
        features.shuffle(rng);
        features.truncate(take);
        features.sort_unstable();
    }
    let mut parent = empty;
    for &i in samples {
        parent.add(i);
    }
    let parent_score = parent.score();
    let floor = if empty.allow_zero_gain() { -GAIN_TOLERANCE } else { GAIN_TOLERANCE };

    let mut best: Option<(f64, usize, f64)> = None;
    let mut order = samples.to_vec();
    for &f in &features {
        order.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]).then(a.cmp(&b)));
        let mut left = empty;
        let mut right = parent;
        for k in 0..order.len() - 1 {
            left.add(order[k]);
            right.sub(order[k]);
            let (a, b) = (x[order[k]][f], x[order[k + 1]][f]);
            if a == b {
                continue;
            }
            let gain = left.score() + right.score() - parent_score;
            if gain >= floor && best.is_none_or(|(g, _, _)| gain > g + GAIN_TOLERANCE) {
                let mid = a + (b - a) / 2.0;
                let threshold = if mid < b { mid } else { a };
                best = Some((gain, f, threshold));
            }
        }
    }
    let (gain, f, threshold) = best?;
    let gain = gain.max(0.0);
    let (left, right): (Vec<usize>, Vec<usize>) = samples.iter().partition(|&&i| x[i][f] <= threshold);
    Some((gain, f, threshold, left, right))
}

/// Grows a tree on `samples` (indices into `x`, repeats allowed).
pub(crate) fn grow<S: SplitStats>(
    x: &[Vec<f64>],
    samples: Vec<usize>,
    empty: S,
    params: &TreeParams,
    rng: &mut ChaCha8Rng,
) -> Tree {
    let leaf_of = |s: &[usize]| {
        let mut st = empty;
        for &i in s {
            st.add(i);
        }
        st
    };
    let mut nodes = vec![Node::Leaf { value: leaf_of(&samples).leaf_value() }];
    let mut heap = BinaryHeap::new();
    let mut leaves = 1usize;

    let try_split = |node: usize, s: Vec<usize>, depth: usize, rng: &mut ChaCha8Rng, heap: &mut BinaryHeap<Candidate>| {
        let st = leaf_of(&s);
        if st.count() < params.min_samples_split.max(2) || st.pure() || params.max_depth.is_some_and(|d| depth >= d) {
            return;
        }
        if let Some((gain, feature, threshold, left, right)) = best_split(x, &s, empty, params, rng) {
            heap.push(Candidate { gain, node, feature, threshold, left, right, depth });
        }
    };
    try_split(0, samples, 0, rng, &mut heap);

    while let Some(c) = heap.pop() {
        if params.max_leaf_nodes.is_some_and(|m| leaves >= m) {
            break;
        }
        let l = nodes.len();
        nodes.push(Node::Leaf { value: leaf_of(&c.left).leaf_value() });
        nodes.push(Node::Leaf { value: leaf_of(&c.right).leaf_value() });
        nodes[c.node] = Node::Split { feature: c.feature, threshold: c.threshold, gain: c.gain, left: l, right: l + 1 };
        leaves += 1;
        try_split(l, c.left, c.depth + 1, rng, &mut heap);
        try_split(l + 1, c.right, c.depth + 1, rng, &mut heap);
    }
    Tree { nodes }
}
