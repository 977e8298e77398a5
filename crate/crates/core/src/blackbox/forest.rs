//! Bagged axis-aligned decision trees with greedy Gini splits.
//!
//! Each tree is grown on a bootstrap resample of the data and considers
//! every feature at every node. A node splits on `x[feature] <= threshold`
//! when the split strictly lowers the weighted Gini impurity; leaves store
//! the class-1 fraction of their training rows. The forest predicts the mean
//! leaf value, so its output is piecewise constant.

use std::collections::BTreeSet;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    fn leaf_index(&self, x: &[f64]) -> usize {
        let mut i = 0;
        while let Node::Split {
            feature,
            threshold,
            left,
            right,
        } = self.nodes[i]
        {
            i = if x[feature] <= threshold { left } else { right };
        }
        i
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        match self.nodes[self.leaf_index(x)] {
            Node::Leaf { value } => value,
            Node::Split { .. } => unreachable!(),
        }
    }

    /// Smallest `|x[f] − threshold|` along the decision path of `x`.
    fn path_margin(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        let mut margin = f64::INFINITY;
        while let Node::Split {
            feature,
            threshold,
            left,
            right,
        } = self.nodes[i]
        {
            margin = margin.min((x[feature] - threshold).abs());
            i = if x[feature] <= threshold { left } else { right };
        }
        margin
    }

    fn split_features(&self, out: &mut BTreeSet<usize>) {
        for node in &self.nodes {
            if let Node::Split { feature, .. } = node {
                out.insert(*feature);
            }
        }
    }

    pub(crate) fn validate(&self, dim: usize) -> Result<()> {
        let n = self.nodes.len();
        if n == 0 {
            return Err(Error::InvalidModel("empty tree".into()));
        }
        for (i, node) in self.nodes.iter().enumerate() {
            match *node {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    // children come after their parent, so traversal terminates
                    if feature >= dim
                        || left <= i
                        || right <= i
                        || left >= n
                        || right >= n
                        || !threshold.is_finite()
                    {
                        return Err(Error::InvalidModel(format!("malformed split node {i}")));
                    }
                }
                Node::Leaf { value } => {
                    if !(0.0..=1.0).contains(&value) {
                        return Err(Error::InvalidModel(format!(
                            "leaf {i} value {value} outside [0, 1]"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StumpForest {
    pub dim: usize,
    pub trees: Vec<Tree>,
}

impl StumpForest {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }

    /// Features tested by at least one split.
    pub fn split_features(&self) -> Vec<usize> {
        let mut set = BTreeSet::new();
        for t in &self.trees {
            t.split_features(&mut set);
        }
        set.into_iter().collect()
    }

    /// Half-width of the largest sup-norm box around `x` that crosses no
    /// threshold on any of `x`'s decision paths: moving `x` by less than
    /// this in every coordinate leaves the prediction unchanged.
    pub fn cell_margin(&self, x: &[f64]) -> f64 {
        self.trees
            .iter()
            .map(|t| t.path_margin(x))
            .fold(f64::INFINITY, f64::min)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.trees.is_empty() {
            return Err(Error::InvalidModel("forest has no trees".into()));
        }
        self.trees.iter().try_for_each(|t| t.validate(self.dim))
    }
}

fn gini(pos: f64, total: f64) -> f64 {
    if total == 0.0 {
        return 0.0;
    }
    let p = pos / total;
    2.0 * p * (1.0 - p)
}

struct Grower<'a> {
    data: &'a Dataset,
    max_depth: usize,
    nodes: Vec<Node>,
}

impl Grower<'_> {
    fn grow(&mut self, rows: &mut [usize], depth: usize) -> usize {
        let y = self.data.labels();
        let total = rows.len() as f64;
        let pos: f64 = rows.iter().map(|&r| y[r]).sum();
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { value: pos / total });
        if depth >= self.max_depth || pos == 0.0 || pos == total {
            return id;
        }
        let Some((feature, threshold)) = self.best_split(rows, pos) else {
            return id;
        };
        let x = self.data.features();
        let mid = partition(rows, |&r| x[[r, feature]] <= threshold);
        let (l, r) = rows.split_at_mut(mid);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }

    fn best_split(&self, rows: &[usize], pos: f64) -> Option<(usize, f64)> {
        let x = self.data.features();
        let y = self.data.labels();
        let total = rows.len() as f64;
        let parent = gini(pos, total) * total;
        let mut best: Option<(usize, f64, f64)> = None;
        let mut order = rows.to_vec();
        for f in 0..self.data.dim() {
            order.sort_by(|&a, &b| x[[a, f]].total_cmp(&x[[b, f]]));
            let mut left_pos = 0.0;
            for i in 0..order.len() - 1 {
                left_pos += y[order[i]];
                let (a, b) = (x[[order[i], f]], x[[order[i + 1], f]]);
                if a == b {
                    continue;
                }
                let nl = (i + 1) as f64;
                let nr = total - nl;
                let impurity = gini(left_pos, nl) * nl + gini(pos - left_pos, nr) * nr;
                if impurity < parent && best.is_none_or(|(_, _, im)| impurity < im) {
                    best = Some((f, 0.5 * (a + b), impurity));
                }
            }
        }
        best.map(|(f, t, _)| (f, t))
    }
}

fn partition<T>(items: &mut [T], pred: impl Fn(&T) -> bool) -> usize {
    let mut mid = 0;
    for i in 0..items.len() {
        if pred(&items[i]) {
            items.swap(i, mid);
            mid += 1;
        }
    }
    mid
}

pub fn train(data: &Dataset, trees: usize, depth: usize, seed: u64) -> Result<StumpForest> {
    if trees == 0 || depth == 0 {
        return Err(Error::InvalidConfig(
            "trees and depth must be at least 1".into(),
        ));
    }
    data.require_both_classes()?;
    let m = data.len();
    let mut forest = Vec::with_capacity(trees);
    for t in 0..trees {
        let mut rng = rng::seeded(rng::derive_seed(seed, t as u64));
        let mut rows: Vec<usize> = (0..m).map(|_| rng.random_range(0..m)).collect();
        let mut grower = Grower {
            data,
            max_depth: depth,
            nodes: Vec::new(),
        };
        grower.grow(&mut rows, 0);
        forest.push(Tree {
            nodes: grower.nodes,
        });
    }
    Ok(StumpForest {
        dim: data.dim(),
        trees: forest,
    })
}
