use serde::{Deserialize, Serialize};

use super::dataset::Dataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go to `left`.
    Split {
        id: usize,
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        id: usize,
        value: f64,
        n_samples: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    /// Root at index 0; `id` equals the position.
    pub nodes: Vec<Node>,
    /// Total squared-error reduction credited to each feature.
    pub impurity_decrease: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct GrowParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestSplit {
    pub feature: usize,
    pub threshold: f64,
    /// Parent SSE minus the children's SSE.
    pub decrease: f64,
    pub n_left: usize,
}

/// Exhaustive search over every feature and every midpoint between
/// adjacent distinct values. Ties keep the lowest feature, then the lowest
/// threshold.
pub fn best_split(data: &Dataset, idx: &[usize], min_samples_leaf: usize) -> Option<BestSplit> {
    let n = idx.len();
    let min_leaf = min_samples_leaf.max(1);
    if n < 2 * min_leaf {
        return None;
    }
    // centre labels on the node mean so the running sums stay small
    let mean = idx.iter().map(|&i| data.label(i)).sum::<f64>() / n as f64;
    let total_sq: f64 = idx.iter().map(|&i| (data.label(i) - mean).powi(2)).sum();
    let total: f64 = idx.iter().map(|&i| data.label(i) - mean).sum();
    let sse = |s: f64, sq: f64, k: usize| sq - s * s / k as f64;
    let parent = sse(total, total_sq, n);

    let mut best: Option<BestSplit> = None;
    let mut order = idx.to_vec();
    for f in 0..data.n_features() {
        order.sort_by(|&a, &b| data.row(a)[f].total_cmp(&data.row(b)[f]));
        let (mut s, mut sq) = (0.0, 0.0);
        for k in 1..n {
            let y = data.label(order[k - 1]) - mean;
            s += y;
            sq += y * y;
            let lo = data.row(order[k - 1])[f];
            let hi = data.row(order[k])[f];
            if lo == hi || k < min_leaf || n - k < min_leaf {
                continue;
            }
            let decrease = parent - sse(s, sq, k) - sse(total - s, total_sq - sq, n - k);
            if decrease > best.map_or(0.0, |b| b.decrease) {
                let mid = lo + (hi - lo) / 2.0;
                best = Some(BestSplit {
                    feature: f,
                    threshold: if mid < hi { mid } else { lo },
                    decrease,
                    n_left: k,
                });
            }
        }
    }
    best
}

impl RegressionTree {
    pub(crate) fn grow(data: &Dataset, idx: &[usize], params: GrowParams) -> Self {
        let mut tree = RegressionTree {
            nodes: Vec::new(),
            impurity_decrease: vec![0.0; data.n_features()],
        };
        tree.build(data, idx.to_vec(), 0, params);
        tree
    }

    fn build(
        &mut self,
        data: &Dataset,
        idx: Vec<usize>,
        depth: usize,
        params: GrowParams,
    ) -> usize {
        let id = self.nodes.len();
        let value = idx.iter().map(|&i| data.label(i)).sum::<f64>() / idx.len() as f64;
        self.nodes.push(Node::Leaf {
            id,
            value,
            n_samples: idx.len(),
        });
        let first = data.label(idx[0]);
        let pure = idx.iter().all(|&i| data.label(i) == first);
        if depth >= params.max_depth || pure {
            return id;
        }
        let Some(split) = best_split(data, &idx, params.min_samples_leaf) else {
            return id;
        };
        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = idx
            .iter()
            .partition(|&&i| data.row(i)[split.feature] <= split.threshold);
        self.impurity_decrease[split.feature] += split.decrease;
        let left = self.build(data, left_idx, depth + 1, params);
        let right = self.build(data, right_idx, depth + 1, params);
        self.nodes[id] = Node::Split {
            id,
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { value, .. } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => at = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    /// Impurity decrease per feature, summing to 1 when the tree has a split.
    pub fn importance(&self) -> Vec<f64> {
        let total: f64 = self.impurity_decrease.iter().sum();
        if total > 0.0 {
            self.impurity_decrease.iter().map(|d| d / total).collect()
        } else {
            vec![0.0; self.impurity_decrease.len()]
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub(crate) fn is_well_formed(&self, n_features: usize) -> bool {
        self.nodes.iter().enumerate().all(|(i, n)| match *n {
            Node::Leaf { id, .. } => id == i,
            Node::Split {
                id,
                feature,
                left,
                right,
                ..
            } => {
                id == i
                    && feature < n_features
                    && left > i
                    && right > i
                    && left < self.nodes.len()
                    && right < self.nodes.len()
            }
        }) && !self.nodes.is_empty()
            && self.impurity_decrease.len() == n_features
    }
}
