//! CART decision trees with Gini impurity.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_split: usize,
    /// Features considered per split; all when `None`.
    pub max_features: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: 8,
            min_samples_split: 4,
            max_features: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Leaf {
        /// Fraction of positive training samples reaching this leaf.
        score: f64,
        samples: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        /// Taken when `x[feature] <= threshold`.
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    /// Node 0 is the root.
    pub nodes: Vec<Node>,
}

/// Gini impurity of a label multiset.
pub fn gini(labels: &[bool]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let p = labels.iter().filter(|&&l| l).count() as f64 / labels.len() as f64;
    1.0 - p * p - (1.0 - p) * (1.0 - p)
}

fn gini_counts(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

struct Builder<'a, R: Rng> {
    xs: &'a [Vec<f64>],
    ys: &'a [bool],
    params: TreeParams,
    rng: &'a mut R,
    nodes: Vec<Node>,
}

impl<R: Rng> Builder<'_, R> {
    fn leaf(&mut self, idx: &[usize]) -> usize {
        let pos = idx.iter().filter(|&&i| self.ys[i]).count();
        self.nodes.push(Node::Leaf {
            score: pos as f64 / idx.len().max(1) as f64,
            samples: idx.len(),
        });
        self.nodes.len() - 1
    }

    /// Best `(feature, threshold, weighted child impurity)` over candidate features.
    fn best_split(&mut self, idx: &[usize]) -> Option<(usize, f64, f64)> {
        let d = self.xs[idx[0]].len();
        let features: Vec<usize> = match self.params.max_features {
            Some(m) if m < d => {
                let mut f = sample(self.rng, d, m.max(1)).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..d).collect(),
        };
        let n = idx.len();
        let total_pos = idx.iter().filter(|&&i| self.ys[i]).count();
        let mut best: Option<(usize, f64, f64)> = None;
        let mut order = idx.to_vec();
        for f in features {
            order.sort_by(|&a, &b| self.xs[a][f].total_cmp(&self.xs[b][f]));
            let mut left_pos = 0;
            for k in 1..n {
                left_pos += usize::from(self.ys[order[k - 1]]);
                let lo = self.xs[order[k - 1]][f];
                let hi = self.xs[order[k]][f];
                if lo == hi {
                    continue;
                }
                let impurity = (k as f64 * gini_counts(left_pos, k)
                    + (n - k) as f64 * gini_counts(total_pos - left_pos, n - k))
                    / n as f64;
                if best.is_none_or(|(_, _, b)| impurity < b) {
                    let mut t = lo + (hi - lo) / 2.0;
                    if t >= hi {
                        t = lo;
                    }
                    best = Some((f, t, impurity));
                }
            }
        }
        best
    }

    fn grow(&mut self, idx: &[usize], depth: usize) -> usize {
        let labels: Vec<bool> = idx.iter().map(|&i| self.ys[i]).collect();
        let impurity = gini(&labels);
        if depth >= self.params.max_depth || idx.len() < self.params.min_samples_split || impurity == 0.0 {
            return self.leaf(idx);
        }
        let Some((feature, threshold, child)) = self.best_split(idx) else {
            return self.leaf(idx);
        };
        if child >= impurity {
            return self.leaf(idx);
        }
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.xs[i][feature] <= threshold);
        let me = self.nodes.len();
        self.nodes.push(Node::Split {
            feature,
            threshold,
            left: 0,
            right: 0,
        });
        let left = self.grow(&l, depth + 1);
        let right = self.grow(&r, depth + 1);
        self.nodes[me] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        me
    }
}

impl DecisionTree {
    /// Fits a tree to `xs`/`ys`. `rng` is only used when features are subsampled.
    ///
    /// # Panics
    ///
    /// Panics if `xs` is empty or `xs` and `ys` differ in length.
    pub fn fit(xs: &[Vec<f64>], ys: &[bool], params: TreeParams, rng: &mut impl Rng) -> Self {
        assert!(
            !xs.is_empty() && xs.len() == ys.len(),
            "need matching, non-empty samples"
        );
        let idx: Vec<usize> = (0..xs.len()).collect();
        let mut b = Builder {
            xs,
            ys,
            params,
            rng,
            nodes: Vec::new(),
        };
        b.grow(&idx, 0);
        DecisionTree { nodes: b.nodes }
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        let mut k = 0;
        loop {
            match self.nodes[k] {
                Node::Leaf { score, .. } => return score,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => k = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    /// Number of splits on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], k: usize) -> usize {
            match nodes[k] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }
}
