//! CART decision trees (Gini for classification, squared error for
//! regression).
//!
//! Split search only depends on the ordering of feature values, so any
//! strictly increasing rescaling of a feature yields the same tree up to
//! the numeric value of thresholds.

use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Criterion {
    /// Targets in {0, 1}; leaves hold the fraction of ones.
    Gini,
    /// Real targets; leaves hold the mean.
    SquaredError,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

#[derive(Clone, Copy, Debug)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    /// Features examined per split; `None` means all.
    pub max_features: Option<usize>,
}

impl TreeParams {
    pub fn with_depth(max_depth: usize) -> Self {
        TreeParams {
            max_depth,
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_features: None,
        }
    }
}

/// A fitted tree plus, for each leaf node, the training rows that reached it.
pub struct Grown {
    pub tree: Tree,
    pub leaf_rows: Vec<(usize, Vec<usize>)>,
}

struct Builder<'a> {
    x: &'a [f64],
    n_cols: usize,
    y: &'a [f64],
    params: TreeParams,
    criterion: Criterion,
    rng: Option<&'a mut ChaCha8Rng>,
    nodes: Vec<Node>,
    leaf_rows: Vec<(usize, Vec<usize>)>,
}

/// Weighted impurity `n * impurity` from running sums.
fn cost(criterion: Criterion, n: f64, sum: f64, sum_sq: f64) -> f64 {
    if n == 0.0 {
        return 0.0;
    }
    match criterion {
        Criterion::Gini => {
            let p = sum / n;
            2.0 * n * p * (1.0 - p)
        }
        Criterion::SquaredError => (sum_sq - sum * sum / n).max(0.0),
    }
}

impl Builder<'_> {
    fn value(&self, rows: &[usize]) -> f64 {
        rows.iter().map(|&r| self.y[r]).sum::<f64>() / rows.len() as f64
    }

    fn leaf(&mut self, rows: Vec<usize>) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            value: self.value(&rows),
        });
        self.leaf_rows.push((id, rows));
        id
    }

    fn best_split(&mut self, rows: &[usize]) -> Option<(usize, f64, f64)> {
        let n = rows.len() as f64;
        let (sum, sum_sq) = rows
            .iter()
            .fold((0.0, 0.0), |(s, q), &r| (s + self.y[r], q + self.y[r] * self.y[r]));
        let parent = cost(self.criterion, n, sum, sum_sq);
        if parent <= 1e-14 * n.max(1.0) {
            return None;
        }
        let features: Vec<usize> = match (self.params.max_features, self.rng.as_deref_mut()) {
            (Some(k), Some(rng)) if k < self.n_cols => sample(rng, self.n_cols, k).into_vec(),
            _ => (0..self.n_cols).collect(),
        };
        let min_leaf = self.params.min_samples_leaf.max(1);
        let mut best: Option<(usize, f64, f64)> = None;
        let mut order = rows.to_vec();
        for &f in &features {
            let xv = |r: usize| self.x[r * self.n_cols + f];
            order.copy_from_slice(rows);
            order.sort_by(|&a, &b| xv(a).total_cmp(&xv(b)));
            let (mut ls, mut lq) = (0.0, 0.0);
            for k in 0..order.len() - 1 {
                let yk = self.y[order[k]];
                ls += yk;
                lq += yk * yk;
                let nl = (k + 1) as f64;
                let (a, b) = (xv(order[k]), xv(order[k + 1]));
                if a == b || k + 1 < min_leaf || order.len() - k - 1 < min_leaf {
                    continue;
                }
                let c = cost(self.criterion, nl, ls, lq) + cost(self.criterion, n - nl, sum - ls, sum_sq - lq);
                if best.is_none_or(|(_, _, bc)| c < bc) {
                    let mid = a + (b - a) / 2.0;
                    let threshold = if mid < b { mid } else { a };
                    best = Some((f, threshold, c));
                }
            }
        }
        best.filter(|(_, _, c)| *c < parent - 1e-12 * parent.abs())
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        if depth >= self.params.max_depth || rows.len() < self.params.min_samples_split.max(2) {
            return self.leaf(rows);
        }
        let Some((feature, threshold, _)) = self.best_split(&rows) else {
            return self.leaf(rows);
        };
        let (l, r): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&i| self.x[i * self.n_cols + feature] <= threshold);
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { value: 0.0 });
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
}

/// Grow a tree on the rows listed in `rows` (duplicates allowed, as in a
/// bootstrap sample).
pub fn grow(
    x: &[f64],
    n_cols: usize,
    y: &[f64],
    rows: Vec<usize>,
    params: TreeParams,
    criterion: Criterion,
    rng: Option<&mut ChaCha8Rng>,
) -> Grown {
    let mut b = Builder {
        x,
        n_cols,
        y,
        params,
        criterion,
        rng,
        nodes: Vec::new(),
        leaf_rows: Vec::new(),
    };
    b.grow(rows, 0);
    Grown {
        tree: Tree { nodes: b.nodes },
        leaf_rows: b.leaf_rows,
    }
}

impl Tree {
    pub fn fit(x: &[f64], n_cols: usize, y: &[f64], params: TreeParams, criterion: Criterion) -> Tree {
        grow(x, n_cols, y, (0..y.len()).collect(), params, criterion, None).tree
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn set_leaf(&mut self, node: usize, value: f64) {
        if let Node::Leaf { value: v } = &mut self.nodes[node] {
            *v = value;
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match &t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
            }
        }
        go(self, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stump_separates_sign() {
        let x = [-2.0, -1.0, -0.5, 0.5, 1.0, 3.0];
        let y = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let t = Tree::fit(&x, 1, &y, TreeParams::with_depth(1), Criterion::Gini);
        assert_eq!(t.depth(), 1);
        for (xi, yi) in x.iter().zip(&y) {
            assert_eq!(t.predict(&[*xi]), *yi);
        }
    }

    #[test]
    fn depth_limit_respected() {
        let x: Vec<f64> = (0..64).map(|i| i as f64).collect();
        let y: Vec<f64> = (0..64).map(|i| f64::from(i % 2 == 0)).collect();
        let t = Tree::fit(&x, 1, &y, TreeParams::with_depth(3), Criterion::Gini);
        assert!(t.depth() <= 3);
    }

    #[test]
    fn regression_leaves_hold_means() {
        let x = [0.0, 1.0, 2.0, 10.0, 11.0, 12.0];
        let y = [1.0, 2.0, 3.0, 19.0, 20.0, 21.0];
        let t = Tree::fit(&x, 1, &y, TreeParams::with_depth(1), Criterion::SquaredError);
        assert_eq!(t.predict(&[1.0]), 2.0);
        assert_eq!(t.predict(&[11.0]), 20.0);
    }

    #[test]
    fn pure_node_is_a_leaf() {
        let t = Tree::fit(
            &[1.0, 2.0, 3.0],
            1,
            &[1.0, 1.0, 1.0],
            TreeParams::with_depth(5),
            Criterion::Gini,
        );
        assert_eq!(t.nodes.len(), 1);
    }
}
