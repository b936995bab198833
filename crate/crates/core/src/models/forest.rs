//! Bootstrap-aggregated classification trees.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{grow, Criterion, Tree, TreeParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<Tree>,
}

impl RandomForest {
    /// `max_features` defaults to `round(sqrt(n_cols))`.
    pub fn fit(x: &[f64], n_cols: usize, labels: &[u8], n_trees: usize, max_depth: usize, seed: u64) -> Self {
        let y: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
        let n = y.len();
        let max_features = ((n_cols as f64).sqrt().round() as usize).clamp(1, n_cols.max(1));
        let params = TreeParams {
            max_features: Some(max_features),
            ..TreeParams::with_depth(max_depth)
        };
        let trees = (0..n_trees)
            .map(|t| {
                let mut rng =
                    ChaCha8Rng::seed_from_u64(seed.wrapping_add((t as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)));
                let rows: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
                grow(x, n_cols, &y, rows, params, Criterion::Gini, Some(&mut rng)).tree
            })
            .collect();
        RandomForest { trees }
    }

    /// Mean leaf probability of class 1 across trees.
    pub fn probability(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(row)).sum::<f64>() / self.trees.len().max(1) as f64
    }
}
