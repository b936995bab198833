//! Gradient-boosted regression trees for squared error and logistic loss.

use serde::{Deserialize, Serialize};

use super::sigmoid;
use super::tree::{grow, Criterion, Tree, TreeParams};
use super::ModelError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientBoosting {
    pub init: f64,
    pub learning_rate: f64,
    pub trees: Vec<Tree>,
}

impl GradientBoosting {
    pub fn raw(&self, row: &[f64]) -> f64 {
        self.init + self.learning_rate * self.trees.iter().map(|t| t.predict(row)).sum::<f64>()
    }

    /// Squared-error boosting.
    pub fn fit_regression(
        x: &[f64],
        n_cols: usize,
        y: &[f64],
        n_trees: usize,
        max_depth: usize,
        learning_rate: f64,
    ) -> Result<Self, ModelError> {
        if y.is_empty() {
            return Err(ModelError::EmptyTraining);
        }
        let init = y.iter().sum::<f64>() / y.len() as f64;
        let mut f = vec![init; y.len()];
        let mut trees = Vec::with_capacity(n_trees);
        for _ in 0..n_trees {
            let resid: Vec<f64> = y.iter().zip(&f).map(|(a, b)| a - b).collect();
            let tree = Tree::fit(
                x,
                n_cols,
                &resid,
                TreeParams::with_depth(max_depth),
                Criterion::SquaredError,
            );
            for (i, fi) in f.iter_mut().enumerate() {
                *fi += learning_rate * tree.predict(&x[i * n_cols..(i + 1) * n_cols]);
            }
            trees.push(tree);
        }
        Ok(GradientBoosting {
            init,
            learning_rate,
            trees,
        })
    }

    /// Logistic-loss boosting with Newton leaf values.
    pub fn fit_classifier(
        x: &[f64],
        n_cols: usize,
        labels: &[u8],
        n_trees: usize,
        max_depth: usize,
        learning_rate: f64,
    ) -> Result<Self, ModelError> {
        let n = labels.len();
        let pos = labels.iter().filter(|&&l| l == 1).count();
        if pos == 0 || pos == n {
            return Err(ModelError::DegenerateTraining(
                "gradient boosting classifier needs both classes".into(),
            ));
        }
        let y: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
        let p0 = pos as f64 / n as f64;
        let init = (p0 / (1.0 - p0)).ln();
        let mut f = vec![init; n];
        let mut trees = Vec::with_capacity(n_trees);
        for _ in 0..n_trees {
            let prob: Vec<f64> = f.iter().map(|&z| sigmoid(z)).collect();
            let resid: Vec<f64> = y.iter().zip(&prob).map(|(a, p)| a - p).collect();
            let mut grown = grow(
                x,
                n_cols,
                &resid,
                (0..n).collect(),
                TreeParams::with_depth(max_depth),
                Criterion::SquaredError,
                None,
            );
            for (node, rows) in &grown.leaf_rows {
                let num: f64 = rows.iter().map(|&r| resid[r]).sum();
                let den: f64 = rows.iter().map(|&r| prob[r] * (1.0 - prob[r])).sum();
                grown.tree.set_leaf(*node, if den > 1e-12 { num / den } else { 0.0 });
            }
            for (i, fi) in f.iter_mut().enumerate() {
                *fi += learning_rate * grown.tree.predict(&x[i * n_cols..(i + 1) * n_cols]);
            }
            trees.push(grown.tree);
        }
        Ok(GradientBoosting {
            init,
            learning_rate,
            trees,
        })
    }

    pub fn probability(&self, row: &[f64]) -> f64 {
        sigmoid(self.raw(row))
    }
}
