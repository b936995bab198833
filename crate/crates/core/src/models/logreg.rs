//! L2-regularized logistic regression solved by Newton's method.
//!
//! Minimizes `sum_i logloss_i + ||w||^2 / (2C)`; the intercept is not
//! penalized.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{sigmoid, ModelError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticRegression {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl LogisticRegression {
    pub fn fit(x: &[f64], n_cols: usize, labels: &[u8], c: f64) -> Result<Self, ModelError> {
        let n = labels.len();
        if n == 0 {
            return Err(ModelError::EmptyTraining);
        }
        if x.len() != n * n_cols {
            return Err(ModelError::ShapeMismatch {
                expected: n * n_cols,
                got: x.len(),
            });
        }
        let pos = labels.iter().filter(|&&l| l == 1).count();
        if pos == 0 || pos == n {
            return Err(ModelError::DegenerateTraining(
                "logistic regression needs both classes".into(),
            ));
        }
        if c <= 0.0 {
            return Err(ModelError::InvalidHyperparameter(format!(
                "C must be positive, got {c}"
            )));
        }
        let k = n_cols + 1;
        let lambda = 1.0 / c;
        let mut beta = DVector::<f64>::zeros(k);
        let row = |i: usize| -> DVector<f64> {
            let mut v = DVector::zeros(k);
            v[0] = 1.0;
            for j in 0..n_cols {
                v[j + 1] = x[i * n_cols + j];
            }
            v
        };
        let rows: Vec<DVector<f64>> = (0..n).map(row).collect();
        for _ in 0..100 {
            let mut grad = DVector::<f64>::zeros(k);
            let mut hess = DMatrix::<f64>::zeros(k, k);
            for (xi, &yi) in rows.iter().zip(labels) {
                let p = sigmoid(xi.dot(&beta));
                grad += xi * (p - f64::from(yi));
                hess.ger(p * (1.0 - p), xi, xi, 1.0);
            }
            for j in 1..k {
                grad[j] += lambda * beta[j];
                hess[(j, j)] += lambda;
            }
            hess[(0, 0)] += 1e-10;
            let step = hess
                .cholesky()
                .map(|ch| ch.solve(&grad))
                .ok_or_else(|| ModelError::NonConvergence("singular Hessian".into()))?;
            beta -= &step;
            if step.amax() < 1e-10 {
                return Ok(LogisticRegression {
                    intercept: beta[0],
                    weights: beta.iter().skip(1).copied().collect(),
                });
            }
        }
        Err(ModelError::NonConvergence("Newton iterations exhausted".into()))
    }

    pub fn probability(&self, row: &[f64]) -> f64 {
        sigmoid(self.intercept + self.weights.iter().zip(row).map(|(w, v)| w * v).sum::<f64>())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_direction_of_effect() {
        let x: Vec<f64> = (0..200).map(|i| (i as f64 - 100.0) / 25.0).collect();
        // deterministic pseudo-noise around p = sigmoid(2x)
        let y: Vec<u8> = x
            .iter()
            .enumerate()
            .map(|(i, &v)| u8::from(sigmoid(2.0 * v) > ((i * 7919) % 1000) as f64 / 1000.0))
            .collect();
        let m = LogisticRegression::fit(&x, 1, &y, 10.0).unwrap();
        assert!(m.weights[0] > 1.0 && m.weights[0] < 3.5, "{:?}", m.weights);
        assert!(m.probability(&[3.0]) > 0.9);
    }

    #[test]
    fn stronger_penalty_shrinks_weights() {
        let x: Vec<f64> = (0..50).map(|i| i as f64 / 10.0 - 2.5).collect();
        let y: Vec<u8> = (0..50).map(|i| u8::from((i * 13) % 50 < i)).collect();
        let weak = LogisticRegression::fit(&x, 1, &y, 10.0).unwrap();
        let strong = LogisticRegression::fit(&x, 1, &y, 0.1).unwrap();
        assert!(strong.weights[0].abs() < weak.weights[0].abs());
    }

    #[test]
    fn single_class_is_degenerate() {
        assert!(matches!(
            LogisticRegression::fit(&[1.0, 2.0], 1, &[0, 0], 1.0),
            Err(ModelError::DegenerateTraining(_))
        ));
    }
}
