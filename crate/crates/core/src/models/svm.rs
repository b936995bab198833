//! RBF-kernel support vector classification and epsilon-regression.
//!
//! Both problems are reduced to the dual
//!
//! ```text
//! min 0.5 a'Qa + p'a   s.t.  y'a = 0,  0 <= a_i <= C
//! ```
//!
//! and solved by SMO with second-order working-set selection.

use serde::{Deserialize, Serialize};

use super::ModelError;

const TAU: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub gamma: f64,
    pub n_cols: usize,
    /// Support vectors, flat.
    pub support: Vec<f64>,
    pub coef: Vec<f64>,
    pub rho: f64,
}

impl SvmModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        let mut s = -self.rho;
        for (sv, c) in self.support.chunks(self.n_cols).zip(&self.coef) {
            s += c * rbf(self.gamma, sv, x);
        }
        s
    }
}

pub fn rbf(gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum();
    (-gamma * d2).exp()
}

/// `1 / (n_cols * var(X))`, the usual scale heuristic.
pub fn scale_gamma(x: &[f64], n_cols: usize) -> f64 {
    if x.is_empty() || n_cols == 0 {
        return 1.0;
    }
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / x.len() as f64;
    if var > 0.0 {
        1.0 / (n_cols as f64 * var)
    } else {
        1.0
    }
}

fn kernel_matrix(x: &[f64], n_cols: usize, gamma: f64) -> Vec<f64> {
    let n = x.len() / n_cols;
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        let xi = &x[i * n_cols..(i + 1) * n_cols];
        k[i * n + i] = 1.0;
        for j in 0..i {
            let v = rbf(gamma, xi, &x[j * n_cols..(j + 1) * n_cols]);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    k
}

struct Dual<'a> {
    /// Signed kernel: `Q(i, j) = y_i y_j K(i mod n, j mod n)`.
    kernel: &'a [f64],
    n_kernel: usize,
    y: Vec<f64>,
    p: Vec<f64>,
    c: f64,
}

impl Dual<'_> {
    fn q(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (i % self.n_kernel, j % self.n_kernel);
        self.y[i] * self.y[j] * self.kernel[a * self.n_kernel + b]
    }

    /// Returns `(alpha, rho, converged)`.
    fn solve(&self, eps: f64, max_iter: usize) -> (Vec<f64>, f64, bool) {
        let l = self.y.len();
        let c = self.c;
        let mut alpha = vec![0.0; l];
        let mut grad = self.p.clone();
        let qd: Vec<f64> = (0..l).map(|i| self.q(i, i)).collect();
        let upper = |a: f64| a >= c;
        let lower = |a: f64| a <= 0.0;
        let mut converged = false;

        for _ in 0..max_iter {
            // first index: maximal violating pair component
            let mut gmax = f64::NEG_INFINITY;
            let mut i_sel = None;
            for t in 0..l {
                if self.y[t] > 0.0 {
                    if !upper(alpha[t]) && -grad[t] >= gmax {
                        gmax = -grad[t];
                        i_sel = Some(t);
                    }
                } else if !lower(alpha[t]) && grad[t] >= gmax {
                    gmax = grad[t];
                    i_sel = Some(t);
                }
            }
            let Some(i) = i_sel else {
                converged = true;
                break;
            };
            let mut gmax2 = f64::NEG_INFINITY;
            let mut j_sel = None;
            let mut best_obj = f64::INFINITY;
            for t in 0..l {
                let (in_set, g_val, grad_diff) = if self.y[t] > 0.0 {
                    (!lower(alpha[t]), grad[t], gmax + grad[t])
                } else {
                    (!upper(alpha[t]), -grad[t], gmax - grad[t])
                };
                if !in_set {
                    continue;
                }
                if g_val >= gmax2 {
                    gmax2 = g_val;
                }
                if grad_diff > 0.0 {
                    let quad = qd[i] + qd[t] - 2.0 * self.y[i] * self.y[t] * self.q(i, t);
                    let quad = if quad > 0.0 { quad } else { TAU };
                    let obj = -(grad_diff * grad_diff) / quad;
                    if obj <= best_obj {
                        best_obj = obj;
                        j_sel = Some(t);
                    }
                }
            }
            if gmax + gmax2 < eps {
                converged = true;
                break;
            }
            let Some(j) = j_sel else {
                converged = true;
                break;
            };

            let qij = self.q(i, j);
            let (old_i, old_j) = (alpha[i], alpha[j]);
            if self.y[i] != self.y[j] {
                let quad = (qd[i] + qd[j] + 2.0 * qij).max(TAU);
                let delta = (-grad[i] - grad[j]) / quad;
                let diff = alpha[i] - alpha[j];
                alpha[i] += delta;
                alpha[j] += delta;
                if diff > 0.0 {
                    if alpha[j] < 0.0 {
                        alpha[j] = 0.0;
                        alpha[i] = diff;
                    }
                } else if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = -diff;
                }
                if diff > 0.0 {
                    if alpha[i] > c {
                        alpha[i] = c;
                        alpha[j] = c - diff;
                    }
                } else if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = c + diff;
                }
            } else {
                let quad = (qd[i] + qd[j] - 2.0 * qij).max(TAU);
                let delta = (grad[i] - grad[j]) / quad;
                let sum = alpha[i] + alpha[j];
                alpha[i] -= delta;
                alpha[j] += delta;
                if sum > c {
                    if alpha[i] > c {
                        alpha[i] = c;
                        alpha[j] = sum - c;
                    }
                } else if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = sum;
                }
                if sum > c {
                    if alpha[j] > c {
                        alpha[j] = c;
                        alpha[i] = sum - c;
                    }
                } else if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = sum;
                }
            }
            let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
            if di != 0.0 || dj != 0.0 {
                for (t, g) in grad.iter_mut().enumerate() {
                    *g += self.q(i, t) * di + self.q(j, t) * dj;
                }
            }
        }

        let mut ub = f64::INFINITY;
        let mut lb = f64::NEG_INFINITY;
        let mut free = 0usize;
        let mut sum_free = 0.0;
        for t in 0..l {
            let yg = self.y[t] * grad[t];
            if upper(alpha[t]) {
                if self.y[t] < 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else if lower(alpha[t]) {
                if self.y[t] > 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else {
                free += 1;
                sum_free += yg;
            }
        }
        let rho = if free > 0 {
            sum_free / free as f64
        } else {
            (ub + lb) / 2.0
        };
        (alpha, rho, converged)
    }
}

fn check_shape(x: &[f64], n_cols: usize, n: usize) -> Result<(), ModelError> {
    if n_cols == 0 || x.len() != n * n_cols {
        return Err(ModelError::ShapeMismatch {
            expected: n * n_cols,
            got: x.len(),
        });
    }
    if n == 0 {
        return Err(ModelError::EmptyTraining);
    }
    Ok(())
}

const MAX_ITER: usize = 200_000;

fn collect_support(
    x: &[f64],
    n_cols: usize,
    coef: impl Iterator<Item = (usize, f64)>,
    gamma: f64,
    rho: f64,
) -> SvmModel {
    let mut support = Vec::new();
    let mut kept = Vec::new();
    for (i, c) in coef {
        if c != 0.0 {
            support.extend_from_slice(&x[i * n_cols..(i + 1) * n_cols]);
            kept.push(c);
        }
    }
    SvmModel {
        gamma,
        n_cols,
        support,
        coef: kept,
        rho,
    }
}

/// C-SVC on labels in {0, 1}. Decision value >= 0 means class 1.
pub fn fit_svc(x: &[f64], n_cols: usize, labels: &[u8], c: f64, gamma: f64) -> Result<SvmModel, ModelError> {
    check_shape(x, n_cols, labels.len())?;
    let pos = labels.iter().filter(|&&l| l == 1).count();
    if pos == 0 || pos == labels.len() {
        return Err(ModelError::DegenerateTraining(
            "SVM needs both classes in the training slice".into(),
        ));
    }
    let kernel = kernel_matrix(x, n_cols, gamma);
    let y: Vec<f64> = labels.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
    let dual = Dual {
        kernel: &kernel,
        n_kernel: labels.len(),
        p: vec![-1.0; y.len()],
        y: y.clone(),
        c,
    };
    let (alpha, rho, converged) = dual.solve(1e-3, MAX_ITER);
    if !converged {
        log::warn!("SVC reached the iteration cap");
    }
    Ok(collect_support(
        x,
        n_cols,
        alpha.iter().zip(&y).map(|(a, yi)| a * yi).enumerate(),
        gamma,
        rho,
    ))
}

/// Epsilon-SVR.
pub fn fit_svr(
    x: &[f64],
    n_cols: usize,
    targets: &[f64],
    c: f64,
    epsilon: f64,
    gamma: f64,
) -> Result<SvmModel, ModelError> {
    let n = targets.len();
    check_shape(x, n_cols, n)?;
    let kernel = kernel_matrix(x, n_cols, gamma);
    let mut y = vec![1.0; n];
    y.extend(std::iter::repeat_n(-1.0, n));
    let mut p: Vec<f64> = targets.iter().map(|t| epsilon - t).collect();
    p.extend(targets.iter().map(|t| epsilon + t));
    let dual = Dual {
        kernel: &kernel,
        n_kernel: n,
        y,
        p,
        c,
    };
    let (alpha, rho, converged) = dual.solve(1e-3, MAX_ITER);
    if !converged {
        log::warn!("SVR reached the iteration cap");
    }
    Ok(collect_support(
        x,
        n_cols,
        (0..n).map(|i| (i, alpha[i] - alpha[i + n])),
        gamma,
        rho,
    ))
}
