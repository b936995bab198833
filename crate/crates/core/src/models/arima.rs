//! ARIMA(p, d, q) with an optional exogenous regressor, fit by conditional
//! sum of squares.
//!
//! On the `d`-times differenced series `z`:
//!
//! ```text
//! z_k = c + beta * x_k + sum_i phi_i z_{k-i} + e_k + sum_j theta_j e_{k-j}
//! ```
//!
//! with residuals before index `p` fixed at zero. Pure AR orders are solved
//! exactly by least squares; orders with MA terms start from a
//! Hannan–Rissanen estimate and are refined with Nelder–Mead.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::optimize::NelderMead;
use super::ModelError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArimaOrder {
    pub p: usize,
    pub d: usize,
    pub q: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArimaModel {
    pub order: ArimaOrder,
    pub constant: f64,
    /// Coefficient on the exogenous series; `None` when the model has no
    /// exogenous input or the training column was identically zero.
    pub exog_coef: Option<f64>,
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
    pub sigma2: f64,
    pub n_obs: usize,
}

fn difference(y: &[f64], d: usize) -> Vec<f64> {
    let mut z = y.to_vec();
    for _ in 0..d {
        z = z.windows(2).map(|w| w[1] - w[0]).collect();
    }
    z
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn least_squares(rows: &[Vec<f64>], target: &[f64]) -> Option<Vec<f64>> {
    let n = rows.len();
    let k = rows.first()?.len();
    if k == 0 {
        return Some(Vec::new());
    }
    let a = DMatrix::from_fn(n, k, |i, j| rows[i][j]);
    let b = DVector::from_column_slice(target);
    let sol = a.svd(true, true).solve(&b, 1e-12).ok()?;
    Some(sol.iter().copied().collect())
}

/// Parameter vector layout: `[c, beta?, phi_1..phi_p, theta_1..theta_q]`.
struct Layout {
    exog: bool,
    p: usize,
    q: usize,
}

impl Layout {
    fn len(&self) -> usize {
        1 + usize::from(self.exog) + self.p + self.q
    }

    fn split<'a>(&self, v: &'a [f64]) -> (f64, f64, &'a [f64], &'a [f64]) {
        let b = usize::from(self.exog);
        let beta = if self.exog { v[1] } else { 0.0 };
        (v[0], beta, &v[1 + b..1 + b + self.p], &v[1 + b + self.p..])
    }
}

fn residuals(z: &[f64], x: &[f64], c: f64, beta: f64, ar: &[f64], ma: &[f64]) -> Vec<f64> {
    let p = ar.len();
    let mut e = vec![0.0; z.len()];
    for k in p..z.len() {
        let mut pred = c + beta * x[k];
        for (i, phi) in ar.iter().enumerate() {
            pred += phi * z[k - 1 - i];
        }
        for (j, theta) in ma.iter().enumerate() {
            if k > j {
                pred += theta * e[k - 1 - j];
            }
        }
        e[k] = z[k] - pred;
    }
    e
}

fn ma_invertible(ma: &[f64]) -> bool {
    match ma {
        [] => true,
        [t1] => t1.abs() < 1.0,
        [t1, t2] => t2.abs() < 1.0 && -t1 - t2 < 1.0 && t1 - t2 < 1.0,
        _ => ma.iter().map(|t| t.abs()).sum::<f64>() < 1.0,
    }
}

impl ArimaModel {
    /// Fit on `y` with optional exogenous values aligned to `y`.
    pub fn fit(y: &[f64], exog: Option<&[f64]>, order: ArimaOrder) -> Result<Self, ModelError> {
        if let Some(x) = exog {
            if x.len() != y.len() {
                return Err(ModelError::ShapeMismatch {
                    expected: y.len(),
                    got: x.len(),
                });
            }
        }
        let z = difference(y, order.d);
        // an all-zero regressor carries no information; drop it so the fit
        // coincides with the plain model
        let x: Vec<f64> = match exog {
            Some(x) => x[order.d..].to_vec(),
            None => vec![0.0; z.len()],
        };
        let use_exog = exog.is_some() && x.iter().any(|v| *v != 0.0);
        let layout = Layout {
            exog: use_exog,
            p: order.p,
            q: order.q,
        };
        let n_eff = z.len().saturating_sub(order.p);
        if n_eff <= layout.len() + 1 {
            return Err(ModelError::DegenerateTraining(format!(
                "{} observations for {} parameters",
                z.len(),
                layout.len()
            )));
        }

        let params = if order.q == 0 {
            let rows: Vec<Vec<f64>> = (order.p..z.len())
                .map(|k| {
                    let mut r = vec![1.0];
                    if use_exog {
                        r.push(x[k]);
                    }
                    r.extend((1..=order.p).map(|i| z[k - i]));
                    r
                })
                .collect();
            least_squares(&rows, &z[order.p..])
                .ok_or_else(|| ModelError::NonConvergence("least squares failed".into()))?
        } else {
            let start = hannan_rissanen(&z, &x, &layout)?;
            let objective = |v: &[f64]| {
                let (c, beta, ar, ma) = layout.split(v);
                if !ma_invertible(ma) {
                    return 1e100;
                }
                let e = residuals(&z, &x, c, beta, ar, ma);
                let sse: f64 = e[order.p..].iter().map(|r| r * r).sum();
                if sse.is_finite() {
                    sse
                } else {
                    1e100
                }
            };
            let min = NelderMead::default().minimize(objective, &start, 0.1);
            if !min.converged || min.fx >= 1e100 {
                return Err(ModelError::NonConvergence(format!(
                    "ARIMA({},{},{}) CSS after {} iterations, sse {}",
                    order.p, order.d, order.q, min.iterations, min.fx
                )));
            }
            min.x
        };

        let (c, beta, ar, ma) = layout.split(&params);
        let e = residuals(&z, &x, c, beta, ar, ma);
        let sse: f64 = e[order.p..].iter().map(|r| r * r).sum();
        if !sse.is_finite() || params.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonConvergence("non-finite parameters".into()));
        }
        Ok(ArimaModel {
            order,
            constant: c,
            exog_coef: use_exog.then_some(beta),
            ar: ar.to_vec(),
            ma: ma.to_vec(),
            sigma2: sse / n_eff as f64,
            n_obs: y.len(),
        })
    }

    /// One-step-ahead forecasts of `y[t]` for each target `t`, each using
    /// only `y[..t]` and `exog[..=t]`.
    pub fn one_step(&self, y: &[f64], exog: Option<&[f64]>, targets: &[usize]) -> Result<Vec<f64>, ModelError> {
        let Some(&max_t) = targets.iter().max() else {
            return Ok(Vec::new());
        };
        let d = self.order.d;
        if targets.iter().any(|&t| t < d) || max_t >= y.len() {
            return Err(ModelError::ShapeMismatch {
                expected: y.len(),
                got: max_t + 1,
            });
        }
        let y = &y[..=max_t];
        let z = difference(y, d);
        let x: Vec<f64> = match (exog, self.exog_coef) {
            (Some(x), Some(_)) => {
                if x.len() <= max_t {
                    return Err(ModelError::ShapeMismatch {
                        expected: max_t + 1,
                        got: x.len(),
                    });
                }
                x[d..=max_t].to_vec()
            }
            _ => vec![0.0; z.len()],
        };
        let beta = self.exog_coef.unwrap_or(0.0);
        let e = residuals(&z, &x, self.constant, beta, &self.ar, &self.ma);
        let zhat = |k: usize| -> f64 {
            let mut pred = self.constant + beta * x[k];
            for (i, phi) in self.ar.iter().enumerate() {
                if k > i {
                    pred += phi * z[k - 1 - i];
                }
            }
            for (j, theta) in self.ma.iter().enumerate() {
                if k > j {
                    pred += theta * e[k - 1 - j];
                }
            }
            pred
        };
        Ok(targets
            .iter()
            .map(|&t| {
                let mut yhat = zhat(t - d);
                for i in 1..=d {
                    let sign = if i % 2 == 1 { 1.0 } else { -1.0 };
                    yhat += sign * binomial(d, i) * y[t - i];
                }
                yhat
            })
            .collect())
    }
}

fn hannan_rissanen(z: &[f64], x: &[f64], layout: &Layout) -> Result<Vec<f64>, ModelError> {
    let long = (layout.p + layout.q).max(5).min(z.len() / 4).max(1);
    let rows: Vec<Vec<f64>> = (long..z.len())
        .map(|k| {
            let mut r = vec![1.0];
            r.extend((1..=long).map(|i| z[k - i]));
            r
        })
        .collect();
    let coef = least_squares(&rows, &z[long..]).ok_or_else(|| ModelError::NonConvergence("long AR failed".into()))?;
    let mut ehat = vec![0.0; z.len()];
    for k in long..z.len() {
        let pred: f64 = coef[0] + (1..=long).map(|i| coef[i] * z[k - i]).sum::<f64>();
        ehat[k] = z[k] - pred;
    }
    let m = long + layout.q.max(layout.p);
    let rows: Vec<Vec<f64>> = (m..z.len())
        .map(|k| {
            let mut r = vec![1.0];
            if layout.exog {
                r.push(x[k]);
            }
            r.extend((1..=layout.p).map(|i| z[k - i]));
            r.extend((1..=layout.q).map(|j| ehat[k - j]));
            r
        })
        .collect();
    if rows.len() <= layout.len() {
        return Ok(vec![0.0; layout.len()]);
    }
    let mut start = least_squares(&rows, &z[m..])
        .ok_or_else(|| ModelError::NonConvergence("Hannan-Rissanen regression failed".into()))?;
    // pull a non-invertible MA start back inside the region
    let b = usize::from(layout.exog) + 1 + layout.p;
    while !ma_invertible(&start[b..]) {
        for t in &mut start[b..] {
            *t *= 0.5;
        }
    }
    Ok(start)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    fn ar1(phi: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let mut y = Vec::with_capacity(n);
        let mut prev = 0.0;
        for _ in 0..n {
            prev = phi * prev + noise.sample(&mut rng);
            y.push(prev);
        }
        y
    }

    #[test]
    fn white_noise_order_predicts_training_mean() {
        let y = [1.0, 3.0, 2.0, 6.0, 4.0, 2.0];
        let m = ArimaModel::fit(&y, None, ArimaOrder { p: 0, d: 0, q: 0 }).unwrap();
        assert!((m.constant - 3.0).abs() < 1e-12);
        let preds = m.one_step(&y, None, &[2, 5]).unwrap();
        assert!(preds.iter().all(|p| (p - 3.0).abs() < 1e-12));
    }

    #[test]
    fn ar_recovery() {
        let y = ar1(0.6, 1500, 7);
        let m = ArimaModel::fit(&y, None, ArimaOrder { p: 1, d: 0, q: 0 }).unwrap();
        assert!((m.ar[0] - 0.6).abs() < 0.06, "{:?}", m.ar);
    }

    #[test]
    fn ma_recovery() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let e: Vec<f64> = (0..2001).map(|_| noise.sample(&mut rng)).collect();
        let y: Vec<f64> = (1..2001).map(|t| e[t] + 0.5 * e[t - 1]).collect();
        let m = ArimaModel::fit(&y, None, ArimaOrder { p: 0, d: 0, q: 1 }).unwrap();
        assert!((m.ma[0] - 0.5).abs() < 0.08, "{:?}", m.ma);
    }

    #[test]
    fn exog_coefficient_recovery() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let noise = Normal::new(0.0, 0.5).unwrap();
        let x: Vec<f64> = (0..800).map(|i| ((i * 7) % 13) as f64 - 6.0).collect();
        let y: Vec<f64> = x.iter().map(|v| 1.0 + 0.3 * v + noise.sample(&mut rng)).collect();
        let m = ArimaModel::fit(&y, Some(&x), ArimaOrder { p: 0, d: 0, q: 0 }).unwrap();
        assert!((m.exog_coef.unwrap() - 0.3).abs() < 0.02);
    }

    #[test]
    fn zero_exog_matches_plain_model() {
        let y = ar1(0.5, 300, 5);
        let zeros = vec![0.0; y.len()];
        for order in [ArimaOrder { p: 1, d: 0, q: 0 }, ArimaOrder { p: 1, d: 0, q: 1 }] {
            let a = ArimaModel::fit(&y, None, order).unwrap();
            let s = ArimaModel::fit(&y, Some(&zeros), order).unwrap();
            let targets: Vec<usize> = (250..300).collect();
            let pa = a.one_step(&y, None, &targets).unwrap();
            let ps = s.one_step(&y, Some(&zeros), &targets).unwrap();
            for (u, v) in pa.iter().zip(&ps) {
                assert!((u - v).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn differenced_forecast_adds_back_level() {
        // y is a random walk with drift 2; d=1, p=q=0 forecasts y[t-1] + 2
        let y: Vec<f64> = (0..50).map(|i| 10.0 + 2.0 * i as f64).collect();
        let m = ArimaModel::fit(&y, None, ArimaOrder { p: 0, d: 1, q: 0 }).unwrap();
        let p = m.one_step(&y, None, &[20]).unwrap();
        assert!((p[0] - y[20]).abs() < 1e-9);
    }

    #[test]
    fn predictions_ignore_future_values() {
        let y = ar1(0.7, 200, 9);
        let m = ArimaModel::fit(&y[..150], None, ArimaOrder { p: 2, d: 0, q: 1 }).unwrap();
        let targets: Vec<usize> = (150..170).collect();
        let a = m.one_step(&y, None, &targets).unwrap();
        let mut y2 = y.clone();
        for v in &mut y2[170..] {
            *v = 1e6;
        }
        let b = m.one_step(&y2, None, &targets).unwrap();
        assert_eq!(a, b);
    }
}
