//! Stacked LSTM with a linear head, trained by backpropagation through
//! time.
//!
//! Gate order inside each `4H` block is input, forget, cell, output. Every
//! layer's weights are one `4H × (in + H)` matrix acting on `[x_t; h_{t-1}]`.
//! The head reads the top layer's final hidden state. With the logistic
//! loss the head output is a logit.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{sigmoid, ModelError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    Adam,
    SgdMomentum,
}

impl Optimizer {
    pub fn parse(s: &str) -> Result<Self, ModelError> {
        match s {
            "adam" => Ok(Optimizer::Adam),
            "sgd_momentum" => Ok(Optimizer::SgdMomentum),
            other => Err(ModelError::InvalidHyperparameter(format!(
                "unknown optimizer {other:?}"
            ))),
        }
    }

    fn default_lr(self) -> f64 {
        match self {
            Optimizer::Adam => 0.01,
            Optimizer::SgdMomentum => 0.05,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    /// Half squared error.
    Mse,
    /// Binary cross-entropy on a logit.
    Logistic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LstmConfig {
    pub layers: usize,
    pub hidden: usize,
    pub optimizer: Optimizer,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: Option<f64>,
    pub clip_norm: f64,
}

impl Default for LstmConfig {
    fn default() -> Self {
        LstmConfig {
            layers: 1,
            hidden: 16,
            optimizer: Optimizer::Adam,
            epochs: 50,
            batch_size: 32,
            learning_rate: None,
            clip_norm: 5.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lstm {
    pub n_in: usize,
    pub hidden: usize,
    pub layers: usize,
    pub loss: Loss,
    pub params: Vec<f64>,
    /// Mean training loss measured after each epoch.
    pub loss_history: Vec<f64>,
}

struct LayerTrace {
    inputs: Vec<Vec<f64>>,
    /// `h[0]` and `c[0]` are the zero initial state.
    h: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
    /// Activated gates per step, `4H` each.
    gates: Vec<Vec<f64>>,
}

impl Lstm {
    fn layer_in(&self, l: usize) -> usize {
        if l == 0 {
            self.n_in
        } else {
            self.hidden
        }
    }

    /// Offsets of (weights, bias) for layer `l`.
    fn layer_offsets(&self, l: usize) -> (usize, usize) {
        let h = self.hidden;
        let mut off = 0;
        for k in 0..l {
            off += 4 * h * (self.layer_in(k) + h) + 4 * h;
        }
        (off, off + 4 * h * (self.layer_in(l) + h))
    }

    fn head_offset(&self) -> usize {
        let (_, b) = self.layer_offsets(self.layers - 1);
        b + 4 * self.hidden
    }

    pub fn n_params(n_in: usize, hidden: usize, layers: usize) -> usize {
        (0..layers)
            .map(|l| {
                let i = if l == 0 { n_in } else { hidden };
                4 * hidden * (i + hidden) + 4 * hidden
            })
            .sum::<usize>()
            + hidden
            + 1
    }

    /// Uniform `±1/sqrt(H)` initialization with forget-gate bias 1.
    pub fn new(n_in: usize, hidden: usize, layers: usize, loss: Loss, seed: u64) -> Result<Self, ModelError> {
        if n_in == 0 || hidden == 0 || layers == 0 {
            return Err(ModelError::InvalidHyperparameter(
                "LSTM needs positive input, hidden and layer sizes".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = 1.0 / (hidden as f64).sqrt();
        let mut m = Lstm {
            n_in,
            hidden,
            layers,
            loss,
            params: (0..Self::n_params(n_in, hidden, layers))
                .map(|_| rng.gen_range(-k..k))
                .collect(),
            loss_history: Vec::new(),
        };
        for l in 0..layers {
            let (_, b) = m.layer_offsets(l);
            for j in 0..4 * hidden {
                m.params[b + j] = if (hidden..2 * hidden).contains(&j) { 1.0 } else { 0.0 };
            }
        }
        let head = m.head_offset();
        m.params[head + hidden] = 0.0;
        Ok(m)
    }

    fn forward_layer(&self, params: &[f64], l: usize, inputs: Vec<Vec<f64>>) -> LayerTrace {
        let h = self.hidden;
        let n_in = self.layer_in(l);
        let cols = n_in + h;
        let (wo, bo) = self.layer_offsets(l);
        let w = &params[wo..bo];
        let b = &params[bo..bo + 4 * h];
        let steps = inputs.len();
        let mut tr = LayerTrace {
            h: vec![vec![0.0; h]],
            c: vec![vec![0.0; h]],
            gates: Vec::with_capacity(steps),
            inputs,
        };
        let mut z = vec![0.0; 4 * h];
        for t in 0..steps {
            let x = &tr.inputs[t];
            let hp = &tr.h[t];
            for (r, zr) in z.iter_mut().enumerate() {
                let row = &w[r * cols..(r + 1) * cols];
                let mut s = b[r];
                for (wv, xv) in row[..n_in].iter().zip(x) {
                    s += wv * xv;
                }
                for (wv, hv) in row[n_in..].iter().zip(hp) {
                    s += wv * hv;
                }
                *zr = s;
            }
            let mut g = vec![0.0; 4 * h];
            let mut c = vec![0.0; h];
            let mut hn = vec![0.0; h];
            for j in 0..h {
                let ig = sigmoid(z[j]);
                let fg = sigmoid(z[h + j]);
                let cg = z[2 * h + j].tanh();
                let og = sigmoid(z[3 * h + j]);
                c[j] = fg * tr.c[t][j] + ig * cg;
                hn[j] = og * c[j].tanh();
                g[j] = ig;
                g[h + j] = fg;
                g[2 * h + j] = cg;
                g[3 * h + j] = og;
            }
            tr.gates.push(g);
            tr.c.push(c);
            tr.h.push(hn);
        }
        tr
    }

    fn steps(&self, window: &[f64]) -> Vec<Vec<f64>> {
        window.chunks(self.n_in).map(<[f64]>::to_vec).collect()
    }

    fn forward(&self, params: &[f64], window: &[f64]) -> (f64, Vec<LayerTrace>) {
        let mut traces = Vec::with_capacity(self.layers);
        let mut inputs = self.steps(window);
        for l in 0..self.layers {
            let tr = self.forward_layer(params, l, inputs);
            inputs = tr.h[1..].to_vec();
            traces.push(tr);
        }
        let head = self.head_offset();
        let last = traces.last().and_then(|t| t.h.last()).expect("at least one layer");
        let out = params[head + self.hidden]
            + params[head..head + self.hidden]
                .iter()
                .zip(last)
                .map(|(w, v)| w * v)
                .sum::<f64>();
        (out, traces)
    }

    /// Head output for one window laid out timestep-major.
    pub fn output(&self, window: &[f64]) -> f64 {
        self.forward(&self.params, window).0
    }

    fn sample_loss(&self, out: f64, target: f64) -> (f64, f64) {
        match self.loss {
            Loss::Mse => {
                let e = out - target;
                (0.5 * e * e, e)
            }
            Loss::Logistic => {
                // log(1 + exp(out)) - target * out, computed stably
                let l = out.max(0.0) + (-out.abs()).exp().ln_1p() - target * out;
                (l, sigmoid(out) - target)
            }
        }
    }

    /// Mean loss over the batch and its gradient with respect to `params`.
    pub fn loss_and_grad(&self, params: &[f64], windows: &[&[f64]], targets: &[f64]) -> (f64, Vec<f64>) {
        let h = self.hidden;
        let mut grad = vec![0.0; params.len()];
        let mut total = 0.0;
        let head = self.head_offset();
        for (window, &target) in windows.iter().zip(targets) {
            let (out, traces) = self.forward(params, window);
            let (l, dout) = self.sample_loss(out, target);
            total += l;
            let steps = traces[0].gates.len();
            let top = &traces[self.layers - 1];
            for j in 0..h {
                grad[head + j] += dout * top.h[steps][j];
            }
            grad[head + h] += dout;
            let mut dh_out = vec![vec![0.0; h]; steps];
            for j in 0..h {
                dh_out[steps - 1][j] = dout * params[head + j];
            }
            for l in (0..self.layers).rev() {
                dh_out = self.backward_layer(params, l, &traces[l], &dh_out, &mut grad);
            }
        }
        let n = windows.len().max(1) as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        (total / n, grad)
    }

    /// Accumulates parameter gradients for layer `l` and returns the
    /// gradient with respect to its inputs at each step.
    fn backward_layer(
        &self,
        params: &[f64],
        l: usize,
        tr: &LayerTrace,
        dh_out: &[Vec<f64>],
        grad: &mut [f64],
    ) -> Vec<Vec<f64>> {
        let h = self.hidden;
        let n_in = self.layer_in(l);
        let cols = n_in + h;
        let (wo, bo) = self.layer_offsets(l);
        let steps = tr.gates.len();
        let mut dx = vec![vec![0.0; n_in]; steps];
        let mut dh_next = vec![0.0; h];
        let mut dc_next = vec![0.0; h];
        let mut dz = vec![0.0; 4 * h];
        for t in (0..steps).rev() {
            let g = &tr.gates[t];
            for j in 0..h {
                let dh = dh_out[t][j] + dh_next[j];
                let (ig, fg, cg, og) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
                let tc = tr.c[t + 1][j].tanh();
                let dc = dh * og * (1.0 - tc * tc) + dc_next[j];
                dz[j] = dc * cg * ig * (1.0 - ig);
                dz[h + j] = dc * tr.c[t][j] * fg * (1.0 - fg);
                dz[2 * h + j] = dc * ig * (1.0 - cg * cg);
                dz[3 * h + j] = dh * tc * og * (1.0 - og);
                dc_next[j] = dc * fg;
            }
            dh_next.iter_mut().for_each(|v| *v = 0.0);
            let x = &tr.inputs[t];
            let hp = &tr.h[t];
            for (r, &d) in dz.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                grad[bo + r] += d;
                let base = wo + r * cols;
                for (k, xv) in x.iter().enumerate() {
                    grad[base + k] += d * xv;
                    dx[t][k] += d * params[base + k];
                }
                for (k, hv) in hp.iter().enumerate() {
                    grad[base + n_in + k] += d * hv;
                    dh_next[k] += d * params[base + n_in + k];
                }
            }
        }
        dx
    }

    /// Train on windows laid out timestep-major with `n_in` features per
    /// step. Minibatches are reshuffled each epoch from `seed`.
    pub fn fit(
        windows: &[Vec<f64>],
        targets: &[f64],
        n_in: usize,
        loss: Loss,
        cfg: &LstmConfig,
        seed: u64,
    ) -> Result<Self, ModelError> {
        if windows.is_empty() {
            return Err(ModelError::EmptyTraining);
        }
        if windows.len() != targets.len() {
            return Err(ModelError::ShapeMismatch {
                expected: windows.len(),
                got: targets.len(),
            });
        }
        let steps = windows[0].len() / n_in.max(1);
        if steps == 0 || windows.iter().any(|w| w.len() != steps * n_in) {
            return Err(ModelError::ShapeMismatch {
                expected: steps.max(1) * n_in,
                got: windows.iter().map(Vec::len).find(|&l| l != steps * n_in).unwrap_or(0),
            });
        }
        let mut model = Lstm::new(n_in, cfg.hidden, cfg.layers, loss, seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5DEE_CE66_D1CE_4E5B);
        let lr = cfg.learning_rate.unwrap_or(cfg.optimizer.default_lr());
        let n_p = model.params.len();
        let (mut m1, mut m2) = (vec![0.0; n_p], vec![0.0; n_p]);
        let (beta1, beta2, eps, momentum) = (0.9f64, 0.999f64, 1e-8, 0.9);
        let mut step = 0i32;
        let mut order: Vec<usize> = (0..windows.len()).collect();
        let all: Vec<&[f64]> = windows.iter().map(Vec::as_slice).collect();
        for _ in 0..cfg.epochs {
            order.shuffle(&mut rng);
            for chunk in order.chunks(cfg.batch_size.max(1)) {
                let bw: Vec<&[f64]> = chunk.iter().map(|&i| all[i]).collect();
                let bt: Vec<f64> = chunk.iter().map(|&i| targets[i]).collect();
                let (_, mut g) = model.loss_and_grad(&model.params, &bw, &bt);
                let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > cfg.clip_norm {
                    g.iter_mut().for_each(|v| *v *= cfg.clip_norm / norm);
                }
                step += 1;
                match cfg.optimizer {
                    Optimizer::Adam => {
                        let c1 = 1.0 - beta1.powi(step);
                        let c2 = 1.0 - beta2.powi(step);
                        for k in 0..n_p {
                            m1[k] = beta1 * m1[k] + (1.0 - beta1) * g[k];
                            m2[k] = beta2 * m2[k] + (1.0 - beta2) * g[k] * g[k];
                            model.params[k] -= lr * (m1[k] / c1) / ((m2[k] / c2).sqrt() + eps);
                        }
                    }
                    Optimizer::SgdMomentum => {
                        for k in 0..n_p {
                            m1[k] = momentum * m1[k] + g[k];
                            model.params[k] -= lr * m1[k];
                        }
                    }
                }
            }
            let (epoch_loss, _) = model.loss_and_grad(&model.params, &all, targets);
            if !epoch_loss.is_finite() {
                return Err(ModelError::NonConvergence("LSTM loss diverged".into()));
            }
            model.loss_history.push(epoch_loss);
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (Vec<Vec<f64>>, Vec<f64>) {
        let w = vec![
            vec![0.5, -0.2, 0.1, 0.9, -0.7, 0.3],
            vec![-0.4, 0.8, 0.6, -0.1, 0.2, 0.0],
        ];
        (w, vec![0.7, -0.3])
    }

    fn check_gradient(loss: Loss, targets: &[f64]) {
        let (w, _) = toy();
        let m = Lstm::new(2, 3, 2, loss, 7).unwrap();
        let refs: Vec<&[f64]> = w.iter().map(Vec::as_slice).collect();
        let (_, g) = m.loss_and_grad(&m.params, &refs, targets);
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        for k in 0..m.params.len() {
            let mut p = m.params.clone();
            p[k] += h;
            let (lp, _) = m.loss_and_grad(&p, &refs, targets);
            p[k] -= 2.0 * h;
            let (lm, _) = m.loss_and_grad(&p, &refs, targets);
            let fd = (lp - lm) / (2.0 * h);
            let rel = (fd - g[k]).abs() / fd.abs().max(g[k].abs()).max(1e-6);
            worst = worst.max(rel);
        }
        assert!(worst < 1e-4, "worst relative gradient error {worst}");
    }

    #[test]
    fn gradients_match_finite_differences() {
        let (_, t) = toy();
        check_gradient(Loss::Mse, &t);
        check_gradient(Loss::Logistic, &[1.0, 0.0]);
    }

    #[test]
    fn forget_bias_initialized_to_one() {
        let m = Lstm::new(1, 4, 1, Loss::Mse, 1).unwrap();
        let (_, b) = m.layer_offsets(0);
        assert_eq!(&m.params[b + 4..b + 8], &[1.0; 4]);
        assert_eq!(m.params.len(), Lstm::n_params(1, 4, 1));
    }

    #[test]
    fn fit_is_deterministic() {
        let w: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![(i as f64 * 0.3).sin(), (i as f64 * 0.3 + 0.3).sin()])
            .collect();
        let t: Vec<f64> = (0..40).map(|i| (i as f64 * 0.3 + 0.6).sin()).collect();
        let cfg = LstmConfig {
            epochs: 3,
            ..LstmConfig::default()
        };
        let a = Lstm::fit(&w, &t, 1, Loss::Mse, &cfg, 3).unwrap();
        let b = Lstm::fit(&w, &t, 1, Loss::Mse, &cfg, 3).unwrap();
        assert_eq!(a, b);
    }
}
