use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{FeatureVector, Transition, FEATURE_LEN};
use crate::world::Action;

const OUTPUTS: usize = Action::COUNT;

/// Feedforward Q-function: features → one ReLU hidden layer → one value per action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QFunction {
    hidden: usize,
    /// `hidden × FEATURE_LEN`, row-major.
    w1: Vec<f64>,
    b1: Vec<f64>,
    /// `OUTPUTS × hidden`, row-major.
    w2: Vec<f64>,
    b2: Vec<f64>,
}

struct Activations {
    pre: Vec<f64>,
    hidden: Vec<f64>,
    out: [f64; OUTPUTS],
}

impl QFunction {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            hidden,
            w1: vec![0.0; hidden * FEATURE_LEN],
            b1: vec![0.0; hidden],
            w2: vec![0.0; OUTPUTS * hidden],
            b2: vec![0.0; OUTPUTS],
        }
    }

    /// Uniform fan-in scaled initialisation; biases start at zero.
    pub fn random<R: Rng + ?Sized>(hidden: usize, rng: &mut R) -> Self {
        let mut q = Self::zeros(hidden);
        let s1 = 1.0 / (FEATURE_LEN as f64).sqrt();
        let s2 = 1.0 / (hidden as f64).sqrt();
        q.w1.iter_mut().for_each(|w| *w = rng.gen_range(-s1..s1));
        q.w2.iter_mut().for_each(|w| *w = rng.gen_range(-s2..s2));
        q
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn num_params(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    /// Parameters flattened as `w1, b1, w2, b2`.
    pub fn params(&self) -> Vec<f64> {
        [&self.w1[..], &self.b1, &self.w2, &self.b2].concat()
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<(), String> {
        if params.len() != self.num_params() {
            return Err(format!("expected {} parameters, got {}", self.num_params(), params.len()));
        }
        let mut rest = params;
        for dst in [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2] {
            let (head, tail) = rest.split_at(dst.len());
            dst.copy_from_slice(head);
            rest = tail;
        }
        Ok(())
    }

    fn forward(&self, x: &FeatureVector) -> Activations {
        let x = x.as_slice();
        let mut pre = self.b1.clone();
        for (h, p) in pre.iter_mut().enumerate() {
            let row = &self.w1[h * FEATURE_LEN..(h + 1) * FEATURE_LEN];
            *p += row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>();
        }
        let hidden: Vec<f64> = pre.iter().map(|v| v.max(0.0)).collect();
        let mut out = [0.0; OUTPUTS];
        for (a, o) in out.iter_mut().enumerate() {
            let row = &self.w2[a * self.hidden..(a + 1) * self.hidden];
            *o = self.b2[a] + row.iter().zip(&hidden).map(|(w, h)| w * h).sum::<f64>();
        }
        Activations { pre, hidden, out }
    }

    pub fn q_values(&self, features: &FeatureVector) -> [f64; OUTPUTS] {
        self.forward(features).out
    }

    /// Mean squared TD error over `batch` and its gradient with respect to
    /// [`QFunction::params`]. Targets come from `target` and are held fixed.
    pub fn td_loss_and_grad(&self, target: &QFunction, batch: &[Transition], gamma: f64) -> (f64, Vec<f64>) {
        let n = batch.len() as f64;
        let (mut gw1, mut gb1) = (vec![0.0; self.w1.len()], vec![0.0; self.b1.len()]);
        let (mut gw2, mut gb2) = (vec![0.0; self.w2.len()], vec![0.0; self.b2.len()]);
        let mut loss = 0.0;
        for t in batch {
            let bootstrap = if t.done {
                0.0
            } else {
                target.q_values(&t.next_features).into_iter().fold(f64::NEG_INFINITY, f64::max)
            };
            let y = t.reward + gamma * bootstrap;
            let act = self.forward(&t.features);
            let a = t.action.index();
            let delta = act.out[a] - y;
            loss += delta * delta / n;
            let d_out = 2.0 * delta / n;
            gb2[a] += d_out;
            let row = a * self.hidden;
            for h in 0..self.hidden {
                gw2[row + h] += d_out * act.hidden[h];
                if act.pre[h] > 0.0 {
                    let d_h = d_out * self.w2[row + h];
                    gb1[h] += d_h;
                    for (i, xi) in t.features.as_slice().iter().enumerate() {
                        gw1[h * FEATURE_LEN + i] += d_h * xi;
                    }
                }
            }
        }
        (loss, [gw1, gb1, gw2, gb2].concat())
    }

    fn apply_gradient(&mut self, grad: &[f64], lr: f64) {
        let mut offset = 0;
        for dst in [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2] {
            for (p, g) in dst.iter_mut().zip(&grad[offset..]) {
                *p -= lr * g;
            }
            offset += dst.len();
        }
    }
}

/// One SGD step on the squared TD error. Returns the batch loss measured
/// before the update.
pub fn learn_step(qf: &mut QFunction, target: &QFunction, batch: &[Transition], gamma: f64, lr: f64) -> f64 {
    assert!(!batch.is_empty(), "learn_step needs a non-empty batch");
    let (loss, grad) = qf.td_loss_and_grad(target, batch, gamma);
    qf.apply_gradient(&grad, lr);
    loss
}
