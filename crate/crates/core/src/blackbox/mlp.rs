//! One-hidden-layer perceptron with logistic activations.
//!
//! Trained on the averaged cross-entropy with full-batch gradient descent
//! using Adam steps (learning rate 0.05, β = (0.9, 0.999)). Initial weights
//! are drawn uniformly in `±4·sqrt(6 / (fan_in + fan_out))` from the seeded
//! generator, biases start at zero.

use ndarray::{Array1, Array2, Axis};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::logistic::sigmoid;
use super::TrainReport;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlpParams {
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Convergence threshold on the sup-norm of the gradient.
    pub tol: f64,
    pub seed: u64,
}

impl Default for MlpParams {
    fn default() -> Self {
        Self {
            hidden: 100,
            epochs: 3000,
            learning_rate: 0.05,
            tol: 1e-5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub input_dim: usize,
    pub hidden: usize,
    /// Row-major `hidden × input_dim`.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl Mlp {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let d = self.input_dim;
        let mut out = self.b2;
        for h in 0..self.hidden {
            let row = &self.w1[h * d..(h + 1) * d];
            let a = self.b1[h] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
            out += self.w2[h] * sigmoid(a);
        }
        sigmoid(out)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let ok = self.w1.len() == self.hidden * self.input_dim
            && self.b1.len() == self.hidden
            && self.w2.len() == self.hidden
            && self
                .w1
                .iter()
                .chain(&self.b1)
                .chain(&self.w2)
                .chain([&self.b2])
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidModel(
                "inconsistent perceptron parameter arrays".into(),
            ))
        }
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        self.t += 1;
        let c1 = 1.0 - B1.powi(self.t);
        let c2 = 1.0 - B2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = B1 * self.m[i] + (1.0 - B1) * grad[i];
            self.v[i] = B2 * self.v[i] + (1.0 - B2) * grad[i] * grad[i];
            params[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + 1e-8);
        }
    }
}

pub fn train(data: &Dataset, params: &MlpParams) -> Result<(Mlp, TrainReport)> {
    if params.hidden == 0 || params.epochs == 0 {
        return Err(Error::InvalidConfig(
            "hidden and epochs must be at least 1".into(),
        ));
    }
    data.require_both_classes()?;
    let d = data.dim();
    let h = params.hidden;
    let mut rng = rng::seeded(params.seed);
    let a1 = 4.0 * (6.0 / (d + h) as f64).sqrt();
    let a2 = 4.0 * (6.0 / (h + 1) as f64).sqrt();

    // flat parameter vector: w1 | b1 | w2 | b2
    let n_params = h * d + h + h + 1;
    let mut theta = vec![0.0; n_params];
    for v in &mut theta[..h * d] {
        *v = rng.random_range(-a1..a1);
    }
    for v in &mut theta[h * d + h..h * d + 2 * h] {
        *v = rng.random_range(-a2..a2);
    }

    let x = data.features();
    let y = data.labels();
    let mut adam = Adam::new(n_params);
    let mut converged = false;
    let mut steps = 0;
    for _ in 0..params.epochs {
        let (grad, _) = gradient(&theta, x, y, d, h);
        if grad.iter().fold(0.0f64, |a, v| a.max(v.abs())) <= params.tol {
            converged = true;
            break;
        }
        adam.step(&mut theta, &grad, params.learning_rate);
        steps += 1;
    }
    let loss = gradient(&theta, x, y, d, h).1;
    let model = Mlp {
        input_dim: d,
        hidden: h,
        w1: theta[..h * d].to_vec(),
        b1: theta[h * d..h * d + h].to_vec(),
        w2: theta[h * d + h..h * d + 2 * h].to_vec(),
        b2: theta[n_params - 1],
    };
    Ok((
        model,
        TrainReport {
            iterations: steps,
            loss,
            converged,
        },
    ))
}

/// Averaged cross-entropy gradient and loss.
fn gradient(
    theta: &[f64],
    x: &Array2<f64>,
    y: &Array1<f64>,
    d: usize,
    h: usize,
) -> (Vec<f64>, f64) {
    let m = x.nrows() as f64;
    let w1 = ndarray::ArrayView2::from_shape((h, d), &theta[..h * d]).unwrap();
    let b1 = ndarray::ArrayView1::from(&theta[h * d..h * d + h]);
    let w2 = ndarray::ArrayView1::from(&theta[h * d + h..h * d + 2 * h]);
    let b2 = theta[h * d + 2 * h];

    let hidden = (x.dot(&w1.t()) + b1).mapv(sigmoid); // m × h
    let logits = hidden.dot(&w2) + b2;
    let out = logits.mapv(sigmoid);
    let loss = logits
        .iter()
        .zip(y)
        .map(|(t, yi)| {
            let sp = if *t > 0.0 {
                t + (-t).exp().ln_1p()
            } else {
                t.exp().ln_1p()
            };
            sp - yi * t
        })
        .sum::<f64>()
        / m;

    let delta_out = (&out - y) / m; // m
    let g_w2 = hidden.t().dot(&delta_out);
    let g_b2 = delta_out.sum();
    let mut delta_hidden = delta_out.insert_axis(Axis(1)).dot(&w2.insert_axis(Axis(0))); // m × h
    delta_hidden *= &hidden.mapv(|s| s * (1.0 - s));
    let g_w1 = delta_hidden.t().dot(x); // h × d
    let g_b1 = delta_hidden.sum_axis(Axis(0));

    let mut g = Vec::with_capacity(h * d + 2 * h + 1);
    g.extend(g_w1.iter());
    g.extend(g_b1.iter());
    g.extend(g_w2.iter());
    g.push(g_b2);
    (g, loss)
}
