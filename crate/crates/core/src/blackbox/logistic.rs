//! L1-regularized logistic regression trained by proximal gradient descent.
//!
//! Minimizes the averaged log-loss plus `l1 · ‖w‖₁` (the bias is not
//! penalized) with full-batch accelerated proximal gradient (FISTA with
//! adaptive restart): a gradient step of length `1 / L` from an
//! extrapolated point, then soft-thresholding. `L` is the Lipschitz
//! constant of the averaged log-loss gradient, `λ_max(X̃ᵀX̃) / (4m)` with
//! `X̃ = [X 1]`, estimated by power iteration. Weights start at zero, so
//! training is fully deterministic.

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::TrainReport;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticParams {
    pub l1: f64,
    pub max_iter: usize,
    /// Convergence threshold on the sup-norm of the gradient mapping.
    pub tol: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self {
            l1: 0.0,
            max_iter: 20_000,
            tol: 1e-7,
        }
    }
}

/// `σ(w · x + b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

pub(crate) fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^t)` without overflow.
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

impl LogisticModel {
    pub fn new(weights: Vec<f64>, bias: f64) -> Self {
        Self { weights, bias }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn logit(&self, x: &[f64]) -> f64 {
        self.bias + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        sigmoid(self.logit(x))
    }

    /// Indices with `|wᵢ| > 1e-9`.
    pub fn support(&self) -> Vec<usize> {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, w)| w.abs() > 1e-9)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Largest eigenvalue of `X̃ᵀX̃ / m` by power iteration from the all-ones vector.
fn lipschitz(data: &Dataset) -> f64 {
    let x = data.features();
    let (m, d) = x.dim();
    let mut v = Array1::<f64>::ones(d + 1);
    let mut lambda = 0.0;
    for _ in 0..200 {
        let xv = x.dot(&v.slice(ndarray::s![..d])) + v[d];
        let mut next = Array1::zeros(d + 1);
        next.slice_mut(ndarray::s![..d]).assign(&x.t().dot(&xv));
        next[d] = xv.sum();
        next /= m as f64;
        let norm = next.dot(&next).sqrt();
        if norm == 0.0 {
            break;
        }
        let new_lambda = v.dot(&next) / v.dot(&v);
        v = next / norm;
        if (new_lambda - lambda).abs() <= 1e-10 * new_lambda {
            lambda = new_lambda;
            break;
        }
        lambda = new_lambda;
    }
    // power iteration approaches from below
    1.05 * lambda / 4.0
}

fn objective(data: &Dataset, w: &Array1<f64>, b: f64, l1: f64) -> f64 {
    let logits = data.features().dot(w) + b;
    let m = data.len() as f64;
    let loss: f64 = logits
        .iter()
        .zip(data.labels())
        .map(|(t, y)| softplus(*t) - y * t)
        .sum::<f64>()
        / m;
    loss + l1 * w.iter().map(|v| v.abs()).sum::<f64>()
}

pub fn train(data: &Dataset, params: &LogisticParams) -> Result<(LogisticModel, TrainReport)> {
    if !params.l1.is_finite() || params.l1 < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "l1 must be non-negative, got {}",
            params.l1
        )));
    }
    data.require_both_classes()?;
    let x = data.features();
    let y = data.labels();
    let m = data.len() as f64;
    let step = 1.0 / lipschitz(data).max(f64::MIN_POSITIVE);
    let thresh = step * params.l1;

    // (w, b) is the last proximal iterate, (v, c) the extrapolated point
    let mut w = Array1::<f64>::zeros(data.dim());
    let mut b = 0.0;
    let mut v = w.clone();
    let mut c = b;
    let mut t = 1.0f64;
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..params.max_iter {
        iterations = it + 1;
        let logits = x.dot(&v) + c;
        let resid = logits.mapv(sigmoid) - y;
        let grad_w = x.t().dot(&resid) / m;
        let grad_b = resid.sum() / m;
        let new_w = ndarray::Zip::from(&v)
            .and(&grad_w)
            .map_collect(|vi, gi| soft_threshold(vi - step * gi, thresh));
        let new_b = c - step * grad_b;

        // sup-norm of the gradient mapping at the extrapolated point
        let mut shift: f64 = (c - new_b).abs();
        for (a, n) in v.iter().zip(&new_w) {
            shift = shift.max((a - n).abs());
        }
        if shift / step <= params.tol {
            w = new_w;
            b = new_b;
            converged = true;
            break;
        }

        // restart the momentum when it points uphill
        let uphill = (c - new_b) * (new_b - b)
            + ndarray::Zip::from(&v)
                .and(&new_w)
                .and(&w)
                .fold(0.0, |acc, vi, ni, wi| acc + (vi - ni) * (ni - wi));
        if uphill > 0.0 {
            t = 1.0;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        v = &new_w + &((&new_w - &w) * beta);
        c = new_b + beta * (new_b - b);
        w = new_w;
        b = new_b;
        t = t_next;
    }
    let loss = objective(data, &w, b, params.l1);
    let model = LogisticModel {
        weights: w.to_vec(),
        bias: b,
    };
    Ok((
        model,
        TrainReport {
            iterations,
            loss,
            converged,
        },
    ))
}

/// Averaged log-loss gradient at the all-zero model; useful to pick an `l1`
/// that switches every weight off.
pub fn gradient_at_zero(data: &Dataset) -> Vec<f64> {
    let resid = data.labels().mapv(|y| 0.5 - y);
    (data.features().t().dot(&resid) / data.len() as f64).to_vec()
}
