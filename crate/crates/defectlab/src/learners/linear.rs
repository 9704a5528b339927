//! Linear models: logistic regression and a primal linear SVM, both fit by
//! full-batch (sub)gradient descent from a zero start, so fitting is
//! deterministic without any RNG.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl LinearModel {
    #[must_use]
    pub fn linear(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.intercept
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GdParams {
    pub rate: f64,
    pub epochs: usize,
    /// L2 penalty on the weights (the intercept is never penalized).
    pub lambda: f64,
}

impl Default for GdParams {
    fn default() -> Self {
        GdParams {
            rate: 0.1,
            epochs: 500,
            lambda: 1e-4,
        }
    }
}

#[must_use]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean log-loss with L2 penalty, plus its exact gradient.
/// Exposed so the analytic gradient can be checked against finite
/// differences.
#[must_use]
pub fn logistic_loss_grad(
    weights: &[f64],
    intercept: f64,
    x: &[Vec<f64>],
    y: &[bool],
    lambda: f64,
) -> (f64, Vec<f64>, f64) {
    let n = x.len() as f64;
    let mut loss = 0.0;
    let mut grad_w = vec![0.0; weights.len()];
    let mut grad_b = 0.0;
    for (row, &label) in x.iter().zip(y) {
        let z: f64 = weights.iter().zip(row).map(|(w, v)| w * v).sum::<f64>() + intercept;
        let t = if label { 1.0 } else { 0.0 };
        // log(1 + e^-|z|) form keeps the loss finite for large |z|.
        loss += z.max(0.0) - z * t + (-z.abs()).exp().ln_1p();
        let err = sigmoid(z) - t;
        for (g, v) in grad_w.iter_mut().zip(row) {
            *g += err * v;
        }
        grad_b += err;
    }
    loss /= n;
    grad_b /= n;
    for (g, w) in grad_w.iter_mut().zip(weights) {
        *g = *g / n + lambda * w;
    }
    loss += 0.5 * lambda * weights.iter().map(|w| w * w).sum::<f64>();
    (loss, grad_w, grad_b)
}

pub fn fit_logistic(x: &[Vec<f64>], y: &[bool], p: &GdParams) -> LinearModel {
    let mut model = LinearModel {
        weights: vec![0.0; x[0].len()],
        intercept: 0.0,
    };
    for _ in 0..p.epochs {
        let (_, gw, gb) = logistic_loss_grad(&model.weights, model.intercept, x, y, p.lambda);
        for (w, g) in model.weights.iter_mut().zip(&gw) {
            *w -= p.rate * g;
        }
        model.intercept -= p.rate * gb;
    }
    model
}

/// Objective: lambda/2 ||w||^2 + mean hinge loss, labels mapped to +/-1.
pub fn fit_svm(x: &[Vec<f64>], y: &[bool], p: &GdParams) -> LinearModel {
    let n = x.len() as f64;
    let mut model = LinearModel {
        weights: vec![0.0; x[0].len()],
        intercept: 0.0,
    };
    for _ in 0..p.epochs {
        let mut gw: Vec<f64> = model.weights.iter().map(|w| p.lambda * w).collect();
        let mut gb = 0.0;
        for (row, &label) in x.iter().zip(y) {
            let sign = if label { 1.0 } else { -1.0 };
            if sign * model.linear(row) < 1.0 {
                for (g, v) in gw.iter_mut().zip(row) {
                    *g -= sign * v / n;
                }
                gb -= sign / n;
            }
        }
        for (w, g) in model.weights.iter_mut().zip(&gw) {
            *w -= p.rate * g;
        }
        model.intercept -= p.rate * gb;
    }
    model
}
