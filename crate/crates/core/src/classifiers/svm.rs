//! Linear SVM trained by epoch-wise stochastic subgradient descent on the
//! primal objective `0.5 |w|^2 + C * sum_i loss(y_i (w.x_i + b))`.
//!
//! The bias is not regularized. Step sizes follow Pegasos with
//! `lambda = 1 / (C n)`, and the returned iterate is the best one seen at
//! an epoch boundary, starting from `w = 0`.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{ClassifierError, ClassifierSpec};
use crate::dataset::Matrix;
use crate::flow::LabelClass;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Loss {
    Hinge,
    SquaredHinge,
}

impl Loss {
    fn value(self, margin: f64) -> f64 {
        let h = (1.0 - margin).max(0.0);
        match self {
            Loss::Hinge => h,
            Loss::SquaredHinge => h * h,
        }
    }

    /// Magnitude of the subgradient with respect to the margin.
    fn slope(self, margin: f64) -> f64 {
        match self {
            Loss::Hinge => (margin < 1.0) as u8 as f64,
            Loss::SquaredHinge => 2.0 * (1.0 - margin).max(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm {
    pub w: Vec<f64>,
    pub b: f64,
    pub c: f64,
    pub loss: Loss,
    pub epochs: usize,
}

fn label(y: LabelClass) -> f64 {
    if y.is_botnet() {
        1.0
    } else {
        -1.0
    }
}

fn dot(w: &[f64], x: &[f64]) -> f64 {
    w.iter().zip(x).map(|(a, b)| a * b).sum()
}

/// Primal objective at `(w, b)`.
pub fn objective(w: &[f64], b: f64, c: f64, loss: Loss, x: &Matrix, y: &[LabelClass]) -> f64 {
    let reg = 0.5 * dot(w, w);
    let data: f64 = x
        .iter_rows()
        .zip(y)
        .map(|(r, t)| loss.value(label(*t) * (dot(w, r) + b)))
        .sum();
    reg + c * data
}

impl LinearSvm {
    pub fn fit(spec: &ClassifierSpec, x: &Matrix, y: &[LabelClass], seed: u64) -> Result<Self, ClassifierError> {
        let c = spec.float("C");
        let tol = spec.float("tol");
        let max_epochs = spec.int("max_epochs").max(1) as usize;
        let loss = if spec.text("loss") == "hinge" {
            Loss::Hinge
        } else {
            Loss::SquaredHinge
        };
        let n = y.len();
        let d = x.cols();
        let lambda = 1.0 / (c * n as f64);
        // any minimizer has lambda/2 |w|^2 <= F(0) = 1
        let radius = (2.0 / lambda).sqrt();

        let mut w = vec![0.0; d];
        let mut b = 0.0;
        let mut best = (objective(&w, b, c, loss, x, y), w.clone(), b);
        let mut prev = best.0;
        let mut order: Vec<usize> = (0..n).collect();
        let mut r = rng::stream(seed, 0);
        let mut t = 0u64;
        let mut epochs = 0;
        for _ in 0..max_epochs {
            epochs += 1;
            order.shuffle(&mut r);
            for &i in &order {
                t += 1;
                let eta = 1.0 / (lambda * t as f64);
                let row = x.row(i);
                let yi = label(y[i]);
                let g = loss.slope(yi * (dot(&w, row) + b));
                let shrink = 1.0 - eta * lambda;
                for (wj, xj) in w.iter_mut().zip(row) {
                    *wj = shrink * *wj + eta * g * yi * xj;
                }
                b += eta * g * yi;
                let norm = dot(&w, &w).sqrt();
                if norm > radius {
                    let s = radius / norm;
                    w.iter_mut().for_each(|v| *v *= s);
                }
            }
            let j = objective(&w, b, c, loss, x, y);
            if j.is_finite() && j < best.0 {
                best = (j, w.clone(), b);
            }
            if !j.is_finite() || ((prev - j).abs() / prev.abs().max(1e-12)) < tol {
                break;
            }
            prev = j;
        }
        Ok(LinearSvm {
            w: best.1,
            b: best.2,
            c,
            loss,
            epochs,
        })
    }

    pub fn decision(&self, x: &[f64]) -> f64 {
        dot(&self.w, x) + self.b
    }

    /// `sign(w.x + b)`; zero goes to Normal.
    pub fn predict(&self, x: &[f64]) -> LabelClass {
        if self.decision(x) > 0.0 {
            LabelClass::Botnet
        } else {
            LabelClass::Normal
        }
    }
}
