//! Two-class AdaBoost over shallow trees, discrete (SAMME) and real (SAMME.R).
//!
//! Boosting stops early when a round is perfect (the learner is kept) or
//! when its weighted error reaches 0.5 (the learner is dropped).

use serde::{Deserialize, Serialize};

use super::tree::{normalize, Tree, TreeParams};
use super::{ClassifierError, ClassifierSpec};
use crate::dataset::Matrix;
use crate::flow::LabelClass;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Algorithm {
    Samme,
    SammeR,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaBoost {
    pub algorithm: Algorithm,
    pub learners: Vec<Tree>,
    /// Per-learner vote weight (all 1 for SAMME.R).
    pub alphas: Vec<f64>,
    /// Weighted training error of each kept learner.
    pub errors: Vec<f64>,
    /// Used only when no learner survived the first round.
    pub fallback: LabelClass,
}

const PROBA_FLOOR: f64 = f64::EPSILON;

fn sign(c: LabelClass) -> f64 {
    if c.is_botnet() {
        1.0
    } else {
        -1.0
    }
}

/// Real-valued vote `0.5 * (log p_botnet - log p_normal)`.
fn real_vote(t: &Tree, x: &[f64]) -> f64 {
    let p = t.proba(x);
    0.5 * (p[1].max(PROBA_FLOOR).ln() - p[0].max(PROBA_FLOOR).ln())
}

impl AdaBoost {
    pub fn fit(spec: &ClassifierSpec, x: &Matrix, y: &[LabelClass], seed: u64) -> Result<Self, ClassifierError> {
        let rounds = spec.int("n_estimators").max(1) as usize;
        let lr = spec.float("learning_rate");
        let algorithm = if spec.text("algorithm") == "SAMME" {
            Algorithm::Samme
        } else {
            Algorithm::SammeR
        };
        let seed = spec.opt_int("random_state").map_or(seed, |s| s as u64);
        let p = TreeParams::shallow(spec.int("max_depth").max(1) as usize, x.cols());
        let n = y.len();
        let mut w = vec![1.0 / n as f64; n];
        let (mut learners, mut alphas, mut errors) = (Vec::new(), Vec::new(), Vec::new());
        let mut counts = [0.0; 2];
        for c in y {
            counts[c.index()] += 1.0;
        }
        let fallback = if counts[1] > counts[0] {
            LabelClass::Botnet
        } else {
            LabelClass::Normal
        };

        for round in 0..rounds {
            let tree = Tree::fit(x, y, &w, &p, &mut rng::stream(seed, round as u64));
            let total: f64 = w.iter().sum();
            let preds: Vec<LabelClass> = x.iter_rows().map(|r| tree.predict(r)).collect();
            let err = preds.iter().zip(y).zip(&w).filter(|((p, t), _)| p != t).map(|(_, wi)| wi).sum::<f64>() / total;
            if err >= 0.5 {
                break;
            }
            if err <= 0.0 {
                learners.push(tree);
                alphas.push(1.0);
                errors.push(0.0);
                break;
            }
            match algorithm {
                Algorithm::Samme => {
                    let alpha = lr * ((1.0 - err) / err).ln();
                    for ((wi, p), t) in w.iter_mut().zip(&preds).zip(y) {
                        if p != t {
                            *wi *= alpha.exp();
                        }
                    }
                    alphas.push(alpha);
                }
                Algorithm::SammeR => {
                    for (i, wi) in w.iter_mut().enumerate() {
                        let h = real_vote(&tree, x.row(i));
                        *wi *= (-lr * sign(y[i]) * h).exp();
                    }
                    alphas.push(1.0);
                }
            }
            learners.push(tree);
            errors.push(err);
            let s: f64 = w.iter().sum();
            if !(s.is_finite() && s > 0.0) {
                break;
            }
            for wi in w.iter_mut() {
                *wi /= s;
            }
        }
        Ok(AdaBoost {
            algorithm,
            learners,
            alphas,
            errors,
            fallback,
        })
    }

    pub fn decision(&self, x: &[f64]) -> f64 {
        self.learners
            .iter()
            .zip(&self.alphas)
            .map(|(t, a)| match self.algorithm {
                Algorithm::Samme => a * sign(t.predict(x)),
                Algorithm::SammeR => real_vote(t, x),
            })
            .sum()
    }

    /// Sign of the weighted vote; zero goes to Normal.
    pub fn predict(&self, x: &[f64]) -> LabelClass {
        if self.learners.is_empty() {
            return self.fallback;
        }
        if self.decision(x) > 0.0 {
            LabelClass::Botnet
        } else {
            LabelClass::Normal
        }
    }

    pub fn importances(&self) -> Option<Vec<f64>> {
        let mut acc: Option<Vec<f64>> = None;
        for (t, a) in self.learners.iter().zip(&self.alphas) {
            if let Some(imp) = t.importances() {
                let acc = acc.get_or_insert_with(|| vec![0.0; imp.len()]);
                for (s, v) in acc.iter_mut().zip(imp) {
                    *s += a * v;
                }
            }
        }
        normalize(&acc?)
    }
}
