//! Gaussian naive Bayes.
//!
//! Moments are accumulated over sorted values so that the fitted state does
//! not depend on training-row order.

use serde::{Deserialize, Serialize};

use super::{ClassifierError, ClassifierSpec};
use crate::dataset::Matrix;
use crate::flow::LabelClass;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    /// Indexed by class then feature.
    pub means: [Vec<f64>; 2],
    pub variances: [Vec<f64>; 2],
    pub priors: [f64; 2],
    pub epsilon: f64,
}

fn mean_var(mut v: Vec<f64>) -> (f64, f64) {
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let mut dev: Vec<f64> = v.iter().map(|x| (x - mean) * (x - mean)).collect();
    dev.sort_by(f64::total_cmp);
    (mean, dev.iter().sum::<f64>() / n)
}

impl GaussianNb {
    pub fn fit(spec: &ClassifierSpec, x: &Matrix, y: &[LabelClass]) -> Result<Self, ClassifierError> {
        let d = x.cols();
        let smoothing = spec.float("var_smoothing");
        let max_var = (0..d)
            .map(|j| mean_var(x.iter_rows().map(|r| r[j]).collect()).1)
            .fold(0.0, f64::max);
        let epsilon = smoothing * max_var;
        let mut means = [vec![0.0; d], vec![0.0; d]];
        let mut variances = [vec![0.0; d], vec![0.0; d]];
        let mut priors = [0.0; 2];
        for c in 0..2 {
            let rows: Vec<&[f64]> = x.iter_rows().zip(y).filter(|(_, l)| l.index() == c).map(|(r, _)| r).collect();
            priors[c] = rows.len() as f64 / y.len() as f64;
            for j in 0..d {
                let (m, v) = mean_var(rows.iter().map(|r| r[j]).collect());
                means[c][j] = m;
                variances[c][j] = v + epsilon;
            }
        }
        // a constant training set leaves nothing to smooth with
        for v in variances.iter_mut().flatten() {
            if *v <= 0.0 {
                *v = f64::MIN_POSITIVE.max(smoothing);
            }
        }
        Ok(GaussianNb {
            means,
            variances,
            priors,
            epsilon,
        })
    }

    /// Joint log-likelihood `log P(c) + sum_j log N(x_j; mu_cj, var_cj)`.
    pub fn joint_log_likelihood(&self, x: &[f64]) -> [f64; 2] {
        let mut out = [0.0; 2];
        for (c, o) in out.iter_mut().enumerate() {
            let mut s = self.priors[c].ln();
            for (j, xj) in x.iter().enumerate() {
                let var = self.variances[c][j];
                let m = self.means[c][j];
                s += -0.5 * (2.0 * std::f64::consts::PI * var).ln() - (xj - m) * (xj - m) / (2.0 * var);
            }
            *o = s;
        }
        out
    }

    pub fn predict(&self, x: &[f64]) -> LabelClass {
        let l = self.joint_log_likelihood(x);
        if l[1] > l[0] {
            LabelClass::Botnet
        } else {
            LabelClass::Normal
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::{fit, ClassifierKind, ModelParams};
    use crate::dataset::LabeledDataset;

    #[test]
    fn two_points_give_their_means() {
        let ds = LabeledDataset::from_rows(&[vec![0.0], vec![10.0]], vec![LabelClass::Normal, LabelClass::Botnet], "t")
            .unwrap();
        let m = fit(&ClassifierSpec::default_for(ClassifierKind::GaussianNB), &ds, 0).unwrap();
        let ModelParams::GaussianNB(g) = &m.params else { unreachable!() };
        assert_eq!(g.means[0][0], 0.0);
        assert_eq!(g.means[1][0], 10.0);
        assert!(g.variances[0][0] > 0.0 && g.variances[1][0] > 0.0);
        assert_eq!(m.predict(&[1.0]).unwrap(), LabelClass::Normal);
        assert_eq!(m.predict(&[9.0]).unwrap(), LabelClass::Botnet);
    }

    #[test]
    fn row_order_does_not_matter() {
        let rows = vec![vec![0.1, 3.0], vec![0.7, 1.0], vec![0.3, 2.5], vec![5.0, 0.2], vec![4.1, 0.9], vec![6.3, 0.1]];
        use LabelClass::*;
        let y = vec![Normal, Normal, Normal, Botnet, Botnet, Botnet];
        let a = LabeledDataset::from_rows(&rows, y.clone(), "t").unwrap();
        let perm = [5, 2, 0, 4, 1, 3];
        let b = a.subset(&perm);
        let spec = ClassifierSpec::default_for(ClassifierKind::GaussianNB);
        assert_eq!(fit(&spec, &a, 0).unwrap().params, fit(&spec, &b, 0).unwrap().params);
    }
}
