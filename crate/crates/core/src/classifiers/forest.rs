//! Random forest: bootstrap-weighted trees with per-split feature sampling.
//! Tree `t` draws its split randomness from stream `t` of the seed, so a
//! one-tree forest without bootstrap reproduces the plain decision tree.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{class_weights, normalize, Tree, TreeParams};
use super::{ClassifierError, ClassifierSpec};
use crate::dataset::Matrix;
use crate::flow::LabelClass;
use crate::rng;

const BOOTSTRAP_SALT: u64 = 0xb007_57a9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
}

impl Forest {
    pub fn fit(spec: &ClassifierSpec, x: &Matrix, y: &[LabelClass], seed: u64) -> Result<Self, ClassifierError> {
        let p = TreeParams::from_spec(spec, x.cols())?;
        let n_trees = spec.int("n_estimators").max(1) as u64;
        let bootstrap = spec.flag("bootstrap");
        let base = class_weights(y, p.balanced);
        let boot_seed = rng::derive(seed, BOOTSTRAP_SALT);
        let trees = (0..n_trees)
            .into_par_iter()
            .map(|t| {
                let mut w = base.clone();
                if bootstrap {
                    let mut draws = vec![0u32; y.len()];
                    let mut r = rng::stream(boot_seed, t);
                    for _ in 0..y.len() {
                        draws[r.gen_range(0..y.len())] += 1;
                    }
                    for (wi, d) in w.iter_mut().zip(draws) {
                        *wi *= d as f64;
                    }
                }
                Tree::fit(x, y, &w, &p, &mut rng::stream(seed, t))
            })
            .collect();
        Ok(Forest { trees })
    }

    /// Majority vote of the trees; a tied vote goes to Normal.
    pub fn predict(&self, x: &[f64]) -> LabelClass {
        let bot = self.trees.iter().filter(|t| t.predict(x).is_botnet()).count();
        if 2 * bot > self.trees.len() {
            LabelClass::Botnet
        } else {
            LabelClass::Normal
        }
    }

    /// Mean of per-tree normalized importances over trees that split.
    pub fn importances(&self) -> Option<Vec<f64>> {
        let per: Vec<Vec<f64>> = self.trees.iter().filter_map(Tree::importances).collect();
        let first = per.first()?;
        let mut acc = vec![0.0; first.len()];
        for v in &per {
            for (a, b) in acc.iter_mut().zip(v) {
                *a += b;
            }
        }
        normalize(&acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::{fit, ClassifierKind, ModelParams, ParamValue};
    use crate::dataset::LabeledDataset;

    fn noisy(n: usize, seed: u64) -> LabeledDataset {
        let mut r = rng::stream(seed, 99);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let a: f64 = r.gen_range(0.0..1.0);
            let b: f64 = r.gen_range(0.0..1.0);
            let c: f64 = r.gen_range(0.0..1.0);
            rows.push(vec![a, b, c]);
            y.push(LabelClass::from_index((a + 0.3 * b > 0.6) as usize));
        }
        LabeledDataset::from_rows(&rows, y, "noisy").unwrap()
    }

    #[test]
    fn same_seed_same_forest() {
        let ds = noisy(150, 1);
        let spec = ClassifierSpec::default_for(ClassifierKind::RandomForest)
            .with("n_estimators", ParamValue::Int(12))
            .unwrap();
        let a = fit(&spec, &ds, 5).unwrap();
        let b = fit(&spec, &ds, 5).unwrap();
        assert_eq!(a.params, b.params);
        let c = fit(&spec, &ds, 6).unwrap();
        assert_ne!(a.params, c.params);
    }

    #[test]
    fn importances_sum_to_one() {
        let ds = noisy(200, 2);
        let m = fit(&ClassifierSpec::default_for(ClassifierKind::RandomForest), &ds, 3).unwrap();
        let ModelParams::RandomForest(f) = &m.params else { unreachable!() };
        let imp = f.importances().unwrap();
        assert!((imp.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(imp[0] > imp[2]);
    }
}
