//! The six classifier families behind one fit/predict contract.

pub mod adaboost;
pub mod codec;
pub mod forest;
pub mod gnb;
pub mod knn;
pub mod params;
pub mod svm;
pub mod tree;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{LabeledDataset, Matrix};
use crate::flow::LabelClass;

pub use codec::{deserialize_model, serialize_model, CodecError, FORMAT_VERSION};
pub use params::{schema, ClassifierSpec, Domain, ParamSpec, ParamValue};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClassifierKind {
    GaussianNB,
    DecisionTree,
    RandomForest,
    AdaBoost,
    LinearSVM,
    KNN,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 6] = [
        ClassifierKind::GaussianNB,
        ClassifierKind::DecisionTree,
        ClassifierKind::RandomForest,
        ClassifierKind::AdaBoost,
        ClassifierKind::LinearSVM,
        ClassifierKind::KNN,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::GaussianNB => "GaussianNB",
            ClassifierKind::DecisionTree => "DecisionTree",
            ClassifierKind::RandomForest => "RandomForest",
            ClassifierKind::AdaBoost => "AdaBoost",
            ClassifierKind::LinearSVM => "LinearSVM",
            ClassifierKind::KNN => "KNN",
        }
    }

    pub fn supports_importances(self) -> bool {
        matches!(
            self,
            ClassifierKind::DecisionTree | ClassifierKind::RandomForest | ClassifierKind::AdaBoost
        )
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassifierKind {
    type Err = ClassifierError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let k = s.to_ascii_lowercase().replace(['-', '_', ' '], "");
        Ok(match k.as_str() {
            "gnb" | "gaussiannb" | "naivebayes" | "nb" => ClassifierKind::GaussianNB,
            "dt" | "tree" | "decisiontree" => ClassifierKind::DecisionTree,
            "rf" | "forest" | "randomforest" => ClassifierKind::RandomForest,
            "ada" | "adaboost" => ClassifierKind::AdaBoost,
            "svm" | "linearsvm" | "linearsvc" => ClassifierKind::LinearSVM,
            "knn" | "kneighbors" => ClassifierKind::KNN,
            _ => return Err(ClassifierError::UnknownKind(s.to_string())),
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassifierError {
    #[error("invalid hyperparameter {name}: {reason}")]
    InvalidHyperparameter { name: String, reason: String },
    #[error("training data holds a single class")]
    SingleClassDataset,
    #[error("training data is empty")]
    EmptyDataset,
    #[error("expected {expected} features, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("input contains a non-finite value")]
    NonFiniteInput,
    #[error("{0} does not define feature importances")]
    UnsupportedKind(ClassifierKind),
    #[error("importances are undefined: the model never split")]
    ImportancesUndefined,
    #[error("impurity of an empty node")]
    EmptyNode,
    #[error("unknown classifier kind {0:?}")]
    UnknownKind(String),
}

impl ClassifierError {
    pub(crate) fn invalid(name: &str, reason: impl Into<String>) -> Self {
        ClassifierError::InvalidHyperparameter {
            name: name.to_string(),
            reason: reason.into(),
        }
    }
}

/// Fitted state for each kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModelParams {
    GaussianNB(gnb::GaussianNb),
    DecisionTree(tree::Tree),
    RandomForest(forest::Forest),
    AdaBoost(adaboost::AdaBoost),
    LinearSVM(svm::LinearSvm),
    KNN(knn::Knn),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub spec: ClassifierSpec,
    pub params: ModelParams,
    pub feature_names: Vec<String>,
    pub trained_on: String,
    /// Wall time spent in training, seconds.
    pub fit_time: f64,
}

/// Trains `spec` on `ds`. Deterministic in `(spec, ds, seed)`.
pub fn fit(spec: &ClassifierSpec, ds: &LabeledDataset, seed: u64) -> Result<TrainedModel, ClassifierError> {
    spec.validate()?;
    if ds.is_empty() {
        return Err(ClassifierError::EmptyDataset);
    }
    let [n, b] = ds.class_counts();
    if n == 0 || b == 0 {
        return Err(ClassifierError::SingleClassDataset);
    }
    let started = Instant::now();
    let params = match spec.kind {
        ClassifierKind::GaussianNB => ModelParams::GaussianNB(gnb::GaussianNb::fit(spec, &ds.x, &ds.y)?),
        ClassifierKind::DecisionTree => {
            let p = tree::TreeParams::from_spec(spec, ds.n_features())?;
            let w = tree::class_weights(&ds.y, p.balanced);
            let mut r = crate::rng::stream(seed, 0);
            ModelParams::DecisionTree(tree::Tree::fit(&ds.x, &ds.y, &w, &p, &mut r))
        }
        ClassifierKind::RandomForest => ModelParams::RandomForest(forest::Forest::fit(spec, &ds.x, &ds.y, seed)?),
        ClassifierKind::AdaBoost => ModelParams::AdaBoost(adaboost::AdaBoost::fit(spec, &ds.x, &ds.y, seed)?),
        ClassifierKind::LinearSVM => ModelParams::LinearSVM(svm::LinearSvm::fit(spec, &ds.x, &ds.y, seed)?),
        ClassifierKind::KNN => ModelParams::KNN(knn::Knn::fit(spec, &ds.x, &ds.y)?),
    };
    let fit_time = started.elapsed().as_secs_f64();
    Ok(TrainedModel {
        spec: spec.clone(),
        params,
        feature_names: ds.feature_names.clone(),
        trained_on: ds.descriptor(),
        fit_time,
    })
}

impl TrainedModel {
    pub fn kind(&self) -> ClassifierKind {
        self.spec.kind
    }

    fn check(&self, x: &[f64]) -> Result<(), ClassifierError> {
        if x.len() != self.feature_names.len() {
            return Err(ClassifierError::DimensionMismatch {
                expected: self.feature_names.len(),
                found: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(ClassifierError::NonFiniteInput);
        }
        Ok(())
    }

    fn predict_unchecked(&self, x: &[f64]) -> LabelClass {
        match &self.params {
            ModelParams::GaussianNB(m) => m.predict(x),
            ModelParams::DecisionTree(m) => m.predict(x),
            ModelParams::RandomForest(m) => m.predict(x),
            ModelParams::AdaBoost(m) => m.predict(x),
            ModelParams::LinearSVM(m) => m.predict(x),
            ModelParams::KNN(m) => m.predict(x),
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<LabelClass, ClassifierError> {
        self.check(x)?;
        Ok(self.predict_unchecked(x))
    }

    pub fn predict_matrix(&self, x: &Matrix) -> Result<Vec<LabelClass>, ClassifierError> {
        x.iter_rows().map(|r| self.predict(r)).collect()
    }
}

pub fn predict(model: &TrainedModel, x: &[f64]) -> Result<LabelClass, ClassifierError> {
    model.predict(x)
}

/// Normalized importances keyed by feature name.
pub fn feature_importances(model: &TrainedModel) -> Result<BTreeMap<String, f64>, ClassifierError> {
    let raw = match &model.params {
        ModelParams::DecisionTree(t) => t.importances(),
        ModelParams::RandomForest(f) => f.importances(),
        ModelParams::AdaBoost(a) => a.importances(),
        _ => return Err(ClassifierError::UnsupportedKind(model.kind())),
    };
    let raw = raw.ok_or(ClassifierError::ImportancesUndefined)?;
    Ok(model.feature_names.iter().cloned().zip(raw).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Criterion {
    Gini,
    Entropy,
}

impl FromStr for Criterion {
    type Err = ClassifierError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gini" => Ok(Criterion::Gini),
            "entropy" => Ok(Criterion::Entropy),
            _ => Err(ClassifierError::invalid("criterion", s)),
        }
    }
}

/// Node impurity from (possibly weighted) class counts.
pub fn impurity(counts: &[f64], criterion: Criterion) -> Result<f64, ClassifierError> {
    let total: f64 = counts.iter().sum();
    if total <= 0.0 || counts.iter().any(|c| *c < 0.0) {
        return Err(ClassifierError::EmptyNode);
    }
    Ok(impurity_of(counts, total, criterion))
}

pub(crate) fn impurity_of(counts: &[f64], total: f64, criterion: Criterion) -> f64 {
    match criterion {
        Criterion::Gini => 1.0 - counts.iter().map(|c| (c / total) * (c / total)).sum::<f64>(),
        Criterion::Entropy => -counts
            .iter()
            .filter(|c| **c > 0.0)
            .map(|c| {
                let p = c / total;
                p * p.log2()
            })
            .sum::<f64>(),
    }
}

/// Minkowski distance of order `p` (1 = Manhattan, 2 = Euclidean).
pub fn knn_distance(x: &[f64], y: &[f64], p: f64) -> Result<f64, ClassifierError> {
    if x.len() != y.len() {
        return Err(ClassifierError::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    if !(p >= 1.0) {
        return Err(ClassifierError::invalid("p", "must be >= 1"));
    }
    Ok(knn::minkowski(x, y, p))
}

/// Normal density with mean `mu` and variance `var`.
pub fn gaussian_density(x: f64, mu: f64, var: f64) -> f64 {
    (-(x - mu).powi(2) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn impurity_examples() {
        assert_eq!(impurity(&[2.0, 2.0], Criterion::Gini).unwrap(), 0.5);
        assert_eq!(impurity(&[4.0, 0.0], Criterion::Gini).unwrap(), 0.0);
        assert_eq!(impurity(&[4.0, 0.0], Criterion::Entropy).unwrap(), 0.0);
        let e = impurity(&[3.0, 1.0], Criterion::Entropy).unwrap();
        let by_hand = -0.75 * 0.75f64.log2() - 0.25 * 0.25f64.log2();
        assert!((e - by_hand).abs() < 1e-15);
        assert!((e - 0.8112781).abs() < 1e-6);
        assert_eq!(impurity(&[0.0, 0.0], Criterion::Gini), Err(ClassifierError::EmptyNode));
    }

    #[test]
    fn distance_examples() {
        assert_eq!(knn_distance(&[1.0, 2.0], &[4.0, 6.0], 2.0).unwrap(), 5.0);
        assert_eq!(knn_distance(&[1.0, 2.0], &[4.0, 6.0], 1.0).unwrap(), 7.0);
        let d = knn_distance(&[0.0, 0.0], &[1.0, 1.0], 3.0).unwrap();
        assert!((d - 2f64.powf(1.0 / 3.0)).abs() < 1e-12);
        assert!((d - 1.259921).abs() < 1e-6);
        assert!(knn_distance(&[1.0], &[1.0, 2.0], 2.0).is_err());
    }

    #[test]
    fn density_at_mean() {
        let d = gaussian_density(0.0, 0.0, 1.0);
        assert!((d - 1.0 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-15);
        assert!((d - 0.3989423).abs() < 1e-6);
    }

    #[test]
    fn kind_aliases() {
        assert_eq!("rf".parse::<ClassifierKind>().unwrap(), ClassifierKind::RandomForest);
        assert_eq!("Linear-SVC".parse::<ClassifierKind>().unwrap(), ClassifierKind::LinearSVM);
        assert!("mlp".parse::<ClassifierKind>().is_err());
    }

    #[test]
    fn single_class_rejected() {
        let ds = LabeledDataset::from_rows(&[vec![1.0], vec![2.0]], vec![LabelClass::Normal; 2], "t").unwrap();
        for kind in ClassifierKind::ALL {
            assert_eq!(
                fit(&ClassifierSpec::default_for(kind), &ds, 0).unwrap_err(),
                ClassifierError::SingleClassDataset
            );
        }
    }

    #[test]
    fn importances_only_for_trees() {
        let ds = LabeledDataset::from_rows(
            &[vec![0.0, 5.0], vec![1.0, 5.0], vec![10.0, 5.0], vec![11.0, 5.0]],
            vec![LabelClass::Normal, LabelClass::Normal, LabelClass::Botnet, LabelClass::Botnet],
            "t",
        )
        .unwrap();
        let gnb = fit(&ClassifierSpec::default_for(ClassifierKind::GaussianNB), &ds, 0).unwrap();
        assert_eq!(
            feature_importances(&gnb).unwrap_err(),
            ClassifierError::UnsupportedKind(ClassifierKind::GaussianNB)
        );
        let spec = ClassifierSpec::default_for(ClassifierKind::DecisionTree)
            .with("max_depth", ParamValue::Int(1))
            .unwrap();
        let dt = fit(&spec, &ds, 0).unwrap();
        let imp = feature_importances(&dt).unwrap();
        assert_eq!(imp["sTos"], 1.0);
        assert_eq!(imp["dTos"], 0.0);
    }

    #[test]
    fn predict_checks_input() {
        let ds = LabeledDataset::from_rows(
            &[vec![0.0], vec![1.0]],
            vec![LabelClass::Normal, LabelClass::Botnet],
            "t",
        )
        .unwrap();
        let m = fit(&ClassifierSpec::default_for(ClassifierKind::DecisionTree), &ds, 0).unwrap();
        assert!(matches!(m.predict(&[1.0, 2.0]), Err(ClassifierError::DimensionMismatch { .. })));
        assert_eq!(m.predict(&[f64::NAN]), Err(ClassifierError::NonFiniteInput));
    }
}
