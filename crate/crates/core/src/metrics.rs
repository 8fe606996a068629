//! Confusion-matrix scores and the stratified cross-validation harness.
//! Botnet is the positive class.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifiers::{fit, ClassifierError, ClassifierSpec};
use crate::dataset::{stratified_kfold, DatasetError, FoldPlan, LabeledDataset};
use crate::flow::LabelClass;
use crate::rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("{truth} true labels but {pred} predictions")]
    LengthMismatch { truth: usize, pred: usize },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("fold {fold}: {error}")]
    Fold { fold: usize, error: ClassifierError },
    #[error("fold plan covers {plan} rows, dataset has {rows}")]
    PlanMismatch { plan: usize, rows: usize },
    #[error("worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub fpr: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Harmonic mean of precision and recall, 0 when both are 0.
pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Accuracy, precision, recall, F1 and false-positive rate `FP / (FP + TN)`.
/// A zero denominator yields 0.
pub fn score(cm: &ConfusionMatrix) -> Result<Scores, MetricsError> {
    if cm.total() == 0 {
        return Err(MetricsError::EmptyMatrix);
    }
    let precision = ratio(cm.tp, cm.tp + cm.fp);
    let recall = ratio(cm.tp, cm.tp + cm.fn_);
    Ok(Scores {
        accuracy: ratio(cm.tp + cm.tn, cm.total()),
        precision,
        recall,
        f1: f1(precision, recall),
        fpr: ratio(cm.fp, cm.fp + cm.tn),
    })
}

pub fn confusion_from_predictions(truth: &[LabelClass], pred: &[LabelClass]) -> Result<ConfusionMatrix, MetricsError> {
    if truth.len() != pred.len() {
        return Err(MetricsError::LengthMismatch {
            truth: truth.len(),
            pred: pred.len(),
        });
    }
    if truth.is_empty() {
        return Err(MetricsError::EmptyMatrix);
    }
    let mut cm = ConfusionMatrix::default();
    for (t, p) in truth.iter().zip(pred) {
        match (t.is_botnet(), p.is_botnet()) {
            (true, true) => cm.tp += 1,
            (false, true) => cm.fp += 1,
            (false, false) => cm.tn += 1,
            (true, false) => cm.fn_ += 1,
        }
    }
    Ok(cm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub scores: Scores,
    pub confusion: ConfusionMatrix,
    pub fit_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub spec: ClassifierSpec,
    pub dataset: String,
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<FoldResult>,
    /// Arithmetic means over folds.
    pub mean: Scores,
    pub mean_fit_time_s: f64,
    pub total_fit_time_s: f64,
}

impl EvalReport {
    fn from_folds(spec: &ClassifierSpec, ds: &LabeledDataset, plan: &FoldPlan, folds: Vec<FoldResult>) -> Self {
        let n = folds.len() as f64;
        let avg = |f: fn(&Scores) -> f64| folds.iter().map(|r| f(&r.scores)).sum::<f64>() / n;
        let mean = Scores {
            accuracy: avg(|s| s.accuracy),
            precision: avg(|s| s.precision),
            recall: avg(|s| s.recall),
            f1: avg(|s| s.f1),
            fpr: avg(|s| s.fpr),
        };
        let total: f64 = folds.iter().map(|f| f.fit_time_s).sum();
        EvalReport {
            spec: spec.clone(),
            dataset: ds.descriptor(),
            k: plan.k,
            seed: plan.seed,
            folds,
            mean,
            mean_fit_time_s: total / n,
            total_fit_time_s: total,
        }
    }

    /// Aligned table, one line per fold plus the mean.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{}", self.spec);
        let _ = writeln!(s, "dataset: {}  folds: {}  seed: {}", self.dataset, self.k, self.seed);
        let _ = writeln!(
            s,
            "{:<6} {:>12} {:>10} {:>10} {:>10} {:>10} {:>10}",
            "Fold", "Fit Time (s)", "Precision", "Recall", "F1 score", "Accuracy", "FPR"
        );
        let row = |s: &mut String, name: &str, t: f64, m: &Scores| {
            let _ = writeln!(
                s,
                "{:<6} {:>12.4} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10.6}",
                name, t, m.precision, m.recall, m.f1, m.accuracy, m.fpr
            );
        };
        for f in &self.folds {
            row(&mut s, &(f.fold + 1).to_string(), f.fit_time_s, &f.scores);
        }
        row(&mut s, "mean", self.mean_fit_time_s, &self.mean);
        let _ = writeln!(s, "total fit time: {:.4} s", self.total_fit_time_s);
        s
    }

    /// Tab-separated rows with a header: per fold, then `mean`.
    pub fn to_rows(&self) -> String {
        let mut s = String::from("fold\tfit_time_s\tprecision\trecall\tf1\taccuracy\tfpr\ttp\tfp\ttn\tfn\n");
        for f in &self.folds {
            let m = &f.scores;
            let c = &f.confusion;
            let _ = writeln!(
                s,
                "{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{}\t{}\t{}\t{}",
                f.fold, f.fit_time_s, m.precision, m.recall, m.f1, m.accuracy, m.fpr, c.tp, c.fp, c.tn, c.fn_
            );
        }
        let m = &self.mean;
        let _ = writeln!(
            s,
            "mean\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t\t\t\t",
            self.mean_fit_time_s, m.precision, m.recall, m.f1, m.accuracy, m.fpr
        );
        s
    }
}

/// Stratified k-fold evaluation with a plan derived from `seed`.
pub fn cross_validate(
    spec: &ClassifierSpec,
    ds: &LabeledDataset,
    k: usize,
    seed: u64,
    parallelism: usize,
) -> Result<EvalReport, MetricsError> {
    let plan = stratified_kfold(ds, k, seed)?;
    cross_validate_with_plan(spec, ds, &plan, seed, parallelism)
}

fn run_fold(spec: &ClassifierSpec, ds: &LabeledDataset, plan: &FoldPlan, fold: usize, seed: u64) -> Result<FoldResult, MetricsError> {
    let tag = |error| MetricsError::Fold { fold, error };
    let train = ds.subset(&plan.train_indices(fold));
    let test = ds.subset(&plan.test_indices(fold));
    let model = fit(spec, &train, rng::derive(seed, fold as u64)).map_err(tag)?;
    let pred = model.predict_matrix(&test.x).map_err(tag)?;
    let confusion = confusion_from_predictions(&test.y, &pred)?;
    Ok(FoldResult {
        fold,
        scores: score(&confusion)?,
        confusion,
        fit_time_s: model.fit_time,
    })
}

/// Evaluates every fold of `plan`; output does not depend on `parallelism`.
pub fn cross_validate_with_plan(
    spec: &ClassifierSpec,
    ds: &LabeledDataset,
    plan: &FoldPlan,
    seed: u64,
    parallelism: usize,
) -> Result<EvalReport, MetricsError> {
    if plan.assignments.len() != ds.len() {
        return Err(MetricsError::PlanMismatch {
            plan: plan.assignments.len(),
            rows: ds.len(),
        });
    }
    let folds: Vec<FoldResult> = if parallelism <= 1 {
        (0..plan.k).map(|f| run_fold(spec, ds, plan, f, seed)).collect::<Result<_, _>>()?
    } else {
        let pool = crate::workers::thread_pool(parallelism, "cv")
            .map_err(|e| MetricsError::Pool(e.to_string()))?;
        let mut out: Vec<FoldResult> = pool.install(|| {
            (0..plan.k)
                .into_par_iter()
                .map(|f| run_fold(spec, ds, plan, f, seed))
                .collect::<Result<_, _>>()
        })?;
        out.sort_by_key(|r| r.fold);
        out
    };
    Ok(EvalReport::from_folds(spec, ds, plan, folds))
}
