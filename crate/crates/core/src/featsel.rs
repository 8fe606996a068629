//! Random-forest feature ranking and per-dataset top-k selection.
//!
//! Averaged importances are a separate type on purpose: only a per-dataset
//! ranking can feed [`select_top_k`].

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifiers::{feature_importances, fit, ClassifierError, ClassifierKind, ClassifierSpec};
use crate::dataset::{DatasetError, LabeledDataset};

pub const DEFAULT_TOP_K: usize = 15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatselError {
    #[error("ranking needs a RandomForest spec, got {0}")]
    WrongKind(ClassifierKind),
    #[error("k={k} exceeds the {available} ranked features")]
    KTooLarge { k: usize, available: usize },
    #[error("rankings cover different feature sets")]
    NameSetMismatch,
    #[error("no rankings to average")]
    NoRankings,
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub name: String,
    pub importance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragedImportance {
    pub name: String,
    pub mean: f64,
}

/// Descending by value, ties by name.
fn order(v: &mut [(String, f64)]) {
    v.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
}

pub fn rank_features(ds: &LabeledDataset, rf_spec: &ClassifierSpec, seed: u64) -> Result<Vec<RankedFeature>, FeatselError> {
    if rf_spec.kind != ClassifierKind::RandomForest {
        return Err(FeatselError::WrongKind(rf_spec.kind));
    }
    let model = fit(rf_spec, ds, seed)?;
    let mut v: Vec<(String, f64)> = feature_importances(&model)?.into_iter().collect();
    order(&mut v);
    Ok(v
        .into_iter()
        .map(|(name, importance)| RankedFeature { name, importance })
        .collect())
}

/// Names of the first `k` ranked features.
pub fn select_top_k(ranked: &[RankedFeature], k: usize) -> Result<Vec<String>, FeatselError> {
    if k > ranked.len() {
        return Err(FeatselError::KTooLarge {
            k,
            available: ranked.len(),
        });
    }
    Ok(ranked[..k].iter().map(|r| r.name.clone()).collect())
}

/// Ranks `ds` and keeps its own top `k` columns.
pub fn reduce_dataset(
    ds: &LabeledDataset,
    rf_spec: &ClassifierSpec,
    k: usize,
    seed: u64,
) -> Result<(LabeledDataset, Vec<RankedFeature>), FeatselError> {
    let ranked = rank_features(ds, rf_spec, seed)?;
    let keep = select_top_k(&ranked, k)?;
    Ok((ds.select_features(&keep)?, ranked))
}

/// Mean importance per feature across datasets, for reporting.
pub fn average_importances(per_dataset: &[Vec<RankedFeature>]) -> Result<Vec<AveragedImportance>, FeatselError> {
    let first = per_dataset.first().ok_or(FeatselError::NoRankings)?;
    let names: Vec<&String> = {
        let mut n: Vec<&String> = first.iter().map(|r| &r.name).collect();
        n.sort();
        n
    };
    let mut sums: BTreeMap<String, f64> = BTreeMap::new();
    for ranking in per_dataset {
        let mut these: Vec<&String> = ranking.iter().map(|r| &r.name).collect();
        these.sort();
        if these != names {
            return Err(FeatselError::NameSetMismatch);
        }
        for r in ranking {
            *sums.entry(r.name.clone()).or_default() += r.importance;
        }
    }
    let n = per_dataset.len() as f64;
    let mut v: Vec<(String, f64)> = sums.into_iter().map(|(k, s)| (k, s / n)).collect();
    order(&mut v);
    Ok(v.into_iter().map(|(name, mean)| AveragedImportance { name, mean }).collect())
}

/// Two-column text table: name, value to six decimals.
pub fn importance_table<'a>(rows: impl IntoIterator<Item = (&'a str, f64)>) -> String {
    let mut s = String::new();
    for (name, v) in rows {
        let _ = writeln!(s, "{name}\t{v:.6}");
    }
    s
}

pub fn ranked_table(ranked: &[RankedFeature]) -> String {
    importance_table(ranked.iter().map(|r| (r.name.as_str(), r.importance)))
}

pub fn averaged_table(avg: &[AveragedImportance]) -> String {
    importance_table(avg.iter().map(|r| (r.name.as_str(), r.mean)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::LabelClass;
    use crate::rng;
    use rand::Rng;

    fn planted(n: usize, d: usize, informative: usize, seed: u64) -> LabeledDataset {
        let mut r = rng::stream(seed, 11);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let bot = r.gen_bool(0.3);
            let row: Vec<f64> = (0..d)
                .map(|j| {
                    if j == informative {
                        if bot {
                            r.gen_range(5.0..10.0)
                        } else {
                            r.gen_range(0.0..5.0)
                        }
                    } else {
                        r.gen_range(0.0..10.0)
                    }
                })
                .collect();
            rows.push(row);
            y.push(LabelClass::from_index(bot as usize));
        }
        LabeledDataset::from_rows(&rows, y, "planted").unwrap()
    }

    fn rf() -> ClassifierSpec {
        ClassifierSpec::default_for(ClassifierKind::RandomForest)
            .with("n_estimators", crate::classifiers::ParamValue::Int(25))
            .unwrap()
    }

    #[test]
    fn separating_feature_ranks_first() {
        let ds = planted(300, 4, 2, 1);
        let ranked = rank_features(&ds, &rf(), 7).unwrap();
        assert_eq!(ranked.len(), 4);
        assert_eq!(ranked[0].name, ds.feature_names[2]);
        assert!(ranked[0].importance >= 0.9, "{ranked:?}");
        let total: f64 = ranked.iter().map(|r| r.importance).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn top_k_prefixes() {
        let ranked: Vec<RankedFeature> = (0..24)
            .map(|i| RankedFeature {
                name: format!("f{i:02}"),
                importance: 1.0 / 24.0,
            })
            .collect();
        assert_eq!(select_top_k(&ranked, 15).unwrap().len(), 15);
        assert_eq!(select_top_k(&ranked, 24).unwrap().len(), 24);
        let a = select_top_k(&ranked, 5).unwrap();
        let b = select_top_k(&ranked, 9).unwrap();
        assert_eq!(a[..], b[..5]);
        assert_eq!(
            select_top_k(&ranked, 25).unwrap_err(),
            FeatselError::KTooLarge { k: 25, available: 24 }
        );
    }

    #[test]
    fn averaging() {
        let r = |v: f64| {
            vec![
                RankedFeature {
                    name: "f".into(),
                    importance: v,
                },
                RankedFeature {
                    name: "g".into(),
                    importance: 1.0 - v,
                },
            ]
        };
        let avg = average_importances(&[r(0.2), r(0.4)]).unwrap();
        let f = avg.iter().find(|a| a.name == "f").unwrap();
        assert!((f.mean - 0.3).abs() < 1e-12);
        assert_eq!(avg[0].name, "g");
        let other = vec![RankedFeature {
            name: "h".into(),
            importance: 1.0,
        }];
        assert_eq!(average_importances(&[r(0.2), other]).unwrap_err(), FeatselError::NameSetMismatch);
    }

    #[test]
    fn wrong_kind_rejected() {
        let ds = planted(50, 2, 0, 2);
        let gnb = ClassifierSpec::default_for(ClassifierKind::GaussianNB);
        assert_eq!(rank_features(&ds, &gnb, 0).unwrap_err(), FeatselError::WrongKind(ClassifierKind::GaussianNB));
    }

    #[test]
    fn table_format() {
        assert_eq!(importance_table([("sTtl", 0.25)]), "sTtl\t0.250000\n");
    }
}
