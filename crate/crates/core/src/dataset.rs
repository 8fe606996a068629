//! Labeled numeric datasets built from flow records, and stratified folds.

use std::collections::HashSet;
use std::fmt;
use std::net::IpAddr;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::flow::{Field, FlowRecord, LabelClass};
use crate::rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatasetError {
    #[error("feature {0:?} is not a numeric model feature")]
    NonNumericFeature(String),
    #[error("unknown feature {0:?}")]
    UnknownFeature(String),
    #[error("class {class} has {count} rows, fewer than k={k}")]
    TooFewSamples { class: LabelClass, count: usize, k: usize },
    #[error("fold count must be at least 2, got {0}")]
    InvalidK(usize),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("infected address set is empty")]
    EmptyInfectedSet,
    #[error("line {line}: not an IP address: {token:?}")]
    BadAddress { line: usize, token: String },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("i/o error: {0}")]
    Io(String),
}

/// Result of mapping a raw capture label onto the binary task.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RawLabel {
    Class(LabelClass),
    Background,
}

pub fn normalize_label(raw: &str) -> RawLabel {
    let lower = raw.to_ascii_lowercase();
    if lower.contains("botnet") {
        RawLabel::Class(LabelClass::Botnet)
    } else if lower.contains("normal") {
        RawLabel::Class(LabelClass::Normal)
    } else {
        RawLabel::Background
    }
}

/// Labels each flow Botnet if either endpoint is infected, else Normal.
pub fn label_by_ip(
    flows: impl IntoIterator<Item = FlowRecord>,
    infected: &HashSet<IpAddr>,
) -> Result<Vec<FlowRecord>, DatasetError> {
    if infected.is_empty() {
        return Err(DatasetError::EmptyInfectedSet);
    }
    let hit = |s: &str| s.parse::<IpAddr>().map(|ip| infected.contains(&ip)).unwrap_or(false);
    Ok(flows
        .into_iter()
        .map(|mut f| {
            let bot = hit(&f.src_addr) || hit(&f.dst_addr);
            f.label = Some(if bot { "Botnet" } else { "Normal" }.to_string());
            f
        })
        .collect())
}

/// Reads a newline-delimited address list; `#` starts a comment.
pub fn read_infected_ips(path: &Path) -> Result<HashSet<IpAddr>, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|e| DatasetError::Io(format!("{}: {e}", path.display())))?;
    parse_infected_ips(&text)
}

pub fn parse_infected_ips(text: &str) -> Result<HashSet<IpAddr>, DatasetError> {
    let mut out = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        let tok = line.split('#').next().unwrap_or("").trim();
        if tok.is_empty() {
            continue;
        }
        let ip = tok.parse().map_err(|_| DatasetError::BadAddress {
            line: i + 1,
            token: tok.to_string(),
        })?;
        out.insert(ip);
    }
    Ok(out)
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, DatasetError> {
        if rows * cols != data.len() {
            return Err(DatasetError::Shape(format!(
                "{rows}x{cols} needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, DatasetError> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(DatasetError::Shape(format!("row {i} has {} values, expected {cols}", r.len())));
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    /// True when the stored buffer matches the declared shape.
    pub fn is_consistent(&self) -> bool {
        self.rows.checked_mul(self.cols) == Some(self.data.len())
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn select_cols(&self, cols: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(self.rows * cols.len());
        for r in self.iter_rows() {
            data.extend(cols.iter().map(|&j| r[j]));
        }
        Matrix {
            rows: self.rows,
            cols: cols.len(),
            data,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub x: Matrix,
    pub y: Vec<LabelClass>,
    pub feature_names: Vec<String>,
    pub provenance: String,
}

impl LabeledDataset {
    /// Validates shape, finiteness and feature names.
    pub fn new(
        x: Matrix,
        y: Vec<LabelClass>,
        feature_names: Vec<String>,
        provenance: impl Into<String>,
    ) -> Result<Self, DatasetError> {
        if x.rows() != y.len() {
            return Err(DatasetError::Shape(format!("{} rows but {} labels", x.rows(), y.len())));
        }
        if x.cols() != feature_names.len() {
            return Err(DatasetError::Shape(format!(
                "{} columns but {} feature names",
                x.cols(),
                feature_names.len()
            )));
        }
        for name in &feature_names {
            check_feature(name)?;
        }
        if let Some(p) = x.data.iter().position(|v| !v.is_finite()) {
            return Err(DatasetError::NonFinite {
                row: p / x.cols().max(1),
                col: p % x.cols().max(1),
            });
        }
        Ok(LabeledDataset {
            x,
            y,
            feature_names,
            provenance: provenance.into(),
        })
    }

    /// Builds a dataset whose columns take the first `n` model feature names.
    pub fn from_rows(rows: &[Vec<f64>], y: Vec<LabelClass>, provenance: &str) -> Result<Self, DatasetError> {
        let x = Matrix::from_rows(rows)?;
        let all = Field::numeric_features();
        if x.cols() > all.len() {
            return Err(DatasetError::Shape(format!("at most {} columns", all.len())));
        }
        let names = all[..x.cols()].iter().map(|f| f.name().to_string()).collect();
        LabeledDataset::new(x, y, names, provenance)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.x.cols()
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let mut c = [0usize; 2];
        for y in &self.y {
            c[y.index()] += 1;
        }
        c
    }

    pub fn subset(&self, idx: &[usize]) -> LabeledDataset {
        LabeledDataset {
            x: self.x.select_rows(idx),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            feature_names: self.feature_names.clone(),
            provenance: self.provenance.clone(),
        }
    }

    /// Keeps only the named columns, in the given order.
    pub fn select_features<S: AsRef<str>>(&self, names: &[S]) -> Result<LabeledDataset, DatasetError> {
        let mut cols = Vec::with_capacity(names.len());
        for n in names {
            let n = n.as_ref();
            let j = self
                .feature_names
                .iter()
                .position(|f| f.eq_ignore_ascii_case(n))
                .ok_or_else(|| DatasetError::UnknownFeature(n.to_string()))?;
            cols.push(j);
        }
        Ok(LabeledDataset {
            x: self.x.select_cols(&cols),
            y: self.y.clone(),
            feature_names: cols.iter().map(|&j| self.feature_names[j].clone()).collect(),
            provenance: self.provenance.clone(),
        })
    }

    /// Stable 64-bit digest (SHA-256 prefix) over names, values and labels.
    pub fn fingerprint(&self) -> u64 {
        let mut h = Sha256::new();
        for n in &self.feature_names {
            h.update(n.as_bytes());
            h.update([0]);
        }
        for v in &self.x.data {
            h.update(v.to_bits().to_le_bytes());
        }
        for y in &self.y {
            h.update([y.index() as u8]);
        }
        let d = h.finalize();
        u64::from_le_bytes(d[..8].try_into().unwrap())
    }

    /// Short human-readable descriptor stored alongside trained models.
    pub fn descriptor(&self) -> String {
        format!(
            "{} ({} rows, {} features, {:016x})",
            self.provenance,
            self.len(),
            self.n_features(),
            self.fingerprint()
        )
    }
}

fn check_feature(name: &str) -> Result<Field, DatasetError> {
    let f = Field::lookup(name).ok_or_else(|| DatasetError::UnknownFeature(name.to_string()))?;
    if !f.is_numeric_feature() {
        return Err(DatasetError::NonNumericFeature(name.to_string()));
    }
    Ok(f)
}

pub fn default_feature_names() -> Vec<String> {
    Field::numeric_features().iter().map(|f| f.name().to_string()).collect()
}

/// Counts of rows kept and dropped while building a matrix.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct BuildReport {
    pub normal: usize,
    pub botnet: usize,
    pub background_dropped: usize,
    pub unlabeled_dropped: usize,
}

impl BuildReport {
    pub fn botnet_fraction(&self) -> f64 {
        let n = self.normal + self.botnet;
        if n == 0 {
            0.0
        } else {
            self.botnet as f64 / n as f64
        }
    }
}

impl fmt::Display for BuildReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "normal={} botnet={} botnet_pct={:.2}% background_dropped={} unlabeled_dropped={}",
            self.normal,
            self.botnet,
            100.0 * self.botnet_fraction(),
            self.background_dropped,
            self.unlabeled_dropped
        )
    }
}

/// Projects labeled flows onto the requested numeric columns.
pub fn build_matrix<'a, S: AsRef<str>>(
    flows: impl IntoIterator<Item = &'a FlowRecord>,
    features: &[S],
    provenance: &str,
) -> Result<(LabeledDataset, BuildReport), DatasetError> {
    let fields: Vec<Field> = features.iter().map(|s| check_feature(s.as_ref())).collect::<Result<_, _>>()?;
    let mut report = BuildReport::default();
    let mut data = Vec::new();
    let mut y = Vec::new();
    for flow in flows {
        let class = match flow.label.as_deref().map(normalize_label) {
            None => {
                report.unlabeled_dropped += 1;
                continue;
            }
            Some(RawLabel::Background) => {
                report.background_dropped += 1;
                continue;
            }
            Some(RawLabel::Class(c)) => c,
        };
        match class {
            LabelClass::Normal => report.normal += 1,
            LabelClass::Botnet => report.botnet += 1,
        }
        y.push(class);
        data.extend(fields.iter().map(|f| flow.numeric(*f).unwrap_or(0.0)));
    }
    let x = Matrix::new(y.len(), fields.len(), data)?;
    let names = fields.iter().map(|f| f.name().to_string()).collect();
    Ok((LabeledDataset::new(x, y, names, provenance)?, report))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub assignments: Vec<usize>,
    pub seed: u64,
}

impl FoldPlan {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len()).filter(|&i| self.assignments[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len()).filter(|&i| self.assignments[i] != fold).collect()
    }
}

/// Per class: seeded shuffle, then round-robin fold assignment. Each class
/// starts where the previous one stopped so fold sizes stay balanced too.
pub fn stratified_kfold(ds: &LabeledDataset, k: usize, seed: u64) -> Result<FoldPlan, DatasetError> {
    if k < 2 {
        return Err(DatasetError::InvalidK(k));
    }
    if ds.is_empty() {
        return Err(DatasetError::EmptyDataset);
    }
    let mut r = rng::stream(seed, 0);
    let mut assignments = vec![0usize; ds.len()];
    let mut offset = 0usize;
    for class in [LabelClass::Normal, LabelClass::Botnet] {
        let mut idx: Vec<usize> = (0..ds.len()).filter(|&i| ds.y[i] == class).collect();
        if idx.is_empty() {
            continue;
        }
        if idx.len() < k {
            return Err(DatasetError::TooFewSamples {
                class,
                count: idx.len(),
                k,
            });
        }
        idx.shuffle(&mut r);
        for (j, &i) in idx.iter().enumerate() {
            assignments[i] = (offset + j) % k;
        }
        offset = (offset + idx.len()) % k;
    }
    Ok(FoldPlan { k, assignments, seed })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassDistribution {
    pub normal_count: usize,
    pub botnet_count: usize,
    pub botnet_pct: f64,
}

impl ClassDistribution {
    pub fn from_counts(normal_count: usize, botnet_count: usize) -> Result<Self, DatasetError> {
        let total = normal_count + botnet_count;
        if total == 0 {
            return Err(DatasetError::EmptyDataset);
        }
        Ok(ClassDistribution {
            normal_count,
            botnet_count,
            botnet_pct: 100.0 * botnet_count as f64 / total as f64,
        })
    }
}

impl fmt::Display for ClassDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "normal={} botnet={} botnet_pct={:.2}%",
            self.normal_count, self.botnet_count, self.botnet_pct
        )
    }
}

pub fn class_distribution(ds: &LabeledDataset) -> Result<ClassDistribution, DatasetError> {
    let [n, b] = ds.class_counts();
    ClassDistribution::from_counts(n, b)
}
