//! Versioned on-disk model container.
//!
//! ```text
//! offset  size  field
//! 0       8     magic "FHMODEL\0"
//! 8       4     format version, u32 little-endian
//! 12      8     payload length N, u64 little-endian
//! 20      32    SHA-256 of the payload
//! 52      N     payload: the TrainedModel as CBOR
//! ```
//!
//! Decoding checks every field and then the structure of the model itself,
//! so a decoded model can never index out of bounds at predict time.

use sha2::{Digest, Sha256};
use thiserror::Error;

use super::tree::{Node, Tree};
use super::{ModelParams, TrainedModel};

pub const MAGIC: &[u8; 8] = b"FHMODEL\0";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 8 + 32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CodecError {
    #[error("model format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("corrupt model: {0}")]
    Corrupt(String),
}

fn corrupt(s: impl Into<String>) -> CodecError {
    CodecError::Corrupt(s.into())
}

pub fn serialize_model(model: &TrainedModel) -> Vec<u8> {
    let mut payload = Vec::new();
    ciborium::into_writer(model, &mut payload).expect("writing CBOR to memory cannot fail");
    encode_container(FORMAT_VERSION, &payload)
}

/// Wraps an arbitrary payload; exposed for tests of the version check.
pub fn encode_container(version: u32, payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&version.to_le_bytes());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&Sha256::digest(payload));
    out.extend_from_slice(payload);
    out
}

pub fn deserialize_model(bytes: &[u8]) -> Result<TrainedModel, CodecError> {
    if bytes.len() < HEADER_LEN {
        return Err(corrupt(format!("{} bytes is shorter than the header", bytes.len())));
    }
    if &bytes[..8] != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(CodecError::VersionMismatch {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let len = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
    let payload = &bytes[HEADER_LEN..];
    if payload.len() as u64 != len {
        return Err(corrupt(format!("payload is {} bytes, header says {len}", payload.len())));
    }
    if Sha256::digest(payload).as_slice() != &bytes[20..52] {
        return Err(corrupt("checksum mismatch"));
    }
    decode_payload(payload)
}

/// Decodes and validates the payload alone, skipping the container checks.
pub fn decode_payload(payload: &[u8]) -> Result<TrainedModel, CodecError> {
    let model: TrainedModel = ciborium::from_reader(payload).map_err(|e| corrupt(e.to_string()))?;
    check_structure(&model)?;
    Ok(model)
}

fn check_tree(t: &Tree, d: usize) -> Result<(), CodecError> {
    if t.nodes.is_empty() {
        return Err(corrupt("empty tree"));
    }
    for (k, n) in t.nodes.iter().enumerate() {
        if let Node::Split {
            feature, left, right, ..
        } = n
        {
            // children always follow their parent, which also rules out cycles
            if *feature >= d || *left <= k || *right <= k || *left >= t.nodes.len() || *right >= t.nodes.len() {
                return Err(corrupt(format!("tree node {k} is malformed")));
            }
        }
    }
    if t.raw_importance.len() != d {
        return Err(corrupt("importance vector length"));
    }
    Ok(())
}

fn check_structure(m: &TrainedModel) -> Result<(), CodecError> {
    let d = m.feature_names.len();
    if d == 0 {
        return Err(corrupt("model has no features"));
    }
    m.spec.validate().map_err(|e| corrupt(e.to_string()))?;
    let kind_matches = matches!(
        (&m.params, m.spec.kind),
        (ModelParams::GaussianNB(_), super::ClassifierKind::GaussianNB)
            | (ModelParams::DecisionTree(_), super::ClassifierKind::DecisionTree)
            | (ModelParams::RandomForest(_), super::ClassifierKind::RandomForest)
            | (ModelParams::AdaBoost(_), super::ClassifierKind::AdaBoost)
            | (ModelParams::LinearSVM(_), super::ClassifierKind::LinearSVM)
            | (ModelParams::KNN(_), super::ClassifierKind::KNN)
    );
    if !kind_matches {
        return Err(corrupt("parameters do not match the declared kind"));
    }
    match &m.params {
        ModelParams::GaussianNB(g) => {
            if g.means.iter().chain(&g.variances).any(|v| v.len() != d) {
                return Err(corrupt("naive Bayes moment length"));
            }
        }
        ModelParams::DecisionTree(t) => check_tree(t, d)?,
        ModelParams::RandomForest(f) => {
            if f.trees.is_empty() {
                return Err(corrupt("forest without trees"));
            }
            f.trees.iter().try_for_each(|t| check_tree(t, d))?;
        }
        ModelParams::AdaBoost(a) => {
            if a.alphas.len() != a.learners.len() {
                return Err(corrupt("learner/weight count mismatch"));
            }
            a.learners.iter().try_for_each(|t| check_tree(t, d))?;
        }
        ModelParams::LinearSVM(s) => {
            if s.w.len() != d {
                return Err(corrupt("weight vector length"));
            }
        }
        ModelParams::KNN(k) => {
            if !k.x.is_consistent() || k.x.cols() != d || k.x.rows() != k.y.len() || k.k == 0 || k.k > k.y.len() {
                return Err(corrupt("neighbour store shape"));
            }
            if k.index.as_ref().is_some_and(|ix| !ix.is_consistent(k.x.rows(), d)) {
                return Err(corrupt("spatial index"));
            }
        }
    }
    Ok(())
}
