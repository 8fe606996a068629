//! Model registry: a JSON metadata document listing model files.
//!
//! ```json
//! {
//!   "format_version": 1,
//!   "models": [
//!     {
//!       "model_id": "rf-scenario10",
//!       "file_name": "rf-scenario10.fhm",
//!       "kind": "RandomForest",
//!       "trained_on": "scenario10 (n=1309791, d=15)",
//!       "features": ["sTtl", "SrcBytes"],
//!       "created_at": "2024-05-01T12:00:00Z",
//!       "format_version": 1
//!     }
//!   ]
//! }
//! ```
//!
//! Entries whose file is missing, unreadable, corrupt or inconsistent with
//! the entry are skipped with a reason; only an empty result is fatal.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifiers::codec::{deserialize_model, FORMAT_VERSION};
use crate::classifiers::{ClassifierKind, TrainedModel};
use crate::flow::Field;

pub const METADATA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("cannot parse metadata {path}: {detail}")]
    MetadataParse { path: String, detail: String },
    #[error("no valid models ({skipped} skipped)")]
    NoValidModels { skipped: usize },
    #[error("model id {0:?} already registered")]
    DuplicateId(String),
    #[error("invalid model id {0:?}")]
    InvalidId(String),
    #[error("i/o error on {path}: {detail}")]
    Io { path: String, detail: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub model_id: String,
    pub file_name: String,
    pub kind: ClassifierKind,
    pub trained_on: String,
    pub features: Vec<String>,
    pub created_at: String,
    pub format_version: u32,
}

impl ModelMetadata {
    pub fn describe(model_id: &str, file_name: &str, model: &TrainedModel, created_at: String) -> Self {
        ModelMetadata {
            model_id: model_id.to_string(),
            file_name: file_name.to_string(),
            kind: model.kind(),
            trained_on: model.trained_on.clone(),
            features: model.feature_names.clone(),
            created_at,
            format_version: FORMAT_VERSION,
        }
    }
}

/// Ids end up comma-joined in alert logs, so separators are banned.
pub fn valid_model_id(id: &str) -> bool {
    !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.' | ':'))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetadataDoc {
    pub format_version: u32,
    pub models: Vec<ModelMetadata>,
}

impl Default for MetadataDoc {
    fn default() -> Self {
        MetadataDoc {
            format_version: METADATA_VERSION,
            models: Vec::new(),
        }
    }
}

pub fn parse_metadata(text: &str) -> Result<MetadataDoc, String> {
    let doc: MetadataDoc = serde_json::from_str(text).map_err(|e| e.to_string())?;
    if doc.format_version != METADATA_VERSION {
        return Err(format!(
            "metadata version {} (expected {METADATA_VERSION})",
            doc.format_version
        ));
    }
    Ok(doc)
}

pub fn read_metadata(path: &Path) -> Result<MetadataDoc, RegistryError> {
    let text = std::fs::read_to_string(path).map_err(|e| RegistryError::MetadataParse {
        path: path.display().to_string(),
        detail: e.to_string(),
    })?;
    parse_metadata(&text).map_err(|detail| RegistryError::MetadataParse {
        path: path.display().to_string(),
        detail,
    })
}

/// Adds or replaces (by id) one entry, creating the document if needed.
pub fn upsert_metadata(path: &Path, entry: ModelMetadata) -> Result<(), RegistryError> {
    if !valid_model_id(&entry.model_id) {
        return Err(RegistryError::InvalidId(entry.model_id));
    }
    let mut doc = if path.exists() {
        read_metadata(path)?
    } else {
        MetadataDoc::default()
    };
    doc.models.retain(|m| m.model_id != entry.model_id);
    doc.models.push(entry);
    let text = serde_json::to_string_pretty(&doc).expect("metadata serializes");
    std::fs::write(path, text + "\n").map_err(|e| RegistryError::Io {
        path: path.display().to_string(),
        detail: e.to_string(),
    })
}

/// A deserialized model with its feature columns resolved.
#[derive(Debug, Clone)]
pub struct LoadedModel {
    pub meta: ModelMetadata,
    pub model: TrainedModel,
    pub fields: Vec<Field>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Skipped {
    pub model_id: String,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct Registry {
    pub loaded: Vec<LoadedModel>,
    pub skipped: Vec<Skipped>,
}

impl Registry {
    /// Registry from in-memory models, checked the same way as files.
    pub fn from_models(models: Vec<(ModelMetadata, TrainedModel)>) -> Result<Self, RegistryError> {
        let mut loaded = Vec::new();
        let mut skipped = Vec::new();
        let mut seen = HashSet::new();
        for (meta, model) in models {
            match admit(&meta, model, &mut seen) {
                Ok(m) => loaded.push(m),
                Err(reason) => skipped.push(Skipped {
                    model_id: meta.model_id.clone(),
                    reason,
                }),
            }
        }
        if loaded.is_empty() {
            return Err(RegistryError::NoValidModels { skipped: skipped.len() });
        }
        Ok(Registry { loaded, skipped })
    }

    pub fn ids(&self) -> Vec<&str> {
        self.loaded.iter().map(|m| m.meta.model_id.as_str()).collect()
    }
}

fn admit(meta: &ModelMetadata, model: TrainedModel, seen: &mut HashSet<String>) -> Result<LoadedModel, String> {
    if !valid_model_id(&meta.model_id) {
        return Err("invalid model id".into());
    }
    if !seen.insert(meta.model_id.clone()) {
        return Err("duplicate model id".into());
    }
    if meta.features.is_empty() {
        return Err("empty feature list".into());
    }
    if model.kind() != meta.kind {
        return Err(format!("file holds a {} model, metadata says {}", model.kind(), meta.kind));
    }
    if model.feature_names != meta.features {
        return Err("feature list differs from the model file".into());
    }
    let fields = meta
        .features
        .iter()
        .map(|n| {
            Field::lookup(n)
                .filter(|f| f.is_numeric_feature())
                .ok_or_else(|| format!("feature {n:?} is not a numeric flow field"))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(LoadedModel {
        meta: meta.clone(),
        model,
        fields,
    })
}

/// Loads every usable model listed in `metadata_path` from `models_dir`.
pub fn load_registry(models_dir: &Path, metadata_path: &Path) -> Result<Registry, RegistryError> {
    let doc = read_metadata(metadata_path)?;
    let mut loaded = Vec::new();
    let mut skipped = Vec::new();
    let mut seen = HashSet::new();
    for meta in doc.models {
        let path: PathBuf = models_dir.join(&meta.file_name);
        let outcome = std::fs::read(&path)
            .map_err(|e| format!("{}: {e}", path.display()))
            .and_then(|bytes| deserialize_model(&bytes).map_err(|e| format!("{}: {e}", path.display())))
            .and_then(|model| admit(&meta, model, &mut seen));
        match outcome {
            Ok(m) => loaded.push(m),
            Err(reason) => {
                log::warn!("skipping model {}: {reason}", meta.model_id);
                skipped.push(Skipped {
                    model_id: meta.model_id,
                    reason,
                })
            }
        }
    }
    if loaded.is_empty() {
        return Err(RegistryError::NoValidModels { skipped: skipped.len() });
    }
    Ok(Registry { loaded, skipped })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn id_charset() {
        assert!(valid_model_id("rf-10_a.v2"));
        assert!(!valid_model_id("a,b"));
        assert!(!valid_model_id("a\tb"));
        assert!(!valid_model_id(""));
    }

    #[test]
    fn metadata_round_trip_and_version() {
        let doc = MetadataDoc {
            format_version: 1,
            models: vec![ModelMetadata {
                model_id: "m".into(),
                file_name: "m.fhm".into(),
                kind: ClassifierKind::GaussianNB,
                trained_on: "x".into(),
                features: vec!["sTtl".into()],
                created_at: "2024-01-01T00:00:00Z".into(),
                format_version: 1,
            }],
        };
        let text = serde_json::to_string(&doc).unwrap();
        assert_eq!(parse_metadata(&text).unwrap(), doc);
        assert!(parse_metadata(&text.replace("\"format_version\":1,\"models\"", "\"format_version\":9,\"models\"")).is_err());
        assert!(parse_metadata("{").is_err());
    }
}
