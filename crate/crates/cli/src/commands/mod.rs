//! Subcommand implementations. Each one turns flags into calls on the
//! library and files on disk; none holds logic of its own.

pub mod detect;
pub mod extract;
pub mod optimize;
pub mod report;
pub mod train;

use std::path::{Path, PathBuf};

use flowhunter::classifiers::{ClassifierSpec, ParamValue};
use flowhunter::dataset::{build_matrix, default_feature_names, LabeledDataset};
use flowhunter::flow::{read_flow_file, FlowRecord};
use flowhunter::ingest::AggregatorConfig;

use crate::args::{AggregatorArgs, DataArgs, ModelArgs};
use crate::config::AggregatorSection;
use crate::error::{CliError, CliResult};

pub struct Globals {
    pub seed: u64,
    pub jobs: usize,
}

pub fn read_flows(path: &Path) -> CliResult<Vec<FlowRecord>> {
    if !path.exists() {
        return Err(CliError::data(format!("{}: no such file", path.display())));
    }
    read_flow_file(path).map_err(|e| CliError::from(e).context(path.display()))
}

/// `a,b,c` or `@file` with one name per line; `#` comments allowed in files.
pub fn parse_features(arg: Option<&str>) -> CliResult<Vec<String>> {
    let Some(arg) = arg else {
        return Ok(default_feature_names());
    };
    let names: Vec<String> = if let Some(file) = arg.strip_prefix('@') {
        let p = Path::new(file);
        std::fs::read_to_string(p)
            .map_err(|e| CliError::io(p, e))?
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim().to_string())
            .filter(|l| !l.is_empty())
            .collect()
    } else {
        arg.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
    };
    if names.is_empty() {
        return Err(CliError::usage("empty feature list"));
    }
    Ok(names)
}

fn provenance(paths: &[PathBuf]) -> String {
    paths
        .iter()
        .map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| p.display().to_string()))
        .collect::<Vec<_>>()
        .join("+")
}

/// Reads, concatenates and projects the inputs, dropping background and
/// unlabeled flows.
pub fn load_dataset(data: &DataArgs) -> CliResult<LabeledDataset> {
    let features = parse_features(data.features.as_deref())?;
    let mut flows = Vec::new();
    for p in &data.inputs {
        flows.extend(read_flows(p)?);
    }
    let (ds, report) = build_matrix(&flows, &features, &provenance(&data.inputs))?;
    log::info!("{}: {report}", ds.descriptor());
    if ds.is_empty() {
        return Err(CliError::data("no Normal or Botnet labeled flows in the input"));
    }
    Ok(ds)
}

pub fn load_one(path: &Path, features: &[String]) -> CliResult<LabeledDataset> {
    let flows = read_flows(path)?;
    let (ds, report) = build_matrix(&flows, features, &provenance(&[path.to_path_buf()]))?;
    log::info!("{}: {report}", ds.descriptor());
    Ok(ds)
}

pub fn apply_params(mut spec: ClassifierSpec, params: &[String]) -> CliResult<ClassifierSpec> {
    for p in params {
        let (name, value) = p
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("--param {p:?}: expected NAME=VALUE")))?;
        spec = spec.with(name.trim(), ParamValue::parse_loose(value))?;
    }
    Ok(spec)
}

/// A spec file holds a bare spec or an object with a `spec` member.
pub fn read_spec(path: &Path) -> CliResult<ClassifierSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let v: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let v = match v.get("spec") {
        Some(inner) => inner.clone(),
        None => v,
    };
    let spec: ClassifierSpec =
        serde_json::from_value(v).map_err(|e| CliError::data(format!("{}: not a classifier spec: {e}", path.display())))?;
    spec.validate().map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    Ok(spec)
}

pub fn resolve_spec(m: &ModelArgs) -> CliResult<ClassifierSpec> {
    let spec = match (&m.spec, m.classifier) {
        (Some(p), k) => {
            let s = read_spec(p)?;
            if let Some(k) = k.filter(|k| *k != s.kind) {
                return Err(CliError::usage(format!("--classifier {k} contradicts the {} spec in {}", s.kind, p.display())));
            }
            s
        }
        (None, Some(k)) => ClassifierSpec::default_for(k),
        (None, None) => return Err(CliError::usage("one of --classifier or --spec is required")),
    };
    apply_params(spec, &m.params)
}

pub fn aggregator(a: &AggregatorArgs, c: &AggregatorSection) -> CliResult<AggregatorConfig> {
    let d = AggregatorConfig::default();
    let cfg = AggregatorConfig {
        idle_timeout: a.idle_timeout.or(c.idle_timeout).unwrap_or(d.idle_timeout),
        active_timeout: a.active_timeout.or(c.active_timeout).unwrap_or(d.active_timeout),
        status_interval: a.status_interval.or(c.status_interval).unwrap_or(d.status_interval),
    };
    cfg.validate().map_err(CliError::usage)?;
    Ok(cfg)
}

pub fn write_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::runtime(format!("{}: {e}", path.display()))
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    std::fs::write(path, contents).map_err(|e| write_err(path, e))
}

/// Defaults shared by commands that read `cfg`.
pub fn or_cfg<T: Copy>(flag: Option<T>, cfg: Option<T>, default: T) -> T {
    flag.or(cfg).unwrap_or(default)
}
