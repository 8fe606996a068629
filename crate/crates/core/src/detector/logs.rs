//! Alert and labeled-flow log lines.
//!
//! Alert: `<rfc3339>\t<id,id,...>\t<flow line>`.
//! Labeled flow: `<flow line>\t<Normal|Botnet>`.
//! Flow lines use the canonical column order and carry no header.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flow::{parse_flow_line, serialize_flow_line, FieldOrder, FlowError, FlowRecord, LabelClass, Timestamp};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LogError {
    #[error("malformed log line: {0}")]
    Malformed(&'static str),
    #[error(transparent)]
    Flow(#[from] FlowError),
}

pub const SEVERITY: &str = "botnet";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alert {
    pub timestamp: Timestamp,
    pub triggering_model_ids: Vec<String>,
    pub severity: String,
    pub flow: FlowRecord,
}

impl Alert {
    /// Stamped with the flow's last packet time so offline runs repeat.
    pub fn for_flow(flow: FlowRecord, ids: Vec<String>) -> Self {
        debug_assert!(!ids.is_empty());
        Alert {
            timestamp: flow.last_time,
            triggering_model_ids: ids,
            severity: SEVERITY.to_string(),
            flow,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledFlow {
    pub label: LabelClass,
    pub flow: FlowRecord,
}

fn bad(what: &'static str) -> LogError {
    LogError::Malformed(what)
}

pub fn format_alert(a: &Alert) -> Result<String, FlowError> {
    Ok(format!(
        "{}\t{}\t{}",
        a.timestamp.to_rfc3339(),
        a.triggering_model_ids.join(","),
        serialize_flow_line(&a.flow, &FieldOrder::canonical())?
    ))
}

pub fn parse_alert_line(line: &str) -> Result<Alert, LogError> {
    let mut parts = line.splitn(3, '\t');
    let (Some(ts), Some(ids), Some(flow)) = (parts.next(), parts.next(), parts.next()) else {
        return Err(bad("alert line needs three tab-separated parts"));
    };
    let timestamp = Timestamp::parse(ts).ok_or_else(|| bad("alert timestamp"))?;
    let ids: Vec<String> = ids.split(',').map(str::to_string).collect();
    if ids.iter().any(|s| s.is_empty()) {
        return Err(bad("empty model id in alert"));
    }
    Ok(Alert {
        timestamp,
        triggering_model_ids: ids,
        severity: SEVERITY.to_string(),
        flow: parse_flow_line(flow, &FieldOrder::canonical())?,
    })
}

pub fn format_labeled_flow(f: &LabeledFlow) -> Result<String, FlowError> {
    Ok(format!(
        "{}\t{}",
        serialize_flow_line(&f.flow, &FieldOrder::canonical())?,
        f.label.as_str()
    ))
}

pub fn parse_labeled_flow_line(line: &str) -> Result<LabeledFlow, LogError> {
    let (flow, label) = line.rsplit_once('\t').ok_or_else(|| bad("labeled flow line has no tab"))?;
    let label: LabelClass = label.parse().map_err(|_| bad("unknown label"))?;
    Ok(LabeledFlow {
        label,
        flow: parse_flow_line(flow, &FieldOrder::canonical())?,
    })
}
