//! Detection engine.
//!
//! A producer thread turns the source (flow file, pcap or live interface)
//! into batches of flows on a bounded queue. The calling thread classifies
//! each batch against every loaded model, in parallel when `jobs > 1`, and
//! writes the sinks in input order. A flow is Botnet when any model says so.

pub mod logs;
pub mod registry;
pub mod stream;

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use crossbeam_channel::{bounded, Sender};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use logs::{
    format_alert, format_labeled_flow, parse_alert_line, parse_labeled_flow_line, Alert, LabeledFlow, LogError,
};
pub use registry::{
    load_registry, parse_metadata, read_metadata, upsert_metadata, valid_model_id, LoadedModel, MetadataDoc,
    ModelMetadata, Registry, RegistryError, Skipped, METADATA_VERSION,
};
pub use stream::{parse_request, ClientRequest, StreamError, StreamMessage, StreamServer, StreamSink};

use crate::classifiers::ClassifierError;
use crate::flow::{FlowError, FlowReader, FlowRecord, LabelClass, Timestamp};
use crate::ingest::{
    decode_packet, read_pcap, Aggregator, AggregatorConfig, CaptureError, Decoded, LiveCapture, PcapError,
};
use crate::workers::{self, CancelToken};

const BATCH: usize = 256;
const QUEUE_BATCHES: usize = 16;

#[derive(Debug, Error)]
pub enum DetectError {
    #[error("model {model_id} needs feature {feature:?}, which flows do not carry")]
    FeatureMissing { model_id: String, feature: String },
    #[error("model {model_id}: {source}")]
    Classifier {
        model_id: String,
        source: ClassifierError,
    },
    #[error("flow source: {0}")]
    Flow(#[from] FlowError),
    #[error("pcap source: {0}")]
    Pcap(#[from] PcapError),
    #[error("live capture: {0}")]
    Capture(#[from] CaptureError),
    #[error("aggregator: {0}")]
    Config(String),
    #[error("cannot open {path}: {detail}")]
    Open { path: String, detail: String },
    #[error("worker: {0}")]
    Worker(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Classification {
    pub label: LabelClass,
    pub triggering_model_ids: Vec<String>,
}

/// Column values of `flow` in the model's feature order.
pub fn feature_vector(flow: &FlowRecord, model: &LoadedModel) -> Result<Vec<f64>, DetectError> {
    model
        .fields
        .iter()
        .map(|f| {
            flow.numeric(*f).ok_or_else(|| DetectError::FeatureMissing {
                model_id: model.meta.model_id.clone(),
                feature: f.name().to_string(),
            })
        })
        .collect()
}

/// Runs every model on `flow`; Botnet iff at least one model says Botnet.
pub fn classify_flow(flow: &FlowRecord, models: &[LoadedModel]) -> Result<Classification, DetectError> {
    let mut ids = Vec::new();
    for m in models {
        let x = feature_vector(flow, m)?;
        let label = m.model.predict(&x).map_err(|source| DetectError::Classifier {
            model_id: m.meta.model_id.clone(),
            source,
        })?;
        if label.is_botnet() {
            ids.push(m.meta.model_id.clone());
        }
    }
    Ok(Classification {
        label: if ids.is_empty() { LabelClass::Normal } else { LabelClass::Botnet },
        triggering_model_ids: ids,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Source {
    FlowFile(PathBuf),
    Pcap(PathBuf),
    Live(String),
}

const PCAP_MAGICS: [[u8; 4]; 4] = [
    [0xd4, 0xc3, 0xb2, 0xa1],
    [0xa1, 0xb2, 0xc3, 0xd4],
    [0x4d, 0x3c, 0xb2, 0xa1],
    [0xa1, 0xb2, 0x3c, 0x4d],
];

impl Source {
    /// Pcap if the file starts with a pcap magic number, else a flow file.
    pub fn sniff(path: &Path) -> Result<Source, DetectError> {
        let mut head = [0u8; 4];
        let mut f = File::open(path).map_err(|e| DetectError::Open {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
        let n = f.read(&mut head).unwrap_or(0);
        if n == 4 && PCAP_MAGICS.contains(&head) {
            Ok(Source::Pcap(path.to_path_buf()))
        } else {
            Ok(Source::FlowFile(path.to_path_buf()))
        }
    }
}

/// Destinations for results. Writers are flushed before returning.
#[derive(Default)]
pub struct Sinks {
    pub alert_log: Option<Box<dyn Write + Send>>,
    pub flow_log: Option<Box<dyn Write + Send>>,
    pub stream: Option<StreamSink>,
}

#[derive(Debug, Clone)]
pub struct DetectOptions {
    pub aggregator: AggregatorConfig,
    pub jobs: usize,
    pub cancel: CancelToken,
    /// Read timeout for live capture; also the cancellation latency.
    pub poll: Duration,
}

impl Default for DetectOptions {
    fn default() -> Self {
        DetectOptions {
            aggregator: AggregatorConfig::default(),
            jobs: 1,
            cancel: CancelToken::new(),
            poll: Duration::from_millis(100),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub flows: u64,
    pub alerts: u64,
    pub duration_s: f64,
    /// Flows that could not be classified and were left out.
    pub classify_errors: u64,
    /// Failed log writes; detection carries on.
    pub sink_errors: u64,
}

impl std::fmt::Display for RunSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "flows={} alerts={} duration={:.3}s classify_errors={} sink_errors={}",
            self.flows, self.alerts, self.duration_s, self.classify_errors, self.sink_errors
        )
    }
}

type Batch = Result<Vec<FlowRecord>, DetectError>;

/// Sends in batches; `false` once the consumer is gone.
struct Batcher {
    tx: Sender<Batch>,
    buf: Vec<FlowRecord>,
}

impl Batcher {
    fn push(&mut self, f: FlowRecord) -> bool {
        self.buf.push(f);
        self.buf.len() < BATCH || self.flush()
    }

    fn flush(&mut self) -> bool {
        if self.buf.is_empty() {
            return true;
        }
        self.tx.send(Ok(std::mem::take(&mut self.buf))).is_ok()
    }

    fn fail(mut self, e: DetectError) {
        if self.flush() {
            let _ = self.tx.send(Err(e));
        }
    }
}

fn produce_flow_file(path: PathBuf, mut out: Batcher, cancel: CancelToken) {
    let file = match File::open(&path) {
        Ok(f) => f,
        Err(e) => {
            return out.fail(DetectError::Open {
                path: path.display().to_string(),
                detail: e.to_string(),
            })
        }
    };
    let reader = match FlowReader::new(BufReader::new(file)) {
        Ok(r) => r,
        Err(FlowError::MissingHeader) => return,
        Err(e) => return out.fail(e.into()),
    };
    for rec in reader {
        if cancel.is_cancelled() {
            break;
        }
        match rec {
            Ok(f) => {
                if !out.push(f) {
                    return;
                }
            }
            Err(e) => return out.fail(e.into()),
        }
    }
    out.flush();
}

fn produce_pcap(path: PathBuf, cfg: AggregatorConfig, mut out: Batcher, cancel: CancelToken) {
    let mut agg = match Aggregator::new(cfg) {
        Ok(a) => a,
        Err(e) => return out.fail(DetectError::Config(e.0)),
    };
    let packets = match read_pcap(&path) {
        Ok(p) => p,
        Err(e) => return out.fail(e.into()),
    };
    for p in packets {
        if cancel.is_cancelled() {
            break;
        }
        match p {
            Ok(p) => agg.push(&p),
            Err(e) => return out.fail(e.into()),
        }
        while let Some(f) = agg.pop_ready() {
            if !out.push(f) {
                return;
            }
        }
    }
    for f in agg.finish() {
        if !out.push(f) {
            return;
        }
    }
    out.flush();
}

fn wall_clock() -> Timestamp {
    let now = SystemTime::now().duration_since(UNIX_EPOCH).unwrap_or_default();
    Timestamp(now.as_micros() as i64)
}

fn produce_live(mut cap: LiveCapture, cfg: AggregatorConfig, mut out: Batcher, cancel: CancelToken) {
    let mut agg = match Aggregator::new(cfg) {
        Ok(a) => a,
        Err(e) => return out.fail(DetectError::Config(e.0)),
    };
    let mut buf = vec![0u8; 65_536];
    let link = cap.link_type();
    let sweep_every = Duration::from_secs_f64(cfg.status_interval);
    let mut last_sweep = Instant::now();
    while !cancel.is_cancelled() {
        match cap.next_frame(&mut buf) {
            Ok(Some((n, ts))) => {
                if let Ok(Decoded::Packet(p)) = decode_packet(&buf[..n], link, ts) {
                    agg.push(&p);
                }
            }
            Ok(None) => {}
            Err(e) => return out.fail(DetectError::Capture(CaptureError::Io(e))),
        }
        if last_sweep.elapsed() >= sweep_every {
            agg.sweep(wall_clock());
            last_sweep = Instant::now();
        }
        let mut any = false;
        while let Some(f) = agg.pop_ready() {
            any = true;
            out.buf.push(f);
        }
        if any && !out.flush() {
            return;
        }
    }
    out.buf.extend(agg.finish());
    out.flush();
}

struct Output<'a> {
    sinks: &'a mut Sinks,
    summary: RunSummary,
}

impl Output<'_> {
    fn write_line(w: &mut Option<Box<dyn Write + Send>>, line: Result<String, FlowError>, errors: &mut u64) {
        let Some(w) = w else { return };
        let ok = match line {
            Ok(l) => writeln!(w, "{l}").is_ok(),
            Err(_) => false,
        };
        if !ok {
            *errors += 1;
            if *errors == 1 {
                log::warn!("log write failed; further failures are only counted");
            }
        }
    }

    fn emit(&mut self, flow: FlowRecord, c: Classification) {
        self.summary.flows += 1;
        let labeled = LabeledFlow { label: c.label, flow };
        Self::write_line(
            &mut self.sinks.flow_log,
            format_labeled_flow(&labeled),
            &mut self.summary.sink_errors,
        );
        let alert = (!c.triggering_model_ids.is_empty())
            .then(|| Alert::for_flow(labeled.flow.clone(), c.triggering_model_ids));
        if let Some(s) = &self.sinks.stream {
            s.publish(StreamMessage::Flow(labeled));
        }
        if let Some(a) = alert {
            self.summary.alerts += 1;
            Self::write_line(&mut self.sinks.alert_log, format_alert(&a), &mut self.summary.sink_errors);
            if let Some(s) = &self.sinks.stream {
                s.publish(StreamMessage::Alert(a));
            }
        }
    }

    fn flush(&mut self) {
        for w in [&mut self.sinks.alert_log, &mut self.sinks.flow_log].into_iter().flatten() {
            if w.flush().is_err() {
                self.summary.sink_errors += 1;
            }
        }
    }
}

/// Classifies every flow from `source` and feeds the sinks.
///
/// Returns once the source is exhausted or `opts.cancel` fires; the
/// producer thread has been joined and the writers flushed by then.
pub fn run_detection(
    source: Source,
    registry: &Registry,
    sinks: &mut Sinks,
    opts: &DetectOptions,
) -> Result<RunSummary, DetectError> {
    let started = Instant::now();
    opts.aggregator.validate().map_err(|e| DetectError::Config(e.0))?;
    let (tx, rx) = bounded::<Batch>(QUEUE_BATCHES);
    let out = Batcher { tx, buf: Vec::new() };
    let cancel = opts.cancel.clone();
    let cfg = opts.aggregator;
    let producer = match source {
        Source::FlowFile(p) => workers::spawn("detect-read", move || produce_flow_file(p, out, cancel)),
        Source::Pcap(p) => workers::spawn("detect-pcap", move || produce_pcap(p, cfg, out, cancel)),
        Source::Live(iface) => {
            let cap = LiveCapture::open(&iface, opts.poll)?;
            workers::spawn("detect-live", move || produce_live(cap, cfg, out, cancel))
        }
    }
    .map_err(|e| DetectError::Worker(e.to_string()))?;

    let pool = if opts.jobs > 1 {
        Some(workers::thread_pool(opts.jobs, "detect").map_err(|e| DetectError::Worker(e.to_string()))?)
    } else {
        None
    };
    let models = &registry.loaded;
    let mut output = Output {
        sinks,
        summary: RunSummary::default(),
    };
    let mut failure = None;
    for batch in rx.iter() {
        let flows = match batch {
            Ok(b) => b,
            Err(e) => {
                failure = Some(e);
                break;
            }
        };
        let results: Vec<_> = match &pool {
            Some(p) => p.install(|| flows.par_iter().map(|f| classify_flow(f, models)).collect()),
            None => flows.iter().map(|f| classify_flow(f, models)).collect(),
        };
        for (flow, r) in flows.into_iter().zip(results) {
            match r {
                Ok(c) => output.emit(flow, c),
                Err(e) => {
                    output.summary.classify_errors += 1;
                    log::warn!("unclassified flow: {e}");
                }
            }
        }
    }
    drop(rx);
    output.flush();
    let joined = producer.join();
    drop(pool);
    if joined.is_err() {
        return Err(DetectError::Worker("source thread panicked".into()));
    }
    if let Some(e) = failure {
        return Err(e);
    }
    let mut summary = output.summary;
    summary.duration_s = started.elapsed().as_secs_f64();
    Ok(summary)
}
