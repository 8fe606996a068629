use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;

use flowhunter::detector::{load_registry, run_detection, DetectOptions, Sinks, Source, StreamServer};
use flowhunter::workers::CancelToken;

use super::train::{metadata_path, models_dir};
use super::{aggregator, write_err, Globals};
use crate::args::DetectArgs;
use crate::config::Config;
use crate::error::{CliError, CliResult};

fn append(path: &Path) -> CliResult<Box<dyn Write + Send>> {
    let f: File = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| write_err(path, e))?;
    Ok(Box::new(BufWriter::new(f)))
}

pub fn run(a: &DetectArgs, cfg: &Config, g: &Globals) -> CliResult<()> {
    let dc = &cfg.detect;
    let agg = aggregator(&a.aggregator, &cfg.aggregator)?;
    let dir = models_dir(&a.models_dir, cfg)?;
    let meta = metadata_path(&a.metadata, cfg, &dir);
    let source = match (&a.read, &a.interface) {
        (Some(p), _) => Source::sniff(p)?,
        (None, Some(i)) => Source::Live(i.clone()),
        (None, None) => return Err(CliError::usage("one of -r or -i is required")),
    };

    let registry = load_registry(&dir, &meta)?;
    for s in &registry.skipped {
        log::warn!("model {} skipped: {}", s.model_id, s.reason);
    }
    log::info!("models: {}", registry.ids().join(", "));

    let server = match a.listen.as_ref().or(dc.listen.as_ref()) {
        Some(addr) => {
            let s = StreamServer::bind(addr)?;
            eprintln!("streaming on ws://{}/", s.local_addr());
            Some(s)
        }
        None => None,
    };
    let alert_log = a.alert_log.as_ref().or(dc.alert_log.as_ref());
    let flow_log = a.flow_log.as_ref().or(dc.flow_log.as_ref());
    let mut sinks = Sinks {
        alert_log: alert_log.map(|p| append(p)).transpose()?,
        flow_log: flow_log.map(|p| append(p)).transpose()?,
        stream: server.as_ref().map(|s| s.sink()),
    };

    let cancel = CancelToken::new();
    let on_signal = cancel.clone();
    if let Err(e) = ctrlc::set_handler(move || on_signal.cancel()) {
        log::warn!("interrupt handler not installed: {e}");
    }
    let opts = DetectOptions {
        aggregator: agg,
        jobs: g.jobs,
        cancel,
        ..Default::default()
    };
    let result = run_detection(source, &registry, &mut sinks, &opts);
    drop(sinks);
    if let Some(s) = server {
        s.shutdown();
    }
    let summary = result?;
    println!("{summary}");
    if summary.sink_errors > 0 {
        return Err(CliError::runtime(format!("{} log writes failed", summary.sink_errors)));
    }
    Ok(())
}
