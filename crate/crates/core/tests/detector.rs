mod common;

use std::fs;
use std::io::{BufRead, BufReader};
use std::net::TcpStream;
use std::path::Path;
use std::time::{Duration, Instant};

use common::*;
use flowhunter::classifiers::ClassifierKind;
use flowhunter::detector::*;
use flowhunter::flow::{FlowRecord, LabelClass};
use tungstenite::{Message, WebSocket};

fn sinks_to(dir: &Path) -> Sinks {
    Sinks {
        alert_log: Some(Box::new(fs::File::create(dir.join("alerts.log")).unwrap())),
        flow_log: Some(Box::new(fs::File::create(dir.join("flows.log")).unwrap())),
        stream: None,
    }
}

fn lines(path: &Path) -> Vec<String> {
    BufReader::new(fs::File::open(path).unwrap()).lines().map(Result::unwrap).collect()
}

/// Ten flows, four of them with a TTL under the model threshold.
fn planted_flows() -> Vec<FlowRecord> {
    [64, 30, 128, 12, 64, 255, 49, 50, 2, 100]
        .iter()
        .enumerate()
        .map(|(i, t)| flow(i, *t))
        .collect()
}

#[test]
fn registry_loads_and_skips() {
    let dir = tempfile::tempdir().unwrap();
    let m = ttl_model();
    let meta = write_registry(dir.path(), &[("a", &m), ("b", &m), ("c", &m)]);
    let reg = load_registry(dir.path(), &meta).unwrap();
    assert_eq!((reg.loaded.len(), reg.skipped.len()), (3, 0));

    fs::remove_file(dir.path().join("b.fhm")).unwrap();
    let reg = load_registry(dir.path(), &meta).unwrap();
    assert_eq!((reg.loaded.len(), reg.skipped.len()), (2, 1));
    assert_eq!(reg.skipped[0].model_id, "b");
    assert!(!reg.skipped[0].reason.is_empty());

    fs::write(dir.path().join("a.fhm"), b"garbage").unwrap();
    fs::remove_file(dir.path().join("c.fhm")).unwrap();
    assert!(matches!(
        load_registry(dir.path(), &meta),
        Err(RegistryError::NoValidModels { skipped: 3 })
    ));

    fs::write(&meta, "not json").unwrap();
    assert!(matches!(load_registry(dir.path(), &meta), Err(RegistryError::MetadataParse { .. })));
}

#[test]
fn registry_rejects_inconsistent_entries() {
    let dir = tempfile::tempdir().unwrap();
    let m = ttl_model();
    let meta = write_registry(dir.path(), &[("a", &m)]);
    let mut doc = read_metadata(&meta).unwrap();
    let mut wrong_kind = doc.models[0].clone();
    wrong_kind.model_id = "k".into();
    wrong_kind.kind = ClassifierKind::KNN;
    let mut dup = doc.models[0].clone();
    dup.features = vec!["SrcBytes".into()];
    doc.models.push(wrong_kind);
    doc.models.push(dup);
    fs::write(&meta, serde_json::to_string(&doc).unwrap()).unwrap();
    let reg = load_registry(dir.path(), &meta).unwrap();
    assert_eq!(reg.ids(), vec!["a"]);
    assert_eq!(reg.skipped.len(), 2);
}

fn registry_of(n: usize, botnet: usize) -> Registry {
    let m = ttl_model();
    let models = (0..n)
        .map(|i| {
            let mut meta = ModelMetadata::describe(&format!("m{i}"), "", &m, String::new());
            meta.features = vec!["sTtl".into()];
            (meta, m.clone())
        })
        .collect::<Vec<_>>();
    let mut reg = Registry::from_models(models).unwrap();
    // Models past `botnet` see a TTL-free view by reading dTtl (57 > 50).
    for lm in reg.loaded.iter_mut().skip(botnet) {
        lm.fields = vec![flowhunter::flow::Field::DTtl];
    }
    reg
}

#[test]
fn or_combination() {
    let bot = flow(0, 10);
    let reg = registry_of(2, 0);
    let c = classify_flow(&bot, &reg.loaded).unwrap();
    assert_eq!(c.label, LabelClass::Normal);
    assert!(c.triggering_model_ids.is_empty());

    let reg = registry_of(2, 1);
    let c = classify_flow(&bot, &reg.loaded).unwrap();
    assert_eq!((c.label, c.triggering_model_ids.clone()), (LabelClass::Botnet, vec!["m0".to_string()]));

    let reg = registry_of(13, 5);
    let c = classify_flow(&bot, &reg.loaded).unwrap();
    assert_eq!(c.label, LabelClass::Botnet);
    assert_eq!(c.triggering_model_ids.len(), 5);
}

#[test]
fn metadata_fields_must_be_numeric() {
    let m = ttl_model();
    let mut meta = ModelMetadata::describe("x", "", &m, String::new());
    meta.features = vec!["SrcAddr".into()];
    let mut m2 = m.clone();
    m2.feature_names = meta.features.clone();
    assert!(matches!(
        Registry::from_models(vec![(meta, m2)]),
        Err(RegistryError::NoValidModels { skipped: 1 })
    ));
}

fn detect_flow_file(dir: &Path, flows: &[FlowRecord]) -> RunSummary {
    let input = dir.join("in.binetflow");
    write_flow_file(&input, flows);
    let meta = write_registry(dir, &[("ttl", &ttl_model())]);
    let reg = load_registry(dir, &meta).unwrap();
    let source = Source::sniff(&input).unwrap();
    assert_eq!(source, Source::FlowFile(input.clone()));
    run_detection(source, &reg, &mut sinks_to(dir), &DetectOptions::default()).unwrap()
}

#[test]
fn planted_flow_file_alerts_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let flows = planted_flows();
    let s = detect_flow_file(dir.path(), &flows);
    assert_eq!((s.flows, s.alerts), (10, 4));
    let alerts = lines(&dir.path().join("alerts.log"));
    assert_eq!(alerts.len(), 4);
    for l in &alerts {
        let a = parse_alert_line(l).unwrap();
        assert!(a.flow.s_ttl < 50);
        assert_eq!(a.triggering_model_ids, vec!["ttl"]);
        assert_eq!(a.timestamp, a.flow.last_time);
    }
    let logged = lines(&dir.path().join("flows.log"));
    assert_eq!(logged.len(), 10);
    for (l, f) in logged.iter().zip(&flows) {
        let lf = parse_labeled_flow_line(l).unwrap();
        assert_eq!(&lf.flow, f);
        assert_eq!(lf.label.is_botnet(), f.s_ttl < 50);
    }
}

#[test]
fn empty_flow_file() {
    let dir = tempfile::tempdir().unwrap();
    let s = detect_flow_file(dir.path(), &[]);
    assert_eq!((s.flows, s.alerts), (0, 0));
    let input = dir.path().join("blank");
    fs::write(&input, "").unwrap();
    let reg = load_registry(dir.path(), &dir.path().join("models.json")).unwrap();
    let s = run_detection(Source::sniff(&input).unwrap(), &reg, &mut Sinks::default(), &DetectOptions::default()).unwrap();
    assert_eq!(s.flows, 0);
}

#[test]
fn offline_output_is_byte_identical() {
    let flows: Vec<FlowRecord> = (0..700).map(|i| flow(i, (i * 37 % 256) as u8)).collect();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    detect_flow_file(a.path(), &flows);
    let input = b.path().join("in.binetflow");
    write_flow_file(&input, &flows);
    let meta = write_registry(b.path(), &[("ttl", &ttl_model())]);
    let reg = load_registry(b.path(), &meta).unwrap();
    let opts = DetectOptions {
        jobs: 4,
        ..Default::default()
    };
    run_detection(Source::FlowFile(input), &reg, &mut sinks_to(b.path()), &opts).unwrap();
    for f in ["alerts.log", "flows.log"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn pcap_source_is_sniffed_and_aggregated() {
    let dir = tempfile::tempdir().unwrap();
    let pcap = dir.path().join("hs.pcap");
    write_pcap(&pcap, &handshake_frames());
    let meta = write_registry(dir.path(), &[("ttl", &ttl_model())]);
    let reg = load_registry(dir.path(), &meta).unwrap();
    let source = Source::sniff(&pcap).unwrap();
    assert_eq!(source, Source::Pcap(pcap.clone()));
    let s = run_detection(source, &reg, &mut sinks_to(dir.path()), &DetectOptions::default()).unwrap();
    assert_eq!((s.flows, s.alerts), (1, 0));
    let lf = parse_labeled_flow_line(&lines(&dir.path().join("flows.log"))[0]).unwrap();
    assert_eq!((lf.flow.syn_ack, lf.flow.ack_dat, lf.flow.tcp_rtt), (0.050, 0.070, 0.120));
}

#[test]
fn source_errors_propagate() {
    let dir = tempfile::tempdir().unwrap();
    let meta = write_registry(dir.path(), &[("ttl", &ttl_model())]);
    let reg = load_registry(dir.path(), &meta).unwrap();
    let bad = dir.path().join("bad.binetflow");
    let mut text = fs::read_to_string({
        let p = dir.path().join("ok.binetflow");
        write_flow_file(&p, &planted_flows());
        p
    })
    .unwrap();
    text.push_str("1,2,3\n");
    fs::write(&bad, text).unwrap();
    let mut sinks = sinks_to(dir.path());
    let err = run_detection(Source::FlowFile(bad), &reg, &mut sinks, &DetectOptions::default()).unwrap_err();
    assert!(matches!(err, DetectError::Flow(_)), "{err}");
    assert!(matches!(
        run_detection(
            Source::FlowFile(dir.path().join("missing")),
            &reg,
            &mut Sinks::default(),
            &DetectOptions::default()
        ),
        Err(DetectError::Open { .. })
    ));
}

struct FailingWriter;

impl std::io::Write for FailingWriter {
    fn write(&mut self, _: &[u8]) -> std::io::Result<usize> {
        Err(std::io::Error::other("disk full"))
    }
    fn flush(&mut self) -> std::io::Result<()> {
        Ok(())
    }
}

#[test]
fn sink_failures_are_counted_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.binetflow");
    write_flow_file(&input, &planted_flows());
    let meta = write_registry(dir.path(), &[("ttl", &ttl_model())]);
    let reg = load_registry(dir.path(), &meta).unwrap();
    let mut sinks = Sinks {
        alert_log: Some(Box::new(FailingWriter)),
        flow_log: None,
        stream: None,
    };
    let s = run_detection(Source::FlowFile(input), &reg, &mut sinks, &DetectOptions::default()).unwrap();
    assert_eq!((s.flows, s.alerts, s.sink_errors), (10, 4, 4));
}

fn connect(addr: std::net::SocketAddr) -> WebSocket<TcpStream> {
    let tcp = TcpStream::connect(addr).unwrap();
    tcp.set_read_timeout(Some(Duration::from_secs(5))).unwrap();
    let (ws, _) = tungstenite::client(format!("ws://{addr}/"), tcp).unwrap();
    ws
}

fn recv(ws: &mut WebSocket<TcpStream>) -> StreamMessage {
    loop {
        match ws.read().unwrap() {
            Message::Text(t) => return serde_json::from_str(t.as_str()).unwrap(),
            Message::Close(_) => panic!("closed"),
            _ => {}
        }
    }
}

fn wait_clients(server: &StreamServer, n: usize) {
    let deadline = Instant::now() + Duration::from_secs(5);
    while server.client_count() < n {
        assert!(Instant::now() < deadline, "clients never registered");
        std::thread::sleep(Duration::from_millis(5));
    }
}

#[test]
fn stream_replay_and_broadcast() {
    let server = StreamServer::bind("127.0.0.1:0").unwrap();
    let sink = server.sink();
    for i in 0..5 {
        sink.publish(StreamMessage::Flow(LabeledFlow {
            label: LabelClass::Normal,
            flow: flow(i, 64),
        }));
    }
    let mut a = connect(server.local_addr());
    a.send(Message::text("get_all_data")).unwrap();
    let StreamMessage::AllData { flows, alerts } = recv(&mut a) else { panic!("expected all_data") };
    assert_eq!((flows.len(), alerts.len()), (5, 0));
    assert_eq!(flows[4].flow, flow(4, 64));

    let mut b = connect(server.local_addr());
    wait_clients(&server, 2);
    let alert = Alert::for_flow(flow(9, 10), vec!["ttl".into()]);
    sink.publish(StreamMessage::Alert(alert.clone()));
    for ws in [&mut a, &mut b] {
        assert_eq!(recv(ws), StreamMessage::Alert(alert.clone()));
    }
    b.send(Message::text(r#"{"type":"get_all_data"}"#)).unwrap();
    let StreamMessage::AllData { flows, alerts } = recv(&mut b) else { panic!("expected all_data") };
    assert_eq!((flows.len(), alerts.len()), (5, 1));
    server.shutdown();
    assert_eq!(sink.dropped(), 0);
}

#[test]
fn detection_feeds_stream_one_message_per_event() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.binetflow");
    write_flow_file(&input, &planted_flows());
    let meta = write_registry(dir.path(), &[("ttl", &ttl_model())]);
    let reg = load_registry(dir.path(), &meta).unwrap();
    let server = StreamServer::bind("127.0.0.1:0").unwrap();
    let mut client = connect(server.local_addr());
    wait_clients(&server, 1);
    let mut sinks = Sinks {
        stream: Some(server.sink()),
        ..Default::default()
    };
    let s = run_detection(Source::FlowFile(input), &reg, &mut sinks, &DetectOptions::default()).unwrap();
    let (mut flows, mut alerts) = (0, 0);
    for _ in 0..s.flows + s.alerts {
        match recv(&mut client) {
            StreamMessage::Flow(_) => flows += 1,
            StreamMessage::Alert(_) => alerts += 1,
            StreamMessage::AllData { .. } => panic!("unsolicited replay"),
        }
    }
    assert_eq!((flows, alerts), (10, 4));
    drop(sinks);
    server.shutdown();
}

#[test]
fn publishing_without_clients_never_blocks() {
    let server = StreamServer::bind("127.0.0.1:0").unwrap();
    let sink = server.sink();
    let started = Instant::now();
    for i in 0..20_000 {
        sink.publish(StreamMessage::Flow(LabeledFlow {
            label: LabelClass::Normal,
            flow: flow(i, 64),
        }));
    }
    assert!(started.elapsed() < Duration::from_secs(5));
    server.shutdown();
}

fn golden(name: &str, actual: &str) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::write(&path, format!("{actual}\n")).unwrap();
    }
    let expected = fs::read_to_string(&path).unwrap();
    assert_eq!(expected.trim_end(), actual, "{name}");
}

#[test]
fn golden_stream_messages() {
    let mut f = flow(3, 12);
    f.label = Some("flow=From-Botnet-V42-UDP-DNS".into());
    let lf = LabeledFlow {
        label: LabelClass::Botnet,
        flow: f.clone(),
    };
    let alert = Alert::for_flow(f, vec!["rf".into(), "dt".into()]);
    let msgs = [
        ("stream_flow.json", StreamMessage::Flow(lf.clone())),
        ("stream_alert.json", StreamMessage::Alert(alert.clone())),
        (
            "stream_all_data.json",
            StreamMessage::AllData {
                flows: vec![lf],
                alerts: vec![alert],
            },
        ),
    ];
    for (name, m) in msgs {
        let text = m.to_json();
        golden(name, &text);
        assert_eq!(serde_json::from_str::<StreamMessage>(&text).unwrap(), m);
    }
}

#[test]
fn golden_log_lines() {
    let mut f = flow(3, 12);
    f.label = Some("flow=From-Botnet-V42-UDP-DNS".into());
    let alert = Alert::for_flow(f.clone(), vec!["rf".into(), "dt".into()]);
    let a = format_alert(&alert).unwrap();
    let l = format_labeled_flow(&LabeledFlow {
        label: LabelClass::Botnet,
        flow: f,
    })
    .unwrap();
    golden("alert_line.txt", &a);
    golden("flow_log_line.txt", &l);
    assert_eq!(parse_alert_line(&a).unwrap(), alert);
}
