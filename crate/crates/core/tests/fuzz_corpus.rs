//! Replays the checked-in fuzz seeds on stable, with the same checks the
//! fuzz targets make.

use std::path::PathBuf;

use flowhunter::classifiers::codec::decode_payload;
use flowhunter::classifiers::{deserialize_model, serialize_model};
use flowhunter::dataset::parse_infected_ips;
use flowhunter::detector::{
    format_alert, format_labeled_flow, parse_alert_line, parse_labeled_flow_line, parse_metadata, parse_request,
};
use flowhunter::flow::{parse_flow_line, serialize_flow_line, FieldOrder, FlowReader};
use flowhunter::ingest::{aggregate, AggregatorConfig, PacketStream, PcapReader};
use flowhunter::optimize::{gene_pool, parse_pool_overrides};

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fuzz/corpus").join(target);
    let mut v: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap().to_string_lossy().starts_with("seed-"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    v.sort();
    assert!(!v.is_empty(), "no seeds for {target}");
    v
}

fn text(b: &[u8]) -> &str {
    std::str::from_utf8(b).expect("text seed")
}

#[test]
fn flow_line_seeds_round_trip() {
    let order = FieldOrder::canonical();
    for (name, s) in seeds("flow_line") {
        let f = parse_flow_line(text(&s), &order).unwrap_or_else(|e| panic!("{name}: {e}"));
        let t = serialize_flow_line(&f, &order).unwrap();
        assert_eq!(serialize_flow_line(&parse_flow_line(&t, &order).unwrap(), &order).unwrap(), t, "{name}");
    }
}

#[test]
fn flow_file_seeds_parse() {
    for (name, s) in seeds("flow_file") {
        let n = FlowReader::new(&s[..]).unwrap().collect::<Result<Vec<_>, _>>().unwrap_or_else(|e| panic!("{name}: {e}")).len();
        assert!(n > 0, "{name}");
    }
}

#[test]
fn packet_and_pcap_seeds_decode() {
    use flowhunter::flow::Timestamp;
    use flowhunter::ingest::{decode_packet, LinkType};
    for (name, s) in seeds("packet_decode") {
        let link = if s[0] & 1 == 0 { LinkType::Ethernet } else { LinkType::RawIp };
        decode_packet(&s[1..], link, Timestamp(0)).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
    for (name, s) in seeds("pcap_reader") {
        let stream = PacketStream::new(PcapReader::new(&s[..]).unwrap()).unwrap();
        let packets: Vec<_> = stream.collect::<Result<_, _>>().unwrap_or_else(|e| panic!("{name}: {e}"));
        let n = packets.len() as u64;
        let flows = aggregate(packets, AggregatorConfig::default()).unwrap();
        assert_eq!(flows.map(|f| f.tot_pkts).sum::<u64>(), n, "{name}");
    }
}

#[test]
fn model_seeds_decode() {
    for (name, s) in seeds("model_container") {
        let m = deserialize_model(&s).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(serialize_model(&m), s, "{name}");
    }
    for (name, s) in seeds("model_payload") {
        let m = decode_payload(&s).unwrap_or_else(|e| panic!("{name}: {e}"));
        let x = vec![0.0; m.feature_names.len()];
        m.predict(&x).unwrap();
        assert!(m.predict(&x[1..]).is_err(), "{name}");
    }
}

#[test]
fn text_seeds_parse() {
    for (name, s) in seeds("metadata") {
        parse_metadata(text(&s)).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
    for (name, s) in seeds("stream_request") {
        parse_request(text(&s)).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
    for (name, s) in seeds("infected_ips") {
        assert!(!parse_infected_ips(text(&s)).unwrap_or_else(|e| panic!("{name}: {e}")).is_empty());
    }
    for (name, s) in seeds("pool_overrides") {
        for (kind, ov) in parse_pool_overrides(text(&s)).unwrap_or_else(|e| panic!("{name}: {e}")) {
            let mut pool = gene_pool(kind);
            pool.apply_overrides(&ov).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert!(pool.contains(&pool.default_chromosome()));
        }
    }
}

#[test]
fn log_line_seeds_round_trip() {
    let (mut alerts, mut flows) = (0, 0);
    for (name, s) in seeds("log_lines") {
        let line = text(&s);
        if let Ok(a) = parse_alert_line(line) {
            let t = format_alert(&a).unwrap();
            assert_eq!(format_alert(&parse_alert_line(&t).unwrap()).unwrap(), t, "{name}");
            alerts += 1;
        }
        if let Ok(f) = parse_labeled_flow_line(line) {
            let t = format_labeled_flow(&f).unwrap();
            assert_eq!(format_labeled_flow(&parse_labeled_flow_line(&t).unwrap()).unwrap(), t, "{name}");
            flows += 1;
        }
    }
    assert!(alerts >= 1 && flows >= 1);
}
