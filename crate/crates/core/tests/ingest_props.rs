mod common;

use common::*;
use flowhunter::flow::FlowWriter;
use flowhunter::ingest::{aggregate, extract_flows, AggregatorConfig};

#[test]
fn handshake_pcap_timings() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("hs.pcap");
    write_pcap(&p, &handshake_frames());
    let flows = extract_flows(&p, AggregatorConfig::default()).unwrap();
    assert_eq!(flows.len(), 1);
    let f = &flows[0];
    assert_eq!((f.syn_ack, f.ack_dat, f.tcp_rtt), (0.050, 0.070, 0.120));
    assert_eq!((f.src_pkts, f.dst_pkts, f.state.as_str()), (2, 1, "EST"));
}

#[test]
fn packets_and_bytes_are_conserved() {
    for seed in 0..100 {
        let pkts = random_packets(seed, 400);
        let cfg = AggregatorConfig {
            idle_timeout: 30.0,
            active_timeout: 120.0,
            status_interval: 5.0,
        };
        let flows: Vec<_> = aggregate(pkts.clone(), cfg).unwrap().collect();
        let n: u64 = flows.iter().map(|f| f.tot_pkts).sum();
        let bytes: u64 = flows.iter().map(|f| f.tot_bytes).sum();
        let app: u64 = flows.iter().map(|f| f.tot_app_bytes).sum();
        assert_eq!(n, pkts.len() as u64, "seed {seed}");
        assert_eq!(bytes, pkts.iter().map(|p| p.ip_total_len as u64).sum::<u64>(), "seed {seed}");
        assert_eq!(app, pkts.iter().map(|p| p.l4_payload_len as u64).sum::<u64>(), "seed {seed}");
        for f in &flows {
            f.check_invariants().unwrap();
        }
    }
}

#[test]
fn same_pcap_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let pcap = dir.path().join("mix.pcap");
    let mut frames = handshake_frames();
    let t = frames.last().unwrap().0;
    for i in 0..50u16 {
        frames.push((
            flowhunter::flow::Timestamp(t.0 + 1_000 * i as i64),
            flowhunter::ingest::packet::build::udp_frame(CLIENT, (SERVER.0, 53 + i % 3), 64, &[0u8; 40]),
        ));
    }
    write_pcap(&pcap, &frames);
    let render = || {
        let flows = extract_flows(&pcap, AggregatorConfig::default()).unwrap();
        let mut w = FlowWriter::new(Vec::new()).unwrap();
        for f in &flows {
            w.write(f).unwrap();
        }
        w.into_inner().unwrap()
    };
    let a = render();
    assert_eq!(a, render());
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 1 + 4);
}

#[test]
fn empty_pcap_gives_no_flows() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("empty.pcap");
    write_pcap(&p, &[]);
    assert!(extract_flows(&p, AggregatorConfig::default()).unwrap().is_empty());
}
