#![allow(dead_code)]

use std::net::Ipv4Addr;
use std::path::{Path, PathBuf};

use flowhunter::classifiers::codec::serialize_model;
use flowhunter::classifiers::{fit, ClassifierKind, ClassifierSpec, TrainedModel};
use flowhunter::dataset::{LabeledDataset, Matrix};
use flowhunter::detector::{upsert_metadata, ModelMetadata};
use flowhunter::flow::{FlowRecord, LabelClass, Timestamp};
use flowhunter::ingest::packet::build;
use flowhunter::ingest::{LinkType, PacketSummary, PcapWriter, TcpFlags};
use flowhunter::rng;
use rand::Rng;

pub const T0: i64 = 1_313_675_000_000_000;

/// A consistent TCP flow whose only varying feature is the source TTL.
pub fn flow(i: usize, s_ttl: u8) -> FlowRecord {
    FlowRecord {
        src_addr: format!("10.0.0.{}", 1 + i % 200),
        dst_addr: "147.32.80.9".into(),
        proto: "tcp".into(),
        sport: Some(40_000 + i as u16),
        dport: Some(443),
        state: "EST".into(),
        s_ttl,
        d_ttl: 57,
        d_hops: 7,
        src_win: 64_240,
        dst_win: 65_535,
        src_pkts: 3,
        dst_pkts: 2,
        tot_pkts: 5,
        src_bytes: 300,
        dst_bytes: 900,
        tot_bytes: 1200,
        start_time: Timestamp(T0 + i as i64 * 1_000_000),
        last_time: Timestamp(T0 + i as i64 * 1_000_000 + 500_000),
        dur: 0.5,
        rate: 10.0,
        src_rate: 6.0,
        dst_rate: 4.0,
        ..Default::default()
    }
}

/// Every TTL once; Botnet below 50.
pub fn ttl_dataset() -> LabeledDataset {
    let rows: Vec<Vec<f64>> = (1..=255).map(|t| vec![t as f64]).collect();
    let y = (1..=255)
        .map(|t| if t < 50 { LabelClass::Botnet } else { LabelClass::Normal })
        .collect();
    LabeledDataset::new(Matrix::from_rows(&rows).unwrap(), y, vec!["sTtl".into()], "ttl-threshold").unwrap()
}

pub fn ttl_model() -> TrainedModel {
    fit(&ClassifierSpec::default_for(ClassifierKind::DecisionTree), &ttl_dataset(), 0).unwrap()
}

/// Writes each model as `<id>.fhm` and registers it; returns the metadata path.
pub fn write_registry(dir: &Path, models: &[(&str, &TrainedModel)]) -> PathBuf {
    let meta = dir.join("models.json");
    for (id, m) in models {
        let file = format!("{id}.fhm");
        std::fs::write(dir.join(&file), serialize_model(m)).unwrap();
        upsert_metadata(
            &meta,
            ModelMetadata::describe(id, &file, m, "2024-01-01T00:00:00Z".into()),
        )
        .unwrap();
    }
    meta
}

pub fn write_flow_file(path: &Path, flows: &[FlowRecord]) {
    let mut w = flowhunter::flow::FlowWriter::new(std::fs::File::create(path).unwrap()).unwrap();
    for f in flows {
        w.write(f).unwrap();
    }
    w.into_inner().unwrap();
}

pub const CLIENT: (Ipv4Addr, u16) = (Ipv4Addr::new(10, 0, 0, 5), 49_152);
pub const SERVER: (Ipv4Addr, u16) = (Ipv4Addr::new(93, 184, 216, 34), 80);

/// SYN at 0, SYN-ACK at 50 ms, ACK at 120 ms.
pub fn handshake_frames() -> Vec<(Timestamp, Vec<u8>)> {
    vec![
        (Timestamp(T0), build::tcp_frame(CLIENT, SERVER, build::SYN, 64_240, 64, true, &[])),
        (Timestamp(T0 + 50_000), build::tcp_frame(SERVER, CLIENT, build::SYN_ACK, 65_535, 57, true, &[])),
        (Timestamp(T0 + 120_000), build::tcp_frame(CLIENT, SERVER, build::ACK, 502, 64, false, &[])),
    ]
}

pub fn write_pcap(path: &Path, frames: &[(Timestamp, Vec<u8>)]) {
    let mut w = PcapWriter::new(std::fs::File::create(path).unwrap(), LinkType::Ethernet).unwrap();
    for (ts, f) in frames {
        w.write_frame(*ts, f).unwrap();
    }
    w.into_inner().unwrap();
}

/// Random packets among a few hosts, with occasional long gaps.
pub fn random_packets(seed: u64, n: usize) -> Vec<PacketSummary> {
    let mut r = rng::stream(seed, 99);
    let hosts = [
        Ipv4Addr::new(10, 0, 0, 1),
        Ipv4Addr::new(10, 0, 0, 2),
        Ipv4Addr::new(192, 168, 1, 7),
        Ipv4Addr::new(8, 8, 8, 8),
    ];
    let mut t = T0;
    (0..n)
        .map(|_| {
            t += if r.gen_bool(0.02) {
                r.gen_range(50_000_000..200_000_000)
            } else {
                r.gen_range(0..2_000_000)
            };
            let proto = [6u8, 17, 1][r.gen_range(0..3)];
            let (sport, dport) = if proto == 1 {
                (None, None)
            } else {
                (Some(r.gen_range(1000..1004)), Some([53, 80, 443][r.gen_range(0..3)]))
            };
            let payload = r.gen_range(0..1400u32);
            let hdr = match proto {
                6 => 40,
                17 => 28,
                _ => 28,
            };
            let flags = if proto == 6 {
                [TcpFlags::SYN, TcpFlags::SYN | TcpFlags::ACK, TcpFlags::ACK, TcpFlags::ACK | TcpFlags::FIN, TcpFlags::RST, TcpFlags::ACK | TcpFlags::PSH]
                    [r.gen_range(0..6)]
            } else {
                0
            };
            let a = r.gen_range(0..hosts.len());
            let b = (a + r.gen_range(1..hosts.len())) % hosts.len();
            PacketSummary {
                timestamp: Timestamp(t),
                src_addr: hosts[a],
                dst_addr: hosts[b],
                proto,
                sport,
                dport,
                ttl: r.gen_range(1..=255),
                tos: 0,
                ip_total_len: hdr + payload,
                l4_payload_len: payload,
                tcp_flags: TcpFlags(flags),
                tcp_window: if proto == 6 { r.gen_range(0..65_536) } else { 0 },
            }
        })
        .collect()
}

/// Synthetic flow-feature table: a tight Botnet box on sTtl, SrcWin and
/// SrcBytes, with Normal near-miss groups that sit inside the box on two
/// of the three and just outside on the third.
pub fn synthetic_dataset(n: usize, botnet_fraction: f64, seed: u64) -> LabeledDataset {
    let mut r = rng::stream(seed, 7);
    let names: Vec<String> = ["sTtl", "SrcWin", "SrcBytes", "DstBytes", "TotBytes", "Dur"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let n_bot = (n as f64 * botnet_fraction).round() as usize;
    let mut rows = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let bot = i < n_bot;
        let mut ttl = r.gen_range(100.0..=120.0f64).round();
        let mut win = r.gen_range(8_000.0..9_000.0f64).round();
        let mut sbytes = r.gen_range(500.0..700.0f64).round();
        if !bot {
            match r.gen_range(0..5) {
                0 => ttl = [r.gen_range(122.0..=135.0f64), r.gen_range(85.0..=98.0)][r.gen_range(0..2)].round(),
                1 => win = [r.gen_range(9_100.0..10_500.0f64), r.gen_range(6_500.0..7_900.0)][r.gen_range(0..2)].round(),
                2 => sbytes = [r.gen_range(720.0..900.0f64), r.gen_range(300.0..480.0)][r.gen_range(0..2)].round(),
                _ => {
                    ttl = r.gen_range(30.0..=255.0f64).round();
                    win = r.gen_range(0.0..65_535.0f64).round();
                    sbytes = (60.0f64 * 10f64.powf(r.gen_range(0.0..4.0))).round();
                }
            }
        }
        let dbytes = (100.0f64 * 10f64.powf(r.gen_range(0.0..3.0))).round();
        let dur = r.gen_range(0.0..30.0f64);
        rows.push(vec![ttl, win, sbytes, dbytes, sbytes + dbytes, dur]);
        y.push(if bot { LabelClass::Botnet } else { LabelClass::Normal });
    }
    LabeledDataset::new(Matrix::from_rows(&rows).unwrap(), y, names, format!("synthetic-{n}")).unwrap()
}
