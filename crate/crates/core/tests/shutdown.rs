//! Worker census across a full detection run. Kept in its own binary so no
//! other test's threads are counted.

mod common;

use std::net::TcpStream;
use std::time::{Duration, Instant};

use common::*;
use flowhunter::detector::*;
use flowhunter::workers::{self, CancelToken};

fn os_threads() -> usize {
    std::fs::read_dir("/proc/self/task").map(|d| d.count()).unwrap_or(0)
}

fn settle(target: usize, f: impl Fn() -> usize) -> bool {
    let deadline = Instant::now() + Duration::from_secs(2);
    while f() > target {
        if Instant::now() >= deadline {
            return false;
        }
        std::thread::sleep(Duration::from_millis(10));
    }
    true
}

#[test]
fn no_orphans_after_cancelled_run() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.binetflow");
    let flows: Vec<_> = (0..5_000).map(|i| flow(i, (i % 256) as u8)).collect();
    write_flow_file(&input, &flows);
    let meta = write_registry(dir.path(), &[("ttl", &ttl_model())]);
    let reg = load_registry(dir.path(), &meta).unwrap();

    let base_workers = workers::live_workers();
    let base_threads = os_threads();

    let server = StreamServer::bind("127.0.0.1:0").unwrap();
    let tcp = TcpStream::connect(server.local_addr()).unwrap();
    let (_client, _) = tungstenite::client(format!("ws://{}/", server.local_addr()), tcp).unwrap();
    let cancel = CancelToken::new();
    let opts = DetectOptions {
        jobs: 4,
        cancel: cancel.clone(),
        ..Default::default()
    };
    let mut sinks = Sinks {
        stream: Some(server.sink()),
        ..Default::default()
    };
    let s = run_detection(Source::FlowFile(input.clone()), &reg, &mut sinks, &opts).unwrap();
    assert_eq!(s.flows, 5_000);
    cancel.cancel();
    let s = run_detection(Source::FlowFile(input), &reg, &mut sinks, &opts).unwrap();
    assert!(s.flows < 5_000);
    assert!(workers::live_workers() > base_workers);
    drop(sinks);
    server.shutdown();

    assert!(settle(base_workers, workers::live_workers), "library workers left: {}", workers::live_workers());
    assert!(settle(base_threads, os_threads), "os threads {} vs {base_threads}", os_threads());
}
