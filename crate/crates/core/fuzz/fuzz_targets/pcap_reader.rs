#![no_main]

use flowhunter::ingest::{aggregate, AggregatorConfig, PacketStream, PcapReader};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(reader) = PcapReader::new(data) else { return };
    let Ok(stream) = PacketStream::new(reader) else { return };
    let packets: Vec<_> = stream.take(512).map_while(Result::ok).collect();
    let n = packets.len() as u64;
    let flows = aggregate(packets, AggregatorConfig::default()).unwrap();
    assert_eq!(flows.map(|f| f.tot_pkts).sum::<u64>(), n);
});
