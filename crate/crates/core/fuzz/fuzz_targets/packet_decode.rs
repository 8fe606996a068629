#![no_main]

use flowhunter::flow::Timestamp;
use flowhunter::ingest::{decode_packet, LinkType};
use libfuzzer_sys::fuzz_target;

// First byte picks the link type; the rest is the frame.
fuzz_target!(|data: &[u8]| {
    let Some((&sel, frame)) = data.split_first() else { return };
    let link = if sel & 1 == 0 { LinkType::Ethernet } else { LinkType::RawIp };
    let _ = decode_packet(frame, link, Timestamp(0));
});
