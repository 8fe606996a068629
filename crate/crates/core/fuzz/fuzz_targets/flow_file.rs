#![no_main]

use flowhunter::flow::FlowReader;
use libfuzzer_sys::fuzz_target;

// Header-driven column order, then records.
fuzz_target!(|data: &[u8]| {
    if let Ok(reader) = FlowReader::new(data) {
        for rec in reader.take(256) {
            let _ = rec;
        }
    }
});
