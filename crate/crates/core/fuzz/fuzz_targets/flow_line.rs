#![no_main]

use flowhunter::flow::{parse_flow_line, serialize_flow_line, FieldOrder};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(line) = std::str::from_utf8(data) else { return };
    let order = FieldOrder::canonical();
    if let Ok(flow) = parse_flow_line(line, &order) {
        // Whatever parses must serialize and parse back to the same record.
        let text = serialize_flow_line(&flow, &order).expect("parsed flows serialize");
        let again = parse_flow_line(&text, &order).expect("serialized flows parse");
        assert_eq!(serialize_flow_line(&again, &order).unwrap(), text);
    }
});
