#![no_main]

use flowhunter::detector::{format_alert, format_labeled_flow, parse_alert_line, parse_labeled_flow_line};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(line) = std::str::from_utf8(data) else { return };
    if let Ok(a) = parse_alert_line(line) {
        let text = format_alert(&a).expect("parsed alerts format");
        assert_eq!(format_alert(&parse_alert_line(&text).unwrap()).unwrap(), text);
    }
    if let Ok(f) = parse_labeled_flow_line(line) {
        let text = format_labeled_flow(&f).expect("parsed flows format");
        assert_eq!(format_labeled_flow(&parse_labeled_flow_line(&text).unwrap()).unwrap(), text);
    }
});
