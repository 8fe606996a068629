#![no_main]

use flowhunter::dataset::parse_infected_ips;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = parse_infected_ips(text);
    }
});
