#![no_main]

use flowhunter::classifiers::codec::decode_payload;
use libfuzzer_sys::fuzz_target;

// Past the checksum: a payload that validates must be safe to predict with.
fuzz_target!(|data: &[u8]| {
    if let Ok(m) = decode_payload(data) {
        let x = vec![0.0; m.feature_names.len()];
        let _ = m.predict(&x);
        let _ = m.predict(&x[..x.len() - 1]);
    }
});
