#![no_main]

use flowhunter::classifiers::{deserialize_model, serialize_model};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(m) = deserialize_model(data) {
        assert_eq!(serialize_model(&m), data);
    }
});
