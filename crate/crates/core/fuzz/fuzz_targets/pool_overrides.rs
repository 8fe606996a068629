#![no_main]

use flowhunter::optimize::{gene_pool, parse_pool_overrides};
use libfuzzer_sys::fuzz_target;

// Overrides that apply cleanly must leave the default chromosome in the pool.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(all) = parse_pool_overrides(text) else { return };
    for (kind, ov) in all {
        let mut pool = gene_pool(kind);
        if pool.apply_overrides(&ov).is_ok() {
            assert!(pool.contains(&pool.default_chromosome()));
        }
    }
});
