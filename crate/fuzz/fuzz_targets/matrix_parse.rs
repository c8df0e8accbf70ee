#![no_main]

use dgfm_core::topology::parse_matrix;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(rows) = parse_matrix(text) {
        let n = rows.len();
        assert!(rows.iter().all(|r| r.len() == n));
    }
});
