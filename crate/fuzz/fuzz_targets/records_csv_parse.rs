#![no_main]

use dgfm_core::metrics::parse_records_csv;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    let _ = parse_records_csv(text);
});
