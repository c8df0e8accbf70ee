#![no_main]

use dgfm_core::data::parse_libsvm;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(ds) = parse_libsvm(data) else { return };
    // a parsed dataset must survive its own serialization
    let back = parse_libsvm(ds.to_libsvm().as_bytes()).expect("reparse");
    assert_eq!(back.labels, ds.labels);
    assert_eq!(back.rows.len(), ds.rows.len());
    for (a, b) in back.rows.iter().zip(&ds.rows) {
        assert_eq!(a.indices, b.indices);
        assert!(a.values.iter().zip(&b.values).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
});
