#![no_main]

use dgfm_core::topology::{build_metropolis_hastings, parse_adjacency};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    let Ok(adj) = parse_adjacency(text) else { return };
    if adj.len() > 64 {
        return;
    }
    if let Ok(w) = build_metropolis_hastings(&adj) {
        assert!(w.rho() < 1.0);
    }
});
