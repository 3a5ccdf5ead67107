#![no_main]

use libfuzzer_sys::fuzz_target;
use rex_core::info::{edge_ic, IcTable};
use rex_core::kg::parse_triples;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let kg = parse_triples("a\tr\tb\nb\ts\tc\n").unwrap();
    if let Ok(table) = IcTable::parse_tsv(text, &kg) {
        for t in kg.triples() {
            if let Ok(v) = edge_ic(&table, t) {
                assert!((0.0..=1.0).contains(&v));
            }
        }
    }
});
