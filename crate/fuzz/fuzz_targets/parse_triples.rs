#![no_main]

use libfuzzer_sys::fuzz_target;
use rex_core::kg::{parse_triples, write_triples};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(kg) = parse_triples(text) else {
        return;
    };
    let degree_sum: u64 = kg.degrees().iter().map(|&d| d as u64).sum();
    assert_eq!(degree_sum, 2 * kg.len() as u64);
    // Written graphs parse back to the same size.
    let mut out = Vec::new();
    write_triples(&kg, &mut out).unwrap();
    let back = parse_triples(std::str::from_utf8(&out).unwrap()).unwrap();
    assert_eq!(back.len(), kg.len());
    let aug = kg.add_inverse_edges();
    assert_eq!(aug.add_inverse_edges().len(), aug.len());
});
