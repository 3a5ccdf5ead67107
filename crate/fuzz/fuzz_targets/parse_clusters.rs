#![no_main]

use libfuzzer_sys::fuzz_target;
use rex_core::info::{build_clustered_graph, ClusterAssignment};
use rex_core::kg::parse_triples;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let kg = parse_triples("a\tr\tb\nb\ts\tc\nc\tr\ta\n").unwrap();
    if let Ok(c) = ClusterAssignment::parse_tsv(text, &kg) {
        assert!(c.labels().iter().all(|&l| (l as usize) < c.k()));
        let g = build_clustered_graph(&kg, &c).unwrap();
        assert!(g.len() <= kg.len());
    }
});
