#![no_main]

use libfuzzer_sys::fuzz_target;
use rex_core::explanation::OntologyHierarchy;
use rex_core::kg::{parse_triples, EntityId};

// Input: class-edge file, a NUL byte, annotation file.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let (edges, annotations) = text.split_once('\0').unwrap_or((text, ""));
    let kg = parse_triples("a\tr\tb\nb\ts\tc\n").unwrap();
    if let Ok((ont, _)) = OntologyHierarchy::parse(edges, annotations, &kg) {
        for i in 0..kg.num_entities() as u32 {
            for j in 0..kg.num_entities() as u32 {
                let lca = ont.lca(EntityId(i), EntityId(j));
                assert_eq!(lca, ont.lca(EntityId(j), EntityId(i)));
            }
        }
    }
});
