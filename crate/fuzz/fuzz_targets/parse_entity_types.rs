#![no_main]

use libfuzzer_sys::fuzz_target;
use rex_core::kg::{parse_entity_types, parse_triples};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let kg = parse_triples("a\tr\tb\nb\ts\tc\n").unwrap();
    if let Ok((types, _)) = parse_entity_types(text, &kg) {
        assert_eq!(types.len(), kg.num_entities());
    }
});
