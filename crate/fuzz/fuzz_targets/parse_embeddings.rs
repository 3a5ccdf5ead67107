#![no_main]

use libfuzzer_sys::fuzz_target;
use rex_core::info::parse_embeddings;
use rex_core::kg::parse_triples;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let kg = parse_triples("a\tr\tb\nb\ts\tc\n").unwrap();
    if let Ok(emb) = parse_embeddings(text, &kg) {
        assert_eq!(emb.len(), kg.num_entities());
        assert!(emb.rows().flatten().all(|x| x.is_finite()));
    }
});
