#![no_main]

use libfuzzer_sys::fuzz_target;
use rex_core::kg::{parse_hypotheses, parse_triples};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let kg = parse_triples("a\tr\tb\nb\ts\tc\nc\tr\ta\n").unwrap();
    if let Ok(hs) = parse_hypotheses(text, &kg) {
        assert!(hs.iter().all(|h| h.subject != h.object));
    }
});
