#![no_main]

use libfuzzer_sys::fuzz_target;
use rex_core::explanation::ExplanationSubgraph;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(g) = ExplanationSubgraph::from_json(text) {
        let _ = g.to_dot();
        let _ = ExplanationSubgraph::from_json(&g.to_json());
    }
});
