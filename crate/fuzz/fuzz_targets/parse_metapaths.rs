#![no_main]

use libfuzzer_sys::fuzz_target;
use rex_core::explanation::{parse_metapaths, write_metapaths};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(mps) = parse_metapaths(text) {
        let mut out = Vec::new();
        write_metapaths(&mps, &mut out).unwrap();
        let back = parse_metapaths(std::str::from_utf8(&out).unwrap()).unwrap();
        assert_eq!(back, mps);
    }
});
