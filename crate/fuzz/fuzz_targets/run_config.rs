#![no_main]

use libfuzzer_sys::fuzz_target;
use rex_cli::{Overrides, RunConfig};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let _ = RunConfig::parse(text, std::path::Path::new("."), &Overrides::default());
});
