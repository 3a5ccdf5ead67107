#![no_main]

use libfuzzer_sys::fuzz_target;
use rex_core::kg::parse_triples;
use rex_core::pathfinder::Checkpoint;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    // Same vocabulary as the checkpoint seed.
    let kg = parse_triples("a\tr\tb\nb\ts\tc\nb\t_inv_r\ta\nc\t_inv_s\tb\n").unwrap();
    if let Ok(ckpt) = Checkpoint::parse(text) {
        let _ = ckpt.policy(&kg);
        let _ = ckpt.into_trainer(&kg);
    }
});
