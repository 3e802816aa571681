#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(items) = tara_core::eval::parse_items(text) {
            for direction in [tara_core::Direction::T2v, tara_core::Direction::V2t] {
                let _ = tara_core::build_splits(&items, direction);
            }
        }
    }
});
