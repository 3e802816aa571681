#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(Some(reverse)) = tara_core::llm::parse_reply("#C C opens the door", text) {
            assert!(!reverse.is_empty() && reverse != "None");
        }
    }
});
