#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if data.is_empty() {
        return;
    }
    let rows = data[0] as usize;
    if let Ok(text) = std::str::from_utf8(&data[1..]) {
        if let Ok(ids) = tara_core::embfile::parse_manifest(text, rows) {
            assert_eq!(ids.len(), rows);
        }
    }
});
