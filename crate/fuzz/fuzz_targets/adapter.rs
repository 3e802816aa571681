#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(file) = tara_core::AdapterFile::parse(text) {
            let params = file.params().unwrap();
            assert_eq!(params.weight.len(), params.dim_in * params.dim_out);
        }
    }
});
