#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = tara_core::composer::parse_triplets(text);
        if let Ok(ds) = tara_core::TripletDataset::parse(text) {
            assert_eq!(tara_core::TripletDataset::parse(&ds.to_jsonl()).unwrap(), ds);
        }
    }
});
