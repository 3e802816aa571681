#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(corpus) = tara_core::CaptionCorpus::parse(text) {
            // a parsed corpus reserializes to something that parses the same
            let again = tara_core::CaptionCorpus::parse(&corpus.to_jsonl()).unwrap();
            assert_eq!(again.len(), corpus.len());
        }
    }
});
