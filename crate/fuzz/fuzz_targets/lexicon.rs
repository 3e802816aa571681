#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(lexicon) = tara_core::ChiralLexicon::parse(text) {
            let _ = tara_core::Miner::new(lexicon, tara_core::LemmaTable::default_table());
        }
    }
});
