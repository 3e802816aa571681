#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        thread_local! {
            static MINER: tara_core::Miner = tara_core::Miner::new(
                tara_core::ChiralLexicon::default_lexicon(),
                tara_core::LemmaTable::default_table(),
            );
        }
        MINER.with(|m| {
            if let Some(vo) = m.extract_verb_object(text) {
                assert!(text.is_char_boundary(vo.span.start) && text.is_char_boundary(vo.span.end));
                let caption = tara_core::Caption::new("f", text, tara_core::Source::Other);
                let mined = tara_core::MinedCaption { caption, vo };
                let _ = m.rewrite_antonym_template(&mined);
            }
        });
    }
});
