//! Checked-in fixtures read back through the public API.

use std::path::{Path, PathBuf};

use tara_core::embfile::{decode, encode, read_embeddings, EmbFileHeader, HEADER_LEN};
use tara_core::eval::load_items;
use tara_core::miner::{mined_to_jsonl, read_mined};
use tara_core::{build_splits, CaptionCorpus, ChiralLexicon, Direction, LemmaTable, MinedRecord, Miner, Split};

fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel)
}

#[test]
fn template_mining_matches_golden() {
    let corpus = CaptionCorpus::load(&fixture("mining/corpus.jsonl")).unwrap();
    let miner = Miner::new(ChiralLexicon::default_lexicon(), LemmaTable::default_table());
    let records: Vec<MinedRecord> = miner
        .mine_chiral(&corpus)
        .iter()
        .map(|m| MinedRecord::new(m, &miner.rewrite_antonym_template(m)))
        .collect();
    let golden = std::fs::read_to_string(fixture("mining/mined.golden.jsonl")).unwrap();
    assert_eq!(mined_to_jsonl(&records), golden);
    assert_eq!(read_mined(&fixture("mining/mined.golden.jsonl")).unwrap(), records);
}

#[test]
fn golden_holds_exemplars() {
    let records = read_mined(&fixture("mining/mined.golden.jsonl")).unwrap();
    let lady = records.iter().find(|r| r.id == "c01").unwrap();
    assert!(lady.text.starts_with("The lady closes the container"));
    assert!(lady.antonym.as_deref().unwrap().starts_with("The lady opens the container"));
    assert_eq!(lady.object, "container");
    assert!(records.iter().all(|r| r.id != "c05"));
}

#[test]
fn default_lexicon_is_large_enough() {
    assert!(ChiralLexicon::default_lexicon().len() >= 35);
}

#[test]
fn split_goldens() {
    let items = load_items(&fixture("splits/items.jsonl")).unwrap();
    for direction in [Direction::T2v, Direction::V2t] {
        let built = build_splits(&items, direction).unwrap();
        assert!(built.dropped.is_empty());
        assert_eq!(built.tasks.len(), 3);
        for (split, task) in &built.tasks {
            let want = std::fs::read_to_string(fixture(&format!("splits/{direction}_{split}.golden.json"))).unwrap();
            assert_eq!(task.to_json(), want, "{direction}_{split}");
        }
        let all = &built.tasks[&Split::All];
        assert!(all.queries.iter().all(|q| q.candidates == all.gallery));
    }
}

#[test]
fn cross_fixture_header() {
    let bytes = std::fs::read(fixture("embfile/cross.emb")).unwrap();
    assert_eq!(HEADER_LEN, 24);
    let header = EmbFileHeader::parse(&bytes).unwrap();
    assert_eq!((header.version, header.rows, header.dim, header.dtype, header.normalized), (1, 3, 4, 0, false));
    assert_eq!(header.to_bytes().as_slice(), &bytes[..HEADER_LEN]);
}

#[test]
fn cross_fixture_values() {
    let m = read_embeddings(&fixture("embfile/cross.emb"), &fixture("embfile/cross.manifest.jsonl")).unwrap();
    assert_eq!(m.ids(), ["alpha", "beta", "gamma"]);
    assert_eq!(m.row(0), [1.0, -2.0, 0.5, 0.0]);
    assert_eq!(m.row(1)[2], f32::MAX);
    assert_eq!(m.row(1)[3].to_bits(), 1);
    assert!(m.row(1)[1].is_sign_negative() && m.row(1)[1] == 0.0);
    assert_eq!(m.row(2)[1], 1024.0);
    let (bytes, manifest) = encode(&m).unwrap();
    assert_eq!(decode(&bytes, &manifest).unwrap(), m);
}

#[test]
fn mock_embeddings_cover_items() {
    let items = load_items(&fixture("splits/items.jsonl")).unwrap();
    let video = read_embeddings(&fixture("embfile/mock_video.emb"), &fixture("embfile/mock_video.manifest.jsonl")).unwrap();
    let text = read_embeddings(&fixture("embfile/mock_text.emb"), &fixture("embfile/mock_text.manifest.jsonl")).unwrap();
    assert!(video.is_normalized() && text.is_normalized());
    for item in &items {
        assert!(video.get(&item.id).is_some() || text.get(&item.id).is_some(), "{}", item.id);
    }
}
