//! Triplet construction and static/temporal dataset composition.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Side;
use crate::error::{Error, Result};
use crate::io;
use crate::miner::{replace_subjects, MinedRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TripletKind {
    Static,
    Temporal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Triplet {
    pub anchor: String,
    pub positive: String,
    pub negative: String,
    pub kind: TripletKind,
    pub pair_id: Option<i64>,
}

impl Triplet {
    pub fn validate(&self) -> Result<()> {
        let texts = [&self.anchor, &self.positive, &self.negative];
        if texts.iter().any(|t| t.trim().is_empty()) {
            return Err(Error::invalid("triplet has an empty sentence"));
        }
        if self.anchor == self.positive || self.anchor == self.negative || self.positive == self.negative
        {
            return Err(Error::invalid(format!(
                "triplet sentences are not pairwise distinct: {:?}",
                self.anchor
            )));
        }
        match (self.kind, self.pair_id) {
            (TripletKind::Temporal, None) => {
                Err(Error::invalid("temporal triplet without pair_id"))
            }
            (TripletKind::Static, Some(_)) => Err(Error::invalid("static triplet with pair_id")),
            _ => Ok(()),
        }
    }

    pub fn sentences(&self) -> [&str; 3] {
        [&self.anchor, &self.positive, &self.negative]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetHeader {
    pub n_static: usize,
    pub n_temporal: usize,
    pub alpha: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripletDataset {
    pub triplets: Vec<Triplet>,
    pub n_static: usize,
    pub n_temporal: usize,
    pub seed: u64,
    pub alpha: f64,
}

impl TripletDataset {
    pub fn header(&self) -> DatasetHeader {
        DatasetHeader {
            n_static: self.n_static,
            n_temporal: self.n_temporal,
            alpha: self.alpha,
            seed: self.seed,
        }
    }

    pub fn len(&self) -> usize {
        self.triplets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triplets.is_empty()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&self.header()).expect("header serializes");
        out.push('\n');
        out.push_str(&io::to_jsonl(&self.triplets));
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let (header, triplets) = parse_triplets(text)?;
        let header = header.ok_or_else(|| Error::parse(1, "missing dataset header line"))?;
        let n_temporal = triplets
            .iter()
            .filter(|t| t.kind == TripletKind::Temporal)
            .count();
        if header.n_temporal != n_temporal || header.n_static + header.n_temporal != triplets.len()
        {
            return Err(Error::invalid(format!(
                "header counts {}+{} disagree with {} triplets ({} temporal)",
                header.n_static,
                header.n_temporal,
                triplets.len(),
                n_temporal
            )));
        }
        Ok(TripletDataset {
            triplets,
            n_static: header.n_static,
            n_temporal: header.n_temporal,
            seed: header.seed,
            alpha: header.alpha,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&io::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        io::write_atomic(path, self.to_jsonl().as_bytes())
    }
}

/// Parses a triplet file; the dataset header line is optional.
pub fn parse_triplets(text: &str) -> Result<(Option<DatasetHeader>, Vec<Triplet>)> {
    let mut header = None;
    let mut triplets = Vec::new();
    for (n, (line, raw)) in io::records(text).enumerate() {
        if n == 0 {
            if let Ok(h) = serde_json::from_str::<DatasetHeader>(raw) {
                header = Some(h);
                continue;
            }
        }
        let t: Triplet = serde_json::from_str(raw).map_err(|e| Error::parse(line, e))?;
        t.validate().map_err(|e| Error::parse(line, e))?;
        triplets.push(t);
    }
    Ok((header, triplets))
}

pub fn load_triplets(path: &Path) -> Result<Vec<Triplet>> {
    Ok(parse_triplets(&io::read_to_string(path)?)?.1)
}

/// Bucket key shared by positives: chiral pair, side and object lemma.
pub type VoKey = (i64, Side, String);

pub fn vo_key(r: &MinedRecord) -> VoKey {
    (r.pair_id, r.side, r.object.clone())
}

/// Index from verb-object key to caption ids, in input order.
#[derive(Debug, Clone, Default)]
pub struct PositiveIndex {
    buckets: BTreeMap<VoKey, Vec<String>>,
}

impl PositiveIndex {
    pub fn build(records: &[MinedRecord]) -> Self {
        let mut buckets: BTreeMap<VoKey, Vec<String>> = BTreeMap::new();
        for r in records {
            buckets.entry(vo_key(r)).or_default().push(r.id.clone());
        }
        PositiveIndex { buckets }
    }

    /// Every other caption sharing `key` with `target_id`.
    pub fn find_positives(&self, target_id: &str, key: &VoKey) -> Vec<String> {
        self.buckets
            .get(key)
            .map(|ids| ids.iter().filter(|id| *id != target_id).cloned().collect())
            .unwrap_or_default()
    }
}

pub fn find_positives(target: &MinedRecord, index: &PositiveIndex) -> Vec<String> {
    index.find_positives(&target.id, &vo_key(target))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TemporalStats {
    pub built: usize,
    pub no_antonym: usize,
    pub no_positive: usize,
    pub degenerate: usize,
}

/// One temporal triplet per anchor that has a positive: (anchor, sampled positive, antonym),
/// with placeholders filled by one shared subject.
pub fn build_temporal_triplets<R: Rng + ?Sized>(
    mined: &[MinedRecord],
    index: &PositiveIndex,
    subject_pool: &[String],
    rng: &mut R,
) -> (Vec<Triplet>, TemporalStats) {
    let by_id: BTreeMap<&str, &MinedRecord> = mined.iter().map(|r| (r.id.as_str(), r)).collect();
    let mut stats = TemporalStats::default();
    let mut out = Vec::new();
    for anchor in mined {
        let Some(antonym) = anchor.antonym.as_deref() else {
            stats.no_antonym += 1;
            continue;
        };
        let positives: Vec<&MinedRecord> = find_positives(anchor, index)
            .iter()
            .filter_map(|id| by_id.get(id.as_str()).copied())
            .filter(|p| p.text != anchor.text && p.text != antonym)
            .collect();
        if positives.is_empty() {
            stats.no_positive += 1;
            continue;
        }
        let positive = positives[rng.random_range(0..positives.len())];
        let [a, p, n] = replace_subjects([&anchor.text, &positive.text, antonym], subject_pool, rng);
        let triplet = Triplet {
            anchor: a,
            positive: p,
            negative: n,
            kind: TripletKind::Temporal,
            pair_id: Some(anchor.pair_id),
        };
        if triplet.validate().is_err() {
            stats.degenerate += 1;
            continue;
        }
        stats.built += 1;
        out.push(triplet);
    }
    if stats.no_positive > 0 {
        log::info!("{} anchors skipped without a positive", stats.no_positive);
    }
    (out, stats)
}

/// Number of temporal triplets for `n` total at fraction `alpha`, rounding half to even.
pub fn temporal_count(n: usize, alpha: f64) -> usize {
    (alpha * n as f64).round_ties_even() as usize
}

pub fn compose(
    static_pool: &[Triplet],
    temporal_pool: &[Triplet],
    n: usize,
    alpha: f64,
    seed: u64,
) -> Result<TripletDataset> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    let n_temporal = temporal_count(n, alpha);
    let n_static = n - n_temporal;
    if static_pool.len() < n_static {
        return Err(Error::InsufficientPool {
            pool: "static",
            required: n_static,
            available: static_pool.len(),
        });
    }
    if temporal_pool.len() < n_temporal {
        return Err(Error::InsufficientPool {
            pool: "temporal",
            required: n_temporal,
            available: temporal_pool.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut triplets: Vec<Triplet> = index::sample(&mut rng, static_pool.len(), n_static)
        .into_iter()
        .map(|i| static_pool[i].clone())
        .collect();
    triplets.extend(
        index::sample(&mut rng, temporal_pool.len(), n_temporal)
            .into_iter()
            .map(|i| temporal_pool[i].clone()),
    );
    triplets.shuffle(&mut rng);
    Ok(TripletDataset {
        triplets,
        n_static,
        n_temporal,
        seed,
        alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::miner::Rewriter;

    fn rec(id: &str, text: &str, object: &str, antonym: Option<&str>) -> MinedRecord {
        MinedRecord {
            id: id.into(),
            text: text.into(),
            pair_id: 1,
            side: Side::B,
            verb_form: "closes".into(),
            object: object.into(),
            antonym: antonym.map(String::from),
            rewriter: Rewriter::Template,
        }
    }

    pub(crate) fn pool(kind: TripletKind, n: usize) -> Vec<Triplet> {
        (0..n)
            .map(|i| Triplet {
                anchor: format!("{kind:?} anchor {i}"),
                positive: format!("{kind:?} positive {i}"),
                negative: format!("{kind:?} negative {i}"),
                kind,
                pair_id: (kind == TripletKind::Temporal).then_some(i as i64 % 35),
            })
            .collect()
    }

    #[test]
    fn container_captions_are_mutual_positives() {
        let recs = vec![
            rec("a", "The lady closes the container with its cover.", "container", None),
            rec("b", "The lady closes the container on the table.", "container", None),
            rec("c", "The lady closes the door.", "door", None),
        ];
        let idx = PositiveIndex::build(&recs);
        assert_eq!(find_positives(&recs[0], &idx), vec!["b"]);
        assert_eq!(find_positives(&recs[1], &idx), vec!["a"]);
        assert!(find_positives(&recs[2], &idx).is_empty());
    }

    #[test]
    fn positives_match_brute_force() {
        let objects = ["food", "food", "bowl", "food", "lid", "bowl"];
        let recs: Vec<MinedRecord> = objects
            .iter()
            .enumerate()
            .map(|(i, o)| rec(&format!("r{i}"), &format!("puts {o} {i}"), o, None))
            .collect();
        let idx = PositiveIndex::build(&recs);
        for r in &recs {
            let brute: Vec<String> = recs
                .iter()
                .filter(|o| o.id != r.id && vo_key(o) == vo_key(r))
                .map(|o| o.id.clone())
                .collect();
            assert_eq!(find_positives(r, &idx), brute);
        }
        assert_eq!(find_positives(&recs[0], &idx), vec!["r1", "r3"]);
    }

    #[test]
    fn mechanic_triplet() {
        let recs = vec![
            rec(
                "a",
                "The mechanic closes the tool box",
                "box",
                Some("The mechanic opens the tool box"),
            ),
            rec("b", "The mechanic closes the box", "box", Some("The mechanic opens the box")),
        ];
        let idx = PositiveIndex::build(&recs);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (t, stats) = build_temporal_triplets(&recs, &idx, &["A man".into()], &mut rng);
        assert_eq!(stats.built, 2);
        assert_eq!(
            t[0],
            Triplet {
                anchor: "The mechanic closes the tool box".into(),
                positive: "The mechanic closes the box".into(),
                negative: "The mechanic opens the tool box".into(),
                kind: TripletKind::Temporal,
                pair_id: Some(1),
            }
        );
    }

    #[test]
    fn anchor_without_positive_is_counted() {
        let recs = vec![rec("a", "#C C closes the jar", "jar", Some("#C C opens the jar"))];
        let idx = PositiveIndex::build(&recs);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (t, stats) = build_temporal_triplets(&recs, &idx, &["A man".into()], &mut rng);
        assert!(t.is_empty());
        assert_eq!(stats.no_positive, 1);
    }

    #[test]
    fn temporal_build_is_deterministic() {
        let recs: Vec<MinedRecord> = (0..12)
            .map(|i| {
                rec(
                    &format!("r{i}"),
                    &format!("#C C closes the jar number {i}"),
                    "jar",
                    Some(&format!("#C C opens the jar number {i}")),
                )
            })
            .collect();
        let idx = PositiveIndex::build(&recs);
        let pool = crate::miner::default_subjects();
        let run = |seed| build_temporal_triplets(&recs, &idx, &pool, &mut ChaCha8Rng::seed_from_u64(seed)).0;
        assert_eq!(run(5), run(5));
        assert_eq!(run(5).len(), 12);
        assert!(run(5).iter().all(|t| !t.anchor.contains('#')));
    }

    #[test]
    fn ten_thousand_at_ten_percent() {
        let d = compose(
            &pool(TripletKind::Static, 9000),
            &pool(TripletKind::Temporal, 1000),
            10_000,
            0.1,
            17,
        )
        .unwrap();
        assert_eq!((d.n_static, d.n_temporal, d.len()), (9000, 1000, 10_000));
    }

    #[test]
    fn boundaries_and_rounding() {
        let s = pool(TripletKind::Static, 100);
        let t = pool(TripletKind::Temporal, 100);
        let d = compose(&s, &t, 100, 0.0, 1).unwrap();
        assert_eq!((d.n_static, d.n_temporal), (100, 0));
        let d = compose(&s, &t, 100, 1.0, 1).unwrap();
        assert_eq!((d.n_static, d.n_temporal), (0, 100));
        // 0.25 * 10 = 2.5 rounds to the even neighbour 2
        let d = compose(&s, &t, 10, 0.25, 1).unwrap();
        assert_eq!((d.n_static, d.n_temporal), (8, 2));
        assert_eq!(temporal_count(10, 0.35), 4);
        assert_eq!(temporal_count(6, 0.25), 2);
    }

    #[test]
    fn insufficient_pool_names_pool() {
        let err = compose(
            &pool(TripletKind::Static, 5),
            &pool(TripletKind::Temporal, 5),
            10,
            0.1,
            1,
        )
        .unwrap_err();
        assert!(matches!(
            err,
            Error::InsufficientPool { pool: "static", required: 9, available: 5 }
        ));
        assert!(compose(&[], &[], 0, 1.5, 1).is_err());
    }

    #[test]
    fn dataset_file_roundtrip_and_determinism() {
        let s = pool(TripletKind::Static, 50);
        let t = pool(TripletKind::Temporal, 50);
        let a = compose(&s, &t, 40, 0.3, 9).unwrap();
        let b = compose(&s, &t, 40, 0.3, 9).unwrap();
        assert_eq!(a.to_jsonl(), b.to_jsonl());
        let first = a.to_jsonl().lines().next().unwrap().to_string();
        assert_eq!(first, r#"{"n_static":28,"n_temporal":12,"alpha":0.3,"seed":9}"#);
        assert_eq!(TripletDataset::parse(&a.to_jsonl()).unwrap(), a);
        assert_ne!(compose(&s, &t, 40, 0.3, 10).unwrap().to_jsonl(), a.to_jsonl());
    }

    #[test]
    fn alpha_only_changes_selection() {
        let s = pool(TripletKind::Static, 30);
        let t = pool(TripletKind::Temporal, 30);
        for alpha in [0.0, 0.2, 0.5, 1.0] {
            let d = compose(&s, &t, 20, alpha, 3).unwrap();
            for trip in &d.triplets {
                assert!(s.contains(trip) || t.contains(trip));
            }
        }
    }
}
