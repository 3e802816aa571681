//! Retrieval splits, ranking metrics and the companion evaluations.
//!
//! Rankings sort candidates by descending similarity; ties go to the lower
//! gallery index.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Side;
use crate::embed::{dot, EmbeddingMatrix, SimMatrix};
use crate::error::{Error, Result};
use crate::io;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ItemKind {
    Video,
    Text,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabeledItem {
    pub id: String,
    pub kind: ItemKind,
    pub class_label: String,
    pub pair_id: Option<i64>,
    pub side: Option<Side>,
}

impl LabeledItem {
    pub fn validate(&self) -> Result<()> {
        if self.pair_id.is_some() != self.side.is_some() {
            return Err(Error::invalid(format!(
                "item {:?}: pair_id and side must be given together",
                self.id
            )));
        }
        Ok(())
    }

    fn chiral(&self) -> Option<(i64, Side)> {
        self.pair_id.zip(self.side)
    }
}

pub fn parse_items(text: &str) -> Result<Vec<LabeledItem>> {
    let mut seen = BTreeSet::new();
    let mut items = Vec::new();
    for (line, raw) in io::records(text) {
        let item: LabeledItem = serde_json::from_str(raw).map_err(|e| Error::parse(line, e))?;
        item.validate().map_err(|e| Error::parse(line, e))?;
        if !seen.insert(item.id.clone()) {
            return Err(Error::DuplicateId(item.id));
        }
        items.push(item);
    }
    Ok(items)
}

pub fn load_items(path: &Path) -> Result<Vec<LabeledItem>> {
    parse_items(&io::read_to_string(path)?)
}

pub fn items_to_jsonl(items: &[LabeledItem]) -> String {
    io::to_jsonl(items)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    T2v,
    V2t,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::T2v => "t2v",
            Direction::V2t => "v2t",
        }
    }

    fn query_kind(self) -> ItemKind {
        match self {
            Direction::T2v => ItemKind::Text,
            Direction::V2t => ItemKind::Video,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Chiral,
    NonChiral,
    All,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Chiral, Split::NonChiral, Split::All];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Chiral => "chiral",
            Split::NonChiral => "non_chiral",
            Split::All => "all",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One query of a task. `candidates` lists gallery ids in gallery order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskQuery {
    pub id: String,
    pub candidates: Vec<String>,
    pub relevant: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetrievalTask {
    pub direction: Direction,
    pub split: Split,
    pub gallery: Vec<String>,
    pub queries: Vec<TaskQuery>,
}

/// A task resolved to gallery indices.
#[derive(Debug, Clone)]
struct Resolved {
    candidates: Vec<Vec<usize>>,
    relevant: Vec<Vec<bool>>,
}

impl RetrievalTask {
    pub fn validate(&self) -> Result<()> {
        self.resolve().map(|_| ())
    }

    fn resolve(&self) -> Result<Resolved> {
        if self.gallery.is_empty() {
            return Err(Error::invalid("empty gallery"));
        }
        let mut index = HashMap::with_capacity(self.gallery.len());
        for (i, id) in self.gallery.iter().enumerate() {
            if index.insert(id.as_str(), i).is_some() {
                return Err(Error::DuplicateId(id.clone()));
            }
        }
        let mut out = Resolved {
            candidates: Vec::with_capacity(self.queries.len()),
            relevant: Vec::with_capacity(self.queries.len()),
        };
        for q in &self.queries {
            let mut cand = Vec::with_capacity(q.candidates.len());
            for c in &q.candidates {
                let i = *index
                    .get(c.as_str())
                    .ok_or_else(|| Error::invalid(format!("query {:?}: candidate {c:?} not in gallery", q.id)))?;
                if cand.last().is_some_and(|&prev| prev >= i) {
                    return Err(Error::invalid(format!(
                        "query {:?}: candidates must be unique and in gallery order",
                        q.id
                    )));
                }
                cand.push(i);
            }
            let mut rel = vec![false; cand.len()];
            for r in &q.relevant {
                let pos = q
                    .candidates
                    .iter()
                    .position(|c| c == r)
                    .ok_or_else(|| Error::invalid(format!("query {:?}: relevant {r:?} is not a candidate", q.id)))?;
                rel[pos] = true;
            }
            if !rel.iter().any(|&r| r) {
                return Err(Error::invalid(format!("query {:?} has no relevant candidate", q.id)));
            }
            out.candidates.push(cand);
            out.relevant.push(rel);
        }
        Ok(out)
    }

    pub fn query_ids(&self) -> Vec<&str> {
        self.queries.iter().map(|q| q.id.as_str()).collect()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let task: RetrievalTask = serde_json::from_str(text).map_err(|e| Error::parse(e.line(), e))?;
        task.validate()?;
        Ok(task)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&io::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("task serializes") + "\n"
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        io::write_atomic(path, self.to_json().as_bytes())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitTasks {
    pub tasks: BTreeMap<Split, RetrievalTask>,
    /// One line per dropped query.
    pub dropped: Vec<String>,
}

/// Builds the chiral, non-chiral and all-items tasks for one direction.
pub fn build_splits(items: &[LabeledItem], direction: Direction) -> Result<SplitTasks> {
    let mut ids = BTreeSet::new();
    let mut classes: BTreeMap<&str, Option<(i64, Side)>> = BTreeMap::new();
    for item in items {
        item.validate()?;
        if !ids.insert(item.id.as_str()) {
            return Err(Error::DuplicateId(item.id.clone()));
        }
        match classes.get(item.class_label.as_str()) {
            Some(prev) if *prev != item.chiral() => {
                return Err(Error::invalid(format!(
                    "class {:?} has inconsistent pair/side labels",
                    item.class_label
                )))
            }
            _ => {
                classes.insert(&item.class_label, item.chiral());
            }
        }
    }
    if !items.iter().any(|i| i.pair_id.is_some()) {
        return Err(Error::invalid("items contain no chiral pair"));
    }

    let query_kind = direction.query_kind();
    let queries: Vec<&LabeledItem> = items.iter().filter(|i| i.kind == query_kind).collect();
    let gallery: Vec<&LabeledItem> = items.iter().filter(|i| i.kind != query_kind).collect();
    let gallery_ids: Vec<String> = gallery.iter().map(|i| i.id.clone()).collect();
    if gallery.is_empty() || queries.is_empty() {
        return Err(Error::invalid(format!("{direction} needs both query and candidate items")));
    }

    let mut dropped = Vec::new();
    let mut tasks = BTreeMap::new();
    for split in Split::ALL {
        let mut task_queries = Vec::new();
        for q in &queries {
            let opposite = q.chiral().map(|(p, s)| (p, s.opposite()));
            let is_opposite = |c: &LabeledItem| opposite.is_some() && c.chiral() == opposite;
            let keep = |c: &LabeledItem| match split {
                Split::Chiral => c.class_label == q.class_label || is_opposite(c),
                Split::NonChiral => !is_opposite(c),
                Split::All => true,
            };
            if split == Split::Chiral {
                if opposite.is_none() {
                    continue;
                }
                if !gallery.iter().any(|c| is_opposite(c)) {
                    dropped.push(format!(
                        "{direction}/{split}: query {:?} (class {:?}) has no opposite-side items",
                        q.id, q.class_label
                    ));
                    continue;
                }
            }
            let candidates: Vec<String> = gallery.iter().filter(|c| keep(c)).map(|c| c.id.clone()).collect();
            let relevant: Vec<String> = gallery
                .iter()
                .filter(|c| keep(c) && c.class_label == q.class_label)
                .map(|c| c.id.clone())
                .collect();
            if relevant.is_empty() {
                dropped.push(format!(
                    "{direction}/{split}: query {:?} (class {:?}) has no relevant items",
                    q.id, q.class_label
                ));
                continue;
            }
            task_queries.push(TaskQuery {
                id: q.id.clone(),
                candidates,
                relevant,
            });
        }
        let task = RetrievalTask {
            direction,
            split,
            gallery: gallery_ids.clone(),
            queries: task_queries,
        };
        task.validate()?;
        tasks.insert(split, task);
    }
    for d in &dropped {
        log::warn!("{d}");
    }
    Ok(SplitTasks { tasks, dropped })
}

/// Similarities for `task`: row per query (task order), column per gallery id.
pub fn task_sims(task: &RetrievalTask, queries: &EmbeddingMatrix, gallery: &EmbeddingMatrix) -> Result<SimMatrix> {
    let q = queries.select(&task.query_ids())?;
    let g = gallery.select(&task.gallery)?;
    crate::embed::sim_matrix(&q, &g)
}

fn check_shape(sims: &SimMatrix, task: &RetrievalTask) -> Result<Resolved> {
    if sims.rows != task.queries.len() || sims.cols != task.gallery.len() {
        return Err(Error::invalid(format!(
            "similarity matrix is {}×{}, task needs {}×{}",
            sims.rows,
            sims.cols,
            task.queries.len(),
            task.gallery.len()
        )));
    }
    if task.queries.is_empty() {
        return Err(Error::invalid("task has no queries"));
    }
    task.resolve()
}

/// Candidate positions sorted best-first.
fn rank(row: &[f64], candidates: &[usize]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&x, &y| {
        row[candidates[y]]
            .total_cmp(&row[candidates[x]])
            .then(candidates[x].cmp(&candidates[y]))
    });
    order
}

/// 1-based ranks of every relevant candidate, ascending.
fn relevant_ranks(row: &[f64], candidates: &[usize], relevant: &[bool]) -> Vec<usize> {
    rank(row, candidates)
        .iter()
        .enumerate()
        .filter(|(_, &pos)| relevant[pos])
        .map(|(r, _)| r + 1)
        .collect()
}

fn per_query<T: Send>(sims: &SimMatrix, r: &Resolved, f: impl Fn(Vec<usize>, usize) -> T + Sync) -> Vec<T> {
    (0..r.candidates.len())
        .into_par_iter()
        .map(|q| f(relevant_ranks(sims.row(q), &r.candidates[q], &r.relevant[q]), r.candidates[q].len()))
        .collect()
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn recall_at_k_per_query(sims: &SimMatrix, task: &RetrievalTask, k: usize) -> Result<Vec<f64>> {
    let r = check_shape(sims, task)?;
    let smallest = r.candidates.iter().map(Vec::len).min().unwrap_or(0);
    if k < 1 || k > smallest {
        return Err(Error::invalid(format!("k={k} outside 1..={smallest}")));
    }
    Ok(per_query(sims, &r, |ranks, _| if ranks[0] <= k { 1.0 } else { 0.0 }))
}

pub fn recall_at_k(sims: &SimMatrix, task: &RetrievalTask, k: usize) -> Result<f64> {
    Ok(mean(&recall_at_k_per_query(sims, task, k)?))
}

pub fn average_precision_per_query(sims: &SimMatrix, task: &RetrievalTask) -> Result<Vec<f64>> {
    let r = check_shape(sims, task)?;
    Ok(per_query(sims, &r, |ranks, _| {
        let total: f64 = ranks
            .iter()
            .enumerate()
            .map(|(hit, &rank)| (hit + 1) as f64 / rank as f64)
            .sum();
        total / ranks.len() as f64
    }))
}

pub fn mean_average_precision(sims: &SimMatrix, task: &RetrievalTask) -> Result<f64> {
    Ok(mean(&average_precision_per_query(sims, task)?))
}

pub fn binary_accuracy_per_query(sims: &SimMatrix, task: &RetrievalTask) -> Result<Vec<f64>> {
    let r = check_shape(sims, task)?;
    let mut out = Vec::with_capacity(task.queries.len());
    for (q, (cand, rel)) in r.candidates.iter().zip(&r.relevant).enumerate() {
        let hits = rel.iter().filter(|&&x| x).count();
        if cand.len() != 2 || hits != 1 {
            return Err(Error::invalid(format!(
                "query {:?}: binary accuracy needs 2 candidates with 1 relevant, got {} with {hits}",
                task.queries[q].id,
                cand.len()
            )));
        }
        let (good, bad) = if rel[0] { (cand[0], cand[1]) } else { (cand[1], cand[0]) };
        let (s_good, s_bad) = (sims.get(q, good), sims.get(q, bad));
        out.push(if s_good > s_bad {
            1.0
        } else if s_good == s_bad {
            0.5
        } else {
            0.0
        });
    }
    Ok(out)
}

pub fn binary_accuracy(sims: &SimMatrix, task: &RetrievalTask) -> Result<f64> {
    Ok(mean(&binary_accuracy_per_query(sims, task)?))
}

/// Multiple choice from raw scores: one score row per query.
pub fn mcq_accuracy_scores(scores: &[Vec<f64>], answers: &[usize]) -> Result<f64> {
    if scores.len() != answers.len() || scores.is_empty() {
        return Err(Error::invalid(format!(
            "{} score rows for {} answers",
            scores.len(),
            answers.len()
        )));
    }
    let mut correct = 0usize;
    for (q, (row, &answer)) in scores.iter().zip(answers).enumerate() {
        if row.len() < 2 {
            return Err(Error::invalid(format!("query {q} has fewer than 2 choices")));
        }
        if answer >= row.len() {
            return Err(Error::invalid(format!("query {q}: answer {answer} out of range 0..{}", row.len())));
        }
        let best = (1..row.len()).fold(0, |b, i| if row[i] > row[b] { i } else { b });
        correct += (best == answer) as usize;
    }
    Ok(correct as f64 / scores.len() as f64)
}

/// Multiple choice over embeddings: `choices[q]` holds the choices for query row `q`.
pub fn mcq_accuracy(queries: &EmbeddingMatrix, choices: &[EmbeddingMatrix], answers: &[usize]) -> Result<f64> {
    if choices.len() != queries.rows() {
        return Err(Error::invalid(format!(
            "{} choice sets for {} queries",
            choices.len(),
            queries.rows()
        )));
    }
    let mut scores = Vec::with_capacity(choices.len());
    for (q, set) in choices.iter().enumerate() {
        if set.dim() != queries.dim() {
            return Err(Error::DimMismatch {
                expected: queries.dim(),
                actual: set.dim(),
            });
        }
        scores.push(set.rows_iter().map(|c| dot(queries.row(q), c)).collect());
    }
    mcq_accuracy_scores(&scores, answers)
}

/// Recall@5 for original queries and for their negated counterparts.
///
/// `negated` must hold a row for every query id of `task`.
pub fn negation_eval(
    original: &EmbeddingMatrix,
    negated: &EmbeddingMatrix,
    gallery: &EmbeddingMatrix,
    task: &RetrievalTask,
) -> Result<(f64, f64)> {
    for q in &task.queries {
        if negated.index_of(&q.id).is_none() {
            return Err(Error::invalid(format!("query {:?} has no negated counterpart", q.id)));
        }
    }
    let r = recall_at_k(&task_sims(task, original, gallery)?, task, 5)?;
    let r_neg = recall_at_k(&task_sims(task, negated, gallery)?, task, 5)?;
    Ok((r, r_neg))
}

/// Accuracy of assigning each test row to the class with the closest normalized centroid.
pub fn nearest_centroid_probe(
    train: &EmbeddingMatrix,
    train_labels: &[String],
    test: &EmbeddingMatrix,
    test_labels: &[String],
) -> Result<f64> {
    if train.rows() != train_labels.len() || test.rows() != test_labels.len() {
        return Err(Error::invalid("one label per row is required"));
    }
    if train.dim() != test.dim() {
        return Err(Error::DimMismatch {
            expected: train.dim(),
            actual: test.dim(),
        });
    }
    if test.rows() == 0 {
        return Err(Error::invalid("empty test set"));
    }
    let mut sums: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for (row, label) in train.rows_iter().zip(train_labels) {
        let acc = sums.entry(label).or_insert_with(|| vec![0.0; train.dim()]);
        for (a, &v) in acc.iter_mut().zip(row) {
            *a += v as f64;
        }
    }
    let mut centroids = Vec::with_capacity(sums.len());
    for (label, sum) in &sums {
        let n = sum.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n == 0.0 {
            return Err(Error::ZeroNorm(format!("centroid of class {label:?}")));
        }
        centroids.push((*label, sum.iter().map(|v| v / n).collect::<Vec<f64>>()));
    }
    let mut correct = 0usize;
    for (row, label) in test.rows_iter().zip(test_labels) {
        if !sums.contains_key(label.as_str()) {
            return Err(Error::invalid(format!("class {label:?} has no training examples")));
        }
        let norm = crate::embed::norm(row);
        let score = |c: &[f64]| row.iter().zip(c).map(|(&x, y)| x as f64 * y).sum::<f64>() / norm;
        let mut best = 0;
        for i in 1..centroids.len() {
            if score(&centroids[i].1) > score(&centroids[best].1) {
                best = i;
            }
        }
        correct += (centroids[best].0 == label) as usize;
    }
    Ok(correct as f64 / test.rows() as f64)
}

/// Euclidean distance between the two mean embeddings.
pub fn modality_gap(video: &EmbeddingMatrix, text: &EmbeddingMatrix) -> Result<f64> {
    if video.rows() == 0 || text.rows() == 0 {
        return Err(Error::invalid("modality gap needs non-empty inputs"));
    }
    if video.dim() != text.dim() {
        return Err(Error::DimMismatch {
            expected: video.dim(),
            actual: text.dim(),
        });
    }
    if !video.is_normalized() || !text.is_normalized() {
        return Err(Error::invalid("modality gap needs normalized inputs"));
    }
    let centroid = |m: &EmbeddingMatrix| {
        let mut c = vec![0.0f64; m.dim()];
        for row in m.rows_iter() {
            for (a, &v) in c.iter_mut().zip(row) {
                *a += v as f64;
            }
        }
        c.iter_mut().for_each(|a| *a /= m.rows() as f64);
        c
    };
    let (cv, ct) = (centroid(video), centroid(text));
    Ok(cv.iter().zip(&ct).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskDescriptor {
    pub mode: String,
    pub direction: Option<Direction>,
    pub split: Option<Split>,
    pub n_queries: usize,
}

impl TaskDescriptor {
    pub fn label(&self) -> String {
        match (self.direction, self.split) {
            (Some(d), Some(s)) => format!("{}/{d}/{s}", self.mode),
            _ => self.mode.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryValues {
    pub id: String,
    pub values: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: TaskDescriptor,
    pub metrics: BTreeMap<String, f64>,
    pub per_query: Vec<QueryValues>,
    pub seed: Option<u64>,
}

impl EvalReport {
    pub fn validate(&self) -> Result<()> {
        for (name, &v) in &self.metrics {
            let upper = if name == "modality_gap" { 2.0 } else { 1.0 };
            // small slack for f32 rounding on unit vectors
            if !(v >= 0.0 && v <= upper + 1e-6) {
                return Err(Error::invalid(format!("metric {name} = {v} outside [0, {upper}]")));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::parse(e.line(), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&io::read_to_string(path)?)
    }

    /// `task,metric,value` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("task,metric,value\n");
        for row in self.csv_rows() {
            out.push_str(&row);
            out.push('\n');
        }
        out
    }

    pub fn csv_rows(&self) -> Vec<String> {
        let label = self.task.label();
        self.metrics.iter().map(|(m, v)| format!("{label},{m},{v}")).collect()
    }
}

/// R@k for every admissible `k`, mAP, and binary accuracy when every query has two candidates.
pub fn evaluate_retrieval(sims: &SimMatrix, task: &RetrievalTask, ks: &[usize], seed: Option<u64>) -> Result<EvalReport> {
    let r = check_shape(sims, task)?;
    let smallest = r.candidates.iter().map(Vec::len).min().unwrap_or(0);
    let mut metrics = BTreeMap::new();
    let mut per_query: Vec<QueryValues> = task
        .queries
        .iter()
        .map(|q| QueryValues {
            id: q.id.clone(),
            values: BTreeMap::new(),
        })
        .collect();
    let mut record = |name: String, values: Vec<f64>| {
        metrics.insert(name.clone(), mean(&values));
        for (pq, v) in per_query.iter_mut().zip(values) {
            pq.values.insert(name.clone(), v);
        }
    };
    for &k in ks {
        if k >= 1 && k <= smallest {
            record(format!("r_at_{k}"), recall_at_k_per_query(sims, task, k)?);
        } else {
            log::debug!("skipping r_at_{k}: smallest gallery has {smallest} candidates");
        }
    }
    record("map".into(), average_precision_per_query(sims, task)?);
    let binary = r.candidates.iter().all(|c| c.len() == 2) && r.relevant.iter().all(|x| x.iter().filter(|&&b| b).count() == 1);
    if binary {
        record("binary_acc".into(), binary_accuracy_per_query(sims, task)?);
    }
    let report = EvalReport {
        task: TaskDescriptor {
            mode: "retrieval".into(),
            direction: Some(task.direction),
            split: Some(task.split),
            n_queries: task.queries.len(),
        },
        metrics,
        per_query,
        seed,
    };
    report.validate()?;
    Ok(report)
}

/// Retrieval with precomputed composed-query vectors (e.g. a video plus an edit instruction).
pub fn composed_retrieval(
    queries: &EmbeddingMatrix,
    gallery: &EmbeddingMatrix,
    task: &RetrievalTask,
    ks: &[usize],
    seed: Option<u64>,
) -> Result<EvalReport> {
    let sims = task_sims(task, queries, gallery)?;
    let mut report = evaluate_retrieval(&sims, task, ks, seed)?;
    report.task.mode = "composed".into();
    Ok(report)
}

/// Grid for an ablation sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub ns: Vec<usize>,
    pub alphas: Vec<f64>,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub alpha: f64,
    /// `None` on aggregate rows.
    pub seed: Option<u64>,
    pub metrics: BTreeMap<String, f64>,
    /// Sample standard deviation, aggregate rows only.
    pub std: Option<BTreeMap<String, f64>>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

/// `84.5 ±0.6` style, values scaled by 100.
pub fn format_mean_std(mean: f64, std: f64) -> String {
    format!("{:.1} ±{:.1}", mean * 100.0, std * 100.0)
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let m = mean(values);
    if values.len() < 2 {
        return (m, 0.0);
    }
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64;
    (m, var.sqrt())
}

/// Runs `pipeline(n, alpha, seed)` over the grid; one row per run, then one aggregate row per cell.
pub fn ablation_sweep<F>(spec: &SweepSpec, mut pipeline: F) -> Result<SweepTable>
where
    F: FnMut(usize, f64, u64) -> Result<BTreeMap<String, f64>>,
{
    if spec.ns.is_empty() || spec.alphas.is_empty() || spec.seeds.is_empty() {
        return Err(Error::invalid("sweep grid must be non-empty in every axis"));
    }
    let mut table = SweepTable::default();
    let mut aggregates = Vec::new();
    for &n in &spec.ns {
        for &alpha in &spec.alphas {
            let mut runs: Vec<BTreeMap<String, f64>> = Vec::new();
            for &seed in &spec.seeds {
                let metrics = pipeline(n, alpha, seed)
                    .map_err(|e| Error::invalid(format!("sweep cell n={n} alpha={alpha} seed={seed}: {e}")))?;
                table.rows.push(SweepRow {
                    n,
                    alpha,
                    seed: Some(seed),
                    metrics: metrics.clone(),
                    std: None,
                });
                runs.push(metrics);
            }
            let mut means = BTreeMap::new();
            let mut stds = BTreeMap::new();
            for name in runs[0].keys() {
                let values: Vec<f64> = runs.iter().filter_map(|r| r.get(name).copied()).collect();
                let (m, s) = mean_std(&values);
                means.insert(name.clone(), m);
                stds.insert(name.clone(), s);
            }
            aggregates.push(SweepRow {
                n,
                alpha,
                seed: None,
                metrics: means,
                std: Some(stds),
            });
        }
    }
    table.rows.extend(aggregates);
    Ok(table)
}

impl SweepTable {
    fn metric_names(&self) -> Vec<String> {
        let mut names = BTreeSet::new();
        for r in &self.rows {
            names.extend(r.metrics.keys().cloned());
        }
        names.into_iter().collect()
    }

    /// Wide CSV: `n,alpha,seed,<metric>,<metric>_std,…`; aggregate rows carry `seed=mean`.
    pub fn to_csv(&self) -> String {
        let names = self.metric_names();
        let mut out = String::from("n,alpha,seed");
        for m in &names {
            out.push_str(&format!(",{m},{m}_std"));
        }
        out.push('\n');
        for r in &self.rows {
            let seed = r.seed.map_or_else(|| "mean".to_string(), |s| s.to_string());
            out.push_str(&format!("{},{},{seed}", r.n, r.alpha));
            for m in &names {
                let v = r.metrics.get(m).map_or(String::new(), |v| v.to_string());
                let s = r
                    .std
                    .as_ref()
                    .and_then(|s| s.get(m))
                    .map_or(String::new(), |v| v.to_string());
                out.push_str(&format!(",{v},{s}"));
            }
            out.push('\n');
        }
        out
    }

    /// Declarative chart description referencing the CSV columns.
    pub fn chart_spec(&self, csv_name: &str, metric: &str) -> String {
        let spec = serde_json::json!({
            "data": csv_name,
            "mark": "line",
            "filter": {"seed": "mean"},
            "x": {"field": "alpha", "title": "fraction of temporal triplets"},
            "y": {"field": metric, "error": format!("{metric}_std")},
            "series": {"field": "n"},
        });
        serde_json::to_string_pretty(&spec).expect("chart serializes") + "\n"
    }
}
