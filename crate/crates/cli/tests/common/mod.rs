//! Shared helpers for the CLI integration tests and the acceptance suite.

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use tara_core::composer::{Triplet, TripletKind};
use tara_core::embfile::{manifest_path_for, write_embeddings};
use tara_core::eval::{ItemKind, LabeledItem};
use tara_core::{io, EmbeddingMatrix, Side};

pub fn tara() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tara"))
}

pub fn run(args: &[&str]) -> Output {
    tara().args(args).output().expect("tara binary runs")
}

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

pub fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Haar-ish random rotation via Gram-Schmidt on a Gaussian matrix; rows are orthonormal.
pub fn random_rotation(dim: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(dim);
    while rows.len() < dim {
        let mut v: Vec<f64> = (0..dim).map(|_| gauss(rng)).collect();
        for r in &rows {
            let d: f64 = v.iter().zip(r).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(r).for_each(|(a, b)| *a -= d * b);
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-6 {
            rows.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    rows
}

pub fn unit(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / n).collect()
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    d / (a.iter().map(|x| x * x).sum::<f64>().sqrt() * b.iter().map(|x| x * x).sum::<f64>().sqrt())
}

pub fn matrix(ids: Vec<String>, rows: &[Vec<f64>], normalized: bool) -> EmbeddingMatrix {
    let dim = rows[0].len();
    let data = rows.iter().flatten().map(|&v| v as f32).collect();
    let m = EmbeddingMatrix::new(ids, dim, data, false).unwrap();
    if normalized {
        m.l2_normalize().unwrap()
    } else {
        m
    }
}

pub fn save(m: &EmbeddingMatrix, path: &Path) {
    write_embeddings(m, path, &manifest_path_for(path)).unwrap();
}

/// Synthetic chiral world: every pair has a content direction shared by both sides and a
/// faint side direction; all remaining dimensions carry nuisance noise. A fixed rotation
/// hides the axis structure from the adapter.
pub struct SynthWorld {
    pub pairs: usize,
    pub dim: usize,
    pub eps: f64,
    pub sigma_side: f64,
    pub sigma_nuisance: f64,
    rotation: Vec<Vec<f64>>,
}

impl SynthWorld {
    pub fn new(pairs: usize, seed: u64) -> Self {
        let dim = 32;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        SynthWorld {
            pairs,
            dim,
            eps: 0.08,
            sigma_side: 0.01,
            sigma_nuisance: 0.12,
            rotation: random_rotation(dim, &mut rng),
        }
    }

    fn rotate(&self, x: &[f64]) -> Vec<f64> {
        self.rotation
            .iter()
            .map(|r| r.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn sign(side: Side) -> f64 {
        match side {
            Side::A => 1.0,
            Side::B => -1.0,
        }
    }

    /// Noise-free side prototype.
    pub fn prototype(&self, pair: usize, side: Side) -> Vec<f64> {
        let mut x = vec![0.0; self.dim];
        x[pair] = 1.0;
        x[8 + pair] = Self::sign(side) * self.eps;
        unit(&self.rotate(&x))
    }

    pub fn sample(&self, pair: usize, side: Side, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut x = vec![0.0; self.dim];
        x[pair] = 1.0;
        x[8 + pair] = Self::sign(side) * self.eps;
        for v in &mut x[8..16] {
            *v += self.sigma_side * gauss(rng);
        }
        for v in &mut x[16..] {
            *v += self.sigma_nuisance * gauss(rng);
        }
        unit(&self.rotate(&x))
    }
}

pub fn class_label(pair: usize, side: Side) -> String {
    format!("pair{pair}-{side}")
}

pub struct SynthFiles {
    pub train_emb: PathBuf,
    pub static_pool: PathBuf,
    pub temporal_pool: PathBuf,
    pub items: PathBuf,
    pub video: PathBuf,
    pub text: PathBuf,
    /// Mean cosine between the two sides' empirical video centroids, over pairs.
    pub min_side_cosine: f64,
}

/// Writes training sentences, static/temporal pools and an evaluation set into `dir`.
pub fn write_synth(dir: &Path, world: &SynthWorld, videos_per_side: usize, seed: u64) -> SynthFiles {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sides = [Side::A, Side::B];
    let per_side_train = 30;

    let mut ids = Vec::new();
    let mut rows = Vec::new();
    let mut by_class: Vec<Vec<Vec<String>>> = vec![vec![Vec::new(), Vec::new()]; world.pairs];
    for p in 0..world.pairs {
        for (si, &s) in sides.iter().enumerate() {
            for k in 0..per_side_train {
                let id = format!("sentence {p} {s} {k}");
                rows.push(world.sample(p, s, &mut rng));
                by_class[p][si].push(id.clone());
                ids.push(id);
            }
        }
    }
    let train_emb = dir.join("train.emb");
    save(&matrix(ids, &rows, false), &train_emb);

    let pick2 = |v: &Vec<String>, rng: &mut ChaCha8Rng| -> (String, String) {
        let a: Vec<&String> = v.choose_multiple(rng, 2).collect();
        (a[0].clone(), a[1].clone())
    };
    let mut temporal = Vec::new();
    let mut statics = Vec::new();
    for _ in 0..1500 {
        let p = rng.random_range(0..world.pairs);
        let si = rng.random_range(0..2);
        let (a, pos) = pick2(&by_class[p][si], &mut rng);
        let neg = by_class[p][1 - si].choose(&mut rng).unwrap().clone();
        temporal.push(Triplet {
            anchor: a,
            positive: pos,
            negative: neg,
            kind: TripletKind::Temporal,
            pair_id: Some(p as i64),
        });
        let p = rng.random_range(0..world.pairs);
        let si = rng.random_range(0..2);
        let (a, pos) = pick2(&by_class[p][si], &mut rng);
        let q = (p + rng.random_range(1..world.pairs)) % world.pairs;
        let neg = by_class[q][rng.random_range(0..2)].choose(&mut rng).unwrap().clone();
        statics.push(Triplet {
            anchor: a,
            positive: pos,
            negative: neg,
            kind: TripletKind::Static,
            pair_id: None,
        });
    }
    let static_pool = dir.join("static.jsonl");
    let temporal_pool = dir.join("temporal.jsonl");
    io::write_atomic(&static_pool, io::to_jsonl(&statics).as_bytes()).unwrap();
    io::write_atomic(&temporal_pool, io::to_jsonl(&temporal).as_bytes()).unwrap();

    let mut items = Vec::new();
    let (mut vid_ids, mut vid_rows, mut txt_ids, mut txt_rows) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut min_side_cosine = f64::INFINITY;
    for p in 0..world.pairs {
        let mut centroids = Vec::new();
        for &s in &sides {
            let label = class_label(p, s);
            let id = format!("text-{label}");
            txt_rows.push(world.sample(p, s, &mut rng));
            txt_ids.push(id.clone());
            items.push(LabeledItem {
                id,
                kind: ItemKind::Text,
                class_label: label.clone(),
                pair_id: Some(p as i64),
                side: Some(s),
            });
            let mut centroid = vec![0.0; world.dim];
            for k in 0..videos_per_side {
                let v = world.sample(p, s, &mut rng);
                centroid.iter_mut().zip(&v).for_each(|(c, x)| *c += x);
                let id = format!("video-{label}-{k}");
                vid_rows.push(v);
                vid_ids.push(id.clone());
                items.push(LabeledItem {
                    id,
                    kind: ItemKind::Video,
                    class_label: label.clone(),
                    pair_id: Some(p as i64),
                    side: Some(s),
                });
            }
            centroids.push(centroid);
        }
        min_side_cosine = min_side_cosine.min(cosine(&centroids[0], &centroids[1]));
    }
    let items_path = dir.join("items.jsonl");
    io::write_atomic(&items_path, tara_core::eval::items_to_jsonl(&items).as_bytes()).unwrap();
    let video = dir.join("video.emb");
    let text = dir.join("text.emb");
    save(&matrix(vid_ids, &vid_rows, true), &video);
    save(&matrix(txt_ids, &txt_rows, true), &text);
    SynthFiles {
        train_emb,
        static_pool,
        temporal_pool,
        items: items_path,
        video,
        text,
        min_side_cosine,
    }
}

pub fn report_metric(path: &Path, metric: &str) -> f64 {
    let report = tara_core::EvalReport::load(path).unwrap();
    *report
        .metrics
        .get(metric)
        .unwrap_or_else(|| panic!("{metric} missing from {}", path.display()))
}
