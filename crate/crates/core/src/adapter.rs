//! Linear projection adapter trained with a hard-negative InfoNCE objective.
//!
//! For a batch of unit-norm triplets `(a_i, p_i, n_i)` and temperature `tau`,
//!
//! ```text
//! loss = 1/B Σ_i −log( exp(a_i·p_i/τ) / Σ_j [exp(a_i·p_j/τ) + exp(a_i·n_j/τ)] )
//! ```
//!
//! Both sums in the denominator run over the whole batch. Inputs are mapped by
//! `y = xW + b` and L2-normalized before the loss; gradients are propagated by
//! hand through the normalization and the projection.

use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::composer::TripletDataset;
use crate::embed::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::io;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdapterParams {
    pub dim_in: usize,
    pub dim_out: usize,
    /// `dim_in × dim_out`, row-major.
    pub weight: Vec<f64>,
    pub bias: Option<Vec<f64>>,
}

impl AdapterParams {
    /// Identity-padded weight (`W[i][i] = 1`), zero bias.
    pub fn identity(dim_in: usize, dim_out: usize, bias: bool) -> Self {
        let mut weight = vec![0.0; dim_in * dim_out];
        for i in 0..dim_in.min(dim_out) {
            weight[i * dim_out + i] = 1.0;
        }
        AdapterParams {
            dim_in,
            dim_out,
            weight,
            bias: bias.then(|| vec![0.0; dim_out]),
        }
    }

    pub fn zeros_like(&self) -> Self {
        AdapterParams {
            dim_in: self.dim_in,
            dim_out: self.dim_out,
            weight: vec![0.0; self.weight.len()],
            bias: self.bias.as_ref().map(|b| vec![0.0; b.len()]),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim_in == 0 || self.dim_out == 0 {
            return Err(Error::invalid("adapter dims must be positive"));
        }
        if self.weight.len() != self.dim_in * self.dim_out {
            return Err(Error::invalid(format!(
                "weight has {} entries, expected {}",
                self.weight.len(),
                self.dim_in * self.dim_out
            )));
        }
        if let Some(b) = &self.bias {
            if b.len() != self.dim_out {
                return Err(Error::DimMismatch {
                    expected: self.dim_out,
                    actual: b.len(),
                });
            }
        }
        if self.values().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("adapter parameter".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.weight.len() + self.bias.as_ref().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Weight entries followed by bias entries.
    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.weight.iter().chain(self.bias.iter().flatten())
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weight.iter_mut().chain(self.bias.iter_mut().flatten())
    }

    fn get(&self, k: usize) -> f64 {
        *self.values().nth(k).expect("parameter index")
    }

    fn set(&mut self, k: usize, v: f64) {
        *self.values_mut().nth(k).expect("parameter index") = v;
    }

    pub fn norm(&self) -> f64 {
        self.values().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `xW + b`, not normalized.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        let mut y = match &self.bias {
            Some(b) => b.clone(),
            None => vec![0.0; self.dim_out],
        };
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let row = &self.weight[i * self.dim_out..(i + 1) * self.dim_out];
            for (yk, &w) in y.iter_mut().zip(row) {
                *yk += xi * w;
            }
        }
        y
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn unit(y: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = dot(y, y).sqrt();
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::NonFinite(format!("projected norm {n}")));
    }
    Ok((y.iter().map(|v| v / n).collect(), n))
}

/// Projects and L2-normalizes every row.
pub fn forward(params: &AdapterParams, x: &EmbeddingMatrix) -> Result<EmbeddingMatrix> {
    if x.dim() != params.dim_in {
        return Err(Error::DimMismatch {
            expected: params.dim_in,
            actual: x.dim(),
        });
    }
    let mut data = Vec::with_capacity(x.rows() * params.dim_out);
    for (r, row) in x.rows_iter().enumerate() {
        let xr: Vec<f64> = row.iter().map(|&v| v as f64).collect();
        let y = params.project(&xr);
        let n = dot(&y, &y).sqrt();
        if n == 0.0 {
            return Err(Error::ZeroNorm(x.ids()[r].clone()));
        }
        data.extend(y.iter().map(|v| (v / n) as f32));
    }
    EmbeddingMatrix::new(x.ids().to_vec(), params.dim_out, data, true)
}

struct Contrast {
    loss: f64,
    /// Row-wise softmax over the 2B logits: `[p_0..p_B, n_0..n_B]`.
    probs: Vec<Vec<f64>>,
    /// `1 − probs[i][i]` per row.
    complement: Vec<f64>,
}

fn check_batch(anchors: &[Vec<f64>], positives: &[Vec<f64>], negatives: &[Vec<f64>], tau: f64) -> Result<usize> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::invalid(format!("temperature must be positive, got {tau}")));
    }
    let b = anchors.len();
    if b == 0 || positives.len() != b || negatives.len() != b {
        return Err(Error::invalid(format!(
            "batch sizes must be equal and non-zero: {} / {} / {}",
            b,
            positives.len(),
            negatives.len()
        )));
    }
    let dim = anchors[0].len();
    for v in anchors.iter().chain(positives).chain(negatives) {
        if v.len() != dim {
            return Err(Error::DimMismatch {
                expected: dim,
                actual: v.len(),
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("loss input".into()));
        }
    }
    Ok(b)
}

fn contrast(anchors: &[Vec<f64>], positives: &[Vec<f64>], negatives: &[Vec<f64>], tau: f64) -> Result<Contrast> {
    let b = check_batch(anchors, positives, negatives, tau)?;
    let mut loss = 0.0;
    let mut probs = Vec::with_capacity(b);
    let mut complement = Vec::with_capacity(b);
    for (i, a) in anchors.iter().enumerate() {
        let logits: Vec<f64> = positives
            .iter()
            .chain(negatives)
            .map(|c| dot(a, c) / tau)
            .collect();
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        // summed without the positive so 1 − P_ii keeps full precision when P_ii → 1
        let rest: f64 = exps
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, e)| e)
            .sum();
        let gap = max - logits[i];
        loss += if gap < 30.0 {
            (rest / exps[i]).ln_1p()
        } else {
            gap + sum.ln()
        };
        probs.push(exps.iter().map(|e| e / sum).collect());
        complement.push(rest / sum);
    }
    Ok(Contrast {
        loss: loss / b as f64,
        probs,
        complement,
    })
}

/// Mean hard-negative InfoNCE over a batch of unit vectors.
pub fn infonce_loss(anchors: &[Vec<f64>], positives: &[Vec<f64>], negatives: &[Vec<f64>], tau: f64) -> Result<f64> {
    Ok(contrast(anchors, positives, negatives, tau)?.loss)
}

/// Raw (un-projected) embeddings for a batch of triplets.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TripletBatch {
    pub anchors: Vec<Vec<f64>>,
    pub positives: Vec<Vec<f64>>,
    pub negatives: Vec<Vec<f64>>,
}

impl TripletBatch {
    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }

    pub fn push(&mut self, a: Vec<f64>, p: Vec<f64>, n: Vec<f64>) {
        self.anchors.push(a);
        self.positives.push(p);
        self.negatives.push(n);
    }
}

struct Projected {
    z: Vec<Vec<f64>>,
    norms: Vec<f64>,
}

fn project_all(params: &AdapterParams, xs: &[Vec<f64>]) -> Result<Projected> {
    let mut z = Vec::with_capacity(xs.len());
    let mut norms = Vec::with_capacity(xs.len());
    for x in xs {
        if x.len() != params.dim_in {
            return Err(Error::DimMismatch {
                expected: params.dim_in,
                actual: x.len(),
            });
        }
        let (u, n) = unit(&params.project(x))?;
        z.push(u);
        norms.push(n);
    }
    Ok(Projected { z, norms })
}

/// Loss of the projected batch.
pub fn batch_loss(params: &AdapterParams, batch: &TripletBatch, tau: f64) -> Result<f64> {
    let a = project_all(params, &batch.anchors)?;
    let p = project_all(params, &batch.positives)?;
    let n = project_all(params, &batch.negatives)?;
    infonce_loss(&a.z, &p.z, &n.z, tau)
}

/// Loss and its gradient with respect to every adapter parameter.
pub fn loss_and_grad(params: &AdapterParams, batch: &TripletBatch, tau: f64) -> Result<(f64, AdapterParams)> {
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let a = project_all(params, &batch.anchors)?;
    let p = project_all(params, &batch.positives)?;
    let n = project_all(params, &batch.negatives)?;
    let c = contrast(&a.z, &p.z, &n.z, tau)?;
    let b = batch.len();
    let dim = params.dim_out;
    let scale = 1.0 / (b as f64 * tau);

    // dL/dz for every unit vector
    let mut ga = vec![vec![0.0; dim]; b];
    let mut gp = vec![vec![0.0; dim]; b];
    let mut gn = vec![vec![0.0; dim]; b];
    for i in 0..b {
        let probs = &c.probs[i];
        for j in 0..b {
            let wp = if i == j { -c.complement[i] } else { probs[j] };
            let wn = probs[b + j];
            for k in 0..dim {
                ga[i][k] += scale * (wp * p.z[j][k] + wn * n.z[j][k]);
                gp[j][k] += scale * wp * a.z[i][k];
                gn[j][k] += scale * wn * a.z[i][k];
            }
        }
    }

    let mut grad = params.zeros_like();
    let groups = [
        (&batch.anchors, &a, &ga),
        (&batch.positives, &p, &gp),
        (&batch.negatives, &n, &gn),
    ];
    for (xs, proj, gz) in groups {
        for r in 0..b {
            // through normalization: dL/dy = (g − z (z·g)) / |y|
            let z = &proj.z[r];
            let g = &gz[r];
            let zg = dot(z, g);
            let dy: Vec<f64> = z
                .iter()
                .zip(g)
                .map(|(zk, gk)| (gk - zk * zg) / proj.norms[r])
                .collect();
            for (i, &xi) in xs[r].iter().enumerate() {
                if xi == 0.0 {
                    continue;
                }
                let row = &mut grad.weight[i * dim..(i + 1) * dim];
                for (w, d) in row.iter_mut().zip(&dy) {
                    *w += xi * d;
                }
            }
            if let Some(gb) = grad.bias.as_mut() {
                for (w, d) in gb.iter_mut().zip(&dy) {
                    *w += d;
                }
            }
        }
    }
    if !c.loss.is_finite() || grad.values().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("loss or gradient".into()));
    }
    Ok((c.loss, grad))
}

/// Max relative error between the analytic gradient and central differences.
pub fn grad_check(params: &AdapterParams, batch: &TripletBatch, tau: f64, h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::invalid(format!("step must be positive, got {h}")));
    }
    let (_, grad) = loss_and_grad(params, batch, tau)?;
    let mut probe = params.clone();
    let mut worst = 0.0f64;
    for (k, &analytic) in grad.values().enumerate() {
        let theta = params.get(k);
        probe.set(k, theta + h);
        let plus = batch_loss(&probe, batch, tau)?;
        probe.set(k, theta - h);
        let minus = batch_loss(&probe, batch, tau)?;
        probe.set(k, theta);
        let numeric = (plus - minus) / (2.0 * h);
        let rel = (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-12);
        worst = worst.max(rel);
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub tau: f64,
    pub lr: f64,
    pub batch: usize,
    pub epochs: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
    /// Output dimension; defaults to the input dimension.
    pub dim_out: Option<usize>,
    pub bias: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            tau: 0.05,
            lr: 1e-3,
            batch: 256,
            epochs: 2,
            seed: 17,
            optimizer: Optimizer::default(),
            dim_out: None,
            bias: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::invalid(format!("tau must be positive, got {}", self.tau)));
        }
        // lr = 0 is allowed and freezes the adapter
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::invalid(format!("lr must be non-negative, got {}", self.lr)));
        }
        if self.batch == 0 || self.epochs == 0 {
            return Err(Error::invalid("batch and epochs must be at least 1"));
        }
        if self.dim_out == Some(0) {
            return Err(Error::invalid("dim_out must be positive"));
        }
        if let Optimizer::Adam { beta1, beta2, eps } = self.optimizer {
            if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || !(eps > 0.0) {
                return Err(Error::invalid("adam needs beta1, beta2 in [0, 1) and eps > 0"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub step_losses: Vec<f64>,
    pub epoch_losses: Vec<f64>,
    pub epoch_seconds: Vec<f64>,
    pub steps_per_epoch: usize,
}

impl TrainHistory {
    /// `epoch,step,loss` rows; wall-clock is kept out so the file is reproducible.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,step,loss\n");
        for (s, loss) in self.step_losses.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", s / self.steps_per_epoch.max(1), s, loss));
        }
        out
    }
}

struct OptimizerState {
    kind: Optimizer,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl OptimizerState {
    fn new(kind: Optimizer, len: usize) -> Self {
        OptimizerState {
            kind,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut AdapterParams, grad: &AdapterParams, lr: f64) {
        self.t += 1;
        match self.kind {
            Optimizer::Sgd => {
                for (w, g) in params.values_mut().zip(grad.values()) {
                    *w -= lr * g;
                }
            }
            Optimizer::Adam { beta1, beta2, eps } => {
                let c1 = 1.0 - beta1.powi(self.t);
                let c2 = 1.0 - beta2.powi(self.t);
                for (((w, g), m), v) in params
                    .values_mut()
                    .zip(grad.values())
                    .zip(self.m.iter_mut())
                    .zip(self.v.iter_mut())
                {
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    *w -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                }
            }
        }
    }
}

/// Rows of `base` (keyed by sentence) for every triplet in the dataset.
pub fn lookup_triplets(dataset: &TripletDataset, base: &EmbeddingMatrix) -> Result<Vec<[Vec<f64>; 3]>> {
    let fetch = |s: &str| -> Result<Vec<f64>> {
        base.get(s)
            .map(|r| r.iter().map(|&v| v as f64).collect())
            .ok_or_else(|| Error::MissingEmbedding(s.to_string()))
    };
    dataset
        .triplets
        .iter()
        .map(|t| Ok([fetch(&t.anchor)?, fetch(&t.positive)?, fetch(&t.negative)?]))
        .collect()
}

/// Trains from identity initialization. Batches follow a seeded shuffle per epoch.
pub fn train(dataset: &TripletDataset, base: &EmbeddingMatrix, config: &TrainConfig) -> Result<(AdapterParams, TrainHistory)> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::invalid("empty dataset"));
    }
    let rows = lookup_triplets(dataset, base)?;
    let dim_in = base.dim();
    let mut params = AdapterParams::identity(dim_in, config.dim_out.unwrap_or(dim_in), config.bias);
    let mut opt = OptimizerState::new(config.optimizer, params.len());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let steps_per_epoch = rows.len().div_ceil(config.batch);
    let mut history = TrainHistory {
        steps_per_epoch,
        ..TrainHistory::default()
    };
    let mut order: Vec<usize> = (0..rows.len()).collect();
    for epoch in 0..config.epochs {
        let started = Instant::now();
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (s, chunk) in order.chunks(config.batch).enumerate() {
            let mut batch = TripletBatch::default();
            for &i in chunk {
                let [a, p, n] = rows[i].clone();
                batch.push(a, p, n);
            }
            let (loss, grad) = loss_and_grad(&params, &batch, config.tau).map_err(|e| {
                Error::NonFinite(format!("epoch {epoch} step {s}: {e}"))
            })?;
            opt.step(&mut params, &grad, config.lr);
            history.step_losses.push(loss);
            total += loss;
        }
        let mean = total / steps_per_epoch as f64;
        let secs = started.elapsed().as_secs_f64();
        log::info!("epoch {epoch}: mean loss {mean:.6} ({secs:.2}s)");
        history.epoch_losses.push(mean);
        history.epoch_seconds.push(secs);
    }
    Ok((params, history))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdapterFile {
    pub dim_in: usize,
    pub dim_out: usize,
    pub weight: Vec<f64>,
    pub bias: Option<Vec<f64>>,
    pub config: TrainConfig,
    pub seed: u64,
}

impl AdapterFile {
    pub fn new(params: &AdapterParams, config: &TrainConfig) -> Self {
        AdapterFile {
            dim_in: params.dim_in,
            dim_out: params.dim_out,
            weight: params.weight.clone(),
            bias: params.bias.clone(),
            config: config.clone(),
            seed: config.seed,
        }
    }

    pub fn params(&self) -> Result<AdapterParams> {
        let p = AdapterParams {
            dim_in: self.dim_in,
            dim_out: self.dim_out,
            weight: self.weight.clone(),
            bias: self.bias.clone(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let file: AdapterFile = serde_json::from_str(text).map_err(|e| Error::parse(e.line(), e))?;
        file.params()?;
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&io::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("adapter serializes")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        io::write_atomic(path, self.to_json().as_bytes())
    }
}
