//! Subcommand implementations for the `tara` binary.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Deserialize;

use tara_core::adapter::{self, AdapterFile, AdapterParams, Optimizer, TrainConfig, TripletBatch};
use tara_core::composer::{self, build_temporal_triplets, load_triplets, PositiveIndex, TripletDataset};
use tara_core::embfile::{manifest_path_for, read_embeddings, write_embeddings};
use tara_core::eval::{self, Direction, EvalReport, RetrievalTask, Split, SweepSpec};
use tara_core::llm::{rewrite_antonym_external, LlmClient, LlmConfig};
use tara_core::miner::{self, MinedRecord, Miner};
use tara_core::{io, CaptionCorpus, ChiralLexicon, EmbeddingMatrix, LemmaTable};

/// Error for flag combinations clap cannot express; exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Debug, Parser)]
#[command(name = "tara", version, about = "Chiral triplet mining, adapter training and time-aware retrieval evaluation")]
pub struct Cli {
    /// Worker threads for parallel stages (default: available parallelism).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// error, warn, info or debug; overrides TARA_LOG.
    #[arg(long, global = true)]
    pub log_level: Option<log::LevelFilter>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Find chiral captions and write their temporal antonyms.
    Mine(MineArgs),
    /// Mix static and temporal triplets into a training dataset.
    Compose(ComposeArgs),
    /// Train the projection adapter on a triplet dataset.
    Train(TrainArgs),
    /// Score a retrieval task and write a report.
    Eval(EvalArgs),
    /// Compare analytic and finite-difference gradients on a random instance.
    Gradcheck(GradcheckArgs),
    /// Print the distance between video and text embedding centroids.
    Gap(GapArgs),
    /// Write chiral, non-chiral and all-items task files for an items file.
    Split(SplitArgs),
    /// Nearest-centroid probe accuracy of video embeddings.
    Probe(ProbeArgs),
    /// Multiple-choice accuracy over precomputed choice embeddings.
    Mcq(McqArgs),
    /// Compose, train and evaluate over a grid of n, alpha and seeds.
    Sweep(SweepArgs),
    /// Collect the reports of several run directories into one CSV.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RewriterArg {
    Template,
    External,
}

#[derive(Debug, Args)]
pub struct MineArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Lexicon file; the shipped default is used when omitted.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// Inflection table; the shipped default is used when omitted.
    #[arg(long)]
    pub lemmas: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "template")]
    pub rewriter: RewriterArg,
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long, default_value_t = 30_000)]
    pub timeout_ms: u64,
    #[arg(long, default_value_t = 3)]
    pub retries: u32,
    #[arg(long, default_value_t = 500)]
    pub backoff_ms: u64,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_alpha(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("alpha must lie in [0, 1], got {v}"))
    }
}

#[derive(Debug, Args)]
pub struct ComposeArgs {
    /// Static triplet pool.
    #[arg(long = "static")]
    pub static_pool: PathBuf,
    /// Prebuilt temporal triplet pool.
    #[arg(long, conflicts_with = "mined", required_unless_present = "mined")]
    pub temporal: Option<PathBuf>,
    /// Mined file to build temporal triplets from.
    #[arg(long)]
    pub mined: Option<PathBuf>,
    /// Subject pool for placeholder replacement; shipped default when omitted.
    #[arg(long)]
    pub subjects: Option<PathBuf>,
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    #[arg(long, default_value_t = 0.1, value_parser = parse_alpha)]
    pub alpha: f64,
    #[arg(long, default_value_t = 17)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OptimizerArg {
    Adam,
    Sgd,
}

#[derive(Debug, Clone, Args)]
pub struct TrainFlags {
    #[arg(long, default_value_t = 0.05)]
    pub tau: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 256)]
    pub batch: usize,
    #[arg(long, default_value_t = 2)]
    pub epochs: usize,
    #[arg(long, value_enum, default_value = "adam")]
    pub optimizer: OptimizerArg,
    #[arg(long)]
    pub dim_out: Option<usize>,
    /// Learn a bias term.
    #[arg(long)]
    pub bias: bool,
}

impl TrainFlags {
    fn config(&self, seed: u64) -> Result<TrainConfig> {
        let config = TrainConfig {
            tau: self.tau,
            lr: self.lr,
            batch: self.batch,
            epochs: self.epochs,
            seed,
            optimizer: match self.optimizer {
                OptimizerArg::Adam => Optimizer::default(),
                OptimizerArg::Sgd => Optimizer::Sgd,
            },
            dim_out: self.dim_out,
            bias: self.bias,
        };
        config.validate().map_err(|e| usage(e.to_string()))?;
        Ok(config)
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Base sentence embeddings keyed by sentence text.
    #[arg(long)]
    pub embeddings: PathBuf,
    #[command(flatten)]
    pub train: TrainFlags,
    #[arg(long, default_value_t = 17)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Per-step loss CSV; defaults to the adapter path with a `.history.csv` suffix.
    #[arg(long)]
    pub history: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TaskArg {
    Chiral,
    #[value(alias = "non_chiral")]
    NonChiral,
    All,
}

impl From<TaskArg> for Split {
    fn from(t: TaskArg) -> Split {
        match t {
            TaskArg::Chiral => Split::Chiral,
            TaskArg::NonChiral => Split::NonChiral,
            TaskArg::All => Split::All,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DirectionArg {
    T2v,
    V2t,
}

impl From<DirectionArg> for Direction {
    fn from(d: DirectionArg) -> Direction {
        match d {
            DirectionArg::T2v => Direction::T2v,
            DirectionArg::V2t => Direction::V2t,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AdaptArg {
    Both,
    Text,
    Video,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Items file; the task is built from it with --task and --direction.
    #[arg(long, required_unless_present = "task_file")]
    pub items: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "chiral")]
    pub task: TaskArg,
    #[arg(long, value_enum, default_value = "t2v")]
    pub direction: DirectionArg,
    #[arg(long, requires = "items")]
    pub video: Option<PathBuf>,
    #[arg(long, requires = "items")]
    pub text: Option<PathBuf>,
    /// Precomputed task file instead of --items.
    #[arg(long, conflicts_with = "items")]
    pub task_file: Option<PathBuf>,
    /// Query embeddings for --task-file (e.g. composed queries).
    #[arg(long, requires = "task_file")]
    pub queries: Option<PathBuf>,
    /// Gallery embeddings for --task-file.
    #[arg(long, requires = "task_file")]
    pub gallery: Option<PathBuf>,
    /// Negated query embeddings; switches to negation scoring.
    #[arg(long, requires = "task_file")]
    pub negated: Option<PathBuf>,
    #[arg(long)]
    pub adapter: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "both")]
    pub adapt: AdaptArg,
    #[arg(long, value_delimiter = ',', default_values_t = vec![1, 5, 10, 50])]
    pub k: Vec<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    /// CSV export; defaults to the report path with a `.csv` extension.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 8)]
    pub dim: usize,
    #[arg(long, default_value_t = 4)]
    pub batch: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.5)]
    pub tau: f64,
    #[arg(long, default_value_t = 1e-5)]
    pub step: f64,
}

#[derive(Debug, Args)]
pub struct GapArgs {
    #[arg(long)]
    pub video: PathBuf,
    #[arg(long)]
    pub text: PathBuf,
    #[arg(long)]
    pub adapter: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub items: PathBuf,
    #[arg(long, value_enum)]
    pub direction: DirectionArg,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    /// Items file supplying class labels.
    #[arg(long)]
    pub items: PathBuf,
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub adapter: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct McqArgs {
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long)]
    pub choices: PathBuf,
    /// One `{"query": id, "choices": [id], "answer": index}` per line.
    #[arg(long)]
    pub questions: PathBuf,
    #[arg(long)]
    pub adapter: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long = "static")]
    pub static_pool: PathBuf,
    #[arg(long)]
    pub temporal: PathBuf,
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long)]
    pub items: PathBuf,
    #[arg(long)]
    pub video: PathBuf,
    #[arg(long)]
    pub text: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    pub ns: Vec<usize>,
    #[arg(long, value_delimiter = ',', required = true, value_parser = parse_alpha)]
    pub alphas: Vec<f64>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub seeds: Vec<u64>,
    #[arg(long, value_enum, default_value = "chiral")]
    pub task: TaskArg,
    #[arg(long, value_enum, default_value = "v2t")]
    pub direction: DirectionArg,
    #[command(flatten)]
    pub train: TrainFlags,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Run directories; every `*.json` report inside is collected.
    #[arg(long, num_args = 1.., required = true)]
    pub runs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    init_logging(cli.log_level);
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return 2;
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                2
            } else {
                1
            }
        }
    }
}

fn init_logging(level: Option<log::LevelFilter>) {
    let mut builder = env_logger::Builder::from_env(env_logger::Env::new().filter_or("TARA_LOG", "warn"));
    if let Some(level) = level {
        builder.filter_level(level);
    }
    let _ = builder.try_init();
}

pub fn execute(command: &Command) -> Result<()> {
    match command {
        Command::Mine(a) => cmd_mine(a),
        Command::Compose(a) => cmd_compose(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Gradcheck(a) => cmd_gradcheck(a),
        Command::Gap(a) => cmd_gap(a),
        Command::Split(a) => cmd_split(a),
        Command::Probe(a) => cmd_probe(a),
        Command::Mcq(a) => cmd_mcq(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Report(a) => cmd_report(a),
    }
}

fn load_matrix(path: &Path) -> Result<EmbeddingMatrix> {
    read_embeddings(path, &manifest_path_for(path)).with_context(|| format!("reading embeddings {}", path.display()))
}

fn load_adapter(path: Option<&PathBuf>) -> Result<Option<AdapterParams>> {
    path.map(|p| {
        AdapterFile::load(p)
            .and_then(|f| f.params())
            .with_context(|| format!("reading adapter {}", p.display()))
    })
    .transpose()
}

/// Applies the adapter if given, otherwise L2-normalizes.
fn prepare(m: EmbeddingMatrix, adapter: Option<&AdapterParams>) -> Result<EmbeddingMatrix> {
    Ok(match adapter {
        Some(p) => adapter::forward(p, &m)?,
        None if m.is_normalized() => m,
        None => m.l2_normalize()?,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    io::write_atomic(path, text.as_bytes()).with_context(|| format!("writing {}", path.display()))
}

pub fn cmd_mine(a: &MineArgs) -> Result<()> {
    if a.rewriter == RewriterArg::External && a.endpoint.is_none() {
        return Err(usage("--rewriter external needs --endpoint"));
    }
    let corpus = CaptionCorpus::load(&a.corpus)?;
    let lexicon = match &a.lexicon {
        Some(p) => ChiralLexicon::load(p)?,
        None => ChiralLexicon::default_lexicon(),
    };
    let lemmas = match &a.lemmas {
        Some(p) => LemmaTable::load(p)?,
        None => LemmaTable::default_table(),
    };
    let miner = Miner::new(lexicon, lemmas);
    let mined = miner.mine_chiral(&corpus);
    let records: Vec<MinedRecord> = match a.rewriter {
        RewriterArg::Template => mined
            .iter()
            .map(|m| {
                let r = miner.rewrite_antonym_template(m);
                if let Some(d) = &r.diagnostic {
                    log::info!("{}: {d}", m.caption.id);
                }
                MinedRecord::new(m, &r)
            })
            .collect(),
        RewriterArg::External => {
            let mut config = LlmConfig::new(a.endpoint.clone().unwrap_or_default());
            config.timeout = Duration::from_millis(a.timeout_ms);
            config.retries = a.retries;
            config.backoff = Duration::from_millis(a.backoff_ms);
            let client = LlmClient::new(config);
            mined
                .par_iter()
                .map(|m| {
                    rewrite_antonym_external(m, &client)
                        .map(|r| MinedRecord::new(m, &r))
                        .with_context(|| format!("rewriting caption {}", m.caption.id))
                })
                .collect::<Result<_>>()?
        }
    };
    miner::write_mined(&a.out, &records)?;
    let antonyms = records.iter().filter(|r| r.antonym.is_some()).count();
    println!(
        "captions={} matched={} antonyms={} skipped={}",
        corpus.len(),
        records.len(),
        antonyms,
        corpus.len() - antonyms
    );
    Ok(())
}

pub fn cmd_compose(a: &ComposeArgs) -> Result<()> {
    let static_pool = load_triplets(&a.static_pool).context("reading static pool")?;
    let temporal_pool = match (&a.temporal, &a.mined) {
        (Some(p), _) => load_triplets(p).context("reading temporal pool")?,
        (None, Some(p)) => {
            let mined = miner::read_mined(p)?;
            let subjects = match &a.subjects {
                Some(p) => miner::load_subjects(p)?,
                None => miner::default_subjects(),
            };
            let index = PositiveIndex::build(&mined);
            let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
            let (triplets, stats) = build_temporal_triplets(&mined, &index, &subjects, &mut rng);
            log::info!("temporal pool: {stats:?}");
            triplets
        }
        (None, None) => return Err(usage("one of --temporal or --mined is required")),
    };
    let dataset = composer::compose(&static_pool, &temporal_pool, a.n, a.alpha, a.seed)?;
    dataset.write(&a.out)?;
    println!("{}", serde_json::to_string(&dataset.header())?);
    Ok(())
}

pub fn cmd_train(a: &TrainArgs) -> Result<()> {
    let config = a.train.config(a.seed)?;
    let dataset = TripletDataset::load(&a.dataset)?;
    let base = load_matrix(&a.embeddings)?;
    let (params, history) = adapter::train(&dataset, &base, &config)?;
    AdapterFile::new(&params, &config).write(&a.out)?;
    let history_path = a.history.clone().unwrap_or_else(|| a.out.with_extension("history.csv"));
    write_text(&history_path, &history.to_csv())?;
    let last = history.epoch_losses.last().copied().unwrap_or(f64::NAN);
    println!("steps={} final_epoch_loss={last:.6}", history.step_losses.len());
    Ok(())
}

fn task_from_items(a: &EvalArgs, items_path: &Path) -> Result<RetrievalTask> {
    let items = eval::load_items(items_path)?;
    let mut splits = eval::build_splits(&items, a.direction.into())?;
    let task = splits.tasks.remove(&Split::from(a.task)).expect("every split is built");
    if task.queries.is_empty() {
        bail!("task {} has no queries", task.split);
    }
    Ok(task)
}

pub fn evaluate(a: &EvalArgs) -> Result<EvalReport> {
    let adapter = load_adapter(a.adapter.as_ref())?;
    let on_text = matches!(a.adapt, AdaptArg::Both | AdaptArg::Text);
    let on_video = matches!(a.adapt, AdaptArg::Both | AdaptArg::Video);
    if let Some(items_path) = &a.items {
        let (Some(video), Some(text)) = (&a.video, &a.text) else {
            return Err(usage("--items needs --video and --text"));
        };
        let task = task_from_items(a, items_path)?;
        let video = prepare(load_matrix(video)?, adapter.as_ref().filter(|_| on_video))?;
        let text = prepare(load_matrix(text)?, adapter.as_ref().filter(|_| on_text))?;
        let (queries, gallery) = match task.direction {
            Direction::T2v => (text, video),
            Direction::V2t => (video, text),
        };
        let sims = eval::task_sims(&task, &queries, &gallery)?;
        return Ok(eval::evaluate_retrieval(&sims, &task, &a.k, a.seed)?);
    }
    let task_file = a.task_file.as_ref().expect("clap enforces items or task file");
    let (Some(queries), Some(gallery)) = (&a.queries, &a.gallery) else {
        return Err(usage("--task-file needs --queries and --gallery"));
    };
    let task = RetrievalTask::load(task_file)?;
    let (q_adapt, g_adapt) = match task.direction {
        Direction::T2v => (on_text, on_video),
        Direction::V2t => (on_video, on_text),
    };
    let queries = prepare(load_matrix(queries)?, adapter.as_ref().filter(|_| q_adapt))?;
    let gallery = prepare(load_matrix(gallery)?, adapter.as_ref().filter(|_| g_adapt))?;
    if let Some(negated) = &a.negated {
        let negated = prepare(load_matrix(negated)?, adapter.as_ref().filter(|_| q_adapt))?;
        let (r5, rn5) = eval::negation_eval(&queries, &negated, &gallery, &task)?;
        let report = EvalReport {
            task: eval::TaskDescriptor {
                mode: "negation".into(),
                direction: Some(task.direction),
                split: Some(task.split),
                n_queries: task.queries.len(),
            },
            metrics: BTreeMap::from([("r_at_5".to_string(), r5), ("r_neg_at_5".to_string(), rn5)]),
            per_query: Vec::new(),
            seed: a.seed,
        };
        report.validate()?;
        return Ok(report);
    }
    Ok(eval::composed_retrieval(&queries, &gallery, &task, &a.k, a.seed)?)
}

pub fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let report = evaluate(a)?;
    write_text(&a.out, &report.to_json())?;
    let csv = a.csv.clone().unwrap_or_else(|| a.out.with_extension("csv"));
    write_text(&csv, &report.to_csv())?;
    for (m, v) in &report.metrics {
        println!("{m}={v:.6}");
    }
    Ok(())
}

/// Random adapter and batch for the gradient check.
pub fn gradcheck_instance(dim: usize, batch: usize, seed: u64, bias: bool) -> (AdapterParams, TripletBatch) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gauss = |rng: &mut ChaCha8Rng| {
        // Box-Muller; unit-variance weights keep the loss well away from saturation
        let u: f64 = rng.random_range(f64::EPSILON..1.0);
        let v: f64 = rng.random();
        (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
    };
    let params = AdapterParams {
        dim_in: dim,
        dim_out: dim,
        weight: (0..dim * dim).map(|_| gauss(&mut rng)).collect(),
        bias: bias.then(|| (0..dim).map(|_| 0.1 * gauss(&mut rng)).collect()),
    };
    let mut b = TripletBatch::default();
    for _ in 0..batch {
        let row = |rng: &mut ChaCha8Rng| (0..dim).map(|_| gauss(rng)).collect::<Vec<f64>>();
        let (x, y, z) = (row(&mut rng), row(&mut rng), row(&mut rng));
        b.push(x, y, z);
    }
    (params, b)
}

pub fn cmd_gradcheck(a: &GradcheckArgs) -> Result<()> {
    if a.dim == 0 || a.batch == 0 {
        return Err(usage("--dim and --batch must be at least 1"));
    }
    let (params, batch) = gradcheck_instance(a.dim, a.batch, a.seed, true);
    let err = adapter::grad_check(&params, &batch, a.tau, a.step)?;
    println!("max_rel_err={err:.3e}");
    if err >= 1e-3 {
        bail!("gradient check failed: max relative error {err:.3e} >= 1e-3");
    }
    Ok(())
}

pub fn cmd_gap(a: &GapArgs) -> Result<()> {
    let adapter = load_adapter(a.adapter.as_ref())?;
    let video = prepare(load_matrix(&a.video)?, adapter.as_ref())?;
    let text = prepare(load_matrix(&a.text)?, adapter.as_ref())?;
    println!("{:.6}", eval::modality_gap(&video, &text)?);
    Ok(())
}

pub fn cmd_split(a: &SplitArgs) -> Result<()> {
    let items = eval::load_items(&a.items)?;
    let direction: Direction = a.direction.into();
    let splits = eval::build_splits(&items, direction)?;
    std::fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    for (split, task) in &splits.tasks {
        task.write(&a.out_dir.join(format!("{direction}_{split}.json")))?;
        println!("{direction}/{split}: {} queries", task.queries.len());
    }
    for d in &splits.dropped {
        eprintln!("dropped: {d}");
    }
    Ok(())
}

fn labels_for(m: &EmbeddingMatrix, labels: &BTreeMap<String, String>) -> Result<Vec<String>> {
    m.ids()
        .iter()
        .map(|id| {
            labels
                .get(id)
                .cloned()
                .with_context(|| format!("embedding {id:?} is not in the items file"))
        })
        .collect()
}

pub fn cmd_probe(a: &ProbeArgs) -> Result<()> {
    let adapter = load_adapter(a.adapter.as_ref())?;
    let labels: BTreeMap<String, String> = eval::load_items(&a.items)?
        .into_iter()
        .map(|i| (i.id, i.class_label))
        .collect();
    let train = prepare(load_matrix(&a.train)?, adapter.as_ref())?;
    let test = prepare(load_matrix(&a.test)?, adapter.as_ref())?;
    let acc = eval::nearest_centroid_probe(&train, &labels_for(&train, &labels)?, &test, &labels_for(&test, &labels)?)?;
    println!("probe_acc={acc:.6}");
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Question {
    query: String,
    choices: Vec<String>,
    answer: usize,
}

pub fn cmd_mcq(a: &McqArgs) -> Result<()> {
    let adapter = load_adapter(a.adapter.as_ref())?;
    let queries = prepare(load_matrix(&a.queries)?, adapter.as_ref())?;
    let choices = prepare(load_matrix(&a.choices)?, adapter.as_ref())?;
    let text = std::fs::read_to_string(&a.questions).with_context(|| format!("reading {}", a.questions.display()))?;
    let mut ids = Vec::new();
    let mut sets = Vec::new();
    let mut answers = Vec::new();
    for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let q: Question = serde_json::from_str(line).with_context(|| format!("line {}", n + 1))?;
        sets.push(choices.select(&q.choices)?);
        ids.push(q.query);
        answers.push(q.answer);
    }
    let acc = eval::mcq_accuracy(&queries.select(&ids)?, &sets, &answers)?;
    println!("mcq_acc={acc:.6}");
    Ok(())
}

pub fn cmd_sweep(a: &SweepArgs) -> Result<()> {
    let static_pool = load_triplets(&a.static_pool)?;
    let temporal_pool = load_triplets(&a.temporal)?;
    let base = load_matrix(&a.embeddings)?;
    let items = eval::load_items(&a.items)?;
    let task = eval::build_splits(&items, a.direction.into())?
        .tasks
        .remove(&Split::from(a.task))
        .expect("every split is built");
    let video = load_matrix(&a.video)?;
    let text = load_matrix(&a.text)?;
    let spec = SweepSpec {
        ns: a.ns.clone(),
        alphas: a.alphas.clone(),
        seeds: a.seeds.clone(),
    };
    a.train.config(0)?;
    let table = eval::ablation_sweep(&spec, |n, alpha, seed| {
        let dataset = composer::compose(&static_pool, &temporal_pool, n, alpha, seed)?;
        let config = TrainConfig {
            seed,
            ..a.train.config(seed).expect("validated above")
        };
        let (params, _) = adapter::train(&dataset, &base, &config)?;
        let v = adapter::forward(&params, &video)?;
        let t = adapter::forward(&params, &text)?;
        let (q, g) = match task.direction {
            Direction::T2v => (t, v),
            Direction::V2t => (v, t),
        };
        let report = eval::evaluate_retrieval(&eval::task_sims(&task, &q, &g)?, &task, &[1, 5, 10], Some(seed))?;
        let mut metrics = report.metrics;
        metrics.insert("n_static".into(), dataset.n_static as f64);
        metrics.insert("n_temporal".into(), dataset.n_temporal as f64);
        Ok(metrics)
    })?;
    std::fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    write_text(&a.out_dir.join("sweep.csv"), &table.to_csv())?;
    let metric = if task.split == Split::Chiral && task.direction == Direction::V2t {
        "binary_acc"
    } else {
        "map"
    };
    write_text(&a.out_dir.join("chart.json"), &table.chart_spec("sweep.csv", metric))?;
    for row in table.rows.iter().filter(|r| r.seed.is_none()) {
        let (m, s) = (row.metrics.get(metric), row.std.as_ref().and_then(|s| s.get(metric)));
        if let (Some(m), Some(s)) = (m, s) {
            println!("n={} alpha={} {metric}={}", row.n, row.alpha, eval::format_mean_std(*m, *s));
        }
    }
    Ok(())
}

pub fn cmd_report(a: &ReportArgs) -> Result<()> {
    let mut out = String::from("run,task,metric,value\n");
    for dir in &a.runs {
        let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
            .with_context(|| format!("reading run directory {}", dir.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        let run = dir.file_name().map_or_else(|| dir.display().to_string(), |n| n.to_string_lossy().into_owned());
        let mut found = 0;
        for p in paths {
            // adapters and task files share the extension; only reports are collected
            let Ok(report) = EvalReport::load(&p) else { continue };
            found += 1;
            for row in report.csv_rows() {
                out.push_str(&format!("{run},{row}\n"));
            }
        }
        if found == 0 {
            bail!("no reports found in {}", dir.display());
        }
    }
    write_text(&a.out, &out)?;
    println!("{}", a.out.display());
    Ok(())
}

/// Writes an embedding matrix and its manifest next to it.
pub fn save_matrix(m: &EmbeddingMatrix, path: &Path) -> Result<()> {
    Ok(write_embeddings(m, path, &manifest_path_for(path))?)
}
