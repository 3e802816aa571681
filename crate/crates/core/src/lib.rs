//! Time-aware text triplet mining, a contrastive embedding adapter, and
//! retrieval evaluation over chiral (temporally opposite) action pairs.
//!
//! The pipeline is `miner` → `composer` → `adapter` → `eval`, with embeddings
//! exchanged through the `TARAEMB1` format in [`embfile`].

pub mod adapter;
pub mod composer;
pub mod corpus;
pub mod embed;
pub mod embfile;
pub mod error;
pub mod eval;
pub mod io;
pub mod lemma;
pub mod llm;
pub mod miner;

pub use adapter::{AdapterFile, AdapterParams, Optimizer, TrainConfig, TrainHistory, TripletBatch};
pub use composer::{compose, Triplet, TripletDataset, TripletKind};
pub use corpus::{Caption, CaptionCorpus, ChiralLexicon, ChiralPair, Side, Source};
pub use embed::{sim_matrix, EmbeddingMatrix, SimMatrix};
pub use error::{Error, Result};
pub use eval::{build_splits, Direction, EvalReport, LabeledItem, RetrievalTask, Split};
pub use lemma::{Inflection, LemmaTable};
pub use miner::{MinedCaption, MinedRecord, Miner, RewriteResult, Rewriter, VerbObject};
