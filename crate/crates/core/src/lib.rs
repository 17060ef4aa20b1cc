//! Anytime top-k global aggregation of token-level anchor explanations.
//!
//! A black-box text classifier is explained per token with anchors, the
//! per-token decisions are tallied into anchor / non-anchor counts per word
//! and class, and an aggregation turns those counts into a global word score.
//! [`topk::run_anytime`] processes documents in order of model confidence and
//! keeps a valid top-k list after every document.

pub mod aggregate;
pub mod anchor;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod model;
pub mod perturb;
pub mod remote;
pub mod rng;
pub mod synth;
pub mod topk;

pub use aggregate::{AggregationKind, AnchorCounts, ScoredWord, Scorer};
pub use anchor::{AnchorConfig, AnchorDecision};
pub use corpus::{CandidateSet, Corpus, Document, StopWords, WordStats};
pub use error::{Error, Result};
pub use eval::{aopc_k, shared_terms_ratio, TermList};
pub use model::{BowClassifier, Predictor};
pub use perturb::{Perturbator, UnigramPerturbator};
pub use topk::{run_anytime, RunInputs, RunOptions, RunResult, RunSinks};
