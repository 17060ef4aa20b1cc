//! Command line front end: `train`, `topk`, `eval-aopc`, `compare`, `synth`
//! and `anchors`. Every subcommand reads an optional JSON config, applies
//! flag overrides on top and writes a manifest next to its main output.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::aggregate::{write_scores, AggregationKind, Scorer, ScoreContext, DEFAULT_ALPHA};
use crate::anchor::{anchors_of_document, constant_plan, write_trace, AnchorConfig};
use crate::corpus::{load_corpus, word_stats, Corpus, CorpusFormat, IngestOptions, StopWords, DEFAULT_MIN_FREQ};
use crate::error::{Error, Result};
use crate::eval::{aopc_k, quality_timeline, read_snapshots, shared_terms_matrix, write_timeline_csv, TermList};
use crate::model::{argmax, train_bow, BowClassifier, CountingPredictor, ExternalPredictorClient, Predictor, TrainParams};
use crate::perturb::{ExternalPerturbatorClient, Perturbator, UnigramPerturbator, DEFAULT_MASK_PROB};
use crate::remote::Endpoint;
use crate::synth::{generate, SynthConfig};
use crate::topk::{optimization_profile, relabel_by_prediction, run_anytime, Membership, RunInputs, RunOptions, RunSinks, DEFAULT_K};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictorSpec {
    /// Model file written by `train`.
    pub model: Option<PathBuf>,
    /// URL or `cmd:<command>` of an external predictor.
    pub endpoint: Option<String>,
    pub timeout_sec: f64,
    pub batch_size: usize,
    pub max_in_flight: usize,
}

impl Default for PredictorSpec {
    fn default() -> Self {
        PredictorSpec {
            model: None,
            endpoint: None,
            timeout_sec: 30.0,
            batch_size: 64,
            max_in_flight: 4,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PerturbatorSpec {
    /// URL or `cmd:<command>` of an external mask filler; unigram sampling otherwise.
    pub endpoint: Option<String>,
    /// Overrides the profile's candidate pool size.
    pub zeta: Option<usize>,
    pub mask_prob: f64,
    pub timeout_sec: f64,
}

impl Default for PerturbatorSpec {
    fn default() -> Self {
        PerturbatorSpec {
            endpoint: None,
            zeta: None,
            mask_prob: DEFAULT_MASK_PROB,
            timeout_sec: 30.0,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputPaths {
    pub model: Option<PathBuf>,
    pub terms: Option<PathBuf>,
    pub snapshots: Option<PathBuf>,
    pub scores: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub aopc: Option<PathBuf>,
    pub timeline: Option<PathBuf>,
    pub matrix: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
}

/// Everything a run depends on. Loaded from JSON, then overridden by flags.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub corpus: Option<PathBuf>,
    pub format: Option<CorpusFormat>,
    pub ingest: IngestOptions,
    pub predictor: PredictorSpec,
    pub perturbator: PerturbatorSpec,
    pub anchor: AnchorConfig,
    pub agg: String,
    pub alpha: f64,
    pub min_freq: u64,
    pub k: usize,
    pub class: Option<String>,
    pub membership: Membership,
    pub profile: String,
    pub seed: Option<u64>,
    /// Corpus whose word frequencies feed the `av_minfreq` bar; the
    /// aggregation corpus otherwise.
    pub min_freq_corpus: Option<PathBuf>,
    /// Stop-word file; the built-in English list otherwise.
    pub stop_words: Option<PathBuf>,
    pub max_seconds: Option<f64>,
    pub max_calls: Option<u64>,
    pub per_class_nw: bool,
    pub train: TrainParams,
    pub synth: SynthConfig,
    pub outputs: OutputPaths,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            corpus: None,
            format: None,
            ingest: IngestOptions::default(),
            predictor: PredictorSpec::default(),
            perturbator: PerturbatorSpec::default(),
            anchor: AnchorConfig::default(),
            agg: "pr".into(),
            alpha: DEFAULT_ALPHA,
            min_freq: DEFAULT_MIN_FREQ,
            k: DEFAULT_K,
            class: None,
            membership: Membership::Predicted,
            profile: "baseline".into(),
            seed: None,
            min_freq_corpus: None,
            stop_words: None,
            max_seconds: None,
            max_calls: None,
            per_class_nw: false,
            train: TrainParams::default(),
            synth: SynthConfig::default(),
            outputs: OutputPaths::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    fn corpus_path(&self) -> Result<&Path> {
        let p = self
            .corpus
            .as_deref()
            .ok_or_else(|| Error::Config("no corpus given (--corpus)".into()))?;
        if !p.exists() {
            return Err(Error::Config(format!("corpus {} does not exist", p.display())));
        }
        Ok(p)
    }

    pub fn load_corpus(&self) -> Result<Corpus> {
        let path = self.corpus_path()?;
        let format = self.format.unwrap_or_else(|| CorpusFormat::from_path(path));
        load_corpus(path, format, &self.ingest)
    }

    pub fn predictor(&self) -> Result<Box<dyn Predictor>> {
        let spec = &self.predictor;
        match (&spec.model, &spec.endpoint) {
            (Some(_), Some(_)) => Err(Error::Config("give either a model file or a predictor endpoint, not both".into())),
            (Some(m), None) => {
                if !m.exists() {
                    return Err(Error::Config(format!("model {} does not exist", m.display())));
                }
                Ok(Box::new(BowClassifier::load(m)?))
            }
            (None, Some(e)) => Ok(Box::new(ExternalPredictorClient::connect(
                Endpoint::parse(e),
                Duration::from_secs_f64(spec.timeout_sec),
                spec.batch_size,
                spec.max_in_flight,
            )?)),
            (None, None) => Err(Error::Config("no predictor given (--model or --predictor-endpoint)".into())),
        }
    }

    pub fn aggregation(&self) -> Result<AggregationKind> {
        let kind = AggregationKind::parse(&self.agg, self.alpha, self.min_freq)?;
        kind.validate()?;
        Ok(kind)
    }

    pub fn stop_words(&self) -> Result<StopWords> {
        match &self.stop_words {
            Some(p) => StopWords::from_file(p),
            None => Ok(StopWords::english()),
        }
    }

    /// Class named in the config, falling back to the term list's class.
    fn class_index(&self, corpus: &Corpus, fallback: Option<&str>) -> Result<usize> {
        let name = self
            .class
            .as_deref()
            .or(fallback)
            .ok_or_else(|| Error::Config("no class given (--class)".into()))?;
        corpus.class_index(name).ok_or_else(|| Error::UnknownLabel {
            label: name.to_string(),
            known: corpus.classes().to_vec(),
        })
    }

    fn membership_corpus(&self, corpus: &Corpus, f: &dyn Predictor) -> Result<Corpus> {
        crate::model::check_classes(f, corpus)?;
        match self.membership {
            Membership::Predicted => relabel_by_prediction(corpus, f),
            Membership::Gold => Ok(corpus.clone()),
        }
    }
}

/// Record of a finished run: enough to re-execute it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: RunConfig,
    pub threads: usize,
    pub wall_clock_sec: f64,
    pub predictor_calls: u64,
    pub stages: Vec<StageTiming>,
    pub summary: serde_json::Value,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub sec: f64,
}

struct Stages {
    start: Instant,
    last: Instant,
    done: Vec<StageTiming>,
}

impl Stages {
    fn new() -> Self {
        let now = Instant::now();
        Stages {
            start: now,
            last: now,
            done: Vec::new(),
        }
    }

    fn mark(&mut self, stage: &str) {
        let now = Instant::now();
        self.done.push(StageTiming {
            stage: stage.into(),
            sec: (now - self.last).as_secs_f64(),
        });
        self.last = now;
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

fn manifest_path(explicit: &Option<PathBuf>, main: Option<&Path>) -> Option<PathBuf> {
    explicit.clone().or_else(|| {
        main.map(|m| {
            let mut s = m.as_os_str().to_owned();
            s.push(".manifest.json");
            PathBuf::from(s)
        })
    })
}

fn finish(command: &str, cfg: &RunConfig, stages: Stages, calls: u64, main: Option<&Path>, summary: serde_json::Value) -> Result<()> {
    let manifest = RunManifest {
        command: command.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.clone(),
        threads: rayon::current_num_threads(),
        wall_clock_sec: stages.start.elapsed().as_secs_f64(),
        predictor_calls: calls,
        stages: stages.done,
        summary,
    };
    match manifest_path(&cfg.outputs.manifest, main) {
        Some(p) => write_json(&p, &manifest),
        None => Ok(()),
    }
}

#[derive(Debug, Parser)]
#[command(name = "anchor-topk", version, about = "Global top-k word explanations from token-level anchors")]
pub struct Cli {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the built-in bag-of-words classifier.
    Train(TrainArgs),
    /// Anytime top-k search for one class.
    Topk(Box<TopkArgs>),
    /// AOPC^k of a term list, optionally over a snapshot log.
    EvalAopc(EvalArgs),
    /// Shared-terms matrix and AOPC table of several term lists.
    Compare(CompareArgs),
    /// Generate a planted-signal corpus and its ground truth.
    Synth(SynthArgs),
    /// Per-token anchor decisions for selected documents.
    Anchors(Box<AnchorsArgs>),
}

#[derive(Debug, Clone, Default, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub format: Option<CorpusFormat>,
    #[arg(long)]
    pub text_field: Option<String>,
    #[arg(long)]
    pub label_field: Option<String>,
    #[arg(long)]
    pub id_field: Option<String>,
    /// Drop documents longer than this many characters.
    #[arg(long)]
    pub max_chars: Option<usize>,
}

impl DataArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        set(&mut cfg.corpus, &self.corpus);
        set(&mut cfg.format, &self.format);
        set_plain(&mut cfg.ingest.text_field, &self.text_field);
        set_plain(&mut cfg.ingest.label_field, &self.label_field);
        set(&mut cfg.ingest.id_field, &self.id_field);
        set(&mut cfg.ingest.max_chars, &self.max_chars);
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct ModelArgs {
    /// Model file written by `train`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// External predictor: URL or `cmd:<command>`.
    #[arg(long)]
    pub predictor_endpoint: Option<String>,
    #[arg(long)]
    pub membership: Option<Membership>,
}

impl ModelArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        set(&mut cfg.predictor.model, &self.model);
        set(&mut cfg.predictor.endpoint, &self.predictor_endpoint);
        set_plain(&mut cfg.membership, &self.membership);
    }
}

impl std::str::FromStr for Membership {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "predicted" => Ok(Membership::Predicted),
            "gold" => Ok(Membership::Gold),
            other => Err(Error::Config(format!("unknown membership {other:?} (predicted | gold)"))),
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct SamplingArgs {
    /// External mask filler: URL or `cmd:<command>`.
    #[arg(long)]
    pub perturbator_endpoint: Option<String>,
    #[arg(long)]
    pub zeta: Option<usize>,
    #[arg(long)]
    pub mask_prob: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub max_samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl SamplingArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        set(&mut cfg.perturbator.endpoint, &self.perturbator_endpoint);
        set(&mut cfg.perturbator.zeta, &self.zeta);
        set_plain(&mut cfg.perturbator.mask_prob, &self.mask_prob);
        set_plain(&mut cfg.anchor.tau, &self.tau);
        set_plain(&mut cfg.anchor.delta, &self.delta);
        set_plain(&mut cfg.anchor.max_samples, &self.max_samples);
        set(&mut cfg.seed, &self.seed);
    }
}

fn set<T: Clone>(slot: &mut Option<T>, flag: &Option<T>) {
    if flag.is_some() {
        slot.clone_from(flag);
    }
}

fn set_plain<T: Clone>(slot: &mut T, flag: &Option<T>) {
    if let Some(v) = flag {
        *slot = v.clone();
    }
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Where to write the model.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub l2: Option<f64>,
    #[arg(long)]
    pub validation_fraction: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct TopkArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub sampling: SamplingArgs,
    #[arg(long)]
    pub class: Option<String>,
    #[arg(long)]
    pub k: Option<usize>,
    /// sq | av | av_minfreq | h | pr | base | pr_inverse
    #[arg(long)]
    pub agg: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Occurrence threshold of av_minfreq.
    #[arg(long)]
    pub min_freq: Option<u64>,
    /// Corpus whose frequencies feed the av_minfreq bar (e.g. the training split).
    #[arg(long)]
    pub min_freq_corpus: Option<PathBuf>,
    /// baseline | delta_relaxed | masking | adaptive_tau | filtered | sampled | optimized
    #[arg(long)]
    pub profile: Option<String>,
    #[arg(long)]
    pub stop_words: Option<PathBuf>,
    #[arg(long)]
    pub max_seconds: Option<f64>,
    #[arg(long)]
    pub max_calls: Option<u64>,
    /// Term list output (JSON).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Snapshot log output (JSONL), flushed after every document.
    #[arg(long)]
    pub snapshots: Option<PathBuf>,
    /// Per-word score dump (JSONL).
    #[arg(long)]
    pub scores: Option<PathBuf>,
    /// Per-token decision log (JSONL).
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Term list (JSON) written by `topk`.
    #[arg(long)]
    pub terms: PathBuf,
    /// Class to evaluate; defaults to the term list's class.
    #[arg(long)]
    pub class: Option<String>,
    /// Only the first k terms.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Snapshot log to turn into a quality timeline.
    #[arg(long)]
    pub snapshots: Option<PathBuf>,
    /// Timeline output (CSV).
    #[arg(long)]
    pub timeline: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Term lists (JSON) to compare.
    #[arg(required = true, num_args = 1..)]
    pub terms: Vec<PathBuf>,
    /// Report (JSON) with the matrix and, given a corpus and predictor, AOPC values.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Shared-terms matrix (CSV).
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// AOPC table (CSV).
    #[arg(long)]
    pub aopc: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// Corpus output (JSONL).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Ground truth output (JSON).
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub documents: Option<usize>,
    #[arg(long)]
    pub planted: Option<usize>,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct AnchorsArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub sampling: SamplingArgs,
    /// Document ids to explain (repeatable); all documents otherwise.
    #[arg(long = "doc")]
    pub docs: Vec<String>,
    /// Decision log output (JSONL); stdout otherwise.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::Train(a) => cmd_train(&mut cfg, &a),
        Command::Topk(a) => cmd_topk(&mut cfg, &a),
        Command::EvalAopc(a) => cmd_eval_aopc(&mut cfg, &a),
        Command::Compare(a) => cmd_compare(&mut cfg, &a),
        Command::Synth(a) => cmd_synth(&mut cfg, &a),
        Command::Anchors(a) => cmd_anchors(&mut cfg, &a),
    }
}

pub fn cmd_train(cfg: &mut RunConfig, a: &TrainArgs) -> Result<()> {
    a.data.apply(cfg);
    set(&mut cfg.outputs.model, &a.out);
    set(&mut cfg.outputs.manifest, &a.manifest);
    set_plain(&mut cfg.train.epochs, &a.epochs);
    set_plain(&mut cfg.train.learning_rate, &a.learning_rate);
    set_plain(&mut cfg.train.l2, &a.l2);
    set_plain(&mut cfg.train.validation_fraction, &a.validation_fraction);
    set_plain(&mut cfg.train.seed, &a.seed);
    let out = cfg
        .outputs
        .model
        .clone()
        .ok_or_else(|| Error::Config("no model output given (--out)".into()))?;

    let mut stages = Stages::new();
    let corpus = cfg.load_corpus()?;
    stages.mark("load");
    let (model, report) = train_bow(&corpus, &cfg.train)?;
    stages.mark("train");
    model.save(&out)?;
    eprintln!(
        "trained on {} documents: accuracy {:.4}{}",
        report.train_size,
        report.train_accuracy,
        report.validation_accuracy.map(|v| format!(", validation {v:.4}")).unwrap_or_default()
    );
    let summary = serde_json::json!({
        "train_accuracy": report.train_accuracy,
        "validation_accuracy": report.validation_accuracy,
        "selected_epoch": report.selected_epoch,
        "final_loss": report.losses.last(),
        "vocabulary": model.vocabulary().len(),
    });
    finish("train", cfg, stages, 0, Some(&out), summary)
}

pub fn cmd_topk(cfg: &mut RunConfig, a: &TopkArgs) -> Result<()> {
    a.data.apply(cfg);
    a.model.apply(cfg);
    a.sampling.apply(cfg);
    set(&mut cfg.class, &a.class);
    set_plain(&mut cfg.k, &a.k);
    set_plain(&mut cfg.agg, &a.agg);
    set_plain(&mut cfg.alpha, &a.alpha);
    set_plain(&mut cfg.min_freq, &a.min_freq);
    set(&mut cfg.min_freq_corpus, &a.min_freq_corpus);
    set_plain(&mut cfg.profile, &a.profile);
    set(&mut cfg.stop_words, &a.stop_words);
    set(&mut cfg.max_seconds, &a.max_seconds);
    set(&mut cfg.max_calls, &a.max_calls);
    set(&mut cfg.outputs.terms, &a.out);
    set(&mut cfg.outputs.snapshots, &a.snapshots);
    set(&mut cfg.outputs.scores, &a.scores);
    set(&mut cfg.outputs.trace, &a.trace);
    set(&mut cfg.outputs.manifest, &a.manifest);
    let seed = cfg
        .seed
        .ok_or_else(|| Error::Config("topk runs need an explicit --seed".into()))?;
    let agg = cfg.aggregation()?;
    let profile = optimization_profile(&cfg.profile)?;
    if let Some(z) = cfg.perturbator.zeta {
        if z == 0 {
            return Err(Error::Config("zeta must be at least 1".into()));
        }
    }

    let mut stages = Stages::new();
    let raw = cfg.load_corpus()?;
    let f = cfg.predictor()?;
    let f = CountingPredictor::new(f);
    let class = cfg.class_index(&raw, None)?;
    let corpus = cfg.membership_corpus(&raw, &f)?;
    let stats = word_stats(&corpus);
    let stop = cfg.stop_words()?;
    let min_freq_stats = match &cfg.min_freq_corpus {
        Some(p) => {
            let format = cfg.format.unwrap_or_else(|| CorpusFormat::from_path(p));
            Some(word_stats(&load_corpus(p, format, &cfg.ingest)?))
        }
        None => None,
    };
    stages.mark("load");

    let prepared = profile.prepare(&corpus, &stats, &stop, seed)?;
    let zeta = cfg.perturbator.zeta.unwrap_or(profile.zeta);
    let p: Box<dyn Perturbator> = match &cfg.perturbator.endpoint {
        Some(e) => Box::new(ExternalPerturbatorClient::connect(
            Endpoint::parse(e),
            Duration::from_secs_f64(cfg.perturbator.timeout_sec),
            zeta,
            cfg.perturbator.mask_prob,
        )?),
        None => Box::new(UnigramPerturbator::new(&stats, zeta, cfg.perturbator.mask_prob)?),
    };
    if cfg.k > prepared.candidates.len() {
        eprintln!(
            "warning: k = {} exceeds the {} candidate words; emitting the full ranking",
            cfg.k,
            prepared.candidates.len()
        );
    }
    let mut opts = RunOptions::new(class, agg, seed);
    opts.k = cfg.k;
    opts.anchor = cfg.anchor;
    profile.apply(&mut opts);
    if a.sampling.delta.is_some() {
        opts.anchor.delta = cfg.anchor.delta;
    }
    opts.per_class_nw = cfg.per_class_nw;
    opts.max_seconds = cfg.max_seconds;
    opts.max_calls = cfg.max_calls;
    stages.mark("prepare");

    let mut snap_out = cfg.outputs.snapshots.as_deref().map(create).transpose()?;
    let mut trace_out = cfg.outputs.trace.as_deref().map(create).transpose()?;
    let sinks = RunSinks {
        snapshots: snap_out.as_mut().map(|w| w as &mut dyn Write),
        trace: trace_out.as_mut().map(|w| w as &mut dyn Write),
    };
    let inputs = RunInputs {
        corpus: &prepared.corpus,
        stats: &stats,
        candidates: &prepared.candidates,
        min_freq_stats: min_freq_stats.as_ref(),
    };
    let result = run_anytime(inputs, &f, p.as_ref(), &opts, sinks)?;
    for w in [&mut snap_out, &mut trace_out].into_iter().flatten() {
        w.flush().map_err(|e| Error::io("<output>", e))?;
    }
    stages.mark("search");

    let class_name = corpus.classes()[class].clone();
    let list = TermList::new(class_name.clone(), agg.name(), result.topk.clone());
    match &cfg.outputs.terms {
        Some(p) => write_json(p, &list)?,
        None => {
            for t in &list.terms {
                println!("{}\t{}", t.word, t.score);
            }
        }
    }
    if let Some(path) = &cfg.outputs.scores {
        let mut ctx = ScoreContext::new(&stats);
        ctx.entropy_universe = Some(&prepared.candidates);
        ctx.min_freq_stats = min_freq_stats.as_ref();
        let scorer = Scorer::new(&result.counts, agg, class, ctx);
        let mut out = create(path)?;
        write_scores(&mut out, &scorer, &prepared.candidates, &class_name)?;
        out.flush().map_err(|e| Error::io(path, e))?;
    }
    let summary = serde_json::json!({
        "class": class_name,
        "agg": agg,
        "profile": profile,
        "zeta": zeta,
        "delta": opts.anchor.delta,
        "documents_processed": result.documents_processed,
        "documents_total": result.documents_total,
        "tokens_estimated": result.tokens_estimated,
        "tokens_skipped": result.tokens_skipped,
        "filtered_words": result.filtered.len(),
        "search_calls": result.calls,
        "completed": result.completed,
        "search_sec": result.elapsed_sec,
    });
    finish("topk", cfg, stages, f.calls(), cfg.outputs.terms.as_deref(), summary)
}

pub fn cmd_eval_aopc(cfg: &mut RunConfig, a: &EvalArgs) -> Result<()> {
    a.data.apply(cfg);
    a.model.apply(cfg);
    set(&mut cfg.class, &a.class);
    set(&mut cfg.outputs.aopc, &a.out);
    set(&mut cfg.outputs.snapshots, &a.snapshots);
    set(&mut cfg.outputs.timeline, &a.timeline);
    set(&mut cfg.outputs.manifest, &a.manifest);
    let mut terms = TermList::load(&a.terms)?;
    if let Some(k) = a.k {
        terms = terms.truncated(k);
    }

    let mut stages = Stages::new();
    let raw = cfg.load_corpus()?;
    let f = CountingPredictor::new(cfg.predictor()?);
    let class = cfg.class_index(&raw, Some(&terms.class))?;
    let corpus = cfg.membership_corpus(&raw, &f)?;
    stages.mark("load");
    let result = aopc_k(&terms, &corpus, &f, class)?;
    stages.mark("aopc");
    match &cfg.outputs.aopc {
        Some(p) => write_json(p, &result)?,
        None => println!("{}", serde_json::to_string(&result)?),
    }
    if let Some(snap) = &cfg.outputs.snapshots {
        let points = quality_timeline(&read_snapshots(snap)?, &corpus, &f, class)?;
        match &cfg.outputs.timeline {
            Some(p) => write_timeline_csv(create(p)?, &points)?,
            None => write_timeline_csv(std::io::stdout().lock(), &points)?,
        }
        stages.mark("timeline");
    }
    let summary = serde_json::json!({ "aopc": result.value, "k": result.k, "documents": result.documents });
    finish("eval-aopc", cfg, stages, f.calls(), cfg.outputs.aopc.as_deref(), summary)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareReport {
    pub lists: Vec<String>,
    pub shared_terms: Vec<Vec<f64>>,
    pub aopc: Option<Vec<f64>>,
}

pub fn cmd_compare(cfg: &mut RunConfig, a: &CompareArgs) -> Result<()> {
    a.data.apply(cfg);
    a.model.apply(cfg);
    set(&mut cfg.outputs.matrix, &a.matrix);
    set(&mut cfg.outputs.aopc, &a.aopc);
    set(&mut cfg.outputs.manifest, &a.manifest);
    let mut stages = Stages::new();
    let lists = a.terms.iter().map(TermList::load).collect::<Result<Vec<_>>>()?;
    let names: Vec<String> = a.terms.iter().map(|p| p.display().to_string()).collect();
    let matrix = shared_terms_matrix(&lists);
    stages.mark("shared");

    let mut calls = 0;
    let aopc = if cfg.corpus.is_some() {
        let raw = cfg.load_corpus()?;
        let f = CountingPredictor::new(cfg.predictor()?);
        let corpus = cfg.membership_corpus(&raw, &f)?;
        let values = lists
            .iter()
            .map(|l| {
                let c = cfg.class_index(&corpus, Some(&l.class))?;
                Ok(aopc_k(l, &corpus, &f, c)?.value)
            })
            .collect::<Result<Vec<f64>>>()?;
        calls = f.calls();
        stages.mark("aopc");
        Some(values)
    } else {
        None
    };

    if let Some(p) = &cfg.outputs.matrix {
        let mut w = csv::Writer::from_writer(create(p)?);
        let mut header = vec![String::new()];
        header.extend(names.iter().cloned());
        w.write_record(&header)?;
        for (name, row) in names.iter().zip(&matrix) {
            let mut rec = vec![name.clone()];
            rec.extend(row.iter().map(|x| x.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(p, e))?;
    }
    if let (Some(p), Some(values)) = (&cfg.outputs.aopc, &aopc) {
        let mut w = csv::Writer::from_writer(create(p)?);
        w.write_record(["list", "class", "agg", "k", "aopc"])?;
        for ((name, l), v) in names.iter().zip(&lists).zip(values) {
            w.write_record([name.clone(), l.class.clone(), l.agg.clone(), l.len().to_string(), v.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(p, e))?;
    }
    let report = CompareReport {
        lists: names,
        shared_terms: matrix,
        aopc,
    };
    match &a.out {
        Some(p) => write_json(p, &report)?,
        None => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    finish("compare", cfg, stages, calls, a.out.as_deref(), serde_json::to_value(&report)?)
}

pub fn cmd_synth(cfg: &mut RunConfig, a: &SynthArgs) -> Result<()> {
    set(&mut cfg.outputs.corpus, &a.out);
    set(&mut cfg.outputs.truth, &a.truth);
    set(&mut cfg.outputs.manifest, &a.manifest);
    set_plain(&mut cfg.synth.documents, &a.documents);
    set_plain(&mut cfg.synth.planted_per_class, &a.planted);
    set_plain(&mut cfg.synth.noise, &a.noise);
    set_plain(&mut cfg.synth.seed, &a.seed);
    let out = cfg
        .outputs
        .corpus
        .clone()
        .ok_or_else(|| Error::Config("no corpus output given (--out)".into()))?;
    let truth = cfg.outputs.truth.clone().unwrap_or_else(|| out.with_extension("truth.json"));
    let mut stages = Stages::new();
    let s = generate(&cfg.synth)?;
    stages.mark("generate");
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    s.save(&out, &truth)?;
    let flipped = s.rows.iter().filter(|r| r.label != r.clean_label).count();
    let summary = serde_json::json!({ "documents": s.rows.len(), "flipped_labels": flipped, "truth": truth });
    finish("synth", cfg, stages, 0, Some(&out), summary)
}

pub fn cmd_anchors(cfg: &mut RunConfig, a: &AnchorsArgs) -> Result<()> {
    a.data.apply(cfg);
    a.model.apply(cfg);
    a.sampling.apply(cfg);
    set(&mut cfg.outputs.trace, &a.trace);
    set(&mut cfg.outputs.manifest, &a.manifest);
    let seed = cfg.seed.unwrap_or(0);
    cfg.anchor.validate()?;

    let mut stages = Stages::new();
    let corpus = cfg.load_corpus()?;
    let f = CountingPredictor::new(cfg.predictor()?);
    crate::model::check_classes(&f, &corpus)?;
    let stats = word_stats(&corpus);
    let zeta = cfg.perturbator.zeta.unwrap_or(crate::perturb::DEFAULT_ZETA);
    let p: Box<dyn Perturbator> = match &cfg.perturbator.endpoint {
        Some(e) => Box::new(ExternalPerturbatorClient::connect(
            Endpoint::parse(e),
            Duration::from_secs_f64(cfg.perturbator.timeout_sec),
            zeta,
            cfg.perturbator.mask_prob,
        )?),
        None => Box::new(UnigramPerturbator::new(&stats, zeta, cfg.perturbator.mask_prob)?),
    };
    let index = crate::corpus::id_index(&corpus);
    let selected: Vec<usize> = if a.docs.is_empty() {
        (0..corpus.len()).collect()
    } else {
        a.docs
            .iter()
            .map(|id| {
                index
                    .get(id.as_str())
                    .copied()
                    .ok_or_else(|| Error::Input(format!("no document with id {id:?}")))
            })
            .collect::<Result<_>>()?
    };
    stages.mark("load");

    let mut out: Box<dyn Write> = match &cfg.outputs.trace {
        Some(p) => Box::new(create(p)?),
        None => Box::new(std::io::stdout().lock()),
    };
    let plan = constant_plan(&cfg.anchor);
    let mut anchors = 0usize;
    let mut tokens = 0usize;
    for i in selected {
        let d = &corpus.documents()[i];
        let target = argmax(&f.predict_proba(d)?);
        let decisions = anchors_of_document(d, target, &f, p.as_ref(), &cfg.anchor, &plan, seed)?;
        anchors += decisions.iter().filter(|x| x.is_anchor).count();
        tokens += decisions.len();
        write_trace(out.as_mut(), &d.id, &decisions)?;
    }
    out.flush().map_err(|e| Error::io("<trace>", e))?;
    stages.mark("anchors");
    let summary = serde_json::json!({ "tokens": tokens, "anchors": anchors });
    finish("anchors", cfg, stages, f.calls(), cfg.outputs.trace.as_deref(), summary)
}
