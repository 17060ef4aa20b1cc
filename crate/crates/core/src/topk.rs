//! The anytime top-k driver.
//!
//! Documents are visited in descending prediction confidence. After each
//! document the tallies grow, every candidate is rescored on the partial
//! tallies (its pseudo-score), the top-k list is refreshed and a snapshot is
//! emitted. Words whose optimistic upper bound falls below the current k-th
//! score can be dropped for the rest of the run, which saves their sampling.

use std::collections::{BTreeSet, HashMap};
use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::aggregate::{rank_cmp, AggregationKind, AnchorCounts, ScoreContext, ScoredWord, Scorer, DEFAULT_ALPHA};
use crate::anchor::{adaptive_tau, anchors_of_document, write_trace, AnchorConfig, TokenPlan};
use crate::corpus::{filter_candidates, sample_documents, CandidateSet, ClassId, Corpus, Document, StopWords, WordStats};
use crate::error::{Error, Result};
use crate::model::{argmax, CountingPredictor, Predictor};
use crate::perturb::{Perturbator, UnigramPerturbator, DEFAULT_MASK_PROB, DEFAULT_ZETA, REDUCED_ZETA};

pub const DEFAULT_K: usize = 20;
pub const RELAXED_DELTA: f64 = 0.3;
pub const DEFAULT_SAMPLE_FRACTION: f64 = 0.5;

/// Indices of the class-`c` documents by descending `f̂(d, c)`, ties by id.
pub fn order_documents(corpus: &Corpus, f: &dyn Predictor, c: ClassId) -> Result<Vec<usize>> {
    let members: Vec<usize> = (0..corpus.len()).filter(|&i| corpus.label(i) == c).collect();
    Ok(confidence_order(corpus, f, members)?.into_iter().map(|(i, _)| i).collect())
}

/// `members` by descending probability of their own label, ties by id,
/// each paired with its predicted class.
fn confidence_order(corpus: &Corpus, f: &dyn Predictor, members: Vec<usize>) -> Result<Vec<(usize, ClassId)>> {
    let docs: Vec<&Document> = members.iter().map(|&i| &corpus.documents()[i]).collect();
    let probs = f.predict_proba_batch(&docs)?;
    let mut keyed: Vec<(usize, f64, ClassId)> = members
        .into_iter()
        .zip(&probs)
        .map(|(i, p)| (i, p[corpus.label(i)], argmax(p)))
        .collect();
    keyed.sort_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then_with(|| corpus.documents()[a.0].id.cmp(&corpus.documents()[b.0].id))
    });
    Ok(keyed.into_iter().map(|(i, _, t)| (i, t)).collect())
}

/// The same corpus with every label replaced by the predicted class.
pub fn relabel_by_prediction(corpus: &Corpus, f: &dyn Predictor) -> Result<Corpus> {
    let docs: Vec<&Document> = corpus.documents().iter().collect();
    corpus.relabeled(f.predict_batch(&docs)?)
}

/// How the members of each class are chosen.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Membership {
    /// The class the predictor assigns.
    #[default]
    Predicted,
    /// The corpus label.
    Gold,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub k: usize,
    pub class: ClassId,
    pub agg: AggregationKind,
    pub anchor: AnchorConfig,
    pub adaptive_tau: bool,
    /// Divide the adaptive-threshold pseudo-score by the class-specific count
    /// instead of the corpus-wide one.
    pub per_class_nw: bool,
    pub upper_bound_filter: bool,
    pub seed: u64,
    pub max_seconds: Option<f64>,
    pub max_calls: Option<u64>,
}

impl RunOptions {
    pub fn new(class: ClassId, agg: AggregationKind, seed: u64) -> Self {
        RunOptions {
            k: DEFAULT_K,
            class,
            agg,
            anchor: AnchorConfig::default(),
            adaptive_tau: false,
            per_class_nw: false,
            upper_bound_filter: false,
            seed,
            max_seconds: None,
            max_calls: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        self.anchor.validate()?;
        self.agg.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t_sec: f64,
    pub calls: u64,
    pub doc_index: usize,
    pub topk: Vec<ScoredWord>,
}

/// Best-`k` list over the non-filtered words, in ranking order.
#[derive(Debug, Clone, Default)]
pub struct TopKState {
    k: usize,
    heap: Vec<ScoredWord>,
    filtered: BTreeSet<String>,
}

impl TopKState {
    pub fn new(k: usize) -> Self {
        TopKState {
            k,
            heap: Vec::new(),
            filtered: BTreeSet::new(),
        }
    }

    pub fn members(&self) -> &[ScoredWord] {
        &self.heap
    }

    pub fn is_full(&self) -> bool {
        self.heap.len() >= self.k
    }

    /// The k-th member, once the list is full.
    pub fn w_min(&self) -> Option<&ScoredWord> {
        self.is_full().then(|| self.heap.last()).flatten()
    }

    pub fn contains(&self, w: &str) -> bool {
        self.heap.iter().any(|s| s.word == w)
    }

    pub fn filtered(&self) -> &BTreeSet<String> {
        &self.filtered
    }

    pub fn is_filtered(&self, w: &str) -> bool {
        self.filtered.contains(w)
    }

    /// True iff the list is full, `w` is outside it, and `upper < score(w_min)`.
    pub fn should_filter(&self, w: &str, upper: f64) -> bool {
        match self.w_min() {
            Some(min) => !self.contains(w) && upper < min.score,
            None => false,
        }
    }

    pub fn filter(&mut self, w: &str) {
        self.filtered.insert(w.to_string());
    }

    /// Replaces the list by the best `k` of `scored`, skipping filtered words.
    /// A word ranks above another when its score is higher, or equal with a
    /// lexicographically smaller word.
    pub fn refresh(&mut self, scored: impl IntoIterator<Item = ScoredWord>) {
        let mut all: Vec<ScoredWord> = scored.into_iter().filter(|s| !self.filtered.contains(&s.word)).collect();
        all.sort_by(|a, b| rank_cmp((&a.word, a.score), (&b.word, b.score)));
        all.truncate(self.k);
        self.heap = all;
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    /// Final list `T_c`, best first.
    pub topk: Vec<ScoredWord>,
    pub snapshots: Vec<Snapshot>,
    pub counts: AnchorCounts,
    pub filtered: BTreeSet<String>,
    /// Documents sent to the predictor, including the ordering pass.
    pub calls: u64,
    pub documents_processed: usize,
    pub documents_total: usize,
    pub tokens_estimated: u64,
    pub tokens_skipped: u64,
    /// False when a time or call limit ended the run early.
    pub completed: bool,
    pub elapsed_sec: f64,
}

/// Optional outputs written while the run progresses.
#[derive(Default)]
pub struct RunSinks<'a> {
    /// One JSON line per snapshot, flushed after each document.
    pub snapshots: Option<&'a mut dyn Write>,
    /// One JSON line per token decision.
    pub trace: Option<&'a mut dyn Write>,
}

/// Inputs shared by every run over the same aggregation set.
#[derive(Debug, Clone, Copy)]
pub struct RunInputs<'a> {
    /// Documents to process; labels define class membership.
    pub corpus: &'a Corpus,
    /// Statistics of the full aggregation set (`N_w`, document frequencies).
    pub stats: &'a WordStats,
    pub candidates: &'a CandidateSet,
    /// Frequencies behind the `av_minfreq` bar when they come from another
    /// split (e.g. the training set); `stats` otherwise.
    pub min_freq_stats: Option<&'a WordStats>,
}

fn write_line<T: Serialize>(out: &mut dyn Write, value: &T, what: &str) -> Result<()> {
    serde_json::to_writer(&mut *out, value)?;
    out.write_all(b"\n").map_err(|e| Error::io(what, e))?;
    out.flush().map_err(|e| Error::io(what, e))
}

/// Runs the anytime top-k search for `opts.class`.
pub fn run_anytime(
    inputs: RunInputs<'_>,
    f: &dyn Predictor,
    p: &dyn Perturbator,
    opts: &RunOptions,
    mut sinks: RunSinks<'_>,
) -> Result<RunResult> {
    opts.validate()?;
    let RunInputs {
        corpus,
        stats,
        candidates,
        min_freq_stats,
    } = inputs;
    let c = opts.class;
    let n_classes = corpus.classes().len();
    if c >= n_classes {
        return Err(Error::Config(format!("class index {c} out of range")));
    }
    if candidates.is_empty() {
        return Err(Error::Config("candidate set is empty".into()));
    }
    let start = Instant::now();
    let f = CountingPredictor::new(f);

    let members: Vec<usize> = if opts.agg.needs_all_classes() {
        (0..corpus.len()).collect()
    } else {
        (0..corpus.len()).filter(|&i| corpus.label(i) == c).collect()
    };
    let visit = confidence_order(corpus, &f, members)?;
    let order: Vec<usize> = visit.iter().map(|v| v.0).collect();
    let targets: HashMap<usize, ClassId> = visit.into_iter().collect();

    let mut remaining: HashMap<&str, u64> = HashMap::new();
    for &i in &order {
        if corpus.label(i) == c {
            for w in corpus.documents()[i].words() {
                if candidates.contains(w) {
                    *remaining.entry(w).or_insert(0) += 1;
                }
            }
        }
    }

    let mut ctx = ScoreContext::new(stats);
    ctx.entropy_universe = Some(candidates);
    ctx.min_freq_stats = min_freq_stats;
    let pr_alpha = match opts.agg {
        AggregationKind::Pr { alpha } | AggregationKind::PrInverse { alpha } => alpha,
        _ => DEFAULT_ALPHA,
    };

    let mut counts = AnchorCounts::new(n_classes);
    let mut state = TopKState::new(opts.k);
    let mut snapshots = Vec::new();
    let mut tokens_estimated = 0u64;
    let mut tokens_skipped = 0u64;
    let mut completed = true;
    let mut processed = 0;

    state.refresh(score_candidates(&Scorer::new(&counts, opts.agg, c, ctx), candidates));

    for (doc_index, &i) in order.iter().enumerate() {
        let over_time = opts.max_seconds.is_some_and(|s| start.elapsed().as_secs_f64() >= s);
        let over_calls = opts.max_calls.is_some_and(|m| f.calls() >= m);
        if over_time || over_calls {
            completed = false;
            break;
        }
        let d = &corpus.documents()[i];
        let label = corpus.label(i);

        let taus: HashMap<&str, f64> = if opts.adaptive_tau && opts.agg.uses_anchors() {
            let pr = Scorer::new(&counts, AggregationKind::Pr { alpha: pr_alpha }, label, ctx);
            d.words()
                .map(|w| {
                    let n_w = if opts.per_class_nw {
                        stats.class_occurrences(w, label)
                    } else {
                        stats.occurrences(w)
                    };
                    (w, adaptive_tau(&opts.anchor, pr.score(w).unwrap_or(0.0), n_w))
                })
                .collect()
        } else {
            HashMap::new()
        };
        let plan = |t: &crate::corpus::Token| {
            let w = t.word.as_str();
            if !opts.agg.uses_anchors() || !candidates.contains(w) || state.is_filtered(w) {
                TokenPlan::Skip
            } else {
                TokenPlan::Estimate {
                    tau_eff: taus.get(w).copied().unwrap_or(opts.anchor.tau),
                }
            }
        };
        let decisions = anchors_of_document(d, targets[&i], &f, p, &opts.anchor, &plan, opts.seed)?;
        if let Some(out) = sinks.trace.as_deref_mut() {
            write_trace(out, &d.id, &decisions)?;
        }
        for dec in &decisions {
            if dec.was_skipped() {
                tokens_skipped += 1;
            } else {
                tokens_estimated += 1;
            }
        }
        counts.update(&d.id, &decisions, label)?;
        if label == c {
            for w in d.words() {
                if let Some(r) = remaining.get_mut(w) {
                    *r -= 1;
                }
            }
        }
        processed += 1;

        let scorer = Scorer::new(&counts, opts.agg, c, ctx);
        state.refresh(score_candidates(&scorer, candidates));
        if opts.upper_bound_filter && state.is_full() {
            let to_filter: Vec<&str> = remaining
                .iter()
                .filter(|&(w, &r)| r > 0 && !state.is_filtered(w))
                .filter(|&(w, &r)| {
                    scorer
                        .upper_bound(w, r)
                        .is_none_or(|ub| state.should_filter(w, ub))
                })
                .map(|(w, _)| *w)
                .collect();
            for w in to_filter {
                state.filter(w);
            }
        }

        let snap = Snapshot {
            t_sec: start.elapsed().as_secs_f64(),
            calls: f.calls(),
            doc_index,
            topk: state.members().to_vec(),
        };
        if let Some(out) = sinks.snapshots.as_deref_mut() {
            write_line(out, &snap, "<snapshots>")?;
        }
        snapshots.push(snap);
    }

    Ok(RunResult {
        topk: state.members().to_vec(),
        snapshots,
        filtered: state.filtered().clone(),
        counts,
        calls: f.calls(),
        documents_processed: processed,
        documents_total: order.len(),
        tokens_estimated,
        tokens_skipped,
        completed,
        elapsed_sec: start.elapsed().as_secs_f64(),
    })
}

fn score_candidates(scorer: &Scorer<'_>, candidates: &CandidateSet) -> Vec<ScoredWord> {
    candidates
        .iter()
        .filter_map(|w| {
            scorer.score(w).map(|score| ScoredWord {
                word: w.to_string(),
                score,
            })
        })
        .collect()
}

/// Parameter overlay of a named optimization profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub name: String,
    pub zeta: usize,
    pub delta: f64,
    pub adaptive_tau: bool,
    pub upper_bound_filter: bool,
    pub stop_words: bool,
    pub min_freq: u64,
    pub sample_fraction: Option<f64>,
}

pub const PROFILE_NAMES: [&str; 7] = [
    "baseline",
    "delta_relaxed",
    "masking",
    "adaptive_tau",
    "filtered",
    "sampled",
    "optimized",
];

pub fn optimization_profile(name: &str) -> Result<Profile> {
    let mut p = Profile {
        name: name.to_string(),
        zeta: DEFAULT_ZETA,
        delta: 0.1,
        adaptive_tau: false,
        upper_bound_filter: false,
        stop_words: false,
        min_freq: 1,
        sample_fraction: None,
    };
    let filtering = |p: &mut Profile| {
        p.upper_bound_filter = true;
        p.stop_words = true;
        p.min_freq = crate::corpus::DEFAULT_MIN_FREQ;
    };
    match name {
        "baseline" => {}
        "delta_relaxed" => p.delta = RELAXED_DELTA,
        "masking" => p.zeta = REDUCED_ZETA,
        "adaptive_tau" => p.adaptive_tau = true,
        "filtered" => filtering(&mut p),
        "sampled" => p.sample_fraction = Some(DEFAULT_SAMPLE_FRACTION),
        "optimized" => {
            p.zeta = REDUCED_ZETA;
            p.delta = RELAXED_DELTA;
            p.adaptive_tau = true;
            filtering(&mut p);
            p.sample_fraction = Some(DEFAULT_SAMPLE_FRACTION);
        }
        other => {
            return Err(Error::Config(format!(
                "unknown profile {other:?} (expected one of {PROFILE_NAMES:?})"
            )))
        }
    }
    Ok(p)
}

/// Everything a profile determines besides the run options.
#[derive(Debug, Clone)]
pub struct Prepared {
    /// The documents to process (a sample when the profile samples).
    pub corpus: Corpus,
    pub candidates: CandidateSet,
    pub perturbator: UnigramPerturbator,
}

impl Profile {
    pub fn apply(&self, opts: &mut RunOptions) {
        opts.anchor.delta = self.delta;
        opts.adaptive_tau = self.adaptive_tau;
        opts.upper_bound_filter = self.upper_bound_filter;
    }

    /// Candidate set, document sample and unigram perturbator for `corpus`,
    /// whose statistics are `stats`.
    pub fn prepare(&self, corpus: &Corpus, stats: &WordStats, stopwords: &StopWords, seed: u64) -> Result<Prepared> {
        let empty = StopWords::empty();
        let stop = if self.stop_words { stopwords } else { &empty };
        let candidates = filter_candidates(stats, stop, self.min_freq);
        let corpus = match self.sample_fraction {
            Some(fr) => sample_documents(corpus, fr, seed)?,
            None => corpus.clone(),
        };
        let perturbator = UnigramPerturbator::new(stats, self.zeta, DEFAULT_MASK_PROB)?;
        Ok(Prepared {
            corpus,
            candidates,
            perturbator,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::word_stats;
    use crate::perturb::UnigramPerturbator;

    struct Fixed(Vec<String>, Vec<f64>);

    impl Predictor for Fixed {
        fn classes(&self) -> &[String] {
            &self.0
        }
        fn predict_proba_batch(&self, docs: &[&Document]) -> Result<Vec<Vec<f64>>> {
            Ok(docs
                .iter()
                .map(|d| {
                    let i: usize = d.id.parse().unwrap_or(0);
                    let p = self.1.get(i).copied().unwrap_or(0.5);
                    vec![p, 1.0 - p]
                })
                .collect())
        }
    }

    fn three_docs() -> Corpus {
        Corpus::from_labeled([("0", "a", "x"), ("1", "b", "x"), ("2", "c", "x")]).unwrap()
    }

    #[test]
    fn ordering_by_confidence() {
        let c = three_docs();
        let f = Fixed(vec!["x".into(), "y".into()], vec![0.9, 0.99, 0.7]);
        assert_eq!(order_documents(&c, &f, 0).unwrap(), vec![1, 0, 2]);
        let even = Fixed(vec!["x".into(), "y".into()], vec![0.6, 0.6, 0.6]);
        assert_eq!(order_documents(&c, &even, 0).unwrap(), vec![0, 1, 2]);
        let two = Corpus::from_labeled([("0", "a", "x"), ("1", "b", "y")]).unwrap();
        assert_eq!(order_documents(&two, &f, 0).unwrap(), vec![0]);
        let only_x = Corpus::from_labeled([("0", "a", "x")]).unwrap();
        let f1 = Fixed(vec!["x".into()], vec![]);
        assert!(order_documents(&only_x.relabeled(vec![0]).unwrap(), &f1, 0).unwrap().len() == 1);
    }

    #[test]
    fn filter_rule_needs_full_list_and_strict_inequality() {
        let mut s = TopKState::new(2);
        s.refresh([ScoredWord { word: "a".into(), score: 1.0 }]);
        assert!(!s.should_filter("z", 0.0));
        s.refresh([
            ScoredWord { word: "a".into(), score: 1.0 },
            ScoredWord { word: "b".into(), score: 0.5 },
            ScoredWord { word: "c".into(), score: 0.5 },
        ]);
        assert_eq!(s.members().iter().map(|m| m.word.as_str()).collect::<Vec<_>>(), ["a", "b"]);
        assert!(!s.should_filter("c", 0.5));
        assert!(s.should_filter("c", 0.4));
        assert!(!s.should_filter("b", 0.1));
    }

    #[test]
    fn filtered_words_never_return() {
        let mut s = TopKState::new(1);
        s.filter("a");
        s.refresh([ScoredWord { word: "a".into(), score: 9.0 }, ScoredWord { word: "b".into(), score: 1.0 }]);
        assert_eq!(s.members()[0].word, "b");
    }

    #[test]
    fn profiles() {
        let b = optimization_profile("baseline").unwrap();
        assert_eq!((b.zeta, b.delta, b.adaptive_tau, b.upper_bound_filter), (500, 0.1, false, false));
        let m = optimization_profile("masking").unwrap();
        assert_eq!(m.zeta, 50);
        assert_eq!(m.delta, 0.1);
        let o = optimization_profile("optimized").unwrap();
        assert_eq!((o.zeta, o.delta, o.adaptive_tau, o.upper_bound_filter), (50, 0.3, true, true));
        assert_eq!(o.min_freq, 5);
        assert!(o.stop_words && o.sample_fraction.is_some());
        assert!(optimization_profile("turbo").is_err());
        for name in PROFILE_NAMES {
            assert!(optimization_profile(name).is_ok());
        }
    }

    struct FirstWord(Vec<String>);

    impl Predictor for FirstWord {
        fn classes(&self) -> &[String] {
            &self.0
        }
        fn predict_proba_batch(&self, docs: &[&Document]) -> Result<Vec<Vec<f64>>> {
            Ok(docs
                .iter()
                .map(|d| if d.contains_word("good") { vec![0.1, 0.9] } else { vec![0.8, 0.2] })
                .collect())
        }
    }

    #[test]
    fn small_run_has_snapshot_per_document() {
        let corpus = Corpus::from_labeled([
            ("0", "good toy", "pos"),
            ("1", "good fun", "pos"),
            ("2", "bad toy", "neg"),
            ("3", "fun good day", "pos"),
        ])
        .unwrap();
        let f = FirstWord(corpus.classes().to_vec());
        let corpus = relabel_by_prediction(&corpus, &f).unwrap();
        let stats = word_stats(&corpus);
        let cands = CandidateSet::all(&stats);
        let p = UnigramPerturbator::new(&stats, 10, 0.5).unwrap();
        let mut opts = RunOptions::new(1, AggregationKind::Sq, 3);
        opts.k = 2;
        let mut buf = Vec::new();
        let r = run_anytime(
            RunInputs {
                corpus: &corpus,
                stats: &stats,
                candidates: &cands,
                min_freq_stats: None,
            },
            &f,
            &p,
            &opts,
            RunSinks {
                snapshots: Some(&mut buf),
                trace: None,
            },
        )
        .unwrap();
        assert!(r.completed);
        assert_eq!(r.snapshots.len(), 3);
        assert_eq!(r.topk[0].word, "good");
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 3);
        for w in r.snapshots.windows(2) {
            assert!(w[1].calls > w[0].calls);
        }
    }
}
