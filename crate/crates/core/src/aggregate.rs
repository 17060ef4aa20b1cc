//! Anchor tallies and the global aggregation functions built on them.

use std::collections::{BTreeMap, HashSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::anchor::AnchorDecision;
use crate::corpus::{CandidateSet, ClassId, WordStats};
use crate::error::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 0.5;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub plus: u64,
    pub minus: u64,
}

impl Cell {
    pub fn occurrences(&self) -> u64 {
        self.plus + self.minus
    }
}

/// `A⁺(w,c)` and `A⁻(w,c)` over the documents ingested so far.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorCounts {
    n_classes: usize,
    cells: BTreeMap<String, Vec<Cell>>,
    plus_total: Vec<u64>,
    minus_total: Vec<u64>,
    documents: Vec<u64>,
    ingested: HashSet<String>,
}

impl AnchorCounts {
    pub fn new(n_classes: usize) -> Self {
        AnchorCounts {
            n_classes,
            cells: BTreeMap::new(),
            plus_total: vec![0; n_classes],
            minus_total: vec![0; n_classes],
            documents: vec![0; n_classes],
            ingested: HashSet::new(),
        }
    }

    /// Tallies one document of class `c`. Each document id is ingested once.
    pub fn update(&mut self, doc_id: &str, decisions: &[AnchorDecision], c: ClassId) -> Result<()> {
        if c >= self.n_classes {
            return Err(Error::Input(format!("class index {c} out of range")));
        }
        if !self.ingested.insert(doc_id.to_string()) {
            return Err(Error::DuplicateDocument(doc_id.to_string()));
        }
        for dec in decisions {
            let n = self.n_classes;
            let cell = &mut self
                .cells
                .entry(dec.token.word.clone())
                .or_insert_with(|| vec![Cell::default(); n])[c];
            if dec.is_anchor {
                cell.plus += 1;
                self.plus_total[c] += 1;
            } else {
                cell.minus += 1;
                self.minus_total[c] += 1;
            }
        }
        self.documents[c] += 1;
        Ok(())
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn cell(&self, w: &str, c: ClassId) -> Cell {
        self.cells.get(w).map_or_else(Cell::default, |v| v[c])
    }

    pub fn a_plus(&self, w: &str, c: ClassId) -> u64 {
        self.cell(w, c).plus
    }

    pub fn a_minus(&self, w: &str, c: ClassId) -> u64 {
        self.cell(w, c).minus
    }

    pub fn plus_total(&self, c: ClassId) -> u64 {
        self.plus_total[c]
    }

    pub fn minus_total(&self, c: ClassId) -> u64 {
        self.minus_total[c]
    }

    /// Documents ingested for class `c`.
    pub fn documents(&self, c: ClassId) -> u64 {
        self.documents[c]
    }

    pub fn contains_document(&self, id: &str) -> bool {
        self.ingested.contains(id)
    }

    /// Every word with a tally in any class.
    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.cells.keys().map(String::as_str)
    }

    /// Words occurring in the ingested documents of class `c`, with their cells.
    pub fn class_cells(&self, c: ClassId) -> impl Iterator<Item = (&str, Cell)> {
        self.cells
            .iter()
            .filter(move |(_, v)| v[c].occurrences() > 0)
            .map(move |(w, v)| (w.as_str(), v[c]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AggregationKind {
    Sq,
    Av,
    AvMinFreq { min_freq: u64 },
    H,
    Pr { alpha: f64 },
    Base,
    PrInverse { alpha: f64 },
}

impl AggregationKind {
    pub const NAMES: [&'static str; 7] = ["sq", "av", "av_minfreq", "h", "pr", "base", "pr_inverse"];

    /// Kind from its name; `alpha` and `min_freq` are used by the kinds that take them.
    pub fn parse(name: &str, alpha: f64, min_freq: u64) -> Result<Self> {
        let kind = match name {
            "sq" => AggregationKind::Sq,
            "av" => AggregationKind::Av,
            "av_minfreq" => AggregationKind::AvMinFreq { min_freq },
            "h" => AggregationKind::H,
            "pr" => AggregationKind::Pr { alpha },
            "base" => AggregationKind::Base,
            "pr_inverse" => AggregationKind::PrInverse { alpha },
            other => {
                return Err(Error::Config(format!(
                    "unknown aggregation {other:?} (expected one of {:?})",
                    Self::NAMES
                )))
            }
        };
        kind.validate()?;
        Ok(kind)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            AggregationKind::Pr { alpha } | AggregationKind::PrInverse { alpha } if !(alpha > 0.0 && alpha <= 1.0) => {
                Err(Error::Config(format!("alpha {alpha} outside (0, 1]")))
            }
            AggregationKind::AvMinFreq { min_freq: 0 } => Err(Error::Config("min_freq must be at least 1".into())),
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AggregationKind::Sq => "sq",
            AggregationKind::Av => "av",
            AggregationKind::AvMinFreq { .. } => "av_minfreq",
            AggregationKind::H => "h",
            AggregationKind::Pr { .. } => "pr",
            AggregationKind::Base => "base",
            AggregationKind::PrInverse { .. } => "pr_inverse",
        }
    }

    /// Whether scores need anchor decisions at all.
    pub fn uses_anchors(&self) -> bool {
        !matches!(self, AggregationKind::Base)
    }

    /// Whether a class-`c` score reads tallies of other classes.
    pub fn needs_all_classes(&self) -> bool {
        matches!(self, AggregationKind::H)
    }
}

impl std::fmt::Display for AggregationKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Corpus-level inputs to scoring that do not come from anchor tallies.
#[derive(Debug, Clone, Copy)]
pub struct ScoreContext<'a> {
    /// Statistics of the aggregation set, used by `base` and by default for `av_minfreq`.
    pub stats: &'a WordStats,
    /// Frequencies for the `av_minfreq` bar when they come from another split.
    pub min_freq_stats: Option<&'a WordStats>,
    /// Words over which the entropy range of `h` is taken; all words when absent.
    pub entropy_universe: Option<&'a CandidateSet>,
}

impl<'a> ScoreContext<'a> {
    pub fn new(stats: &'a WordStats) -> Self {
        ScoreContext {
            stats,
            min_freq_stats: None,
            entropy_universe: None,
        }
    }
}

pub fn g_sq(counts: &AnchorCounts, w: &str, c: ClassId) -> f64 {
    (counts.a_plus(w, c) as f64).sqrt()
}

pub fn g_av(counts: &AnchorCounts, w: &str, c: ClassId) -> Option<f64> {
    av_of(counts.cell(w, c))
}

fn av_of(cell: Cell) -> Option<f64> {
    (cell.occurrences() > 0).then(|| cell.plus as f64 / cell.occurrences() as f64)
}

/// `g_av` with words below the frequency bar excluded.
pub fn g_av_min_freq(counts: &AnchorCounts, w: &str, c: ClassId, min_freq: u64, stats: &WordStats) -> Option<f64> {
    if stats.occurrences(w) < min_freq {
        return None;
    }
    g_av(counts, w, c)
}

pub fn g_base(stats: &WordStats, w: &str, c: ClassId) -> Option<f64> {
    let all = stats.total_doc_freq(w);
    (all > 0).then(|| stats.doc_freq(w, c) as f64 / all as f64)
}

pub fn g_h(counts: &AnchorCounts, w: &str, c: ClassId, universe: Option<&CandidateSet>) -> Option<f64> {
    HModel::new(counts, universe).score(counts, w, c)
}

pub fn g_pr(counts: &AnchorCounts, alpha: f64, w: &str, c: ClassId) -> Option<f64> {
    let m = PrModel::new(counts, c, alpha);
    if !m.defined() || counts.cell(w, c).occurrences() == 0 {
        return None;
    }
    Some(m.smoothed(m.raw(counts.cell(w, c))))
}

pub fn g_pr_inverse(counts: &AnchorCounts, alpha: f64, w: &str, c: ClassId) -> Option<f64> {
    g_pr(counts, alpha, w, c).filter(|&g| g > 0.0).map(|g| 1.0 / g)
}

/// Maximum-likelihood parameters of the anchor/non-anchor mixture for one class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbModelParams {
    pub alpha: f64,
    pub class: ClassId,
    pub words: Vec<String>,
    /// Non-anchor emission probabilities `p̃`.
    pub p: Vec<f64>,
    /// Anchor emission probabilities `q̃` before smoothing; may be negative.
    pub q: Vec<f64>,
    /// Smoothed `q̃*`.
    pub q_star: Vec<f64>,
    pub q_min: f64,
}

impl ProbModelParams {
    pub fn index(&self, w: &str) -> Option<usize> {
        self.words.binary_search_by(|x| x.as_str().cmp(w)).ok()
    }
}

/// `p̃ = A⁻/ΣA⁻`, `q̃ = (1/α)·A⁺/ΣA⁺ − (1/α − 1)·A⁻/ΣA⁻` over the words of
/// class `c`. Both totals must be positive. `q_star` is left equal to `q`.
pub fn mle_params(counts: &AnchorCounts, alpha: f64, c: ClassId) -> Result<ProbModelParams> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Config(format!("alpha {alpha} outside (0, 1]")));
    }
    let plus = counts.plus_total(c) as f64;
    let minus = counts.minus_total(c) as f64;
    if plus == 0.0 || minus == 0.0 {
        return Err(Error::Input(format!(
            "mixture model undefined for class {c}: anchor total {plus}, non-anchor total {minus}"
        )));
    }
    let mut words = Vec::new();
    let mut p = Vec::new();
    let mut q = Vec::new();
    for (w, cell) in counts.class_cells(c) {
        words.push(w.to_string());
        p.push(cell.minus as f64 / minus);
        q.push(cell.plus as f64 / (alpha * plus) - (1.0 / alpha - 1.0) * cell.minus as f64 / minus);
    }
    let q_min = q.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(ProbModelParams {
        alpha,
        class: c,
        words,
        p,
        q_star: q.clone(),
        q,
        q_min,
    })
}

/// Shifts `q̃` by `|q_min|` and renormalizes when any entry is negative.
pub fn laplace_smooth(mut params: ProbModelParams) -> ProbModelParams {
    params.q_star = smooth_all(&params.q, params.q_min);
    params
}

fn smooth_all(q: &[f64], q_min: f64) -> Vec<f64> {
    q.iter().map(|&x| smooth(x, q_min, q.len())).collect()
}

fn smooth(q: f64, q_min: f64, n_words: usize) -> f64 {
    if q_min < 0.0 {
        let beta = -q_min;
        (q + beta) / (1.0 + n_words as f64 * beta)
    } else {
        q
    }
}

/// Log-likelihood of the tallies under the mixture with parameters `(p, q)`:
/// an anchor occurrence of `w` is emitted with probability `α q(w) + (1−α) p(w)`,
/// a non-anchor occurrence with probability `p(w)`.
pub fn log_likelihood(plus: &[u64], minus: &[u64], alpha: f64, p: &[f64], q: &[f64]) -> f64 {
    let mut ll = 0.0;
    for i in 0..plus.len() {
        if plus[i] > 0 {
            ll += plus[i] as f64 * (alpha * q[i] + (1.0 - alpha) * p[i]).ln();
        }
        if minus[i] > 0 {
            ll += minus[i] as f64 * p[i].ln();
        }
    }
    ll
}

/// Global quantities of the mixture model for one class, with the Pareto
/// frontier of `(A⁺, A⁻)` points that can realize `min q̃`.
#[derive(Debug, Clone)]
struct PrModel {
    alpha: f64,
    plus: f64,
    minus: f64,
    q_min: f64,
    n_words: usize,
    /// `(A⁺, A⁻, multiplicity)`, increasing in both coordinates.
    frontier: Vec<(u64, u64, usize)>,
    points: Vec<(String, Cell)>,
}

impl PrModel {
    fn new(counts: &AnchorCounts, c: ClassId, alpha: f64) -> Self {
        let points: Vec<(String, Cell)> = counts.class_cells(c).map(|(w, cell)| (w.to_string(), cell)).collect();
        let mut m = PrModel {
            alpha,
            plus: counts.plus_total(c) as f64,
            minus: counts.minus_total(c) as f64,
            q_min: f64::INFINITY,
            n_words: points.len(),
            frontier: frontier(points.iter().map(|p| p.1)),
            points,
        };
        m.q_min = m.frontier_min(m.plus, m.minus);
        m
    }

    fn defined(&self) -> bool {
        self.plus > 0.0
    }

    fn raw_with(&self, cell: Cell, plus: f64, minus: f64) -> f64 {
        if minus == 0.0 {
            cell.plus as f64 / plus
        } else {
            cell.plus as f64 / (self.alpha * plus) - (1.0 / self.alpha - 1.0) * cell.minus as f64 / minus
        }
    }

    fn raw(&self, cell: Cell) -> f64 {
        self.raw_with(cell, self.plus, self.minus)
    }

    fn smoothed(&self, q: f64) -> f64 {
        smooth(q, self.q_min, self.n_words)
    }

    fn frontier_min(&self, plus: f64, minus: f64) -> f64 {
        self.frontier
            .iter()
            .map(|&(p, m, _)| self.raw_with(Cell { plus: p, minus: m }, plus, minus))
            .fold(f64::INFINITY, f64::min)
    }

    /// `q̃*(w)` after replacing the cell of `w` by `new` and the totals by
    /// `(plus, minus)`, every other word unchanged.
    fn score_adjusted(&self, w: &str, old: Cell, new: Cell, plus: f64, minus: f64) -> Option<f64> {
        if plus == 0.0 || new.occurrences() == 0 {
            return None;
        }
        let sole_frontier_point = self
            .frontier
            .iter()
            .any(|&(p, m, mult)| p == old.plus && m == old.minus && mult == 1);
        let others = if old.occurrences() > 0 && sole_frontier_point {
            self.points
                .iter()
                .filter(|(v, _)| v != w)
                .map(|(_, cell)| self.raw_with(*cell, plus, minus))
                .fold(f64::INFINITY, f64::min)
        } else {
            self.frontier_min(plus, minus)
        };
        let q_w = self.raw_with(new, plus, minus);
        let n_words = self.n_words + usize::from(old.occurrences() == 0);
        Some(smooth(q_w, q_w.min(others), n_words))
    }
}

/// Points not dominated by another with fewer anchors and more non-anchors.
fn frontier(cells: impl Iterator<Item = Cell>) -> Vec<(u64, u64, usize)> {
    let mut pts: BTreeMap<(u64, u64), usize> = BTreeMap::new();
    for c in cells {
        *pts.entry((c.plus, c.minus)).or_insert(0) += 1;
    }
    let mut sorted: Vec<((u64, u64), usize)> = pts.into_iter().collect();
    sorted.sort_by(|a, b| a.0 .0.cmp(&b.0 .0).then(b.0 .1.cmp(&a.0 .1)));
    let mut out = Vec::new();
    let mut best_minus: Option<u64> = None;
    for ((p, m), mult) in sorted {
        if best_minus.is_none_or(|b| m > b) {
            out.push((p, m, mult));
            best_minus = Some(m);
        }
    }
    out
}

fn entropy(values: &[f64]) -> Option<f64> {
    let total: f64 = values.iter().sum();
    if total <= 0.0 {
        return None;
    }
    Some(
        values
            .iter()
            .filter(|&&v| v > 0.0)
            .map(|&v| {
                let h = v / total;
                -h * h.ln()
            })
            .sum(),
    )
}

/// Entropy range of the `h` aggregation.
#[derive(Debug, Clone)]
struct HModel {
    /// Defined entropies, ascending.
    sorted: Vec<(f64, String)>,
}

impl HModel {
    fn new(counts: &AnchorCounts, universe: Option<&CandidateSet>) -> Self {
        let mut sorted: Vec<(f64, String)> = counts
            .words()
            .filter(|w| universe.is_none_or(|u| u.contains(w)))
            .filter_map(|w| entropy(&sq_row(counts, w, None)).map(|h| (h, w.to_string())))
            .collect();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        HModel { sorted }
    }

    fn range_excluding(&self, w: &str) -> Option<(f64, f64)> {
        let lo = self.sorted.iter().find(|(_, v)| v != w)?.0;
        let hi = self.sorted.iter().rev().find(|(_, v)| v != w)?.0;
        Some((lo, hi))
    }

    fn factor(h: f64, lo: f64, hi: f64) -> f64 {
        if hi > lo {
            1.0 - (h - lo) / (hi - lo)
        } else {
            1.0
        }
    }

    fn score(&self, counts: &AnchorCounts, w: &str, c: ClassId) -> Option<f64> {
        self.score_row(&sq_row(counts, w, None), w, c, true)
    }

    /// `row` is `G_sq(w, ·)`; `in_universe` says whether `w` itself bounds the range.
    fn score_row(&self, row: &[f64], w: &str, c: ClassId, in_universe: bool) -> Option<f64> {
        let h = entropy(row)?;
        let (mut lo, mut hi) = self.range_excluding(w).unwrap_or((h, h));
        if in_universe {
            lo = lo.min(h);
            hi = hi.max(h);
        }
        Some(row[c] * Self::factor(h, lo, hi))
    }
}

fn sq_row(counts: &AnchorCounts, w: &str, extra: Option<(ClassId, u64)>) -> Vec<f64> {
    (0..counts.n_classes())
        .map(|c| {
            let bonus = extra.filter(|e| e.0 == c).map_or(0, |e| e.1);
            ((counts.a_plus(w, c) + bonus) as f64).sqrt()
        })
        .collect()
}

/// Scores every word of one class against a fixed snapshot of the tallies.
///
/// `score` is the value used for ranking: `None` means the word is unscored
/// (never seen, excluded by a frequency bar, or with an undefined value).
/// Under `pr` an undefined mixture (no anchors yet) scores seen words 0.
#[derive(Debug, Clone)]
pub struct Scorer<'a> {
    counts: &'a AnchorCounts,
    kind: AggregationKind,
    class: ClassId,
    ctx: ScoreContext<'a>,
    pr: Option<PrModel>,
    h: Option<HModel>,
}

impl<'a> Scorer<'a> {
    pub fn new(counts: &'a AnchorCounts, kind: AggregationKind, class: ClassId, ctx: ScoreContext<'a>) -> Self {
        let pr = match kind {
            AggregationKind::Pr { alpha } | AggregationKind::PrInverse { alpha } => {
                Some(PrModel::new(counts, class, alpha))
            }
            _ => None,
        };
        let h = matches!(kind, AggregationKind::H).then(|| HModel::new(counts, ctx.entropy_universe));
        Scorer {
            counts,
            kind,
            class,
            ctx,
            pr,
            h,
        }
    }

    pub fn kind(&self) -> AggregationKind {
        self.kind
    }

    pub fn class(&self) -> ClassId {
        self.class
    }

    fn in_universe(&self, w: &str) -> bool {
        self.ctx.entropy_universe.is_none_or(|u| u.contains(w))
    }

    pub fn score(&self, w: &str) -> Option<f64> {
        let c = self.class;
        let cell = self.counts.cell(w, c);
        match self.kind {
            AggregationKind::Sq => (cell.occurrences() > 0).then(|| (cell.plus as f64).sqrt()),
            AggregationKind::Av => av_of(cell),
            AggregationKind::AvMinFreq { min_freq } => {
                let freq = self.ctx.min_freq_stats.unwrap_or(self.ctx.stats);
                (freq.occurrences(w) >= min_freq).then(|| av_of(cell)).flatten()
            }
            AggregationKind::H => {
                let h = self.h.as_ref().expect("entropy model");
                h.score_row(&sq_row(self.counts, w, None), w, c, self.in_universe(w))
            }
            AggregationKind::Pr { .. } => {
                let m = self.pr.as_ref().expect("mixture model");
                if cell.occurrences() == 0 {
                    None
                } else if m.defined() {
                    Some(m.smoothed(m.raw(cell)))
                } else {
                    Some(0.0)
                }
            }
            AggregationKind::PrInverse { .. } => {
                let m = self.pr.as_ref().expect("mixture model");
                if cell.occurrences() == 0 || !m.defined() {
                    return None;
                }
                let g = m.smoothed(m.raw(cell));
                (g > 0.0).then(|| 1.0 / g)
            }
            AggregationKind::Base => g_base(self.ctx.stats, w, c),
        }
    }

    /// Score of `w` after `remaining` more class-`c` occurrences all resolve
    /// in its favour: anchors for every kind except `pr_inverse`, where the
    /// favourable outcome is non-anchors. Totals shift accordingly; every
    /// other word keeps its tallies.
    pub fn upper_bound(&self, w: &str, remaining: u64) -> Option<f64> {
        if remaining == 0 {
            return self.score(w);
        }
        let c = self.class;
        let old = self.counts.cell(w, c);
        match self.kind {
            AggregationKind::Sq => Some(((old.plus + remaining) as f64).sqrt()),
            AggregationKind::Av | AggregationKind::AvMinFreq { .. } => {
                if let AggregationKind::AvMinFreq { min_freq } = self.kind {
                    let freq = self.ctx.min_freq_stats.unwrap_or(self.ctx.stats);
                    if freq.occurrences(w) < min_freq {
                        return None;
                    }
                }
                av_of(Cell {
                    plus: old.plus + remaining,
                    minus: old.minus,
                })
            }
            AggregationKind::H => {
                let h = self.h.as_ref().expect("entropy model");
                h.score_row(&sq_row(self.counts, w, Some((c, remaining))), w, c, self.in_universe(w))
            }
            AggregationKind::Pr { .. } => {
                let m = self.pr.as_ref().expect("mixture model");
                let new = Cell {
                    plus: old.plus + remaining,
                    minus: old.minus,
                };
                m.score_adjusted(w, old, new, m.plus + remaining as f64, m.minus)
            }
            AggregationKind::PrInverse { .. } => {
                let m = self.pr.as_ref().expect("mixture model");
                let new = Cell {
                    plus: old.plus,
                    minus: old.minus + remaining,
                };
                match m.score_adjusted(w, old, new, m.plus, m.minus + remaining as f64) {
                    Some(g) if g > 0.0 => Some(1.0 / g),
                    _ => Some(f64::INFINITY),
                }
            }
            AggregationKind::Base => self.score(w),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredWord {
    pub word: String,
    pub score: f64,
}

/// Ranking order: higher score first, then lexicographically smaller word.
pub fn rank_cmp(a: (&str, f64), b: (&str, f64)) -> std::cmp::Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0))
}

/// Offline top-`k` over `candidates` from complete tallies.
pub fn rank(scorer: &Scorer<'_>, candidates: &CandidateSet, k: usize) -> Vec<ScoredWord> {
    let mut scored: Vec<ScoredWord> = candidates
        .iter()
        .filter_map(|w| {
            scorer.score(w).map(|score| ScoredWord {
                word: w.to_string(),
                score,
            })
        })
        .collect();
    scored.sort_by(|a, b| rank_cmp((&a.word, a.score), (&b.word, b.score)));
    scored.truncate(k);
    scored
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub word: String,
    pub class: String,
    pub a_plus: u64,
    pub a_minus: u64,
    pub score: f64,
    pub agg: String,
}

/// One JSON line per scored candidate, in ranking order.
pub fn write_scores(
    out: &mut dyn Write,
    scorer: &Scorer<'_>,
    candidates: &CandidateSet,
    class_name: &str,
) -> Result<()> {
    for sw in rank(scorer, candidates, usize::MAX) {
        let cell = scorer.counts.cell(&sw.word, scorer.class);
        let rec = ScoreRecord {
            word: sw.word,
            class: class_name.to_string(),
            a_plus: cell.plus,
            a_minus: cell.minus,
            score: sw.score,
            agg: scorer.kind.name().to_string(),
        };
        serde_json::to_writer(&mut *out, &rec)?;
        out.write_all(b"\n").map_err(|e| Error::io("<scores>", e))?;
    }
    Ok(())
}
