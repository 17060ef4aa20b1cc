//! Planted-signal corpora: binary sentiment-like documents whose class is
//! carried by a known set of signal words, padded with Zipf-distributed
//! filler, stop words and one-off rare words.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{ClassId, Corpus, Document};
use crate::error::{Error, Result};
use crate::rng;

pub const NEGATIVE: &str = "negative";
pub const POSITIVE: &str = "positive";

const POSITIVE_WORDS: [&str; 10] = [
    "great", "love", "fun", "favorite", "awesome", "wonderful", "perfect", "classic", "happy", "excellent",
];
const NEGATIVE_WORDS: [&str; 10] = [
    "broke", "waste", "poor", "cheap", "disappointed", "small", "returned", "flimsy", "useless", "junk",
];
const STOP_WORDS: [&str; 16] = [
    "the", "a", "it", "is", "this", "and", "to", "for", "was", "of", "i", "my", "with", "in", "on", "but",
];
const ONSETS: [&str; 14] = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"];
const NUCLEI: [&str; 5] = ["a", "e", "i", "o", "u"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub documents: usize,
    /// Signal words per class; at most 10.
    pub planted_per_class: usize,
    /// Probability that a document's label is flipped.
    pub noise: f64,
    pub filler_vocab: usize,
    pub zipf_exponent: f64,
    pub min_len: usize,
    pub max_len: usize,
    pub min_signal: usize,
    pub max_signal: usize,
    pub stop_rate: f64,
    pub rare_rate: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            documents: 500,
            planted_per_class: 10,
            noise: 0.1,
            filler_vocab: 400,
            zipf_exponent: 1.0,
            min_len: 6,
            max_len: 14,
            min_signal: 1,
            max_signal: 4,
            stop_rate: 0.35,
            rare_rate: 0.03,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.documents == 0 {
            return bad("documents must be positive");
        }
        if self.planted_per_class == 0 || self.planted_per_class > POSITIVE_WORDS.len() {
            return bad("planted words per class must be between 1 and 10");
        }
        if !(0.0..=0.5).contains(&self.noise) {
            return bad("noise must be in [0, 0.5]");
        }
        if self.min_signal == 0 || self.min_signal > self.max_signal || self.max_signal > self.min_len {
            return bad("need 1 <= min_signal <= max_signal <= min_len");
        }
        if self.min_len > self.max_len {
            return bad("min_len exceeds max_len");
        }
        if self.filler_vocab == 0 {
            return bad("filler vocabulary must be non-empty");
        }
        if !(0.0..1.0).contains(&(self.stop_rate + self.rare_rate)) {
            return bad("stop_rate + rare_rate must be below 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthRow {
    pub id: String,
    pub text: String,
    pub label: String,
    /// Label before noise.
    pub clean_label: String,
}

/// Ground truth of a generated corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    pub classes: Vec<String>,
    pub planted: BTreeMap<String, Vec<String>>,
    pub stop_words: Vec<String>,
    pub rare_words: Vec<String>,
    pub config: SynthConfig,
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub rows: Vec<SynthRow>,
    pub truth: SynthTruth,
}

fn syllable_word(r: &mut impl Rng, syllables: usize) -> String {
    (0..syllables)
        .map(|_| format!("{}{}", ONSETS[r.random_range(0..ONSETS.len())], NUCLEI[r.random_range(0..NUCLEI.len())]))
        .collect()
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthCorpus> {
    cfg.validate()?;
    let positive: Vec<&str> = POSITIVE_WORDS[..cfg.planted_per_class].to_vec();
    let negative: Vec<&str> = NEGATIVE_WORDS[..cfg.planted_per_class].to_vec();
    let mut reserved: BTreeSet<String> = POSITIVE_WORDS
        .iter()
        .chain(&NEGATIVE_WORDS)
        .chain(&STOP_WORDS)
        .map(|w| w.to_string())
        .collect();

    let mut vr = rng::stream(cfg.seed, "synth", "vocabulary", 0);
    let mut filler = Vec::with_capacity(cfg.filler_vocab);
    while filler.len() < cfg.filler_vocab {
        let n = vr.random_range(2..=3);
        let w = syllable_word(&mut vr, n);
        if reserved.insert(w.clone()) {
            filler.push(w);
        }
    }
    let zipf: Vec<f64> = (0..filler.len())
        .map(|r| 1.0 / ((r + 1) as f64).powf(cfg.zipf_exponent))
        .collect();
    let zipf = WeightedIndex::new(&zipf).map_err(|e| Error::Config(format!("zipf weights: {e}")))?;

    let mut dr = rng::stream(cfg.seed, "synth", "documents", 0);
    let mut rows = Vec::with_capacity(cfg.documents);
    let mut rare_words = Vec::new();
    for i in 0..cfg.documents {
        let clean: ClassId = dr.random_range(0..2);
        let signals = if clean == 1 { &positive } else { &negative };
        let len = dr.random_range(cfg.min_len..=cfg.max_len);
        let n_sig = dr.random_range(cfg.min_signal..=cfg.max_signal);
        let mut words: Vec<String> = (0..n_sig)
            .map(|_| signals[dr.random_range(0..signals.len())].to_string())
            .collect();
        while words.len() < len {
            let u: f64 = dr.random();
            let w = if u < cfg.stop_rate {
                STOP_WORDS[dr.random_range(0..STOP_WORDS.len())].to_string()
            } else if u < cfg.stop_rate + cfg.rare_rate {
                let w = loop {
                    let w = syllable_word(&mut dr, 4);
                    if reserved.insert(w.clone()) {
                        break w;
                    }
                };
                rare_words.push(w.clone());
                w
            } else {
                filler[zipf.sample(&mut dr)].clone()
            };
            words.push(w);
        }
        words.shuffle(&mut dr);
        let label = if dr.random_bool(cfg.noise) { 1 - clean } else { clean };
        let name = |c: ClassId| if c == 1 { POSITIVE } else { NEGATIVE }.to_string();
        rows.push(SynthRow {
            id: format!("s{i:05}"),
            text: words.join(" "),
            label: name(label),
            clean_label: name(clean),
        });
    }

    let mut planted = BTreeMap::new();
    planted.insert(NEGATIVE.to_string(), negative.iter().map(|w| w.to_string()).collect());
    planted.insert(POSITIVE.to_string(), positive.iter().map(|w| w.to_string()).collect());
    Ok(SynthCorpus {
        rows,
        truth: SynthTruth {
            classes: vec![NEGATIVE.into(), POSITIVE.into()],
            planted,
            stop_words: STOP_WORDS.iter().map(|w| w.to_string()).collect(),
            rare_words,
            config: cfg.clone(),
        },
    })
}

impl SynthCorpus {
    fn build(&self, clean: bool) -> Result<Corpus> {
        let classes = self.truth.classes.clone();
        let docs = self.rows.iter().map(|r| Document::from_text(r.id.clone(), r.text.clone())).collect();
        let labels = self
            .rows
            .iter()
            .map(|r| {
                let l = if clean { &r.clean_label } else { &r.label };
                classes.iter().position(|c| c == l).expect("synthetic label")
            })
            .collect();
        Corpus::new(docs, labels, classes)
    }

    /// Corpus with the (noisy) published labels.
    pub fn corpus(&self) -> Result<Corpus> {
        self.build(false)
    }

    /// Corpus with the labels before noise.
    pub fn clean_corpus(&self) -> Result<Corpus> {
        self.build(true)
    }

    pub fn planted(&self, class: &str) -> &[String] {
        self.truth.planted.get(class).map_or(&[], Vec::as_slice)
    }

    /// Class predicted by counting planted words, ties to the first class.
    pub fn planted_rule(&self, d: &Document) -> ClassId {
        let count = |c: &str| d.words().filter(|w| self.planted(c).iter().any(|p| p == w)).count();
        usize::from(count(POSITIVE) > count(NEGATIVE))
    }

    pub fn write_jsonl(&self, out: &mut dyn Write) -> Result<()> {
        for r in &self.rows {
            serde_json::to_writer(&mut *out, r)?;
            out.write_all(b"\n").map_err(|e| Error::io("<corpus>", e))?;
        }
        Ok(())
    }

    pub fn save(&self, corpus_path: impl AsRef<Path>, truth_path: impl AsRef<Path>) -> Result<()> {
        let corpus_path = corpus_path.as_ref();
        let mut f = std::io::BufWriter::new(std::fs::File::create(corpus_path).map_err(|e| Error::io(corpus_path, e))?);
        self.write_jsonl(&mut f)?;
        f.flush().map_err(|e| Error::io(corpus_path, e))?;
        let truth_path = truth_path.as_ref();
        std::fs::write(truth_path, serde_json::to_string_pretty(&self.truth)?).map_err(|e| Error::io(truth_path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_planted_rule_is_exact() {
        let s = generate(&SynthConfig {
            noise: 0.0,
            documents: 200,
            ..Default::default()
        })
        .unwrap();
        let c = s.corpus().unwrap();
        for (d, l) in c.iter() {
            assert_eq!(s.planted_rule(d), l);
        }
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let cfg = SynthConfig {
            seed: 42,
            ..Default::default()
        };
        assert_eq!(generate(&cfg).unwrap().rows, generate(&cfg).unwrap().rows);
        let other = SynthConfig { seed: 43, ..cfg };
        assert_ne!(generate(&other).unwrap().rows, generate(&SynthConfig { seed: 42, ..Default::default() }).unwrap().rows);
    }

    #[test]
    fn truth_lists_requested_planted_words() {
        let s = generate(&SynthConfig::default()).unwrap();
        assert_eq!(s.planted(POSITIVE).len(), 10);
        assert_eq!(s.planted(NEGATIVE).len(), 10);
        let s = generate(&SynthConfig {
            planted_per_class: 4,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(s.planted(POSITIVE).len(), 4);
    }

    #[test]
    fn noise_rate_is_plausible() {
        let s = generate(&SynthConfig {
            documents: 2000,
            ..Default::default()
        })
        .unwrap();
        let flipped = s.rows.iter().filter(|r| r.label != r.clean_label).count() as f64 / 2000.0;
        assert!((flipped - 0.1).abs() < 0.03, "{flipped}");
    }

    #[test]
    fn documents_fit_the_character_cap_and_rare_words_are_unique() {
        let s = generate(&SynthConfig::default()).unwrap();
        assert!(s.rows.iter().all(|r| r.text.chars().count() <= crate::corpus::DEFAULT_MAX_CHARS));
        let c = s.corpus().unwrap();
        let stats = crate::corpus::word_stats(&c);
        assert!(!s.truth.rare_words.is_empty());
        for w in &s.truth.rare_words {
            assert_eq!(stats.occurrences(w), 1);
        }
    }

    #[test]
    fn invalid_configs() {
        assert!(generate(&SynthConfig { planted_per_class: 11, ..Default::default() }).is_err());
        assert!(generate(&SynthConfig { noise: 0.9, ..Default::default() }).is_err());
        assert!(generate(&SynthConfig { min_len: 10, max_len: 5, ..Default::default() }).is_err());
    }
}
