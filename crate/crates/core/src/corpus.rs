//! Document collections: ingestion, tokenization, word statistics, and the
//! candidate filter that decides which words may appear in a top-k list.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub type ClassId = usize;

/// Default character cap applied at ingestion.
pub const DEFAULT_MAX_CHARS: usize = 200;

/// Default rare-word threshold: words with fewer occurrences are not candidates.
pub const DEFAULT_MIN_FREQ: u64 = 5;

const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords.txt");

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub word: String,
    pub position: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub tokens: Vec<Token>,
    pub raw_text: String,
}

impl Document {
    pub fn from_text(id: impl Into<String>, text: impl Into<String>) -> Self {
        let raw_text = text.into();
        Document {
            id: id.into(),
            tokens: tokenize(&raw_text),
            raw_text,
        }
    }

    /// Builds a document from already-normalized words. The raw text is the
    /// words joined by single spaces, which tokenizes back to the same words.
    pub fn from_words<I, S>(id: impl Into<String>, words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let tokens: Vec<Token> = words
            .into_iter()
            .enumerate()
            .map(|(position, w)| Token {
                word: w.into(),
                position,
            })
            .collect();
        let raw_text = join_words(&tokens);
        Document {
            id: id.into(),
            tokens,
            raw_text,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.word.as_str())
    }

    pub fn contains_word(&self, word: &str) -> bool {
        self.words().any(|w| w == word)
    }

    /// Normalized text: the token words joined by spaces. Two documents with
    /// the same content key are indistinguishable to a predictor.
    pub fn content_key(&self) -> String {
        join_words(&self.tokens)
    }
}

fn join_words(tokens: &[Token]) -> String {
    let mut out = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&t.word);
    }
    out
}

/// Lowercases, splits on Unicode whitespace, and trims non-alphanumeric
/// characters from both ends of every piece. Empty pieces are dropped and
/// positions are consecutive from 0.
pub fn tokenize(text: &str) -> Vec<Token> {
    text.to_lowercase()
        .split_whitespace()
        .map(|piece| piece.trim_matches(|c: char| !c.is_alphanumeric()))
        .filter(|w| !w.is_empty())
        .enumerate()
        .map(|(position, w)| Token {
            word: w.to_string(),
            position,
        })
        .collect()
}

/// A labeled document collection. Documents keep file order; classes are
/// sorted lexicographically by label string.
#[derive(Debug, Clone)]
pub struct Corpus {
    documents: Vec<Document>,
    labels: Vec<ClassId>,
    classes: Vec<String>,
}

impl Corpus {
    pub fn new(documents: Vec<Document>, labels: Vec<ClassId>, classes: Vec<String>) -> Result<Self> {
        if documents.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        if documents.len() != labels.len() {
            return Err(Error::Input(format!(
                "{} documents but {} labels",
                documents.len(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes.len()) {
            return Err(Error::Input(format!(
                "label index {bad} out of range for {} classes",
                classes.len()
            )));
        }
        let mut seen = HashSet::with_capacity(documents.len());
        for d in &documents {
            if !seen.insert(d.id.as_str()) {
                return Err(Error::DuplicateDocument(d.id.clone()));
            }
        }
        Ok(Corpus {
            documents,
            labels,
            classes,
        })
    }

    /// Builds a corpus from `(id, text, label)` triples; classes are the
    /// sorted distinct labels.
    pub fn from_labeled<I, A, B, C>(rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (A, B, C)>,
        A: Into<String>,
        B: Into<String>,
        C: Into<String>,
    {
        let rows: Vec<(String, String, String)> = rows
            .into_iter()
            .map(|(a, b, c)| (a.into(), b.into(), c.into()))
            .collect();
        let classes: Vec<String> = rows
            .iter()
            .map(|r| r.2.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut documents = Vec::with_capacity(rows.len());
        let mut labels = Vec::with_capacity(rows.len());
        for (id, text, label) in rows {
            labels.push(classes.binary_search(&label).expect("label collected above"));
            documents.push(Document::from_text(id, text));
        }
        Corpus::new(documents, labels, classes)
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn labels(&self) -> &[ClassId] {
        &self.labels
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn label(&self, index: usize) -> ClassId {
        self.labels[index]
    }

    pub fn class_index(&self, name: &str) -> Option<ClassId> {
        self.classes.iter().position(|c| c == name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Document, ClassId)> {
        self.documents.iter().zip(self.labels.iter().copied())
    }

    pub fn total_tokens(&self) -> usize {
        self.documents.iter().map(Document::len).sum()
    }

    /// Corpus restricted to the given document indices (kept in the given order).
    pub fn subset(&self, indices: &[usize]) -> Result<Corpus> {
        Corpus::new(
            indices.iter().map(|&i| self.documents[i].clone()).collect(),
            indices.iter().map(|&i| self.labels[i]).collect(),
            self.classes.clone(),
        )
    }

    /// Same documents with replaced labels (for example, predicted classes).
    pub fn relabeled(&self, labels: Vec<ClassId>) -> Result<Corpus> {
        Corpus::new(self.documents.clone(), labels, self.classes.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    Csv,
    Jsonl,
}

impl CorpusFormat {
    /// Guess from a file extension: `.csv` is CSV, everything else JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => CorpusFormat::Csv,
            _ => CorpusFormat::Jsonl,
        }
    }
}

impl std::str::FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(CorpusFormat::Csv),
            "jsonl" | "json" => Ok(CorpusFormat::Jsonl),
            other => Err(Error::Config(format!("unknown corpus format {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestOptions {
    pub text_field: String,
    pub label_field: String,
    /// Field holding a document id; row index when absent.
    pub id_field: Option<String>,
    /// Documents with more characters than this are dropped.
    pub max_chars: Option<usize>,
    /// Fixed class set. When given, labels outside it are an error.
    pub classes: Option<Vec<String>>,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            text_field: "text".into(),
            label_field: "label".into(),
            id_field: None,
            max_chars: Some(DEFAULT_MAX_CHARS),
            classes: None,
        }
    }
}

struct RawRow {
    id: String,
    text: String,
    label: String,
}

pub fn load_corpus(path: impl AsRef<Path>, format: CorpusFormat, options: &IngestOptions) -> Result<Corpus> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let rows = match format {
        CorpusFormat::Csv => read_csv(file, options)?,
        CorpusFormat::Jsonl => read_jsonl(BufReader::new(file), path, options)?,
    };
    build_corpus(rows, options)
}

fn read_csv(file: File, options: &IngestOptions) -> Result<Vec<RawRow>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers = reader.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Config(format!("CSV has no column {name:?}")))
    };
    let text_col = column(&options.text_field)?;
    let label_col = column(&options.label_field)?;
    let id_col = options.id_field.as_deref().map(column).transpose()?;

    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let get = |c: usize| record.get(c).unwrap_or("").to_string();
        rows.push(RawRow {
            id: id_col.map(get).unwrap_or_else(|| i.to_string()),
            text: get(text_col),
            label: get(label_col),
        });
    }
    Ok(rows)
}

fn json_scalar(v: &serde_json::Value) -> Option<String> {
    match v {
        serde_json::Value::String(s) => Some(s.clone()),
        serde_json::Value::Number(n) => Some(n.to_string()),
        serde_json::Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

fn read_jsonl(reader: impl BufRead, path: &Path, options: &IngestOptions) -> Result<Vec<RawRow>> {
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(&line)?;
        let field = |name: &str| {
            value
                .get(name)
                .and_then(json_scalar)
                .ok_or_else(|| Error::Input(format!("line {}: missing field {name:?}", i + 1)))
        };
        let id = match &options.id_field {
            Some(f) => field(f)?,
            None => value.get("id").and_then(json_scalar).unwrap_or_else(|| i.to_string()),
        };
        rows.push(RawRow {
            id,
            text: field(&options.text_field)?,
            label: field(&options.label_field)?,
        });
    }
    Ok(rows)
}

fn build_corpus(rows: Vec<RawRow>, options: &IngestOptions) -> Result<Corpus> {
    let classes: Vec<String> = match &options.classes {
        Some(fixed) => {
            let mut c = fixed.clone();
            c.sort();
            c.dedup();
            c
        }
        None => rows
            .iter()
            .map(|r| r.label.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect(),
    };
    let mut documents = Vec::new();
    let mut labels = Vec::new();
    for row in rows {
        let label = classes
            .binary_search(&row.label)
            .map_err(|_| Error::UnknownLabel {
                label: row.label.clone(),
                known: classes.clone(),
            })?;
        if let Some(cap) = options.max_chars {
            if row.text.chars().count() > cap {
                continue;
            }
        }
        documents.push(Document::from_text(row.id, row.text));
        labels.push(label);
    }
    Corpus::new(documents, labels, classes)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordEntry {
    /// Total occurrences N_w.
    pub total: u64,
    /// Occurrences per class.
    pub per_class: Vec<u64>,
    /// Number of documents containing the word, per class.
    pub doc_freq: Vec<u64>,
}

/// Exact occurrence statistics of a corpus, partitioned by document label.
#[derive(Debug, Clone)]
pub struct WordStats {
    entries: BTreeMap<String, WordEntry>,
    n_classes: usize,
    total_tokens: u64,
}

pub fn word_stats(corpus: &Corpus) -> WordStats {
    let n_classes = corpus.classes().len();
    let mut entries: BTreeMap<String, WordEntry> = BTreeMap::new();
    let mut total_tokens = 0;
    for (doc, class) in corpus.iter() {
        let mut in_doc = HashSet::new();
        for t in &doc.tokens {
            let e = entries.entry(t.word.clone()).or_insert_with(|| WordEntry {
                total: 0,
                per_class: vec![0; n_classes],
                doc_freq: vec![0; n_classes],
            });
            e.total += 1;
            e.per_class[class] += 1;
            if in_doc.insert(t.word.as_str()) {
                e.doc_freq[class] += 1;
            }
            total_tokens += 1;
        }
    }
    WordStats {
        entries,
        n_classes,
        total_tokens,
    }
}

impl WordStats {
    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn vocabulary(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn vocabulary_size(&self) -> usize {
        self.entries.len()
    }

    pub fn entry(&self, word: &str) -> Option<&WordEntry> {
        self.entries.get(word)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &WordEntry)> {
        self.entries.iter().map(|(w, e)| (w.as_str(), e))
    }

    /// N_w, zero for unseen words.
    pub fn occurrences(&self, word: &str) -> u64 {
        self.entries.get(word).map_or(0, |e| e.total)
    }

    pub fn class_occurrences(&self, word: &str, class: ClassId) -> u64 {
        self.entries.get(word).map_or(0, |e| e.per_class[class])
    }

    pub fn doc_freq(&self, word: &str, class: ClassId) -> u64 {
        self.entries.get(word).map_or(0, |e| e.doc_freq[class])
    }

    pub fn total_doc_freq(&self, word: &str) -> u64 {
        self.entries.get(word).map_or(0, |e| e.doc_freq.iter().sum())
    }

    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }
}

/// A stop-word list. Parsed from one word per line; `#` starts a comment line.
#[derive(Debug, Clone, Default)]
pub struct StopWords(HashSet<String>);

impl StopWords {
    pub fn empty() -> Self {
        StopWords::default()
    }

    /// The bundled English list.
    pub fn english() -> Self {
        StopWords::parse(DEFAULT_STOPWORDS)
    }

    pub fn parse(text: &str) -> Self {
        StopWords(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_lowercase)
                .collect(),
        )
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(StopWords::parse(&text))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(word)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<S: Into<String>> FromIterator<S> for StopWords {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        StopWords(iter.into_iter().map(Into::into).collect())
    }
}

/// Words eligible for top-k scoring.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateSet {
    words: BTreeSet<String>,
}

impl CandidateSet {
    /// Every word of the vocabulary.
    pub fn all(stats: &WordStats) -> Self {
        CandidateSet {
            words: stats.vocabulary().map(str::to_string).collect(),
        }
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }
}

impl<S: Into<String>> FromIterator<S> for CandidateSet {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        CandidateSet {
            words: iter.into_iter().map(Into::into).collect(),
        }
    }
}

/// `W(S)` minus stop words minus words with fewer than `min_freq` occurrences.
pub fn filter_candidates(stats: &WordStats, stopwords: &StopWords, min_freq: u64) -> CandidateSet {
    let min_freq = min_freq.max(1);
    stats
        .entries()
        .filter(|(w, e)| e.total >= min_freq && !stopwords.contains(w))
        .map(|(w, _)| w.to_string())
        .collect()
}

/// Uniform sample without replacement of `round(fraction * |S|)` documents
/// (at least one), kept in corpus order.
pub fn sample_documents(corpus: &Corpus, fraction: f64, seed: u64) -> Result<Corpus> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Config(format!("sample fraction {fraction} outside (0, 1]")));
    }
    let n = corpus.len();
    let m = ((fraction * n as f64).round() as usize).clamp(1, n);
    if m == n {
        return Ok(corpus.clone());
    }
    let mut rng = rng::stream(seed, "sample", "documents", 0);
    let mut picked = index::sample(&mut rng, n, m).into_vec();
    picked.sort_unstable();
    corpus.subset(&picked)
}

/// Index from document id to position in the corpus.
pub fn id_index(corpus: &Corpus) -> HashMap<&str, usize> {
    corpus
        .documents()
        .iter()
        .enumerate()
        .map(|(i, d)| (d.id.as_str(), i))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn words(tokens: &[Token]) -> Vec<(&str, usize)> {
        tokens.iter().map(|t| (t.word.as_str(), t.position)).collect()
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(
            words(&tokenize("My daughter got this")),
            vec![("my", 0), ("daughter", 1), ("got", 2), ("this", 3)]
        );
        assert_eq!(words(&tokenize("Great!")), vec![("great", 0)]);
        assert!(tokenize("").is_empty());
        assert_eq!(words(&tokenize("  -- wow ... \"ok\" ")), vec![("wow", 0), ("ok", 1)]);
        assert_eq!(words(&tokenize("don't")), vec![("don't", 0)]);
    }

    fn write_tmp(contents: &str, suffix: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(suffix).tempfile().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn csv_load_keeps_short_rows() {
        let f = write_tmp("text,label\nfun toy,pos\nbroke fast,neg\nlove it,pos\n", ".csv");
        let c = load_corpus(f.path(), CorpusFormat::Csv, &IngestOptions::default()).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.classes(), ["neg", "pos"]);
        assert_eq!(c.labels(), [1, 0, 1]);
        assert_eq!(c.documents()[1].id, "1");
    }

    #[test]
    fn csv_load_drops_long_rows() {
        let long = "x".repeat(250);
        let f = write_tmp(&format!("text,label\na,pos\n{long},neg\nb,neg\n"), ".csv");
        let c = load_corpus(f.path(), CorpusFormat::Csv, &IngestOptions::default()).unwrap();
        assert_eq!(c.len(), 2);
        assert!(c.documents().iter().all(|d| d.raw_text.chars().count() <= 200));
    }

    #[test]
    fn csv_custom_columns() {
        let f = write_tmp("review,sentiment,key\nnice,good,r1\nbad,poor,r2\n", ".csv");
        let opts = IngestOptions {
            text_field: "review".into(),
            label_field: "sentiment".into(),
            id_field: Some("key".into()),
            ..Default::default()
        };
        let c = load_corpus(f.path(), CorpusFormat::Csv, &opts).unwrap();
        assert_eq!(c.documents()[1].id, "r2");
        let missing = load_corpus(f.path(), CorpusFormat::Csv, &IngestOptions::default());
        assert!(matches!(missing, Err(Error::Config(_))));
    }

    #[test]
    fn jsonl_classes_sorted() {
        let f = write_tmp(
            "{\"text\":\"good\",\"label\":\"positive\"}\n{\"text\":\"bad\",\"label\":\"negative\"}\n",
            ".jsonl",
        );
        let c = load_corpus(f.path(), CorpusFormat::Jsonl, &IngestOptions::default()).unwrap();
        assert_eq!(c.classes(), ["negative", "positive"]);
        assert_eq!(c.labels(), [1, 0]);
    }

    #[test]
    fn jsonl_numeric_labels_and_ids() {
        let f = write_tmp("{\"id\":7,\"text\":\"a\",\"label\":1}\n\n{\"id\":9,\"text\":\"b\",\"label\":0}\n", ".jsonl");
        let c = load_corpus(f.path(), CorpusFormat::Jsonl, &IngestOptions::default()).unwrap();
        assert_eq!(c.classes(), ["0", "1"]);
        assert_eq!(c.documents()[0].id, "7");
    }

    #[test]
    fn load_errors() {
        let f = write_tmp("{\"text\":\"a\",\"label\":\"spam\"}\n", ".jsonl");
        let opts = IngestOptions {
            classes: Some(vec!["ham".into(), "eggs".into()]),
            ..Default::default()
        };
        assert!(matches!(
            load_corpus(f.path(), CorpusFormat::Jsonl, &opts),
            Err(Error::UnknownLabel { .. })
        ));

        let long = "y".repeat(300);
        let f = write_tmp(&format!("text,label\n{long},a\n"), ".csv");
        assert!(matches!(
            load_corpus(f.path(), CorpusFormat::Csv, &IngestOptions::default()),
            Err(Error::EmptyCorpus)
        ));

        assert!(matches!(
            load_corpus("/nonexistent/corpus.csv", CorpusFormat::Csv, &IngestOptions::default()),
            Err(Error::Io { .. })
        ));

        let f = write_tmp("{\"id\":\"x\",\"text\":\"a\",\"label\":\"p\"}\n{\"id\":\"x\",\"text\":\"b\",\"label\":\"p\"}\n", ".jsonl");
        assert!(matches!(
            load_corpus(f.path(), CorpusFormat::Jsonl, &IngestOptions::default()),
            Err(Error::DuplicateDocument(_))
        ));
    }

    #[test]
    fn stats_counts() {
        let c = Corpus::from_labeled([("d0", "a b a", "c0")]).unwrap();
        let s = word_stats(&c);
        assert_eq!(s.occurrences("a"), 2);
        assert_eq!(s.occurrences("b"), 1);
        assert_eq!(s.doc_freq("a", 0), 1);

        let c = Corpus::from_labeled([("d0", "x", "c0"), ("d1", "x", "c1")]).unwrap();
        let s = word_stats(&c);
        assert_eq!(s.class_occurrences("x", 0), 1);
        assert_eq!(s.class_occurrences("x", 1), 1);
        assert_eq!(s.occurrences("x"), 2);
        assert_eq!(s.total_doc_freq("x"), 2);
    }

    #[test]
    fn candidate_filtering() {
        let c = Corpus::from_labeled([("d0", "the great", "c0")]).unwrap();
        let s = word_stats(&c);
        let stop: StopWords = ["the"].into_iter().collect();
        let cand = filter_candidates(&s, &stop, 1);
        assert_eq!(cand.iter().collect::<Vec<_>>(), ["great"]);
        assert_eq!(filter_candidates(&s, &StopWords::empty(), 1), CandidateSet::all(&s));

        let c = Corpus::from_labeled([("d0", "great great great great", "c0")]).unwrap();
        let s = word_stats(&c);
        assert!(!filter_candidates(&s, &StopWords::empty(), 5).contains("great"));
        assert!(filter_candidates(&s, &StopWords::empty(), 4).contains("great"));
    }

    #[test]
    fn stopword_file_format() {
        let s = StopWords::parse("# comment\nThe\n\n  and \n#skip\n");
        assert!(s.contains("the"));
        assert!(s.contains("and"));
        assert!(!s.contains("skip"));
        assert_eq!(s.len(), 2);
        assert!(StopWords::english().contains("the"));
    }

    fn ten_docs() -> Corpus {
        Corpus::from_labeled((0..10).map(|i| (format!("d{i}"), format!("w{i}"), if i % 2 == 0 { "a" } else { "b" })))
            .unwrap()
    }

    #[test]
    fn sampling() {
        let c = ten_docs();
        let full = sample_documents(&c, 1.0, 3).unwrap();
        assert_eq!(full.documents(), c.documents());

        let a = sample_documents(&c, 0.5, 11).unwrap();
        let b = sample_documents(&c, 0.5, 11).unwrap();
        assert_eq!(a.len(), 5);
        assert_eq!(a.documents(), b.documents());
        // labels follow their documents
        for (d, l) in a.iter() {
            let i: usize = d.id[1..].parse().unwrap();
            assert_eq!(l, c.label(i));
        }
        let differs = (0..20).any(|s| sample_documents(&c, 0.5, s).unwrap().documents() != a.documents());
        assert!(differs);

        assert!(sample_documents(&c, 0.0, 1).is_err());
        assert!(sample_documents(&c, 1.5, 1).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn tokenize_idempotent_on_words(text in "\\PC{0,60}") {
                for t in tokenize(&text) {
                    let again = tokenize(&t.word);
                    prop_assert_eq!(again.len(), 1);
                    prop_assert_eq!(&again[0].word, &t.word);
                }
            }

            #[test]
            fn positions_consecutive(text in "\\PC{0,60}") {
                for (i, t) in tokenize(&text).iter().enumerate() {
                    prop_assert_eq!(t.position, i);
                    prop_assert!(!t.word.is_empty());
                }
            }

            #[test]
            fn stats_conserve_tokens(docs in proptest::collection::vec("[a-d ]{0,12}", 1..8)) {
                let c = Corpus::from_labeled(docs.iter().enumerate().map(|(i, t)| (i.to_string(), t.clone(), if i % 2 == 0 { "x" } else { "y" }))).unwrap();
                let s = word_stats(&c);
                let sum: u64 = s.entries().map(|(_, e)| e.total).sum();
                prop_assert_eq!(sum as usize, c.total_tokens());
                for (_, e) in s.entries() {
                    prop_assert_eq!(e.total, e.per_class.iter().sum::<u64>());
                    prop_assert!(e.total >= 1);
                }
            }

            #[test]
            fn candidates_monotone_in_min_freq(docs in proptest::collection::vec("[a-e ]{0,16}", 1..8), lo in 1u64..4, extra in 0u64..4) {
                let c = Corpus::from_labeled(docs.iter().enumerate().map(|(i, t)| (i.to_string(), t.clone(), "x"))).unwrap();
                let s = word_stats(&c);
                let a = filter_candidates(&s, &StopWords::empty(), lo);
                let b = filter_candidates(&s, &StopWords::empty(), lo + extra);
                prop_assert!(b.iter().all(|w| a.contains(w)));
            }
        }
    }
}
