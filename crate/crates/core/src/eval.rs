//! Quality measures for top-k term lists: AOPC^k, shared-terms ratio,
//! anytime quality timelines and the append-a-sentence experiment.

use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::aggregate::ScoredWord;
use crate::corpus::{ClassId, Corpus, Document};
use crate::error::{Error, Result};
use crate::model::{accuracy, MemoPredictor, Predictor};
use crate::topk::Snapshot;

/// An ordered top-k list for one class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermList {
    pub class: String,
    pub agg: String,
    pub terms: Vec<ScoredWord>,
}

impl TermList {
    pub fn new(class: impl Into<String>, agg: impl Into<String>, terms: Vec<ScoredWord>) -> Self {
        TermList {
            class: class.into(),
            agg: agg.into(),
            terms,
        }
    }

    /// Unscored list from bare words, best first.
    pub fn from_words<S: Into<String>>(class: &str, words: impl IntoIterator<Item = S>) -> Self {
        let words: Vec<String> = words.into_iter().map(Into::into).collect();
        let n = words.len();
        let terms = words
            .into_iter()
            .enumerate()
            .map(|(i, word)| ScoredWord {
                word,
                score: (n - i) as f64,
            })
            .collect();
        TermList::new(class, "manual", terms)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.terms.iter().map(|t| t.word.as_str())
    }

    /// The first `k` terms.
    pub fn truncated(&self, k: usize) -> TermList {
        TermList {
            class: self.class.clone(),
            agg: self.agg.clone(),
            terms: self.terms.iter().take(k).cloned().collect(),
        }
    }

    /// Positions whose score equals the one before; their order was settled
    /// lexicographically.
    pub fn ties(&self) -> Vec<usize> {
        (1..self.terms.len())
            .filter(|&i| self.terms[i].score == self.terms[i - 1].score)
            .collect()
    }

    /// Fails unless scores are non-increasing, tied words ascend
    /// lexicographically, and no word repeats.
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for (i, t) in self.terms.iter().enumerate() {
            if !seen.insert(t.word.as_str()) {
                return Err(Error::Input(format!("term {:?} listed twice", t.word)));
            }
            if i > 0 {
                let prev = &self.terms[i - 1];
                if t.score > prev.score || (t.score == prev.score && t.word < prev.word) {
                    return Err(Error::Input(format!("terms out of order at position {i}")));
                }
            }
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let list: TermList = serde_json::from_str(&text)?;
        list.validate()?;
        Ok(list)
    }
}

/// `d` without any token whose word is among the first `i` terms.
pub fn remove_prefix(d: &Document, terms: &TermList, i: usize) -> Document {
    let prefix: BTreeSet<&str> = terms.words().take(i).collect();
    Document::from_words(d.id.clone(), d.words().filter(|w| !prefix.contains(w)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AopcResult {
    pub value: f64,
    /// Average drop `f̂(d,c) − f̂(dⁱ,c)` for `i = 1..=k`.
    pub prefix_drops: Vec<f64>,
    pub documents: usize,
    pub k: usize,
}

/// `AOPC^k = 1/(k+1) · mean over d ∈ S[c] of Σ_{i=1..k} (f̂(d,c) − f̂(dⁱ,c))`,
/// where `dⁱ` drops the first `i` terms. Documents sharing no word with the
/// list contribute zero and still count in the mean.
pub fn aopc_k(terms: &TermList, corpus: &Corpus, f: &dyn Predictor, c: ClassId) -> Result<AopcResult> {
    if terms.is_empty() {
        return Err(Error::Input("AOPC needs a non-empty term list".into()));
    }
    let mut members: Vec<&Document> = corpus
        .iter()
        .filter(|(_, l)| *l == c)
        .map(|(d, _)| d)
        .collect();
    if members.is_empty() {
        return Err(Error::Input(format!("class {c} has no documents")));
    }
    members.sort_by(|a, b| a.id.cmp(&b.id));
    let k = terms.len();
    let words: Vec<&str> = terms.words().collect();

    // Variants to evaluate: the original plus each prefix that changes it.
    let mut variants: Vec<Document> = Vec::new();
    let mut plan: Vec<(usize, Vec<Option<usize>>)> = Vec::with_capacity(members.len());
    for d in &members {
        let base = variants.len();
        variants.push((*d).clone());
        let mut per_prefix = Vec::with_capacity(k);
        let mut last = base;
        for i in 1..=k {
            if d.contains_word(words[i - 1]) {
                variants.push(remove_prefix(d, terms, i));
                last = variants.len() - 1;
            }
            per_prefix.push((last != base).then_some(last));
        }
        plan.push((base, per_prefix));
    }
    let memo = MemoPredictor::new(f);
    let refs: Vec<&Document> = variants.iter().collect();
    let probs = memo.predict_proba_batch(&refs)?;

    let mut prefix_drops = vec![0.0; k];
    let mut total = 0.0;
    for (base, per_prefix) in &plan {
        let p0 = probs[*base][c];
        let mut sum = 0.0;
        for (i, v) in per_prefix.iter().enumerate() {
            let drop = v.map_or(0.0, |v| p0 - probs[v][c]);
            prefix_drops[i] += drop;
            sum += drop;
        }
        total += sum;
    }
    let n = members.len() as f64;
    prefix_drops.iter_mut().for_each(|x| *x /= n);
    Ok(AopcResult {
        value: total / n / (k as f64 + 1.0),
        prefix_drops,
        documents: members.len(),
        k,
    })
}

/// `|a ∩ b| / k` for two lists of the same length `k`.
pub fn shared_terms_ratio(a: &TermList, b: &TermList) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Input(format!("term lists differ in length: {} vs {}", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(Error::Input("term lists are empty".into()));
    }
    let sa: BTreeSet<&str> = a.words().collect();
    Ok(b.words().filter(|w| sa.contains(w)).count() as f64 / a.len() as f64)
}

/// Pairwise shared-terms ratios, each pair compared at the shorter length.
pub fn shared_terms_matrix(lists: &[TermList]) -> Vec<Vec<f64>> {
    lists
        .iter()
        .map(|a| {
            lists
                .iter()
                .map(|b| {
                    let k = a.len().min(b.len());
                    if k == 0 {
                        0.0
                    } else {
                        shared_terms_ratio(&a.truncated(k), &b.truncated(k)).unwrap_or(0.0)
                    }
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AppendDrop {
    pub accuracy_before: f64,
    pub accuracy_after: f64,
    /// `before − after` in percentage points.
    pub drop_points: f64,
    /// Documents the sentence was appended to.
    pub modified: usize,
}

/// Appends `sentence` to every document whose label is not `target` and
/// reports overall accuracy before and after.
pub fn append_drop(corpus: &Corpus, f: &dyn Predictor, sentence: &str, target: ClassId) -> Result<AppendDrop> {
    if crate::corpus::tokenize(sentence).is_empty() {
        return Err(Error::Input("sentence has no words".into()));
    }
    if target >= corpus.classes().len() {
        return Err(Error::Input(format!("class index {target} out of range")));
    }
    let before = accuracy(f, corpus)?;
    let mut modified = 0;
    let docs: Vec<Document> = corpus
        .iter()
        .map(|(d, l)| {
            if l == target {
                d.clone()
            } else {
                modified += 1;
                Document::from_text(d.id.clone(), format!("{} {}", d.raw_text, sentence))
            }
        })
        .collect();
    let changed = Corpus::new(docs, corpus.labels().to_vec(), corpus.classes().to_vec())?;
    let after = accuracy(f, &changed)?;
    Ok(AppendDrop {
        accuracy_before: before,
        accuracy_after: after,
        drop_points: (before - after) * 100.0,
        modified,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimelinePoint {
    pub t_sec: f64,
    pub calls: u64,
    pub aopc: f64,
}

/// AOPC of every snapshot's list. Empty lists score 0.
pub fn quality_timeline(snapshots: &[Snapshot], corpus: &Corpus, f: &dyn Predictor, c: ClassId) -> Result<Vec<TimelinePoint>> {
    let memo = MemoPredictor::new(f);
    let class = corpus.classes().get(c).cloned().unwrap_or_default();
    let mut cache: HashMap<Vec<String>, f64> = HashMap::new();
    let mut out = Vec::with_capacity(snapshots.len());
    for s in snapshots {
        let key: Vec<String> = s.topk.iter().map(|t| t.word.clone()).collect();
        let aopc = match cache.get(&key) {
            Some(v) => *v,
            None if key.is_empty() => 0.0,
            None => {
                let list = TermList::new(class.clone(), "snapshot", s.topk.clone());
                let v = aopc_k(&list, corpus, &memo, c)?.value;
                cache.insert(key, v);
                v
            }
        };
        out.push(TimelinePoint {
            t_sec: s.t_sec,
            calls: s.calls,
            aopc,
        });
    }
    Ok(out)
}

/// CSV with columns `t_sec,calls,aopc`.
pub fn write_timeline_csv(out: impl Write, points: &[TimelinePoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for p in points {
        w.serialize(p)?;
    }
    w.flush().map_err(|e| Error::io("<timeline>", e))
}

pub fn read_snapshots(path: impl AsRef<Path>) -> Result<Vec<Snapshot>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Probability of class 1 is 0.9 when "key" is present, else 0.5.
    struct Keyed(Vec<String>);

    impl Predictor for Keyed {
        fn classes(&self) -> &[String] {
            &self.0
        }
        fn predict_proba_batch(&self, docs: &[&Document]) -> Result<Vec<Vec<f64>>> {
            Ok(docs
                .iter()
                .map(|d| if d.contains_word("key") { vec![0.1, 0.9] } else { vec![0.5, 0.5] })
                .collect())
        }
    }

    fn classes() -> Vec<String> {
        vec!["neg".into(), "pos".into()]
    }

    fn two_class<'a>(rows: impl IntoIterator<Item = (&'a str, &'a str, ClassId)>) -> Corpus {
        let (docs, labels) = rows.into_iter().map(|(id, t, l)| (Document::from_text(id, t), l)).unzip();
        Corpus::new(docs, labels, classes()).unwrap()
    }

    #[test]
    fn prefix_removal() {
        let d = Document::from_text("d", "great fun great");
        let t = TermList::from_words("pos", ["great", "fun"]);
        assert_eq!(remove_prefix(&d, &t, 0), d);
        let one = remove_prefix(&d, &t, 1);
        assert_eq!(one.raw_text, "fun");
        assert_eq!(one.tokens[0].position, 0);
        assert!(remove_prefix(&d, &t, 2).is_empty());
        assert_eq!(remove_prefix(&one, &t, 1), one);
    }

    #[test]
    fn aopc_single_document_drop() {
        let corpus = two_class([("a", "key word", 1)]);
        let f = Keyed(classes());
        let r = aopc_k(&TermList::from_words("pos", ["key"]), &corpus, &f, 1).unwrap();
        assert_abs_diff_eq!(r.value, 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(r.prefix_drops[0], 0.4, epsilon = 1e-12);
    }

    #[test]
    fn aopc_ignored_words_is_zero_and_negative_allowed() {
        let corpus = two_class([("a", "key word", 1), ("b", "other", 1)]);
        let f = Keyed(classes());
        let r = aopc_k(&TermList::from_words("pos", ["word", "other"]), &corpus, &f, 1).unwrap();
        assert_eq!(r.value, 0.0);
        // removing "key" raises the negative class probability
        let r = aopc_k(&TermList::from_words("neg", ["key"]), &corpus.relabeled(vec![0, 0]).unwrap(), &f, 0).unwrap();
        assert!(r.value < 0.0);
    }

    #[test]
    fn shared_ratio() {
        let a = TermList::from_words("c", ["a", "b", "c", "d", "e"]);
        let b = TermList::from_words("c", ["e", "d", "x", "y", "a"]);
        let z = TermList::from_words("c", ["p", "q", "r", "s", "t"]);
        assert_eq!(shared_terms_ratio(&a, &a).unwrap(), 1.0);
        assert_eq!(shared_terms_ratio(&a, &z).unwrap(), 0.0);
        assert_eq!(shared_terms_ratio(&a, &b).unwrap(), 0.6);
        assert_eq!(shared_terms_ratio(&b, &a).unwrap(), 0.6);
        assert!(shared_terms_ratio(&a, &a.truncated(3)).is_err());
        let twenty: Vec<String> = (0..20).map(|i| format!("w{i}")).collect();
        let sixteen: Vec<String> = (4..24).map(|i| format!("w{i}")).collect();
        assert_eq!(
            shared_terms_ratio(&TermList::from_words("c", twenty), &TermList::from_words("c", sixteen)).unwrap(),
            0.8
        );
    }

    #[test]
    fn append_drop_cases() {
        let corpus = Corpus::from_labeled([("a", "plain", "neg"), ("b", "key", "pos"), ("c", "dull", "neg")]).unwrap();
        let f = Keyed(classes());
        let r = append_drop(&corpus, &f, "nothing here", 1).unwrap();
        assert_eq!(r.drop_points, 0.0);
        let r = append_drop(&corpus, &f, "the key", 1).unwrap();
        assert_eq!(r.accuracy_before, 1.0);
        assert_abs_diff_eq!(r.accuracy_after, 1.0 / 3.0, epsilon = 1e-12);
        assert_eq!(r.modified, 2);
        let only_pos = Corpus::from_labeled([("b", "key", "pos")]).unwrap();
        let f1 = Keyed(only_pos.classes().to_vec());
        let r = append_drop(&only_pos, &f1, "word", 0).unwrap();
        assert_eq!(r.accuracy_before, r.accuracy_after);
    }

    #[test]
    fn timeline() {
        let corpus = two_class([("a", "key word", 1)]);
        let f = Keyed(classes());
        assert!(quality_timeline(&[], &corpus, &f, 1).unwrap().is_empty());
        let snap = Snapshot {
            t_sec: 0.5,
            calls: 10,
            doc_index: 0,
            topk: vec![ScoredWord { word: "key".into(), score: 1.0 }],
        };
        let pts = quality_timeline(&[snap], &corpus, &f, 1).unwrap();
        assert_eq!(pts.len(), 1);
        assert_abs_diff_eq!(pts[0].aopc, 0.2, epsilon = 1e-12);
        let mut buf = Vec::new();
        write_timeline_csv(&mut buf, &pts).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("t_sec,calls,aopc\n"));
    }

    #[test]
    fn term_list_validation() {
        let ok = TermList::new(
            "c",
            "pr",
            vec![
                ScoredWord { word: "b".into(), score: 2.0 },
                ScoredWord { word: "a".into(), score: 1.0 },
                ScoredWord { word: "c".into(), score: 1.0 },
            ],
        );
        assert!(ok.validate().is_ok());
        assert_eq!(ok.ties(), vec![2]);
        let mut bad = ok.clone();
        bad.terms.swap(1, 2);
        assert!(bad.validate().is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn aopc_permutation_invariant_and_prefix_consistent(
                texts in proptest::collection::vec("(key|a|b|c)( (key|a|b|c)){0,5}", 1..8),
                rot in 0usize..8,
            ) {
                let f = Keyed(classes());
                let ids: Vec<String> = (0..texts.len()).map(|i| format!("d{i}")).collect();
                let rows: Vec<(&str, &str, ClassId)> = ids.iter().zip(&texts).map(|(i, t)| (i.as_str(), t.as_str(), 1)).collect();
                let corpus = two_class(rows.clone());
                let mut rotated = rows;
                let n = rotated.len();
                rotated.rotate_left(rot % n);
                let permuted = two_class(rotated);
                let terms = TermList::from_words("pos", ["a", "key", "b"]);
                let x = aopc_k(&terms, &corpus, &f, 1).unwrap();
                let y = aopc_k(&terms, &permuted, &f, 1).unwrap();
                prop_assert_eq!(x.value, y.value);
                let short = aopc_k(&terms.truncated(2), &corpus, &f, 1).unwrap();
                prop_assert_eq!(&short.prefix_drops[..], &x.prefix_drops[..2]);
                for d in &x.prefix_drops {
                    prop_assert!((-1.0..=1.0).contains(d));
                }
            }
        }
    }
}
