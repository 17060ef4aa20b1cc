//! Black-box predictors: the `Predictor` interface, a built-in bag-of-words
//! logistic regression, and a client for externally hosted models.

use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::{ClassId, Corpus, Document};
use crate::error::{Error, Result};
use crate::remote::{Endpoint, JsonLineTransport};
use crate::rng;

/// A classifier `f` with access to its class-probability function.
///
/// `predict_proba_batch` must return one probability vector per input, in
/// input order, each with one entry per class in `classes()` order.
pub trait Predictor: Send + Sync {
    fn classes(&self) -> &[String];

    fn predict_proba_batch(&self, docs: &[&Document]) -> Result<Vec<Vec<f64>>>;

    fn predict_proba(&self, doc: &Document) -> Result<Vec<f64>> {
        self.predict_proba_batch(&[doc])?
            .pop()
            .ok_or_else(|| Error::Predictor("empty response".into()))
    }

    fn predict(&self, doc: &Document) -> Result<ClassId> {
        Ok(argmax(&self.predict_proba(doc)?))
    }

    fn predict_batch(&self, docs: &[&Document]) -> Result<Vec<ClassId>> {
        Ok(self.predict_proba_batch(docs)?.iter().map(|p| argmax(p)).collect())
    }
}

impl<P: Predictor + ?Sized> Predictor for &P {
    fn classes(&self) -> &[String] {
        (**self).classes()
    }
    fn predict_proba_batch(&self, docs: &[&Document]) -> Result<Vec<Vec<f64>>> {
        (**self).predict_proba_batch(docs)
    }
}

impl<P: Predictor + ?Sized> Predictor for Arc<P> {
    fn classes(&self) -> &[String] {
        (**self).classes()
    }
    fn predict_proba_batch(&self, docs: &[&Document]) -> Result<Vec<Vec<f64>>> {
        (**self).predict_proba_batch(docs)
    }
}

impl<P: Predictor + ?Sized> Predictor for Box<P> {
    fn classes(&self) -> &[String] {
        (**self).classes()
    }
    fn predict_proba_batch(&self, docs: &[&Document]) -> Result<Vec<Vec<f64>>> {
        (**self).predict_proba_batch(docs)
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(probs: &[f64]) -> ClassId {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate().skip(1) {
        if p > probs[best] {
            best = i;
        }
    }
    best
}

/// Fails unless the predictor's classes are exactly the corpus classes.
pub fn check_classes(p: &dyn Predictor, corpus: &Corpus) -> Result<()> {
    if p.classes() != corpus.classes() {
        return Err(Error::Config(format!(
            "predictor classes {:?} do not match corpus classes {:?}",
            p.classes(),
            corpus.classes()
        )));
    }
    Ok(())
}

/// Fraction of documents whose predicted class equals their label.
pub fn accuracy(p: &dyn Predictor, corpus: &Corpus) -> Result<f64> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let docs: Vec<&Document> = corpus.documents().iter().collect();
    let predicted = p.predict_batch(&docs)?;
    let hits = predicted
        .iter()
        .zip(corpus.labels())
        .filter(|(a, b)| a == b)
        .count();
    Ok(hits as f64 / corpus.len() as f64)
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Counts every document passed through to the wrapped predictor.
pub struct CountingPredictor<P> {
    inner: P,
    calls: AtomicU64,
}

impl<P: Predictor> CountingPredictor<P> {
    pub fn new(inner: P) -> Self {
        CountingPredictor {
            inner,
            calls: AtomicU64::new(0),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn inner(&self) -> &P {
        &self.inner
    }
}

impl<P: Predictor> Predictor for CountingPredictor<P> {
    fn classes(&self) -> &[String] {
        self.inner.classes()
    }

    fn predict_proba_batch(&self, docs: &[&Document]) -> Result<Vec<Vec<f64>>> {
        self.calls.fetch_add(docs.len() as u64, Ordering::SeqCst);
        self.inner.predict_proba_batch(docs)
    }
}

/// Memoizes probabilities by document content. Only meant for inputs that
/// repeat (the unperturbed corpus and its term-removed variants); perturbation
/// samples should bypass it.
pub struct MemoPredictor<P> {
    inner: P,
    cache: Mutex<HashMap<String, Vec<f64>>>,
}

impl<P: Predictor> MemoPredictor<P> {
    pub fn new(inner: P) -> Self {
        MemoPredictor {
            inner,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn cached(&self) -> usize {
        self.cache.lock().map(|c| c.len()).unwrap_or(0)
    }
}

impl<P: Predictor> Predictor for MemoPredictor<P> {
    fn classes(&self) -> &[String] {
        self.inner.classes()
    }

    fn predict_proba_batch(&self, docs: &[&Document]) -> Result<Vec<Vec<f64>>> {
        let keys: Vec<String> = docs.iter().map(|d| d.content_key()).collect();
        let missing: Vec<usize> = {
            let cache = self.cache.lock().expect("cache lock");
            let mut seen = std::collections::HashSet::new();
            (0..docs.len())
                .filter(|&i| !cache.contains_key(&keys[i]) && seen.insert(keys[i].as_str()))
                .collect()
        };
        if !missing.is_empty() {
            let batch: Vec<&Document> = missing.iter().map(|&i| docs[i]).collect();
            let fresh = self.inner.predict_proba_batch(&batch)?;
            let mut cache = self.cache.lock().expect("cache lock");
            for (i, probs) in missing.into_iter().zip(fresh) {
                cache.insert(keys[i].clone(), probs);
            }
        }
        let cache = self.cache.lock().expect("cache lock");
        Ok(keys.iter().map(|k| cache[k].clone()).collect())
    }
}

/// Multinomial logistic regression over raw token counts.
#[derive(Debug, Clone, PartialEq)]
pub struct BowClassifier {
    classes: Vec<String>,
    vocabulary: Vec<String>,
    index: HashMap<String, usize>,
    /// `weights[class][feature]`
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

pub const MODEL_FORMAT: &str = "anchor-topk/bow-logreg";
pub const MODEL_VERSION: u32 = 1;

/// On-disk model layout (JSON).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub classes: Vec<String>,
    pub vocabulary: Vec<String>,
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl BowClassifier {
    pub fn zeros(classes: Vec<String>, vocabulary: Vec<String>) -> Self {
        let index = vocabulary.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        let weights = vec![vec![0.0; vocabulary.len()]; classes.len()];
        let bias = vec![0.0; classes.len()];
        BowClassifier {
            classes,
            vocabulary,
            index,
            weights,
            bias,
        }
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    /// Weight of `word` for `class`; zero for out-of-vocabulary words.
    pub fn weight(&self, class: ClassId, word: &str) -> f64 {
        self.index.get(word).map_or(0.0, |&j| self.weights[class][j])
    }

    pub fn set_weight(&mut self, class: ClassId, word: &str, value: f64) {
        if let Some(&j) = self.index.get(word) {
            self.weights[class][j] = value;
        }
    }

    pub fn set_bias(&mut self, class: ClassId, value: f64) {
        self.bias[class] = value;
    }

    /// Multiplies every weight and bias by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.weights.iter_mut().flatten().for_each(|w| *w *= factor);
        out.bias.iter_mut().for_each(|b| *b *= factor);
        out
    }

    fn features(&self, doc: &Document) -> Vec<(usize, f64)> {
        let mut counts: HashMap<usize, f64> = HashMap::new();
        for w in doc.words() {
            if let Some(&j) = self.index.get(w) {
                *counts.entry(j).or_insert(0.0) += 1.0;
            }
        }
        let mut v: Vec<(usize, f64)> = counts.into_iter().collect();
        v.sort_unstable_by_key(|&(j, _)| j);
        v
    }

    fn logits_of(&self, features: &[(usize, f64)]) -> Vec<f64> {
        (0..self.classes.len())
            .map(|c| {
                let row = &self.weights[c];
                self.bias[c] + features.iter().map(|&(j, x)| row[j] * x).sum::<f64>()
            })
            .collect()
    }

    pub fn logits(&self, doc: &Document) -> Vec<f64> {
        self.logits_of(&self.features(doc))
    }

    pub fn to_file(&self) -> ModelFile {
        ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            classes: self.classes.clone(),
            vocabulary: self.vocabulary.clone(),
            weights: self.weights.clone(),
            bias: self.bias.clone(),
        }
    }

    pub fn from_file(file: ModelFile) -> Result<Self> {
        if file.format != MODEL_FORMAT {
            return Err(Error::Input(format!("not a model file (format {:?})", file.format)));
        }
        if file.version != MODEL_VERSION {
            return Err(Error::Input(format!("unsupported model version {}", file.version)));
        }
        let n_feat = file.vocabulary.len();
        if file.weights.len() != file.classes.len()
            || file.bias.len() != file.classes.len()
            || file.weights.iter().any(|r| r.len() != n_feat)
        {
            return Err(Error::Input("model weight dimensions do not match vocabulary x classes".into()));
        }
        let mut m = BowClassifier::zeros(file.classes, file.vocabulary);
        m.weights = file.weights;
        m.bias = file.bias;
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string(&self.to_file())?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        BowClassifier::from_file(serde_json::from_str(&text)?)
    }
}

impl Predictor for BowClassifier {
    fn classes(&self) -> &[String] {
        &self.classes
    }

    fn predict_proba_batch(&self, docs: &[&Document]) -> Result<Vec<Vec<f64>>> {
        Ok(docs.iter().map(|d| softmax(&self.logits(d))).collect())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainParams {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub seed: u64,
    /// Share of documents held out for checkpoint selection; 0 disables it.
    pub validation_fraction: f64,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            epochs: 300,
            learning_rate: 0.1,
            l2: 1e-4,
            seed: 0,
            validation_fraction: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    /// Regularized training loss before each update, then once after the last.
    pub losses: Vec<f64>,
    pub train_accuracy: f64,
    pub validation_accuracy: Option<f64>,
    /// Epoch whose weights were kept (number of updates applied).
    pub selected_epoch: usize,
    pub train_size: usize,
    pub validation_size: usize,
}

struct Example {
    features: Vec<(usize, f64)>,
    label: ClassId,
}

fn mean_loss(model: &BowClassifier, data: &[Example], l2: f64) -> f64 {
    let ce: f64 = data
        .iter()
        .map(|e| {
            let p = softmax(&model.logits_of(&e.features));
            -p[e.label].max(f64::MIN_POSITIVE).ln()
        })
        .sum::<f64>()
        / data.len() as f64;
    let reg: f64 = model.weights.iter().flatten().map(|w| w * w).sum::<f64>() * 0.5 * l2;
    ce + reg
}

fn hits(model: &BowClassifier, data: &[Example]) -> usize {
    data.iter()
        .filter(|e| argmax(&model.logits_of(&e.features)) == e.label)
        .count()
}

/// Full-batch gradient descent on mean cross-entropy plus an L2 penalty on
/// the weights (bias unpenalized). Deterministic given `params.seed`, which
/// only drives the validation split.
pub fn train_bow(corpus: &Corpus, params: &TrainParams) -> Result<(BowClassifier, TrainReport)> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let present: std::collections::BTreeSet<ClassId> = corpus.labels().iter().copied().collect();
    if present.len() < 2 {
        return Err(Error::SingleClass(present.len()));
    }
    if !(0.0..1.0).contains(&params.validation_fraction) {
        return Err(Error::Config(format!(
            "validation fraction {} outside [0, 1)",
            params.validation_fraction
        )));
    }
    if params.learning_rate.is_nan() || params.learning_rate <= 0.0 || params.l2 < 0.0 {
        return Err(Error::Config("learning rate must be positive and l2 non-negative".into()));
    }

    let mut order: Vec<usize> = (0..corpus.len()).collect();
    let n_val = (params.validation_fraction * corpus.len() as f64).round() as usize;
    if n_val > 0 {
        order.shuffle(&mut rng::stream(params.seed, "train", "split", 0));
    }
    let (val_idx, train_idx) = order.split_at(n_val.min(corpus.len() - 1));
    let mut train_idx = train_idx.to_vec();
    train_idx.sort_unstable();

    let vocabulary: Vec<String> = {
        let set: std::collections::BTreeSet<&str> = train_idx
            .iter()
            .flat_map(|&i| corpus.documents()[i].words())
            .collect();
        set.into_iter().map(str::to_string).collect()
    };
    let n_classes = corpus.classes().len();
    let n_feat = vocabulary.len();
    let mut model = BowClassifier::zeros(corpus.classes().to_vec(), vocabulary);

    let to_examples = |idx: &[usize], model: &BowClassifier| -> Vec<Example> {
        idx.iter()
            .map(|&i| Example {
                features: model.features(&corpus.documents()[i]),
                label: corpus.label(i),
            })
            .collect()
    };
    let train = to_examples(&train_idx, &model);
    let val = to_examples(val_idx, &model);

    let n = train.len() as f64;
    let mut losses = Vec::with_capacity(params.epochs + 1);
    let mut best: Option<(usize, usize, BowClassifier)> = None;
    let mut grad_w = vec![vec![0.0; n_feat]; n_classes];
    let mut grad_b = vec![0.0; n_classes];

    for epoch in 0..=params.epochs {
        losses.push(mean_loss(&model, &train, params.l2));
        if !val.is_empty() {
            let h = hits(&model, &val);
            if best.as_ref().is_none_or(|(bh, _, _)| h > *bh) {
                best = Some((h, epoch, model.clone()));
            }
        }
        if epoch == params.epochs {
            break;
        }

        grad_w.iter_mut().for_each(|r| r.iter_mut().for_each(|g| *g = 0.0));
        grad_b.iter_mut().for_each(|g| *g = 0.0);
        for e in &train {
            let mut p = softmax(&model.logits_of(&e.features));
            p[e.label] -= 1.0;
            for (c, &g) in p.iter().enumerate() {
                grad_b[c] += g;
                for &(j, x) in &e.features {
                    grad_w[c][j] += g * x;
                }
            }
        }
        let lr = params.learning_rate;
        for c in 0..n_classes {
            model.bias[c] -= lr * grad_b[c] / n;
            for (w, g) in model.weights[c].iter_mut().zip(&grad_w[c]) {
                *w -= lr * (g / n + params.l2 * *w);
            }
        }
    }

    let selected_epoch = match best {
        Some((_, epoch, m)) => {
            model = m;
            epoch
        }
        None => params.epochs,
    };
    let report = TrainReport {
        losses,
        train_accuracy: hits(&model, &train) as f64 / train.len() as f64,
        validation_accuracy: (!val.is_empty()).then(|| hits(&model, &val) as f64 / val.len() as f64),
        selected_epoch,
        train_size: train.len(),
        validation_size: val.len(),
    };
    Ok((model, report))
}

#[derive(Serialize)]
struct PredictRequest<'a> {
    texts: Vec<&'a str>,
}

#[derive(Deserialize)]
struct PredictResponse {
    probs: Vec<Vec<f64>>,
    classes: Vec<String>,
}

/// Client for a model served over the JSON-lines predictor protocol:
/// request `{"texts": [...]}`, response `{"probs": [[...], ...], "classes": [...]}`.
#[derive(Debug)]
pub struct ExternalPredictorClient {
    transport: JsonLineTransport,
    classes: Vec<String>,
    batch_size: usize,
    max_in_flight: usize,
}

impl ExternalPredictorClient {
    /// Connects and learns the class list with an empty request.
    pub fn connect(endpoint: Endpoint, timeout: Duration, batch_size: usize, max_in_flight: usize) -> Result<Self> {
        let transport = JsonLineTransport::connect(endpoint, timeout)?;
        let hello: PredictResponse = transport
            .call(&PredictRequest { texts: vec![] })
            .map_err(Error::Predictor)?;
        if hello.classes.is_empty() {
            return Err(Error::Predictor("service reported no classes".into()));
        }
        Ok(ExternalPredictorClient {
            transport,
            classes: hello.classes,
            batch_size: batch_size.max(1),
            max_in_flight: max_in_flight.max(1),
        })
    }

    fn call_batch(&self, docs: &[&Document]) -> Result<Vec<Vec<f64>>> {
        let req = PredictRequest {
            texts: docs.iter().map(|d| d.raw_text.as_str()).collect(),
        };
        let resp: PredictResponse = self.transport.call(&req).map_err(Error::Predictor)?;
        validate_response(resp, docs.len(), &self.classes)
    }
}

fn validate_response(resp: PredictResponse, expected: usize, classes: &[String]) -> Result<Vec<Vec<f64>>> {
    if resp.classes != classes {
        return Err(Error::Predictor(format!(
            "class list changed mid-session: {:?} vs {:?}",
            resp.classes, classes
        )));
    }
    if resp.probs.len() != expected {
        return Err(Error::Predictor(format!(
            "malformed response: {} rows for {} texts",
            resp.probs.len(),
            expected
        )));
    }
    resp.probs
        .into_iter()
        .map(|mut row| {
            if row.len() != classes.len() || row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::Predictor(format!("malformed probability row {row:?}")));
            }
            let sum: f64 = row.iter().sum();
            // float32 services rarely sum to exactly one
            if (sum - 1.0).abs() > 1e-3 {
                return Err(Error::Predictor(format!("probabilities sum to {sum}")));
            }
            row.iter_mut().for_each(|p| *p /= sum);
            Ok(row)
        })
        .collect()
}

impl Predictor for ExternalPredictorClient {
    fn classes(&self) -> &[String] {
        &self.classes
    }

    fn predict_proba_batch(&self, docs: &[&Document]) -> Result<Vec<Vec<f64>>> {
        let chunks: Vec<&[&Document]> = docs.chunks(self.batch_size).collect();
        if chunks.len() <= 1 || self.max_in_flight == 1 || !self.transport.supports_concurrency() {
            let mut out = Vec::with_capacity(docs.len());
            for chunk in chunks {
                out.extend(self.call_batch(chunk)?);
            }
            return Ok(out);
        }
        let mut out = Vec::with_capacity(docs.len());
        for window in chunks.chunks(self.max_in_flight) {
            let results: Vec<Result<Vec<Vec<f64>>>> = std::thread::scope(|s| {
                let handles: Vec<_> = window.iter().map(|chunk| s.spawn(move || self.call_batch(chunk))).collect();
                handles
                    .into_iter()
                    .map(|h| h.join().unwrap_or_else(|_| Err(Error::Predictor("request thread panicked".into()))))
                    .collect()
            });
            for r in results {
                out.extend(r?);
            }
        }
        Ok(out)
    }
}
