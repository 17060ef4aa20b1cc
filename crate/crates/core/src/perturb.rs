//! The perturbation distribution around a document: mask some positions
//! and refill each mask from a weighted candidate pool.

use std::time::Duration;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::corpus::{Document, Token, WordStats};
use crate::error::{Error, Result};
use crate::remote::{Endpoint, JsonLineTransport};

/// Pool size of the unperturbed baseline.
pub const DEFAULT_ZETA: usize = 500;
/// Reduced pool size used by the masking optimization.
pub const REDUCED_ZETA: usize = 50;
pub const DEFAULT_MASK_PROB: f64 = 0.5;

/// A distribution over documents derived from `d`.
///
/// Implementations must leave every position in `keep` untouched, return a
/// document of the same length, and be deterministic given the rng state.
pub trait Perturbator: Send + Sync {
    fn sample(&self, d: &Document, keep: &[usize], rng: &mut dyn RngCore) -> Result<Document>;

    /// Draws `n` samples in sequence from the same stream.
    fn sample_many(&self, d: &Document, keep: &[usize], n: usize, rng: &mut dyn RngCore) -> Result<Vec<Document>> {
        (0..n).map(|_| self.sample(d, keep, rng)).collect()
    }
}

impl<P: Perturbator + ?Sized> Perturbator for &P {
    fn sample(&self, d: &Document, keep: &[usize], rng: &mut dyn RngCore) -> Result<Document> {
        (**self).sample(d, keep, rng)
    }
}

impl<P: Perturbator + ?Sized> Perturbator for Box<P> {
    fn sample(&self, d: &Document, keep: &[usize], rng: &mut dyn RngCore) -> Result<Document> {
        (**self).sample(d, keep, rng)
    }
}

impl<P: Perturbator + ?Sized> Perturbator for std::sync::Arc<P> {
    fn sample(&self, d: &Document, keep: &[usize], rng: &mut dyn RngCore) -> Result<Document> {
        (**self).sample(d, keep, rng)
    }
}

/// Positions to mask: every position outside `keep`, independently with
/// probability `mask_prob`.
pub fn choose_masks(len: usize, keep: &[usize], mask_prob: f64, rng: &mut dyn RngCore) -> Vec<usize> {
    (0..len)
        .filter(|i| !keep.contains(i))
        .filter(|_| mask_prob >= 1.0 || rng.random_bool(mask_prob))
        .collect()
}

fn replace_at(d: &Document, fills: impl IntoIterator<Item = (usize, String)>) -> Document {
    let mut tokens = d.tokens.clone();
    for (pos, word) in fills {
        tokens[pos] = Token { word, position: pos };
    }
    let words: Vec<String> = tokens.into_iter().map(|t| t.word).collect();
    Document::from_words(d.id.clone(), words)
}

/// The `ζ` most frequent corpus words, sampled in proportion to frequency.
#[derive(Debug, Clone)]
pub struct UnigramPerturbator {
    pool: Vec<String>,
    weights: Vec<f64>,
    index: WeightedIndex<f64>,
    mask_prob: f64,
}

impl UnigramPerturbator {
    pub fn new(stats: &WordStats, zeta: usize, mask_prob: f64) -> Result<Self> {
        if zeta == 0 {
            return Err(Error::Config("zeta must be at least 1".into()));
        }
        let mut words: Vec<(&str, u64)> = stats.entries().map(|(w, e)| (w, e.total)).collect();
        words.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        words.truncate(zeta);
        UnigramPerturbator::from_pool(words.into_iter().map(|(w, n)| (w.to_string(), n as f64)).collect(), mask_prob)
    }

    /// Pool given explicitly as `(word, weight)` pairs.
    pub fn from_pool(pool: Vec<(String, f64)>, mask_prob: f64) -> Result<Self> {
        if pool.is_empty() {
            return Err(Error::Input("perturbation pool is empty".into()));
        }
        if !(mask_prob > 0.0 && mask_prob <= 1.0) {
            return Err(Error::Config(format!("mask probability {mask_prob} outside (0, 1]")));
        }
        let total: f64 = pool.iter().map(|p| p.1).sum();
        let (words, raw): (Vec<String>, Vec<f64>) = pool.into_iter().unzip();
        let index = WeightedIndex::new(&raw).map_err(|e| Error::Input(format!("pool weights: {e}")))?;
        Ok(UnigramPerturbator {
            pool: words,
            weights: raw.iter().map(|w| w / total).collect(),
            index,
            mask_prob,
        })
    }

    pub fn pool(&self) -> &[String] {
        &self.pool
    }

    /// Normalized pool weights, aligned with `pool()`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mask_prob(&self) -> f64 {
        self.mask_prob
    }
}

impl Perturbator for UnigramPerturbator {
    fn sample(&self, d: &Document, keep: &[usize], rng: &mut dyn RngCore) -> Result<Document> {
        let masks = choose_masks(d.len(), keep, self.mask_prob, rng);
        let fills: Vec<(usize, String)> = masks
            .into_iter()
            .map(|pos| (pos, self.pool[self.index.sample(rng)].clone()))
            .collect();
        Ok(replace_at(d, fills))
    }
}

#[derive(Serialize)]
struct FillRequest<'a> {
    text: &'a str,
    masked_positions: &'a [usize],
    zeta: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Candidate {
    pub word: String,
    pub weight: f64,
}

#[derive(Deserialize)]
struct FillResponse {
    candidates: Vec<Vec<Candidate>>,
}

/// Client for a mask-filling service: request
/// `{"text", "masked_positions", "zeta"}`, response
/// `{"candidates": [[{"word", "weight"}, ...], ...]}` aligned with the masks.
/// Masks are chosen locally; the service only proposes fillers.
#[derive(Debug)]
pub struct ExternalPerturbatorClient {
    transport: JsonLineTransport,
    zeta: usize,
    mask_prob: f64,
}

impl ExternalPerturbatorClient {
    pub fn connect(endpoint: Endpoint, timeout: Duration, zeta: usize, mask_prob: f64) -> Result<Self> {
        if zeta == 0 {
            return Err(Error::Config("zeta must be at least 1".into()));
        }
        if !(mask_prob > 0.0 && mask_prob <= 1.0) {
            return Err(Error::Config(format!("mask probability {mask_prob} outside (0, 1]")));
        }
        Ok(ExternalPerturbatorClient {
            transport: JsonLineTransport::connect(endpoint, timeout)?,
            zeta,
            mask_prob,
        })
    }
}

fn draw_candidate(cands: &[Candidate], zeta: usize, rng: &mut dyn RngCore) -> Result<String> {
    if cands.is_empty() || cands.len() > zeta {
        return Err(Error::Perturbator(format!(
            "expected 1..={zeta} candidates, got {}",
            cands.len()
        )));
    }
    let weights: Vec<f64> = cands.iter().map(|c| c.weight).collect();
    let index = WeightedIndex::new(&weights).map_err(|e| Error::Perturbator(format!("candidate weights: {e}")))?;
    let word = &cands[index.sample(rng)].word;
    let token = crate::corpus::tokenize(word);
    match token.as_slice() {
        [t] => Ok(t.word.clone()),
        _ => Err(Error::Perturbator(format!("candidate {word:?} is not a single word"))),
    }
}

impl Perturbator for ExternalPerturbatorClient {
    fn sample(&self, d: &Document, keep: &[usize], rng: &mut dyn RngCore) -> Result<Document> {
        let masks = choose_masks(d.len(), keep, self.mask_prob, rng);
        if masks.is_empty() {
            return Ok(d.clone());
        }
        let text = d.content_key();
        let resp: FillResponse = self
            .transport
            .call(&FillRequest {
                text: &text,
                masked_positions: &masks,
                zeta: self.zeta,
            })
            .map_err(Error::Perturbator)?;
        if resp.candidates.len() != masks.len() {
            return Err(Error::Perturbator(format!(
                "{} candidate lists for {} masks",
                resp.candidates.len(),
                masks.len()
            )));
        }
        let mut fills = Vec::with_capacity(masks.len());
        for (&pos, cands) in masks.iter().zip(&resp.candidates) {
            fills.push((pos, draw_candidate(cands, self.zeta, rng)?));
        }
        Ok(replace_at(d, fills))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{word_stats, Corpus};
    use crate::rng;

    fn abc_stats() -> WordStats {
        word_stats(&Corpus::from_labeled([("d", "a a a a a b b b c", "x")]).unwrap())
    }

    #[test]
    fn pool_is_top_zeta_by_frequency() {
        let p = UnigramPerturbator::new(&abc_stats(), 2, 0.5).unwrap();
        assert_eq!(p.pool(), ["a", "b"]);
        assert_eq!(p.weights(), [5.0 / 8.0, 3.0 / 8.0]);
    }

    #[test]
    fn frequency_ties_break_lexicographically() {
        let stats = word_stats(&Corpus::from_labeled([("d", "q p r r", "x")]).unwrap());
        let p = UnigramPerturbator::new(&stats, 2, 0.5).unwrap();
        assert_eq!(p.pool(), ["r", "p"]);
    }

    #[test]
    fn keep_everything_is_identity() {
        let p = UnigramPerturbator::new(&abc_stats(), 3, 1.0).unwrap();
        let d = Document::from_text("d", "c b a");
        let out = p.sample(&d, &[0, 1, 2], &mut rng::stream(1, "t", "", 0)).unwrap();
        assert_eq!(out.words().collect::<Vec<_>>(), ["c", "b", "a"]);
    }

    #[test]
    fn forced_replacement() {
        let p = UnigramPerturbator::from_pool(vec![("z".into(), 1.0)], 1.0).unwrap();
        let d = Document::from_text("d", "a b");
        let out = p.sample(&d, &[0], &mut rng::stream(1, "t", "", 0)).unwrap();
        assert_eq!(out.raw_text, "a z");
        assert_eq!(out.tokens[1].position, 1);
    }

    #[test]
    fn deterministic_given_stream() {
        let p = UnigramPerturbator::new(&abc_stats(), 3, 0.5).unwrap();
        let d = Document::from_text("d", "a b c a b c a b");
        let x = p.sample_many(&d, &[2], 20, &mut rng::token_stream(9, "d", 2)).unwrap();
        let y = p.sample_many(&d, &[2], 20, &mut rng::token_stream(9, "d", 2)).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn bad_parameters() {
        assert!(UnigramPerturbator::new(&abc_stats(), 0, 0.5).is_err());
        assert!(UnigramPerturbator::new(&abc_stats(), 2, 0.0).is_err());
        assert!(UnigramPerturbator::from_pool(vec![], 0.5).is_err());
    }

    #[test]
    fn masking_rate_within_three_sigma() {
        let p = UnigramPerturbator::from_pool(vec![("z".into(), 1.0)], 0.3).unwrap();
        let d = Document::from_text("d", "a b c d e f g h i j");
        let mut r = rng::stream(4, "t", "", 0);
        let n_samples = 5000;
        let mut masked = 0usize;
        for _ in 0..n_samples {
            let out = p.sample(&d, &[0], &mut r).unwrap();
            masked += out.words().filter(|w| *w == "z").count();
        }
        let trials = (n_samples * 9) as f64;
        let sigma = (trials * 0.3 * 0.7).sqrt();
        assert!((masked as f64 - trials * 0.3).abs() <= 3.0 * sigma);
    }

    #[test]
    fn replacement_frequencies_fit_pool_weights() {
        // chi-squared with 2 degrees of freedom; 13.8 is the 0.999 quantile
        let p = UnigramPerturbator::new(&abc_stats(), 3, 1.0).unwrap();
        let d = Document::from_text("d", "q");
        let mut r = rng::stream(8, "t", "", 0);
        let n = 20_000;
        let mut counts = [0f64; 3];
        for _ in 0..n {
            let out = p.sample(&d, &[], &mut r).unwrap();
            let i = p.pool().iter().position(|w| w == &out.tokens[0].word).unwrap();
            counts[i] += 1.0;
        }
        let chi2: f64 = counts
            .iter()
            .zip(p.weights())
            .map(|(o, w)| {
                let e = w * n as f64;
                (o - e).powi(2) / e
            })
            .sum();
        assert!(chi2 < 13.8, "chi2 = {chi2}");
    }

    #[test]
    fn external_client_over_subprocess() {
        // the service always proposes "zz"
        let script = r#"while read line; do n=$(printf '%s' "$line" | grep -o '"masked_positions":\[[^]]*\]' | tr -cd ',' | wc -c); out='[{"word":"zz","weight":1.0}]'; acc="$out"; i=0; while [ $i -lt $n ]; do acc="$acc,$out"; i=$((i+1)); done; echo "{\"candidates\":[$acc]}"; done"#;
        let c = ExternalPerturbatorClient::connect(
            Endpoint::Command(script.into()),
            Duration::from_secs(5),
            50,
            1.0,
        )
        .unwrap();
        let d = Document::from_text("d", "a b c");
        let out = c.sample(&d, &[1], &mut rng::stream(1, "t", "", 0)).unwrap();
        assert_eq!(out.raw_text, "zz b zz");
    }

    #[test]
    fn candidate_validation() {
        let mut r = rng::stream(1, "t", "", 0);
        let ok = vec![Candidate { word: "x".into(), weight: 1.0 }];
        assert_eq!(draw_candidate(&ok, 5, &mut r).unwrap(), "x");
        assert!(draw_candidate(&[], 5, &mut r).is_err());
        let neg = vec![Candidate { word: "x".into(), weight: -1.0 }];
        assert!(draw_candidate(&neg, 5, &mut r).is_err());
        let too_many = vec![ok[0].clone(), ok[0].clone()];
        assert!(draw_candidate(&too_many, 1, &mut r).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn kept_positions_survive(text in "[a-e]( [a-e]){0,12}", seed in any::<u64>(), keep_mask in any::<u16>()) {
                let p = UnigramPerturbator::from_pool(vec![("z".into(), 1.0), ("y".into(), 2.0)], 0.7).unwrap();
                let d = Document::from_text("d", text);
                let keep: Vec<usize> = (0..d.len()).filter(|i| keep_mask & (1 << i) != 0).collect();
                let out = p.sample(&d, &keep, &mut rng::stream(seed, "t", "", 0)).unwrap();
                prop_assert_eq!(out.len(), d.len());
                for &i in &keep {
                    prop_assert_eq!(&out.tokens[i], &d.tokens[i]);
                }
            }
        }
    }
}
