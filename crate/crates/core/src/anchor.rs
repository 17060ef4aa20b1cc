//! Per-token anchor decisions by sequential sampling.
//!
//! A token is an anchor when the prediction of its document survives
//! perturbations that keep the token fixed with probability at least `tau`,
//! decided at confidence `1 - delta`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{ClassId, Document, Token};
use crate::error::{Error, Result};
use crate::model::Predictor;
use crate::perturb::Perturbator;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnchorConfig {
    pub tau: f64,
    pub delta: f64,
    pub batch_size: usize,
    pub max_samples: usize,
    pub omega: f64,
    pub tau_floor: f64,
}

impl Default for AnchorConfig {
    fn default() -> Self {
        AnchorConfig {
            tau: 0.95,
            delta: 0.1,
            batch_size: 10,
            max_samples: 100,
            omega: 0.4,
            tau_floor: 0.55,
        }
    }
}

impl AnchorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad(format!("tau {} outside (0, 1]", self.tau));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta {} outside (0, 1)", self.delta));
        }
        if self.batch_size == 0 || self.max_samples == 0 {
            return bad("batch size and sample budget must be positive".into());
        }
        if !(self.tau_floor >= 0.0 && self.tau_floor <= self.tau) {
            return bad(format!("tau floor {} outside [0, tau]", self.tau_floor));
        }
        if self.omega.is_nan() || self.omega < 0.0 {
            return bad(format!("omega {} must be non-negative", self.omega));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionEstimate {
    pub successes: usize,
    pub trials: usize,
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
}

impl PrecisionEstimate {
    pub fn new(successes: usize, trials: usize, delta: f64) -> Result<Self> {
        let (lower, upper) = confidence_bounds(successes, trials, delta)?;
        Ok(PrecisionEstimate {
            successes,
            trials,
            point: successes as f64 / trials as f64,
            lower,
            upper,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorDecision {
    pub token: Token,
    pub is_anchor: bool,
    /// `None` when the token was skipped without sampling.
    pub estimate: Option<PrecisionEstimate>,
    pub samples_used: usize,
    pub tau_eff: Option<f64>,
}

impl AnchorDecision {
    pub fn skipped(token: Token) -> Self {
        AnchorDecision {
            token,
            is_anchor: false,
            estimate: None,
            samples_used: 0,
            tau_eff: None,
        }
    }

    pub fn was_skipped(&self) -> bool {
        self.estimate.is_none()
    }
}

/// Hoeffding interval `point ± sqrt(ln(2/delta) / (2 trials))`, clipped to [0, 1].
pub fn confidence_bounds(successes: usize, trials: usize, delta: f64) -> Result<(f64, f64)> {
    if trials == 0 {
        return Err(Error::Input("confidence bounds need at least one trial".into()));
    }
    if successes > trials {
        return Err(Error::Input(format!("{successes} successes in {trials} trials")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Config(format!("delta {delta} outside (0, 1)")));
    }
    let point = successes as f64 / trials as f64;
    let radius = ((2.0 / delta).ln() / (2.0 * trials as f64)).sqrt();
    Ok(((point - radius).max(0.0), (point + radius).min(1.0)))
}

/// `clamp(tau - omega * pseudo_gpr / n_w, tau_floor, tau)`.
pub fn adaptive_tau(cfg: &AnchorConfig, pseudo_gpr: f64, n_w: u64) -> f64 {
    if n_w == 0 || !pseudo_gpr.is_finite() {
        return cfg.tau;
    }
    (cfg.tau - cfg.omega * pseudo_gpr.max(0.0) / n_w as f64).clamp(cfg.tau_floor, cfg.tau)
}

/// Samples perturbations that keep `t` until the precision bound settles
/// against `tau_eff` or the budget runs out. A sample succeeds when the
/// predictor still returns `target`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_token(
    d: &Document,
    t: &Token,
    target: ClassId,
    f: &dyn Predictor,
    p: &dyn Perturbator,
    cfg: &AnchorConfig,
    tau_eff: f64,
    rng: &mut dyn rand::RngCore,
) -> Result<AnchorDecision> {
    if d.tokens.get(t.position) != Some(t) {
        return Err(Error::Input(format!("token {:?} is not in document {:?}", t, d.id)));
    }
    let keep = [t.position];
    let mut successes = 0;
    let mut trials = 0;
    let mut is_anchor = None;
    while trials < cfg.max_samples {
        let n = cfg.batch_size.min(cfg.max_samples - trials);
        let samples = p.sample_many(d, &keep, n, rng)?;
        let refs: Vec<&Document> = samples.iter().collect();
        successes += f.predict_batch(&refs)?.into_iter().filter(|&c| c == target).count();
        trials += n;
        let (lower, upper) = confidence_bounds(successes, trials, cfg.delta)?;
        if lower >= tau_eff {
            is_anchor = Some(true);
            break;
        }
        if upper < tau_eff {
            is_anchor = Some(false);
            break;
        }
    }
    let estimate = PrecisionEstimate::new(successes, trials, cfg.delta)?;
    Ok(AnchorDecision {
        token: t.clone(),
        is_anchor: is_anchor.unwrap_or(estimate.point >= tau_eff),
        estimate: Some(estimate),
        samples_used: trials,
        tau_eff: Some(tau_eff),
    })
}

/// What to do with one token of a document.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TokenPlan {
    Estimate { tau_eff: f64 },
    /// Tally as a non-anchor without sampling.
    Skip,
}

/// One decision per token, in position order. Each token samples from its
/// own stream derived from `(seed, document id, position)`, so the result
/// does not depend on how tokens are scheduled across threads.
pub fn anchors_of_document(
    d: &Document,
    target: ClassId,
    f: &dyn Predictor,
    p: &dyn Perturbator,
    cfg: &AnchorConfig,
    plan: &(dyn Fn(&Token) -> TokenPlan + Sync),
    seed: u64,
) -> Result<Vec<AnchorDecision>> {
    cfg.validate()?;
    d.tokens
        .par_iter()
        .map(|t| match plan(t) {
            TokenPlan::Skip => Ok(AnchorDecision::skipped(t.clone())),
            TokenPlan::Estimate { tau_eff } => {
                let mut r = rng::token_stream(seed, &d.id, t.position);
                estimate_token(d, t, target, f, p, cfg, tau_eff, &mut r)
            }
        })
        .collect()
}

/// Constant-threshold convenience: every token is estimated against `cfg.tau`.
pub fn constant_plan(cfg: &AnchorConfig) -> impl Fn(&Token) -> TokenPlan + Sync {
    let tau = cfg.tau;
    move |_| TokenPlan::Estimate { tau_eff: tau }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceRecord {
    pub doc: String,
    pub pos: usize,
    pub word: String,
    pub anchor: bool,
    pub precision: Option<f64>,
    pub samples: usize,
}

pub fn trace_records<'a>(doc_id: &'a str, decisions: &'a [AnchorDecision]) -> impl Iterator<Item = TraceRecord> + 'a {
    decisions.iter().map(move |dec| TraceRecord {
        doc: doc_id.to_string(),
        pos: dec.token.position,
        word: dec.token.word.clone(),
        anchor: dec.is_anchor,
        precision: dec.estimate.map(|e| e.point),
        samples: dec.samples_used,
    })
}

/// Appends one JSON line per decision.
pub fn write_trace(out: &mut dyn Write, doc_id: &str, decisions: &[AnchorDecision]) -> Result<()> {
    for rec in trace_records(doc_id, decisions) {
        serde_json::to_writer(&mut *out, &rec)?;
        out.write_all(b"\n").map_err(|e| Error::io("<trace>", e))?;
    }
    Ok(())
}
