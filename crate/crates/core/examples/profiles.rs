//! Predictor calls and result overlap of every optimization profile.

use anchor_topk::aggregate::AggregationKind;
use anchor_topk::corpus::{word_stats, StopWords};
use anchor_topk::eval::{shared_terms_ratio, TermList};
use anchor_topk::model::{train_bow, TrainParams};
use anchor_topk::synth::{generate, SynthConfig};
use anchor_topk::topk::{optimization_profile, relabel_by_prediction, run_anytime, RunInputs, RunOptions, RunSinks, PROFILE_NAMES};

fn main() -> anchor_topk::Result<()> {
    let train = generate(&SynthConfig { documents: 1000, seed: 1, ..Default::default() })?;
    let test = generate(&SynthConfig { seed: 2, ..Default::default() })?;
    let (f, _) = train_bow(&train.corpus()?, &TrainParams::default())?;
    let corpus = relabel_by_prediction(&test.corpus()?, &f)?;
    let stats = word_stats(&corpus);

    let mut baseline: Option<(u64, TermList)> = None;
    for name in PROFILE_NAMES {
        let profile = optimization_profile(name)?;
        let prep = profile.prepare(&corpus, &stats, &StopWords::english(), 0)?;
        let mut opts = RunOptions::new(1, AggregationKind::Pr { alpha: 0.5 }, 0);
        opts.k = 10;
        profile.apply(&mut opts);
        let inputs = RunInputs {
            corpus: &prep.corpus,
            stats: &stats,
            candidates: &prep.candidates,
            min_freq_stats: None,
        };
        let r = run_anytime(inputs, &f, &prep.perturbator, &opts, RunSinks::default())?;
        let list = TermList::new("positive", "pr", r.topk);
        let (base_calls, base_list) = baseline.get_or_insert((r.calls, list.clone()));
        println!(
            "{name:<14} calls {:>7}  speedup {:>4.2}x  shared {:.1}",
            r.calls,
            *base_calls as f64 / r.calls as f64,
            shared_terms_ratio(&list, base_list)?
        );
    }
    Ok(())
}
