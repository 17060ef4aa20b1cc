//! AOPC^k of several aggregations, and the quality timeline of an anytime run.

use anchor_topk::aggregate::AggregationKind;
use anchor_topk::corpus::{word_stats, CandidateSet};
use anchor_topk::eval::{aopc_k, quality_timeline, write_timeline_csv, TermList};
use anchor_topk::model::{train_bow, TrainParams};
use anchor_topk::perturb::{UnigramPerturbator, DEFAULT_MASK_PROB, DEFAULT_ZETA};
use anchor_topk::synth::{generate, SynthConfig};
use anchor_topk::topk::{relabel_by_prediction, run_anytime, RunInputs, RunOptions, RunSinks};

fn main() -> anchor_topk::Result<()> {
    let train = generate(&SynthConfig { documents: 1000, seed: 1, ..Default::default() })?;
    let test = generate(&SynthConfig { documents: 300, seed: 2, ..Default::default() })?;
    let (f, _) = train_bow(&train.corpus()?, &TrainParams::default())?;
    let corpus = relabel_by_prediction(&test.corpus()?, &f)?;
    let stats = word_stats(&corpus);
    let candidates = CandidateSet::all(&stats);
    let p = UnigramPerturbator::new(&stats, DEFAULT_ZETA, DEFAULT_MASK_PROB)?;
    let inputs = RunInputs {
        corpus: &corpus,
        stats: &stats,
        candidates: &candidates,
        min_freq_stats: None,
    };

    let mut pr_snapshots = Vec::new();
    for kind in [
        AggregationKind::Pr { alpha: 0.5 },
        AggregationKind::Sq,
        AggregationKind::Av,
        AggregationKind::Base,
        AggregationKind::PrInverse { alpha: 0.5 },
    ] {
        let r = run_anytime(inputs, &f, &p, &RunOptions::new(1, kind, 0), RunSinks::default())?;
        let list = TermList::new("positive", kind.name(), r.topk);
        println!("{:<12} AOPC^20 = {:+.4}", kind.name(), aopc_k(&list, &corpus, &f, 1)?.value);
        if pr_snapshots.is_empty() {
            pr_snapshots = r.snapshots;
        }
    }
    let every: Vec<_> = pr_snapshots.into_iter().step_by(25).collect();
    write_timeline_csv(std::io::stdout().lock(), &quality_timeline(&every, &corpus, &f, 1)?)?;
    Ok(())
}
