//! Anytime top-k search: the list is valid after every document, and a call
//! budget stops the run early with the best list so far.

use anchor_topk::aggregate::AggregationKind;
use anchor_topk::corpus::{word_stats, CandidateSet};
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

    let mut opts = RunOptions::new(1, AggregationKind::Pr { alpha: 0.5 }, 0);
    opts.k = 10;
    let mut log = Vec::new();
    let full = run_anytime(inputs, &f, &p, &opts, RunSinks { snapshots: Some(&mut log), trace: None })?;
    for s in full.snapshots.iter().step_by(40) {
        let words: Vec<&str> = s.topk.iter().map(|t| t.word.as_str()).collect();
        println!("doc {:>3} calls {:>6}: {}", s.doc_index, s.calls, words.join(" "));
    }
    println!("snapshot log: {} lines", log.split(|&b| b == b'\n').filter(|l| !l.is_empty()).count());

    opts.max_calls = Some(full.calls / 4);
    let early = run_anytime(inputs, &f, &p, &opts, RunSinks::default())?;
    let shared = early.topk.iter().filter(|t| full.topk.iter().any(|u| u.word == t.word)).count();
    println!(
        "quarter budget: {}/{} documents, {shared}/10 terms shared with the full run",
        early.documents_processed, early.documents_total
    );
    Ok(())
}
