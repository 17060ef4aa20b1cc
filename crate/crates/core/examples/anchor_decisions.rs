//! Per-token anchor decisions for a single document, written as a JSONL trace.

use anchor_topk::anchor::{anchors_of_document, constant_plan, write_trace, AnchorConfig};
use anchor_topk::corpus::word_stats;
use anchor_topk::model::{argmax, train_bow, Predictor, TrainParams};
use anchor_topk::perturb::{UnigramPerturbator, DEFAULT_MASK_PROB, DEFAULT_ZETA};
use anchor_topk::synth::{generate, SynthConfig};

fn main() -> anchor_topk::Result<()> {
    let s = generate(&SynthConfig { seed: 3, ..Default::default() })?;
    let corpus = s.corpus()?;
    let (f, _) = train_bow(&corpus, &TrainParams::default())?;
    let p = UnigramPerturbator::new(&word_stats(&corpus), DEFAULT_ZETA, DEFAULT_MASK_PROB)?;
    let cfg = AnchorConfig::default();

    let d = &corpus.documents()[1];
    let target = argmax(&f.predict_proba(d)?);
    println!("{} -> {}", d.raw_text, corpus.classes()[target]);
    let decisions = anchors_of_document(d, target, &f, &p, &cfg, &constant_plan(&cfg), 0)?;
    write_trace(&mut std::io::stdout().lock(), &d.id, &decisions)?;
    Ok(())
}
