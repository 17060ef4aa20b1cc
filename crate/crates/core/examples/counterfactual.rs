//! Appends a sentence built from top terms of one class to documents of the
//! other and reports the accuracy drop.

use anchor_topk::eval::append_drop;
use anchor_topk::model::{train_bow, TrainParams};
use anchor_topk::synth::{generate, SynthConfig};

fn main() -> anchor_topk::Result<()> {
    let train = generate(&SynthConfig { documents: 1000, seed: 1, ..Default::default() })?;
    let test = generate(&SynthConfig { seed: 2, ..Default::default() })?;
    let (f, _) = train_bow(&train.corpus()?, &TrainParams::default())?;
    let corpus = test.clean_corpus()?;
    for sentence in ["it was great", "happy and excellent", "the and of it"] {
        let r = append_drop(&corpus, &f, sentence, 1)?;
        println!(
            "{sentence:<22} accuracy {:.3} -> {:.3} (drop {:.1} points, {} documents changed)",
            r.accuracy_before, r.accuracy_after, r.drop_points, r.modified
        );
    }
    Ok(())
}
