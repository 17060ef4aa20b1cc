//! Trains the bag-of-words classifier and round-trips it through a file.

use anchor_topk::model::{accuracy, train_bow, BowClassifier, TrainParams};
use anchor_topk::synth::{generate, SynthConfig};

fn main() -> anchor_topk::Result<()> {
    let train = generate(&SynthConfig { documents: 1000, seed: 1, ..Default::default() })?;
    let test = generate(&SynthConfig { seed: 2, ..Default::default() })?;
    let params = TrainParams {
        validation_fraction: 0.2,
        ..Default::default()
    };
    let (model, report) = train_bow(&train.corpus()?, &params)?;
    println!(
        "loss {:.4} -> {:.4}, kept epoch {}",
        report.losses[0],
        report.losses.last().unwrap(),
        report.selected_epoch
    );
    println!("held-out accuracy (clean labels): {:.3}", accuracy(&model, &test.clean_corpus()?)?);

    let path = std::env::temp_dir().join("anchor-topk-example-model.json");
    model.save(&path)?;
    let back = BowClassifier::load(&path)?;
    println!("reloaded identical: {}", back == model);
    for w in ["great", "junk", "the"] {
        println!("{w:>6}: w_pos - w_neg = {:+.3}", model.weight(1, w) - model.weight(0, w));
    }
    Ok(())
}
