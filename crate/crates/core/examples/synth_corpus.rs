//! Generates a planted-signal corpus and checks the planted rule against it.

use anchor_topk::synth::{generate, SynthConfig, POSITIVE};

fn main() -> anchor_topk::Result<()> {
    let s = generate(&SynthConfig {
        documents: 200,
        seed: 7,
        ..Default::default()
    })?;
    for r in s.rows.iter().take(5) {
        println!("{:<8} {:<9} {}", r.id, r.label, r.text);
    }
    let clean = s.clean_corpus()?;
    let hits = clean.iter().filter(|(d, l)| s.planted_rule(d) == *l).count();
    println!("planted {POSITIVE}: {:?}", s.planted(POSITIVE));
    println!("planted rule on clean labels: {hits}/{}", clean.len());
    println!("rare one-off words: {}", s.truth.rare_words.len());
    Ok(())
}
