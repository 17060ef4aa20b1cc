//! Every aggregation over the same hand-made anchor counts.

use anchor_topk::aggregate::{laplace_smooth, mle_params, rank, AggregationKind, AnchorCounts, ScoreContext, Scorer};
use anchor_topk::anchor::{AnchorDecision, PrecisionEstimate};
use anchor_topk::corpus::{word_stats, CandidateSet, Corpus, Document};

fn decision(word: &str, position: usize, is_anchor: bool) -> AnchorDecision {
    AnchorDecision {
        token: anchor_topk::corpus::Token {
            word: word.into(),
            position,
        },
        is_anchor,
        estimate: Some(PrecisionEstimate::new(if is_anchor { 100 } else { 60 }, 100, 0.1).unwrap()),
        samples_used: 100,
        tau_eff: Some(0.95),
    }
}

fn main() -> anchor_topk::Result<()> {
    // (text, class, anchored words)
    let docs = [
        ("great fun the", 1, vec!["great"]),
        ("great movie the", 1, vec!["great"]),
        ("great plot", 1, vec!["great", "plot"]),
        ("fun zany", 1, vec!["zany"]),
        ("boring the plot", 0, vec!["boring"]),
        ("boring movie", 0, vec!["boring"]),
    ];
    let corpus = Corpus::new(
        docs.iter().enumerate().map(|(i, (t, _, _))| Document::from_text(format!("d{i}"), *t)).collect(),
        docs.iter().map(|d| d.1).collect(),
        vec!["neg".into(), "pos".into()],
    )?;
    let stats = word_stats(&corpus);
    let mut counts = AnchorCounts::new(2);
    for ((d, c), (_, _, anchored)) in corpus.iter().zip(&docs) {
        let ds: Vec<_> = d.tokens.iter().map(|t| decision(&t.word, t.position, anchored.contains(&t.word.as_str()))).collect();
        counts.update(&d.id, &ds, c)?;
    }
    let candidates = CandidateSet::all(&stats);
    let kinds = [
        AggregationKind::Sq,
        AggregationKind::Av,
        AggregationKind::AvMinFreq { min_freq: 2 },
        AggregationKind::H,
        AggregationKind::Pr { alpha: 0.5 },
        AggregationKind::Base,
        AggregationKind::PrInverse { alpha: 0.5 },
    ];
    for kind in kinds {
        let mut ctx = ScoreContext::new(&stats);
        ctx.entropy_universe = Some(&candidates);
        let scorer = Scorer::new(&counts, kind, 1, ctx);
        let top: Vec<String> = rank(&scorer, &candidates, 4).iter().map(|s| format!("{}={:.3}", s.word, s.score)).collect();
        println!("{:<12} {}", kind.to_string(), top.join("  "));
    }

    let params = laplace_smooth(mle_params(&counts, 0.5, 1)?);
    for (i, w) in params.words.iter().enumerate() {
        println!("{w:>6}: p={:.3} q={:+.3} q*={:.3}", params.p[i], params.q[i], params.q_star[i]);
    }
    Ok(())
}
