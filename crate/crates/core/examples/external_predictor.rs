//! Talks to a predictor running as a subprocess over the JSON-lines protocol.
//! The service here is a keyword rule written in Python.

use std::time::Duration;

use anchor_topk::corpus::Document;
use anchor_topk::model::{ExternalPredictorClient, Predictor};
use anchor_topk::remote::Endpoint;

const SERVICE: &str = r#"
import json, sys
for line in sys.stdin:
    texts = json.loads(line)["texts"]
    probs = [[0.2, 0.8] if "great" in t.split() else [0.7, 0.3] for t in texts]
    print(json.dumps({"classes": ["neg", "pos"], "probs": probs}), flush=True)
"#;

fn main() -> anchor_topk::Result<()> {
    let script = std::env::temp_dir().join("anchor-topk-keyword-service.py");
    std::fs::write(&script, SERVICE).map_err(|e| anchor_topk::Error::io(&script, e))?;
    let endpoint = Endpoint::parse(&format!("cmd:python3 {}", script.display()));
    let f = ExternalPredictorClient::connect(endpoint, Duration::from_secs(10), 32, 1)?;
    println!("classes: {:?}", f.classes());
    let docs = [Document::from_text("a", "a great film"), Document::from_text("b", "a dull film")];
    for (d, p) in docs.iter().zip(f.predict_proba_batch(&docs.iter().collect::<Vec<_>>())?) {
        println!("{:<14} {:?}", d.raw_text, p);
    }
    Ok(())
}
