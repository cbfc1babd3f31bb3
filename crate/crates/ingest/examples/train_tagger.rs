//! Retrain the bundled tagger and write its weights.
//!
//! cargo run -p contrarag-ingest --example train_tagger [-- <output.json>]

use contrarag_ingest::tagger::{
    parse_training, PerceptronTagger, TRAINING_CORPUS, TRAIN_ITERATIONS, TRAIN_SEED,
};

fn main() {
    let out = std::env::args().nth(1).unwrap_or_else(|| {
        concat!(env!("CARGO_MANIFEST_DIR"), "/assets/tagger/weights.json").to_string()
    });
    let sentences = parse_training(TRAINING_CORPUS).expect("training corpus parses");
    let tagger = PerceptronTagger::train(&sentences, TRAIN_ITERATIONS, TRAIN_SEED);
    std::fs::write(&out, tagger.to_json()).expect("write weights");
    eprintln!("trained on {} sentences, wrote {out}", sentences.len());
}
