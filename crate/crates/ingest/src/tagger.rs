//! Averaged perceptron part-of-speech tagger with bundled weights.
//!
//! Greedy left-to-right tagging over lexical, shape and previous-tag
//! features. The shipped weights are trained on `assets/tagger/train.txt`;
//! `examples/train_tagger.rs` regenerates them.

use std::collections::{BTreeMap, HashMap};
use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const TRAINING_CORPUS: &str = include_str!("../assets/tagger/train.txt");
const BUNDLED_WEIGHTS: &str = include_str!("../assets/tagger/weights.json");

pub const TRAIN_ITERATIONS: usize = 10;
pub const TRAIN_SEED: u64 = 0;

const START: [&str; 2] = ["-START-", "-START2-"];
const END: [&str; 2] = ["-END-", "-END2-"];

/// A tagged sentence: tokens and their gold tags.
pub type TaggedSentence = (Vec<String>, Vec<String>);

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PerceptronTagger {
    classes: Vec<String>,
    /// Frequent, unambiguous words tagged without scoring.
    tagdict: BTreeMap<String, String>,
    weights: BTreeMap<String, BTreeMap<String, f64>>,
}

/// Split text into word and punctuation tokens. Periods, hyphens,
/// apostrophes and asterisks stay inside a token when flanked by
/// alphanumerics ("2.5", "HLA-B*5701", "don't").
pub fn tokenize(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut cur = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if c.is_alphanumeric() {
            cur.push(c);
            continue;
        }
        let joins = matches!(c, '.' | '-' | '\'' | '*')
            && !cur.is_empty()
            && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric());
        if joins {
            cur.push(c);
            continue;
        }
        if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
        if !c.is_whitespace() {
            out.push(c.to_string());
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

fn normalize(word: &str) -> String {
    if word.contains('-') && !word.starts_with('-') {
        "!HYPHEN".into()
    } else if word.len() == 4 && word.chars().all(|c| c.is_ascii_digit()) {
        "!YEAR".into()
    } else if word.starts_with(|c: char| c.is_ascii_digit()) {
        "!DIGITS".into()
    } else {
        word.to_lowercase()
    }
}

fn shape(word: &str) -> &'static str {
    let letters: Vec<char> = word.chars().filter(|c| c.is_alphabetic()).collect();
    if word.starts_with(|c: char| c.is_ascii_digit()) {
        "d"
    } else if letters.len() > 1 && letters.iter().all(|c| c.is_uppercase()) {
        "X"
    } else if word.starts_with(char::is_uppercase) {
        "Xx"
    } else if !letters.is_empty() {
        "x"
    } else {
        "p"
    }
}

fn suffix(w: &str) -> String {
    let chars: Vec<char> = w.chars().collect();
    chars[chars.len().saturating_sub(3)..].iter().collect()
}

fn features(i: usize, raw: &str, context: &[String], prev: &str, prev2: &str) -> Vec<String> {
    // `context` is padded with two start symbols, so word i sits at i + 2
    let i = i + 2;
    let word = &context[i];
    let first: String = word.chars().take(1).collect();
    let sh = shape(raw);
    vec![
        "bias".into(),
        format!("i suffix {}", suffix(word)),
        format!("i pref1 {first}"),
        format!("i-1 tag {prev}"),
        format!("i-2 tag {prev2}"),
        format!("i tag+i-2 tag {prev} {prev2}"),
        format!("i word {word}"),
        format!("i-1 tag+i word {prev} {word}"),
        format!("i-1 word {}", context[i - 1]),
        format!("i-1 suffix {}", suffix(&context[i - 1])),
        format!("i-2 word {}", context[i - 2]),
        format!("i+1 word {}", context[i + 1]),
        format!("i+1 suffix {}", suffix(&context[i + 1])),
        format!("i+2 word {}", context[i + 2]),
        format!("i shape {sh}"),
        format!("i shape+i-1 tag {sh} {prev}"),
    ]
}

fn context_of(words: &[String]) -> Vec<String> {
    let mut ctx: Vec<String> = START.iter().map(|s| s.to_string()).collect();
    ctx.extend(words.iter().map(|w| normalize(w)));
    ctx.extend(END.iter().map(|s| s.to_string()));
    ctx
}

impl PerceptronTagger {
    /// The tagger shipped with the crate.
    pub fn bundled() -> &'static PerceptronTagger {
        static TAGGER: OnceLock<PerceptronTagger> = OnceLock::new();
        TAGGER.get_or_init(|| {
            PerceptronTagger::from_json(BUNDLED_WEIGHTS).expect("bundled tagger weights are valid")
        })
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string(self).expect("tagger serializes");
        s.push('\n');
        s
    }

    fn predict(&self, feats: &[String]) -> String {
        best_class(&self.classes, feats, |f, c| {
            self.weights.get(f).and_then(|ws| ws.get(c)).copied()
        })
    }

    /// Tag pre-tokenized words.
    pub fn tag(&self, words: &[String]) -> Vec<String> {
        let ctx = context_of(words);
        let mut prev = START[0].to_string();
        let mut prev2 = START[1].to_string();
        let mut out = Vec::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            let tag = match self.tagdict.get(&normalize(w)) {
                Some(t) => t.clone(),
                None => self.predict(&features(i, w, &ctx, &prev, &prev2)),
            };
            prev2 = std::mem::replace(&mut prev, tag.clone());
            out.push(tag);
        }
        out
    }

    /// Tokenize and tag free text.
    pub fn tag_text(&self, text: &str) -> Vec<(String, String)> {
        let words = tokenize(text);
        let tags = self.tag(&words);
        words.into_iter().zip(tags).collect()
    }

    /// Train with averaged weights on shuffled passes over `sentences`.
    pub fn train(sentences: &[TaggedSentence], iterations: usize, seed: u64) -> Self {
        let mut tagger = PerceptronTagger {
            tagdict: build_tagdict(sentences),
            ..PerceptronTagger::default()
        };
        let mut classes: Vec<String> = sentences.iter().flat_map(|s| s.1.iter().cloned()).collect();
        classes.sort();
        classes.dedup();
        tagger.classes = classes;

        let mut weights: HashMap<String, HashMap<String, f64>> = HashMap::new();
        let mut totals: HashMap<(String, String), f64> = HashMap::new();
        let mut stamps: HashMap<(String, String), usize> = HashMap::new();
        let mut instances = 0usize;
        let mut order: Vec<usize> = (0..sentences.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);

        for _ in 0..iterations {
            for &si in &order {
                let (words, gold) = &sentences[si];
                let ctx = context_of(words);
                let mut prev = START[0].to_string();
                let mut prev2 = START[1].to_string();
                for (i, w) in words.iter().enumerate() {
                    let guess = match tagger.tagdict.get(&normalize(w)) {
                        Some(t) => t.clone(),
                        None => {
                            let feats = features(i, w, &ctx, &prev, &prev2);
                            let guess = best_class(&tagger.classes, &feats, |f, c| {
                                weights.get(f).and_then(|ws| ws.get(c)).copied()
                            });
                            instances += 1;
                            if guess != gold[i] {
                                for f in &feats {
                                    for (class, delta) in [(&gold[i], 1.0), (&guess, -1.0)] {
                                        let key = (f.clone(), class.clone());
                                        let w = weights
                                            .entry(f.clone())
                                            .or_default()
                                            .entry(class.clone())
                                            .or_insert(0.0);
                                        let since =
                                            instances - stamps.get(&key).copied().unwrap_or(0);
                                        *totals.entry(key.clone()).or_insert(0.0) +=
                                            since as f64 * *w;
                                        *w += delta;
                                        stamps.insert(key, instances);
                                    }
                                }
                            }
                            guess
                        }
                    };
                    prev2 = std::mem::replace(&mut prev, guess);
                }
            }
            order.shuffle(&mut rng);
        }

        let mut averaged: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
        for (f, ws) in &weights {
            for (class, &w) in ws {
                let key = (f.clone(), class.clone());
                let total = totals.get(&key).copied().unwrap_or(0.0)
                    + (instances - stamps.get(&key).copied().unwrap_or(0)) as f64 * w;
                let avg = (total / instances.max(1) as f64 * 1000.0).round() / 1000.0;
                if avg != 0.0 {
                    averaged
                        .entry(f.clone())
                        .or_default()
                        .insert(class.clone(), avg);
                }
            }
        }
        tagger.weights = averaged;
        tagger
    }
}

/// Highest-scoring class; ties go to the alphabetically first class.
fn best_class(
    classes: &[String],
    feats: &[String],
    weight: impl Fn(&str, &str) -> Option<f64>,
) -> String {
    let mut best: Option<(&str, f64)> = None;
    for c in classes {
        let s: f64 = feats.iter().filter_map(|f| weight(f, c)).sum();
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((c, s));
        }
    }
    best.map(|(c, _)| c.to_string()).unwrap_or_default()
}

fn build_tagdict(sentences: &[TaggedSentence]) -> BTreeMap<String, String> {
    let mut counts: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    for (words, tags) in sentences {
        for (w, t) in words.iter().zip(tags) {
            *counts
                .entry(normalize(w))
                .or_default()
                .entry(t.clone())
                .or_insert(0) += 1;
        }
    }
    counts
        .into_iter()
        .filter_map(|(w, tags)| {
            let n: usize = tags.values().sum();
            let (tag, &top) = tags.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))?;
            (n >= 8 && top as f64 / n as f64 >= 0.97).then(|| (w, tag.clone()))
        })
        .collect()
}

/// Parse `word/TAG` lines; `#` lines and blank lines are skipped.
pub fn parse_training(text: &str) -> Result<Vec<TaggedSentence>, String> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut words = Vec::new();
        let mut tags = Vec::new();
        for tok in line.split_whitespace() {
            let (w, t) = tok
                .rsplit_once('/')
                .ok_or_else(|| format!("line {}: token {tok:?} has no tag", n + 1))?;
            words.push(w.to_string());
            tags.push(t.to_string());
        }
        out.push((words, tags));
    }
    Ok(out)
}
