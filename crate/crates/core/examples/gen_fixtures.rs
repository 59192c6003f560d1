//! Regenerates the parallel fixture corpora from the seed lexicon.
//!
//! Each synthetic sentence is a walk over "concepts" (lexicon pairs) inside
//! one topic, rendered once per language with that language's function
//! words and, on the Spanish side, some local reordering. Both corpora share
//! the concept sequence, so the two CBOW spaces end up roughly isomorphic.
//!
//! ```text
//! cargo run -p lmd-core --example gen_fixtures -- fixtures
//! ```

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use lmd_core::BilingualLexicon;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LINES: usize = 6000;
const TOPIC_SIZE: usize = 20;
const ASSOCIATES: usize = 3;
const TRANSLATION_NOISE: f64 = 0.07;
const SEED: u64 = 20_240_611;

/// Pairs kept out of the corpora to exercise out-of-vocabulary handling.
const UNSEEN: &[&str] = &["zarzamora", "quimera"];

const ES_FUNCTION: &[&str] = &[
    "el", "la", "los", "las", "de", "del", "y", "que", "en", "un", "una", "se", "por", "con", "para", "su",
];
const EN_FUNCTION: &[&str] = &[
    "the", "of", "and", "to", "a", "in", "is", "that", "for", "with", "it", "on", "this", "their",
];

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "fixtures".into()));
    let lexicon = BilingualLexicon::load(dir.join("lexicon.es-en.tsv"))?;
    let concepts: Vec<_> = lexicon
        .pairs()
        .iter()
        .filter(|p| !UNSEEN.contains(&p.source.as_str()))
        .collect();
    let n = concepts.len();
    let topics: Vec<Vec<usize>> = (0..n)
        .collect::<Vec<_>>()
        .chunks(TOPIC_SIZE)
        .map(<[_]>::to_vec)
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let associates: Vec<Vec<usize>> = (0..n)
        .map(|c| {
            let topic = &topics[c / TOPIC_SIZE];
            let others: Vec<usize> = topic.iter().copied().filter(|&o| o != c).collect();
            others.choose_multiple(&mut rng, ASSOCIATES).copied().collect()
        })
        .collect();

    let mut es = BufWriter::new(File::create(dir.join("corpus.es.txt"))?);
    let mut en = BufWriter::new(File::create(dir.join("corpus.en.txt"))?);
    for _ in 0..LINES {
        let topic = topics.choose(&mut rng).expect("at least one topic");
        let len = rng.random_range(5..=9);
        let mut walk = vec![*topic.choose(&mut rng).expect("non-empty topic")];
        while walk.len() < len {
            let current = *walk.last().expect("walk starts non-empty");
            let roll: f64 = rng.random();
            let next = if roll < 0.6 {
                *associates[current].choose(&mut rng).expect("associates")
            } else if roll < 0.92 {
                *topic.choose(&mut rng).expect("non-empty topic")
            } else {
                rng.random_range(0..n)
            };
            walk.push(next);
        }

        let mut es_order = walk.clone();
        let mut i = 0;
        while i + 1 < es_order.len() {
            if rng.random_bool(0.3) {
                es_order.swap(i, i + 1);
                i += 1;
            }
            i += 1;
        }

        let es_words = es_order.iter().map(|&c| concepts[c].source.as_str());
        // loose translation: some English positions carry a different topic word
        let en_walk: Vec<usize> = walk
            .iter()
            .map(|&c| {
                if rng.random_bool(TRANSLATION_NOISE) {
                    *topic.choose(&mut rng).expect("non-empty topic")
                } else {
                    c
                }
            })
            .collect();
        let en_words = en_walk.iter().map(|&c| concepts[c].target.as_str());
        writeln!(es, "{}", render(es_words, ES_FUNCTION, &mut rng))?;
        writeln!(en, "{}", render(en_words, EN_FUNCTION, &mut rng))?;
    }
    es.flush()?;
    en.flush()?;
    println!("wrote {LINES} lines per side over {n} concepts");
    Ok(())
}

fn render<'a>(words: impl Iterator<Item = &'a str>, function: &[&str], rng: &mut ChaCha8Rng) -> String {
    let mut out: Vec<&str> = Vec::new();
    for w in words {
        if rng.random_bool(0.5) {
            out.push(function.choose(rng).expect("function words"));
        }
        out.push(w);
    }
    let mut line = out.join(" ");
    if let Some(first) = line.get(..1) {
        line.replace_range(..1, &first.to_uppercase());
    }
    line.push('.');
    line
}
