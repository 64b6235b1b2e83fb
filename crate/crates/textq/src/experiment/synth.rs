//! Synthetic binary corpus generator.
//!
//! A desk-scale stand-in for real note corpora: every instance draws its
//! tokens from a shared background vocabulary, and positive instances
//! additionally carry one token from a small designated signal set with
//! probability `signal_strength`. The label signal therefore rides on a
//! single token occurrence, which is exactly what token-level corruption
//! destroys: a misspelled or merged signal token takes that instance's
//! evidence with it.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, CorpusMetadata, Instance};
use crate::error::{Error, Result};
use crate::rng::stream;

const BACKGROUND_VOCAB: usize = 400;
const SIGNAL_VOCAB: usize = 16;
/// Fraction of token occurrences that get a trailing comma, giving the
/// corruptor punctuation-adjacent merge sites.
const PUNCT_FRACTION: f64 = 0.08;

fn random_word(rng: &mut ChaCha8Rng, min_len: usize, max_len: usize) -> String {
    let len = rng.random_range(min_len..=max_len);
    (0..len)
        .map(|_| char::from(b'a' + rng.random_range(0..26u8)))
        .collect()
}

fn word_set(rng: &mut ChaCha8Rng, count: usize, min_len: usize, max_len: usize) -> Vec<String> {
    let mut seen = std::collections::HashSet::with_capacity(count);
    let mut words = Vec::with_capacity(count);
    while words.len() < count {
        let w = random_word(rng, min_len, max_len);
        if seen.insert(w.clone()) {
            words.push(w);
        }
    }
    words
}

/// Builds a balanced, seeded binary corpus of `n_instances` documents of
/// `tokens_per_instance` tokens each.
pub fn make_synthetic_corpus(
    n_instances: usize,
    tokens_per_instance: usize,
    signal_strength: f64,
    seed: u64,
) -> Result<Corpus> {
    if n_instances < 20 {
        return Err(Error::Invalid(format!(
            "need at least 20 instances, got {n_instances}"
        )));
    }
    if tokens_per_instance < 5 {
        return Err(Error::Invalid(format!(
            "need at least 5 tokens per instance, got {tokens_per_instance}"
        )));
    }
    if !(0.0..=1.0).contains(&signal_strength) {
        return Err(Error::Invalid(format!(
            "signal_strength {signal_strength} outside [0, 1]"
        )));
    }
    let mut vocab_rng = stream(seed, "synth:vocab");
    let background = word_set(&mut vocab_rng, BACKGROUND_VOCAB, 3, 9);
    let signal: Vec<String> = {
        let mut words = Vec::with_capacity(SIGNAL_VOCAB);
        let taken: std::collections::HashSet<&String> = background.iter().collect();
        while words.len() < SIGNAL_VOCAB {
            let w = random_word(&mut vocab_rng, 7, 10);
            if !taken.contains(&w) && !words.contains(&w) {
                words.push(w);
            }
        }
        words
    };

    let mut instances = Vec::with_capacity(n_instances);
    for i in 0..n_instances {
        let label = (i % 2) as u8;
        let mut rng = stream(seed, &format!("synth:inst:{i}"));
        let mut tokens: Vec<String> = (0..tokens_per_instance)
            .map(|_| {
                let mut w = background[rng.random_range(0..background.len())].clone();
                if rng.random::<f64>() < PUNCT_FRACTION {
                    w.push(',');
                }
                w
            })
            .collect();
        if label == 1 && rng.random::<f64>() < signal_strength {
            let at = rng.random_range(0..tokens.len());
            tokens[at] = signal[rng.random_range(0..signal.len())].clone();
        }
        instances.push(Instance {
            instance_id: format!("synth-{i:05}"),
            subject_id: format!("subj-{i:05}"),
            text: tokens.join(" "),
            label,
            window_days: None,
        });
    }
    Corpus::new(
        instances,
        CorpusMetadata {
            name: "synthetic".into(),
            seed: Some(seed),
            provenance: format!(
                "synthetic n={n_instances} tokens={tokens_per_instance} \
signal={signal_strength} seed={seed}"
            ),
        },
    )
}
