//! Zipf-ranked synthetic lexicon whose spelling drifts with rarity.

use std::collections::{HashMap, HashSet};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::text::lexicon::{self, function_words};
use crate::text::NerTag;

const COMMON_CONSONANTS: &[u8] = b"tnsrldcmpbhgfw";
const RARE_CONSONANTS: &[u8] = b"vkzxjqy";
const VOWELS: &[u8] = b"aeiou";
const RARE_VOWELS: &[&str] = &["ae", "ou", "ei", "y"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LexiconConfig {
    /// Number of generated content words (function words come on top).
    pub content_words: usize,
    /// Zipf exponent `s` in `p(r) ∝ r^-s`.
    pub zipf_exponent: f64,
    /// Probability that a content slot holds a gazetteer name instead of a
    /// generated word.
    pub name_rate: f64,
}

impl Default for LexiconConfig {
    fn default() -> Self {
        Self {
            content_words: 10_000,
            zipf_exponent: 1.1,
            name_rate: 0.01,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LexEntry {
    /// Surface form; names are capitalized, everything else lowercase.
    pub text: String,
    /// 1-based frequency rank.
    pub rank: usize,
    pub function: bool,
    pub name: Option<NerTag>,
}

/// Ranked word list with Zipf sampling weights.
#[derive(Clone, Debug)]
pub struct Lexicon {
    pub entries: Vec<LexEntry>,
    cumulative: Vec<f64>,
    index: HashMap<String, usize>,
}

impl Lexicon {
    /// Function words take the odd ranks 1, 3, 5, …; content words fill
    /// the rest in generation order.
    pub fn generate<R: Rng>(cfg: &LexiconConfig, rng: &mut R) -> Result<Self> {
        if cfg.content_words < 100 {
            return invalid("lexicon needs at least 100 content words");
        }
        if !(cfg.zipf_exponent > 0.0) {
            return invalid("zipf exponent must be positive");
        }
        let mut seen: HashSet<String> = HashSet::new();
        let fws: Vec<&str> = function_words().map(|(w, _)| w).filter(|w| seen.insert(w.to_string())).collect();
        let total = fws.len() + cfg.content_words;
        let mut names: Vec<(&str, NerTag)> = lexicon::PLACES
            .iter()
            .map(|w| (*w, NerTag::Place))
            .chain(lexicon::PERSONS.iter().map(|w| (*w, NerTag::Person)))
            .chain(lexicon::ORGS.iter().map(|w| (*w, NerTag::Org)))
            .collect();
        names.reverse();

        let mut entries = Vec::with_capacity(total);
        let mut fw = fws.into_iter();
        let mut made = 0;
        for rank in 1..=total {
            if rank % 2 == 1 {
                if let Some(w) = fw.next() {
                    entries.push(LexEntry {
                        text: w.to_string(),
                        rank,
                        function: true,
                        name: None,
                    });
                    continue;
                }
            }
            made += 1;
            let q = rank as f64 / total as f64;
            let name = if rng.gen_bool(cfg.name_rate) {
                names.pop().filter(|(w, _)| !seen.contains(&w.to_lowercase()))
            } else {
                None
            };
            let text = match name {
                Some((w, _)) => w.to_string(),
                None => loop {
                    let w = spell(q, rng);
                    if !seen.contains(&w) && !lexicon::is_function_word(&w) {
                        break w;
                    }
                },
            };
            seen.insert(text.to_lowercase());
            entries.push(LexEntry {
                text,
                rank,
                function: false,
                name: name.map(|(_, t)| t),
            });
        }
        debug_assert_eq!(made, cfg.content_words);

        let mut cumulative = Vec::with_capacity(total);
        let mut acc = 0.0;
        for e in &entries {
            acc += (e.rank as f64).powf(-cfg.zipf_exponent);
            cumulative.push(acc);
        }
        let index = entries.iter().enumerate().map(|(i, e)| (e.text.to_lowercase(), i)).collect();
        Ok(Self {
            entries,
            cumulative,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Draws one entry index from the Zipf distribution.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let u = rng.gen::<f64>() * self.cumulative.last().copied().unwrap_or(0.0);
        self.cumulative.partition_point(|&c| c <= u).min(self.entries.len() - 1)
    }

    /// Population probability of an entry.
    pub fn probability(&self, i: usize) -> f64 {
        let prev = if i == 0 { 0.0 } else { self.cumulative[i - 1] };
        (self.cumulative[i] - prev) / self.cumulative[self.cumulative.len() - 1]
    }

    pub fn lookup(&self, normalized: &str) -> Option<&LexEntry> {
        self.index.get(normalized).map(|&i| &self.entries[i])
    }
}

/// Pseudo-word for linear rank percentile `q ∈ (0, 1]`: rarer words get
/// more syllables and more rare letters.
fn spell<R: Rng>(q: f64, rng: &mut R) -> String {
    let jitter = Normal::new(0.0, 0.6).expect("finite sigma");
    let syllables = (1.2 + 2.0 * q + jitter.sample(rng)).round().clamp(1.0, 5.0) as usize;
    let p_rare = 0.02 + 0.35 * q * q;
    let consonant = |rng: &mut R| -> char {
        let pool = if rng.gen_bool(p_rare) { RARE_CONSONANTS } else { COMMON_CONSONANTS };
        pool[rng.gen_range(0..pool.len())] as char
    };
    let mut w = String::new();
    for s in 0..syllables {
        if s > 0 || rng.gen_bool(0.8) {
            w.push(consonant(rng));
        }
        if rng.gen_bool(p_rare * 0.5) {
            w.push_str(RARE_VOWELS[rng.gen_range(0..RARE_VOWELS.len())]);
        } else {
            w.push(VOWELS[rng.gen_range(0..VOWELS.len())] as char);
        }
        if rng.gen_bool(0.3) {
            w.push(consonant(rng));
        }
    }
    if w.len() < 2 {
        w.push(consonant(rng));
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ranks_are_a_permutation_with_function_words_on_odd_ranks() {
        let lex = Lexicon::generate(&LexiconConfig::default(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        for (i, e) in lex.entries.iter().enumerate() {
            assert_eq!(e.rank, i + 1);
            if e.function {
                assert_eq!(e.rank % 2, 1);
            }
        }
        let unique: HashSet<_> = lex.entries.iter().map(|e| e.text.to_lowercase()).collect();
        assert_eq!(unique.len(), lex.len());
        assert_eq!(lex.lookup("the").unwrap().rank % 2, 1);
    }

    #[test]
    fn rare_words_are_longer() {
        let lex = Lexicon::generate(&LexiconConfig::default(), &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let mean_len = |r: std::ops::Range<usize>| {
            let ws: Vec<_> = lex.entries[r].iter().filter(|e| !e.function && e.name.is_none()).collect();
            ws.iter().map(|e| e.text.len() as f64).sum::<f64>() / ws.len() as f64
        };
        assert!(mean_len(8000..10000) > mean_len(400..2400) + 1.0);
    }
}
