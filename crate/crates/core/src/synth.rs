//! Deterministic synthetic transcript corpora.
//!
//! Contacts are either easy (ids `easy-NNNNN`) or hard (`hard-NNNNN`). Easy
//! contacts are short and drawn from a single class vocabulary. Hard contacts
//! are long and mix in topical words from a second, confusor class, so the
//! expert is less certain about them. A configurable fraction of contacts is generated
//! with half the hard mixing rate and labeled `normal` in the labels file.
//! Outcome flags are drawn with difficulty-dependent probabilities.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::Label;
use crate::textfeat::{tokenize, Vocabulary};
use crate::transcript::{agent_sentence_length, Speaker, Transcript, Utterance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub classes: usize,
    pub size: usize,
    pub easy_fraction: f64,
    /// Fraction of contacts generated as blends and labeled `normal`.
    pub medium_fraction: f64,
    pub class_vocab_size: usize,
    pub shared_vocab_size: usize,
    pub easy_agent_turns: [usize; 2],
    pub hard_agent_turns: [usize; 2],
    pub words_per_turn: [usize; 2],
    /// Probability that a word is topical (class vocabulary) rather than shared.
    pub topical_rate: f64,
    /// Probability that a topical word in a hard contact comes from its confusor class.
    pub mixing_rate: f64,
    pub easy_resolved: f64,
    pub easy_transferred: f64,
    pub hard_resolved: f64,
    pub hard_transferred: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            classes: 10,
            size: 5000,
            easy_fraction: 0.5,
            medium_fraction: 0.2,
            class_vocab_size: 60,
            shared_vocab_size: 200,
            easy_agent_turns: [2, 6],
            hard_agent_turns: [10, 30],
            words_per_turn: [4, 12],
            topical_rate: 0.5,
            mixing_rate: 0.45,
            easy_resolved: 0.85,
            easy_transferred: 0.11,
            hard_resolved: 0.26,
            hard_transferred: 0.62,
        }
    }
}

fn check_prob(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must lie in [0, 1], got {p}")))
    }
}

fn check_range(name: &str, r: [usize; 2]) -> Result<()> {
    if r[0] <= r[1] {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} range [{}, {}] is empty", r[0], r[1])))
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::Config("need at least 2 classes".into()));
        }
        if self.size < self.classes {
            return Err(Error::Config(format!(
                "corpus size {} is smaller than the class count {}",
                self.size, self.classes
            )));
        }
        if self.class_vocab_size < 1 || self.shared_vocab_size < 1 {
            return Err(Error::Config("vocabulary sizes must be at least 1".into()));
        }
        check_range("easy_agent_turns", self.easy_agent_turns)?;
        check_range("hard_agent_turns", self.hard_agent_turns)?;
        check_range("words_per_turn", self.words_per_turn)?;
        if self.hard_agent_turns[0] <= self.easy_agent_turns[1] {
            return Err(Error::Config(
                "hard agent-turn minimum must exceed the easy maximum".into(),
            ));
        }
        if self.words_per_turn[0] < 1 {
            return Err(Error::Config("turns need at least one word".into()));
        }
        for (name, p) in [
            ("easy_fraction", self.easy_fraction),
            ("medium_fraction", self.medium_fraction),
            ("topical_rate", self.topical_rate),
            ("mixing_rate", self.mixing_rate),
            ("easy_resolved", self.easy_resolved),
            ("easy_transferred", self.easy_transferred),
            ("hard_resolved", self.hard_resolved),
            ("hard_transferred", self.hard_transferred),
        ] {
            check_prob(name, p)?;
        }
        Ok(())
    }
}

const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";
const WORD_SPACE: usize = 70 * 70 * 70;
// coprime to WORD_SPACE; scatters consecutive ids over the syllable space
const WORD_STRIDE: usize = 104_729;

/// Pronounceable three-syllable pseudo-word, distinct for every id < 343000.
fn word(id: usize) -> String {
    let mut code = (id * WORD_STRIDE) % WORD_SPACE;
    let mut w = String::with_capacity(6);
    for _ in 0..3 {
        let syl = code % 70;
        code /= 70;
        w.push(CONSONANTS[syl / 5] as char);
        w.push(VOWELS[syl % 5] as char);
    }
    w
}

struct Lexicon {
    shared: Vec<String>,
    topical: Vec<Vec<String>>,
}

impl Lexicon {
    fn new(cfg: &SynthConfig) -> Self {
        let shared = (0..cfg.shared_vocab_size).map(word).collect();
        let topical = (0..cfg.classes)
            .map(|c| {
                (0..cfg.class_vocab_size)
                    .map(|j| word(cfg.shared_vocab_size + c * cfg.class_vocab_size + j))
                    .collect()
            })
            .collect();
        Self { shared, topical }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Difficulty {
    Easy,
    Hard,
}

impl Difficulty {
    pub fn of_id(id: &str) -> Option<Difficulty> {
        if id.starts_with("easy-") {
            Some(Difficulty::Easy)
        } else if id.starts_with("hard-") {
            Some(Difficulty::Hard)
        } else {
            None
        }
    }
}

/// A generated corpus with its ground-truth labels (`id -> label`).
#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub transcripts: Vec<Transcript>,
    pub labels: Vec<(String, Label)>,
}

impl SynthCorpus {
    pub fn labels_csv(&self) -> String {
        let mut s = String::from("id,label\n");
        for (id, l) in &self.labels {
            let _ = writeln!(s, "{id},{l}");
        }
        s
    }

    pub fn label_map(&self) -> BTreeMap<String, Label> {
        self.labels.iter().cloned().collect()
    }
}

fn uniform_in<R: Rng>(rng: &mut R, r: [usize; 2]) -> usize {
    rng.random_range(r[0]..=r[1])
}

struct Contact {
    difficulty: Difficulty,
    class: usize,
    blended: bool,
}

pub fn generate_corpus(cfg: &SynthConfig) -> Result<SynthCorpus> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let lex = Lexicon::new(cfg);

    let n = cfg.size;
    let n_easy = ((n as f64) * cfg.easy_fraction).round() as usize;
    let n_blend = ((n as f64) * cfg.medium_fraction).round() as usize;
    // Balanced class assignment inside each difficulty group.
    let mut plan: Vec<Contact> = (0..n)
        .map(|i| {
            let (difficulty, j) = if i < n_easy {
                (Difficulty::Easy, i)
            } else {
                (Difficulty::Hard, i - n_easy)
            };
            Contact {
                difficulty,
                class: j % cfg.classes,
                blended: false,
            }
        })
        .collect();
    plan.shuffle(&mut rng);
    let mut blend_idx: Vec<usize> = (0..n).collect();
    blend_idx.shuffle(&mut rng);
    for &i in &blend_idx[..n_blend.min(n)] {
        plan[i].blended = true;
    }

    let mut transcripts = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let (mut easy_no, mut hard_no) = (0usize, 0usize);
    for c in plan {
        let id = match c.difficulty {
            Difficulty::Easy => {
                easy_no += 1;
                format!("easy-{easy_no:05}")
            }
            Difficulty::Hard => {
                hard_no += 1;
                format!("hard-{hard_no:05}")
            }
        };
        let base_mix = match c.difficulty {
            Difficulty::Easy => 0.0,
            Difficulty::Hard => cfg.mixing_rate,
        };
        let mix = if c.blended { cfg.mixing_rate / 2.0 } else { base_mix };
        // Mixed-in topical words all come from one other class, so the
        // contact reads as a blend of two issues.
        let confusor = {
            let other = rng.random_range(0..cfg.classes - 1);
            if other >= c.class {
                other + 1
            } else {
                other
            }
        };
        let agent_turns = match c.difficulty {
            Difficulty::Easy => uniform_in(&mut rng, cfg.easy_agent_turns),
            Difficulty::Hard => uniform_in(&mut rng, cfg.hard_agent_turns),
        };

        let sentence = |rng: &mut ChaCha8Rng| {
            let len = uniform_in(rng, cfg.words_per_turn);
            let mut words = Vec::with_capacity(len);
            for _ in 0..len {
                let w = if rng.random_bool(cfg.topical_rate) {
                    let class = if mix > 0.0 && rng.random_bool(mix) {
                        confusor
                    } else {
                        c.class
                    };
                    let v = &lex.topical[class];
                    &v[rng.random_range(0..v.len())]
                } else {
                    &lex.shared[rng.random_range(0..lex.shared.len())]
                };
                words.push(w.as_str());
            }
            words.join(" ")
        };

        let mut utterances = Vec::with_capacity(2 * agent_turns + 1);
        if rng.random_bool(0.3) {
            let greeting = format!("{} {}", lex.shared[0], lex.shared[1 % lex.shared.len()]);
            utterances.push(Utterance::new(Speaker::Bot, greeting));
        }
        for _ in 0..agent_turns {
            utterances.push(Utterance::new(Speaker::Customer, sentence(&mut rng)));
            utterances.push(Utterance::new(Speaker::Agent, sentence(&mut rng)));
        }

        let (p_res, p_tr) = match c.difficulty {
            Difficulty::Easy => (cfg.easy_resolved, cfg.easy_transferred),
            Difficulty::Hard => (cfg.hard_resolved, cfg.hard_transferred),
        };
        let resolved = rng.random_bool(p_res);
        let transferred = rng.random_bool(p_tr);

        let label = match (c.blended, c.difficulty) {
            (true, _) => Label::Normal,
            (false, Difficulty::Easy) => Label::Low,
            (false, Difficulty::Hard) => Label::High,
        };
        labels.push((id.clone(), label));
        transcripts.push(Transcript {
            id,
            utterances,
            sic: Some(c.class.to_string()),
            resolved: Some(resolved),
            transferred: Some(transferred),
        });
    }
    Ok(SynthCorpus {
        transcripts,
        labels,
    })
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CorpusStats {
    pub size: usize,
    pub class_counts: BTreeMap<String, usize>,
    pub mean_agent_turns_easy: Option<f64>,
    pub mean_agent_turns_hard: Option<f64>,
    /// Fraction of tokens missing from the vocabulary, when one is given.
    pub oov_rate: Option<f64>,
}

pub fn corpus_stats(corpus: &[Transcript], vocab: Option<&Vocabulary>) -> CorpusStats {
    let mut stats = CorpusStats {
        size: corpus.len(),
        ..CorpusStats::default()
    };
    let (mut easy, mut hard) = ((0u64, 0usize), (0u64, 0usize));
    let (mut tokens, mut oov) = (0usize, 0usize);
    for t in corpus {
        if let Some(sic) = &t.sic {
            *stats.class_counts.entry(sic.clone()).or_insert(0) += 1;
        }
        let l = agent_sentence_length(t);
        match Difficulty::of_id(&t.id) {
            Some(Difficulty::Easy) => easy = (easy.0 + l, easy.1 + 1),
            Some(Difficulty::Hard) => hard = (hard.0 + l, hard.1 + 1),
            None => {}
        }
        if let Some(v) = vocab {
            for u in &t.utterances {
                for tok in tokenize(&u.text) {
                    tokens += 1;
                    oov += v.index_of(&tok).is_none() as usize;
                }
            }
        }
    }
    let mean = |(s, c): (u64, usize)| (c > 0).then(|| s as f64 / c as f64);
    stats.mean_agent_turns_easy = mean(easy);
    stats.mean_agent_turns_hard = mean(hard);
    stats.oov_rate = vocab.map(|_| if tokens > 0 { oov as f64 / tokens as f64 } else { 0.0 });
    stats
}
