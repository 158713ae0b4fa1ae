//! Tokenization and TF-IDF embedding.
//!
//! Weights are `tf * idf` with raw in-document counts for `tf` and the
//! smoothed `idf = ln((1 + N) / (1 + df)) + 1`, followed by L2 normalization.
//! The vocabulary keeps the `cap` tokens with the highest document frequency,
//! ties broken by lexicographic token order.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transcript::Transcript;

pub const DEFAULT_MAX_FEATURES: usize = 20_000;

/// Lowercases, splits on every non-alphanumeric codepoint and drops tokens
/// shorter than two characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|tok| tok.chars().count() >= 2)
        .map(str::to_owned)
        .collect()
}

/// Sparse feature vector with strictly increasing indices and no stored zeros.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    entries: Vec<(u32, f64)>,
}

impl SparseVector {
    /// Builds a vector from `(index, weight)` pairs in any order. Zero weights
    /// are dropped; duplicate indices are summed.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (u32, f64)>) -> Self {
        let mut map: BTreeMap<u32, f64> = BTreeMap::new();
        for (i, w) in pairs {
            *map.entry(i).or_insert(0.0) += w;
        }
        Self {
            entries: map.into_iter().filter(|&(_, w)| w != 0.0).collect(),
        }
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Value at `index`, 0.0 when absent.
    pub fn get(&self, index: u32) -> f64 {
        match self.entries.binary_search_by_key(&index, |&(i, _)| i) {
            Ok(pos) => self.entries[pos].1,
            Err(_) => 0.0,
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.entries.iter().map(|&(_, w)| w * w).sum::<f64>().sqrt()
    }
}

/// Fitted TF-IDF state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VocabularyRepr", into = "VocabularyRepr")]
pub struct Vocabulary {
    index: HashMap<String, u32>,
    tokens: Vec<String>,
    df: Vec<u64>,
    idf: Vec<f64>,
    n_docs: u64,
    cap: usize,
}

#[derive(Serialize, Deserialize)]
struct VocabularyRepr {
    tokens: Vec<String>,
    df: Vec<u64>,
    n_docs: u64,
    cap: usize,
}

impl From<Vocabulary> for VocabularyRepr {
    fn from(v: Vocabulary) -> Self {
        Self {
            tokens: v.tokens,
            df: v.df,
            n_docs: v.n_docs,
            cap: v.cap,
        }
    }
}

impl TryFrom<VocabularyRepr> for Vocabulary {
    type Error = Error;

    fn try_from(r: VocabularyRepr) -> Result<Self> {
        Vocabulary::from_parts(r.tokens, r.df, r.n_docs, r.cap)
    }
}

fn smoothed_idf(n_docs: u64, df: u64) -> f64 {
    ((1.0 + n_docs as f64) / (1.0 + df as f64)).ln() + 1.0
}

impl Vocabulary {
    fn from_parts(tokens: Vec<String>, df: Vec<u64>, n_docs: u64, cap: usize) -> Result<Self> {
        if tokens.len() != df.len() {
            return Err(Error::Model(format!(
                "vocabulary has {} tokens but {} document frequencies",
                tokens.len(),
                df.len()
            )));
        }
        if cap == 0 || tokens.len() > cap {
            return Err(Error::Model(format!(
                "vocabulary size {} exceeds cap {cap}",
                tokens.len()
            )));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, tok) in tokens.iter().enumerate() {
            if df[i] == 0 || df[i] > n_docs {
                return Err(Error::Model(format!("token {tok:?} has invalid df {}", df[i])));
            }
            if index.insert(tok.clone(), i as u32).is_some() {
                return Err(Error::Model(format!("duplicate vocabulary token {tok:?}")));
            }
        }
        let idf = df.iter().map(|&d| smoothed_idf(n_docs, d)).collect();
        Ok(Self {
            index,
            tokens,
            df,
            idf,
            n_docs,
            cap,
        })
    }

    /// Fits document frequencies over the corpus. A transcript's document is
    /// the text of all its utterances.
    pub fn fit(corpus: &[Transcript], cap: usize) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::Fit("cannot fit a vocabulary on an empty corpus".into()));
        }
        if cap == 0 {
            return Err(Error::Fit("vocabulary cap must be at least 1".into()));
        }
        let mut counts: HashMap<String, u64> = HashMap::new();
        for t in corpus {
            let distinct: HashSet<String> = t
                .utterances
                .iter()
                .flat_map(|u| tokenize(&u.text))
                .collect();
            for tok in distinct {
                *counts.entry(tok).or_insert(0) += 1;
            }
        }
        let mut ranked: Vec<(String, u64)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(cap);
        let (tokens, df) = ranked.into_iter().unzip();
        Self::from_parts(tokens, df, corpus.len() as u64, cap)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn n_docs(&self) -> u64 {
        self.n_docs
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn index_of(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, index: u32) -> Option<&str> {
        self.tokens.get(index as usize).map(String::as_str)
    }

    pub fn df(&self, token: &str) -> Option<u64> {
        self.index_of(token).map(|i| self.df[i as usize])
    }

    pub fn idf(&self, token: &str) -> Option<f64> {
        self.index_of(token).map(|i| self.idf[i as usize])
    }

    /// Embeds a transcript; out-of-vocabulary tokens are ignored.
    pub fn transform(&self, t: &Transcript) -> SparseVector {
        let mut tf: BTreeMap<u32, u64> = BTreeMap::new();
        for u in &t.utterances {
            for tok in tokenize(&u.text) {
                if let Some(i) = self.index_of(&tok) {
                    *tf.entry(i).or_insert(0) += 1;
                }
            }
        }
        let mut entries: Vec<(u32, f64)> = tf
            .into_iter()
            .map(|(i, c)| (i, c as f64 * self.idf[i as usize]))
            .collect();
        let norm = entries.iter().map(|&(_, w)| w * w).sum::<f64>().sqrt();
        if norm > 0.0 {
            for e in &mut entries {
                e.1 /= norm;
            }
        }
        SparseVector { entries }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transcript::{Speaker, Utterance};
    use proptest::prelude::*;

    fn doc(id: &str, text: &str) -> Transcript {
        Transcript::new(id, vec![Utterance::new(Speaker::Customer, text)])
    }

    fn fruit() -> Vec<Transcript> {
        vec![doc("a", "red apple"), doc("b", "red pear"), doc("c", "blue pear")]
    }

    #[test]
    fn tokenize_rules() {
        assert_eq!(tokenize("My Kindle won't charge!"), ["my", "kindle", "won", "charge"]);
        assert!(tokenize("").is_empty());
        assert!(tokenize("a b c").is_empty());
    }

    #[test]
    fn fit_counts_document_frequencies() {
        let v = Vocabulary::fit(&fruit(), 10).unwrap();
        assert_eq!(v.n_docs(), 3);
        assert_eq!(v.len(), 4);
        assert_eq!(v.df("red"), Some(2));
        assert_eq!(v.df("pear"), Some(2));
        assert_eq!(v.df("apple"), Some(1));
        assert_eq!(v.df("blue"), Some(1));
        // df descending, then lexicographic
        assert_eq!(v.index_of("pear"), Some(0));
        assert_eq!(v.index_of("red"), Some(1));
        assert_eq!(v.index_of("apple"), Some(2));
        assert_eq!(v.index_of("blue"), Some(3));
    }

    #[test]
    fn cap_keeps_lexicographic_winner() {
        let v = Vocabulary::fit(&fruit(), 1).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v.df("pear"), Some(2));
        assert_eq!(v.df("red"), None);
    }

    #[test]
    fn empty_texts_and_empty_corpus() {
        let v = Vocabulary::fit(&[doc("a", ""), doc("b", "")], 5).unwrap();
        assert!(v.is_empty());
        assert_eq!(v.n_docs(), 2);
        assert!(matches!(Vocabulary::fit(&[], 5), Err(Error::Fit(_))));
    }

    #[test]
    fn transform_examples() {
        let v = Vocabulary::fit(&fruit(), 10).unwrap();
        let one = v.transform(&doc("x", "pear"));
        assert_eq!(one.entries(), &[(0, 1.0)]);

        let idf_red = (4.0f64 / 3.0).ln() + 1.0;
        let idf_apple = 2.0f64.ln() + 1.0;
        assert!((v.idf("red").unwrap() - idf_red).abs() < 1e-15);
        let (a, b) = (2.0 * idf_red, idf_apple);
        let norm = (a * a + b * b).sqrt();
        let x = v.transform(&doc("x", "red red apple"));
        assert_eq!(x.len(), 2);
        assert!((x.get(1) - a / norm).abs() < 1e-15);
        assert!((x.get(2) - b / norm).abs() < 1e-15);

        assert!(v.transform(&doc("x", "zzz qqq")).is_empty());
    }

    #[test]
    fn idf_bounds() {
        let v = Vocabulary::fit(&fruit(), 10).unwrap();
        for tok in ["red", "pear", "apple", "blue"] {
            assert!(v.idf(tok).unwrap() >= 1.0);
        }
        assert!(v.idf("red").unwrap() <= v.idf("apple").unwrap());
    }

    #[test]
    fn serde_round_trip() {
        let v = Vocabulary::fit(&fruit(), 10).unwrap();
        let json = serde_json::to_string(&v).unwrap();
        let back: Vocabulary = serde_json::from_str(&json).unwrap();
        assert_eq!(back, v);
        assert!(serde_json::from_str::<Vocabulary>(
            r#"{"tokens":["a","a"],"df":[1,1],"n_docs":2,"cap":5}"#
        )
        .is_err());
    }

    proptest! {
        #[test]
        fn transform_is_unit_norm_and_sorted(texts in prop::collection::vec("[a-e ]{0,30}", 1..8), probe in "[a-e ]{0,40}") {
            let corpus: Vec<Transcript> = texts.iter().enumerate().map(|(i, t)| doc(&i.to_string(), t)).collect();
            let v = Vocabulary::fit(&corpus, 50).unwrap();
            let x = v.transform(&doc("p", &probe));
            let y = v.transform(&doc("p", &probe));
            prop_assert_eq!(&x, &y);
            prop_assert!(x.entries().windows(2).all(|w| w[0].0 < w[1].0));
            prop_assert!(x.entries().iter().all(|&(_, w)| w != 0.0));
            if !x.is_empty() {
                prop_assert!((x.l2_norm() - 1.0).abs() < 1e-12);
            }
        }
    }
}
