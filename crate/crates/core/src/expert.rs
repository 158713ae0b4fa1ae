//! The "AI expert": a TF-IDF + gradient-boosted-trees classifier that predicts
//! a contact's SIC code from its transcript.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gbdt::{self, in_top_k, Ensemble, ProbDist, TrainConfig};
use crate::introspect::{hypotheses_for_vector, HypothesisVector};
use crate::textfeat::{SparseVector, Vocabulary, DEFAULT_MAX_FEATURES};
use crate::transcript::{agent_sentence_length, Transcript};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expert {
    pub vocabulary: Vocabulary,
    pub ensemble: Ensemble,
    /// SIC code of each class index.
    pub classes: Vec<String>,
}

impl Expert {
    pub fn new(vocabulary: Vocabulary, ensemble: Ensemble, classes: Vec<String>) -> Result<Self> {
        if classes.len() != ensemble.num_classes() {
            return Err(Error::Model(format!(
                "{} class labels for a {}-class ensemble",
                classes.len(),
                ensemble.num_classes()
            )));
        }
        let distinct: BTreeSet<&String> = classes.iter().collect();
        if distinct.len() != classes.len() {
            return Err(Error::Model("duplicate class labels".into()));
        }
        Ok(Self {
            vocabulary,
            ensemble,
            classes,
        })
    }

    pub fn embed(&self, t: &Transcript) -> SparseVector {
        self.vocabulary.transform(t)
    }

    pub fn predict_proba(&self, t: &Transcript) -> ProbDist {
        self.ensemble.predict_proba(&self.embed(t))
    }

    /// Hypotheses `(L, E, S)` and the full-model class distribution.
    pub fn hypotheses(&self, t: &Transcript) -> (HypothesisVector, ProbDist) {
        hypotheses_for_vector(&self.ensemble, agent_sentence_length(t), &self.embed(t))
    }

    pub fn class_label(&self, class: usize) -> &str {
        &self.classes[class]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExpertConfig {
    pub max_features: usize,
    /// Fraction of the corpus held out from expert training for accuracy reporting.
    pub holdout_fraction: f64,
    pub seed: u64,
    /// Boosting hyperparameters (`[gbdt]` table in TOML).
    pub gbdt: TrainConfig,
}

impl Default for ExpertConfig {
    fn default() -> Self {
        Self {
            max_features: DEFAULT_MAX_FEATURES,
            holdout_fraction: 0.2,
            seed: 42,
            gbdt: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpertReport {
    pub num_classes: usize,
    pub train_size: usize,
    /// Corpus indices held out from training.
    pub holdout: Vec<usize>,
    pub top1: Option<f64>,
    pub top3: Option<f64>,
    pub top15: Option<f64>,
    pub initial_loss: f64,
    pub round_loss: Vec<f64>,
}

/// Deterministic shuffled split into `(train, holdout)` corpus indices.
pub fn split_holdout(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_hold = ((n as f64) * fraction).round() as usize;
    let mut holdout = idx.split_off(n - n_hold.min(n));
    let mut train = idx;
    train.sort_unstable();
    holdout.sort_unstable();
    (train, holdout)
}

/// Collects the sorted set of SIC codes; every transcript must carry one.
pub fn class_labels(corpus: &[Transcript]) -> Result<Vec<String>> {
    let mut set = BTreeSet::new();
    for t in corpus {
        match &t.sic {
            Some(s) => {
                set.insert(s.clone());
            }
            None => {
                return Err(Error::Corpus(format!(
                    "transcript {:?} has no sic label; training needs one on every contact",
                    t.id
                )))
            }
        }
    }
    Ok(set.into_iter().collect())
}

pub fn train_expert(corpus: &[Transcript], cfg: &ExpertConfig) -> Result<(Expert, ExpertReport)> {
    if !(0.0..1.0).contains(&cfg.holdout_fraction) {
        return Err(Error::Config(format!(
            "holdout_fraction must lie in [0, 1), got {}",
            cfg.holdout_fraction
        )));
    }
    cfg.gbdt.validate()?;
    let classes = class_labels(corpus)?;
    if classes.len() < 2 {
        return Err(Error::Train("corpus has fewer than 2 distinct sic codes".into()));
    }
    let class_of: BTreeMap<&str, usize> = classes
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();
    let label = |t: &Transcript| class_of[t.sic.as_deref().expect("checked above")];

    let (train_idx, holdout) = split_holdout(corpus.len(), cfg.holdout_fraction, cfg.seed);
    let train_set: Vec<Transcript> = train_idx.iter().map(|&i| corpus[i].clone()).collect();
    let vocabulary = Vocabulary::fit(&train_set, cfg.max_features)?;
    let xs: Vec<SparseVector> = train_set.iter().map(|t| vocabulary.transform(t)).collect();
    let ys: Vec<usize> = train_set.iter().map(label).collect();
    let (ensemble, history) = gbdt::train_with_history(&xs, &ys, classes.len(), &cfg.gbdt)?;

    let (top1, top3, top15) = if holdout.is_empty() {
        (None, None, None)
    } else {
        let mut hits = [0usize; 3];
        for &i in &holdout {
            let p = ensemble.predict_proba(&vocabulary.transform(&corpus[i]));
            let y = label(&corpus[i]);
            for (h, k) in hits.iter_mut().zip([1, 3, 15]) {
                if in_top_k(&p, y, k) {
                    *h += 1;
                }
            }
        }
        let frac = |h: usize| Some(h as f64 / holdout.len() as f64);
        (frac(hits[0]), frac(hits[1]), frac(hits[2]))
    };

    let report = ExpertReport {
        num_classes: classes.len(),
        train_size: train_idx.len(),
        holdout,
        top1,
        top3,
        top15,
        initial_loss: history.initial_loss,
        round_loss: history.round_loss,
    };
    Ok((Expert::new(vocabulary, ensemble, classes)?, report))
}
