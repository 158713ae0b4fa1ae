//! Multiclass gradient-boosted decision trees with staged prediction.
//!
//! Every boosting round fits one regression tree per class on the softmax
//! gradients and hessians; leaf values are Newton steps `-G / (H + lambda)`
//! scaled by the learning rate. The model keeps the full round-by-round
//! structure so predictions can be read after any prefix of rounds.

mod learner;
mod tree;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textfeat::SparseVector;

pub use learner::{train, train_with_history, TrainHistory};
pub use tree::{Tree, TreeNode};

/// A probability distribution produced by the softmax over class margins.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbDist(Vec<f64>);

impl ProbDist {
    /// Numerically stable softmax. Entries are floored at the smallest
    /// positive normal before normalization so they are strictly positive.
    pub fn softmax(margins: &[f64]) -> Self {
        let max = margins.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut p: Vec<f64> = margins
            .iter()
            .map(|&m| (m - max).exp().max(f64::MIN_POSITIVE))
            .collect();
        let sum: f64 = p.iter().sum();
        for v in &mut p {
            *v /= sum;
        }
        ProbDist(p)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of the largest entry, ties resolved to the lower index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (k, &v) in self.0.iter().enumerate() {
            if v > self.0[best] {
                best = k;
            }
        }
        best
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for ProbDist {
    type Output = f64;

    fn index(&self, k: usize) -> &f64 {
        &self.0[k]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub lambda: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            rounds: 60,
            learning_rate: 0.1,
            max_depth: 4,
            min_samples_leaf: 5,
            lambda: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rounds < 1 {
            return Err(Error::Config("rounds must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::Config(format!(
                "learning_rate must lie in (0, 1], got {}",
                self.learning_rate
            )));
        }
        if self.max_depth < 1 {
            return Err(Error::Config("max_depth must be at least 1".into()));
        }
        if self.min_samples_leaf < 1 {
            return Err(Error::Config("min_samples_leaf must be at least 1".into()));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        Ok(())
    }
}

/// Trained multiclass ensemble: `rounds[i][k]` is the tree for class `k` in
/// boosting round `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EnsembleRepr", into = "EnsembleRepr")]
pub struct Ensemble {
    num_classes: usize,
    learning_rate: f64,
    base_scores: Vec<f64>,
    rounds: Vec<Vec<Tree>>,
}

#[derive(Serialize, Deserialize)]
struct EnsembleRepr {
    num_classes: usize,
    num_rounds: usize,
    learning_rate: f64,
    base_scores: Vec<f64>,
    rounds: Vec<Vec<Tree>>,
}

impl From<Ensemble> for EnsembleRepr {
    fn from(e: Ensemble) -> Self {
        Self {
            num_classes: e.num_classes,
            num_rounds: e.rounds.len(),
            learning_rate: e.learning_rate,
            base_scores: e.base_scores,
            rounds: e.rounds,
        }
    }
}

impl TryFrom<EnsembleRepr> for Ensemble {
    type Error = Error;

    fn try_from(r: EnsembleRepr) -> Result<Self> {
        if r.rounds.len() != r.num_rounds {
            return Err(Error::Model(format!(
                "ensemble declares {} rounds but stores {}",
                r.num_rounds,
                r.rounds.len()
            )));
        }
        Ensemble::from_parts(r.num_classes, r.learning_rate, r.base_scores, r.rounds)
    }
}

impl Ensemble {
    /// Assembles an ensemble from explicit trees. Leaf values are used as-is
    /// (already scaled by the learning rate).
    pub fn from_parts(
        num_classes: usize,
        learning_rate: f64,
        base_scores: Vec<f64>,
        rounds: Vec<Vec<Tree>>,
    ) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::Model(format!("need at least 2 classes, got {num_classes}")));
        }
        if rounds.is_empty() {
            return Err(Error::Model("ensemble needs at least one round".into()));
        }
        if base_scores.len() != num_classes || base_scores.iter().any(|b| !b.is_finite()) {
            return Err(Error::Model("base scores must be K finite values".into()));
        }
        if let Some((i, r)) = rounds.iter().enumerate().find(|(_, r)| r.len() != num_classes) {
            return Err(Error::Model(format!(
                "round {i} has {} trees, expected {num_classes}",
                r.len()
            )));
        }
        Ok(Self {
            num_classes,
            learning_rate,
            base_scores,
            rounds,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_rounds(&self) -> usize {
        self.rounds.len()
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn base_scores(&self) -> &[f64] {
        &self.base_scores
    }

    pub fn rounds(&self) -> &[Vec<Tree>] {
        &self.rounds
    }

    fn add_round(&self, round: &[Tree], x: &SparseVector, margins: &mut [f64]) {
        for (m, tree) in margins.iter_mut().zip(round) {
            *m += tree.eval(x);
        }
    }

    /// Raw class margins after all rounds.
    pub fn margins(&self, x: &SparseVector) -> Vec<f64> {
        let mut margins = self.base_scores.clone();
        for round in &self.rounds {
            self.add_round(round, x, &mut margins);
        }
        margins
    }

    pub fn predict_proba(&self, x: &SparseVector) -> ProbDist {
        ProbDist::softmax(&self.margins(x))
    }

    /// Distribution after each prefix of rounds: entry `i` uses rounds `0..=i`.
    /// The last entry is bitwise equal to [`Ensemble::predict_proba`].
    pub fn staged_proba(&self, x: &SparseVector) -> Vec<ProbDist> {
        let mut margins = self.base_scores.clone();
        self.rounds
            .iter()
            .map(|round| {
                self.add_round(round, x, &mut margins);
                ProbDist::softmax(&margins)
            })
            .collect()
    }

    /// Fraction of rows whose true class ranks among the `k` most probable.
    pub fn top_k_accuracy(&self, xs: &[SparseVector], ys: &[usize], k: usize) -> Result<f64> {
        if k < 1 {
            return Err(Error::Domain("k must be at least 1".into()));
        }
        if xs.is_empty() {
            return Err(Error::Domain("top-k accuracy of an empty set".into()));
        }
        if xs.len() != ys.len() {
            return Err(Error::Domain(format!(
                "{} inputs but {} labels",
                xs.len(),
                ys.len()
            )));
        }
        let hits = xs
            .iter()
            .zip(ys)
            .filter(|(x, &y)| in_top_k(&self.predict_proba(x), y, k))
            .count();
        Ok(hits as f64 / xs.len() as f64)
    }
}

/// Whether class `y` is among the `k` highest entries of `p` (ties go to the
/// lower class index).
pub fn in_top_k(p: &ProbDist, y: usize, k: usize) -> bool {
    if y >= p.len() {
        return false;
    }
    let py = p[y];
    let ahead = p
        .as_slice()
        .iter()
        .enumerate()
        .filter(|&(j, &v)| v > py || (v == py && j < y))
        .count();
    ahead < k
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x1() -> SparseVector {
        SparseVector::from_pairs([(0, 1.0)])
    }

    #[test]
    fn zero_leaves_give_uniform() {
        let m = Ensemble::from_parts(4, 0.1, vec![0.0; 4], vec![vec![Tree::leaf(0.0); 4]; 3]).unwrap();
        let p = m.predict_proba(&x1());
        for k in 0..4 {
            assert_eq!(p[k], 0.25);
        }
    }

    #[test]
    fn one_round_softmax_value() {
        let m = Ensemble::from_parts(2, 1.0, vec![0.0; 2], vec![vec![Tree::leaf(1.0), Tree::leaf(-1.0)]]).unwrap();
        let p = m.predict_proba(&x1());
        // softmax(+1, -1) = 1 / (1 + e^-2)
        let oracle = 1.0 / (1.0 + (-2.0f64).exp());
        assert!((p[0] - oracle).abs() < 1e-15);
        assert!((p[0] - 0.880797).abs() < 1e-6);
        assert!((p[1] - 0.119203).abs() < 1e-6);
        let staged = m.staged_proba(&x1());
        assert_eq!(staged.len(), 1);
        assert_eq!(staged[0], p);
    }

    #[test]
    fn staged_matches_manual_walk() {
        let rounds = vec![
            vec![Tree::stump(0, 0.5, 0.2, -0.3), Tree::leaf(0.1)],
            vec![Tree::leaf(-0.4), Tree::stump(1, 0.0, 0.0, 0.6)],
        ];
        let m = Ensemble::from_parts(2, 0.1, vec![0.05, -0.05], rounds).unwrap();
        let x = SparseVector::from_pairs([(0, 0.9), (1, 0.2)]);
        // by hand: round 1 -> (0.05 - 0.3, -0.05 + 0.1); round 2 -> (-0.25 - 0.4, 0.05 + 0.6)
        let r1: [f64; 2] = [0.05 - 0.3, -0.05 + 0.1];
        let r2 = [r1[0] - 0.4, r1[1] + 0.6];
        let staged = m.staged_proba(&x);
        for (p, r) in staged.iter().zip([r1, r2]) {
            let z = r[0].exp() + r[1].exp();
            assert!((p[0] - r[0].exp() / z).abs() < 1e-15);
            assert!((p[1] - r[1].exp() / z).abs() < 1e-15);
        }
        assert_eq!(staged[1], m.predict_proba(&x));
    }

    #[test]
    fn top_k_examples() {
        // class 0 predicted iff feature 0 present
        let m = Ensemble::from_parts(
            3,
            1.0,
            vec![0.0; 3],
            vec![vec![Tree::stump(0, 0.0, 0.0, 2.0), Tree::stump(0, 0.0, 1.0, 0.0), Tree::leaf(0.5)]],
        )
        .unwrap();
        let xs = vec![x1(), x1(), SparseVector::default(), SparseVector::default()];
        let ys = vec![0, 1, 1, 2];
        assert_eq!(m.top_k_accuracy(&xs, &ys, 1).unwrap(), 0.5);
        assert_eq!(m.top_k_accuracy(&xs, &ys, 3).unwrap(), 1.0);
        assert!(m.top_k_accuracy(&[], &[], 1).is_err());
        assert!(m.top_k_accuracy(&xs, &ys, 0).is_err());
    }

    #[test]
    fn top_k_ties_favor_lower_index() {
        let p = ProbDist::softmax(&[0.0, 0.0, 0.0]);
        assert!(in_top_k(&p, 0, 1));
        assert!(!in_top_k(&p, 1, 1));
        assert!(in_top_k(&p, 1, 2));
    }

    #[test]
    fn ragged_grid_rejected() {
        assert!(Ensemble::from_parts(2, 0.1, vec![0.0; 2], vec![vec![Tree::leaf(0.0)]]).is_err());
        assert!(Ensemble::from_parts(1, 0.1, vec![0.0], vec![vec![Tree::leaf(0.0)]]).is_err());
    }

    #[test]
    fn softmax_strictly_positive() {
        let p = ProbDist::softmax(&[0.0, -2000.0]);
        assert!(p[1] > 0.0);
        assert!((p.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
