//! Exact greedy tree learner over presorted sparse columns.
//!
//! Each level of a tree is grown with one pass over every column: the
//! negative part of a column is scanned ascending (accumulating the left
//! side), the positive part descending (accumulating the right side), and the
//! implicit zeros are recovered from node totals. Split ties resolve to the
//! lowest feature index, then the lowest threshold.

use std::collections::BTreeSet;

use super::tree::{to_preorder, BuildNode, Tree};
use super::{Ensemble, ProbDist, TrainConfig};
use crate::error::{Error, Result};
use crate::textfeat::SparseVector;

const NO_SLOT: u32 = u32::MAX;
const MIN_HESSIAN: f64 = 1e-16;
const MIN_SPLIT_GAIN: f64 = 1e-12;

/// Mean training log-loss before the first round and after every round.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainHistory {
    pub initial_loss: f64,
    pub round_loss: Vec<f64>,
}

/// Column-major copy of the design matrix; each column sorted by value.
struct Columns {
    ptr: Vec<usize>,
    /// First entry of each column with a positive value.
    pos_start: Vec<usize>,
    rows: Vec<u32>,
    vals: Vec<f64>,
}

impl Columns {
    fn build(xs: &[SparseVector]) -> Self {
        let num_features = xs
            .iter()
            .filter_map(|x| x.entries().last().map(|&(i, _)| i as usize + 1))
            .max()
            .unwrap_or(0);
        let mut counts = vec![0usize; num_features + 1];
        for x in xs {
            for &(i, _) in x.entries() {
                counts[i as usize + 1] += 1;
            }
        }
        let mut ptr = counts;
        for f in 0..num_features {
            ptr[f + 1] += ptr[f];
        }
        let nnz = ptr[num_features];
        let mut fill = ptr.clone();
        let mut rows = vec![0u32; nnz];
        let mut vals = vec![0f64; nnz];
        for (r, x) in xs.iter().enumerate() {
            for &(i, v) in x.entries() {
                let at = fill[i as usize];
                rows[at] = r as u32;
                vals[at] = v;
                fill[i as usize] += 1;
            }
        }
        let mut pos_start = Vec::with_capacity(num_features);
        let mut scratch: Vec<(f64, u32)> = Vec::new();
        for f in 0..num_features {
            let (lo, hi) = (ptr[f], ptr[f + 1]);
            scratch.clear();
            scratch.extend((lo..hi).map(|e| (vals[e], rows[e])));
            scratch.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            for (k, &(v, r)) in scratch.iter().enumerate() {
                vals[lo + k] = v;
                rows[lo + k] = r;
            }
            pos_start.push(lo + scratch.partition_point(|&(v, _)| v < 0.0));
        }
        Self {
            ptr,
            pos_start,
            rows,
            vals,
        }
    }

    fn num_features(&self) -> usize {
        self.pos_start.len()
    }
}

#[derive(Debug, Clone, Copy)]
struct NodeStats {
    count: usize,
    g: f64,
    h: f64,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: u32,
    threshold: f64,
}

impl Candidate {
    fn beats(&self, other: &Option<Candidate>) -> bool {
        match other {
            None => true,
            Some(o) => {
                self.gain > o.gain
                    || (self.gain == o.gain
                        && (self.feature, self.threshold) < (o.feature, o.threshold))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Scan {
    stamp: usize,
    count: usize,
    g: f64,
    h: f64,
    prev: f64,
}

struct Grower<'a> {
    cols: &'a Columns,
    xs: &'a [SparseVector],
    cfg: &'a TrainConfig,
}

impl Grower<'_> {
    fn score(&self, g: f64, h: f64) -> f64 {
        g * g / (h + self.cfg.lambda)
    }

    fn leaf_value(&self, s: &NodeStats) -> f64 {
        -s.g / (s.h + self.cfg.lambda) * self.cfg.learning_rate
    }

    fn consider(
        &self,
        best: &mut Option<Candidate>,
        parent: &NodeStats,
        left: (usize, f64, f64),
        feature: u32,
        threshold: f64,
    ) {
        let (lc, lg, lh) = left;
        let rc = parent.count - lc;
        let min = self.cfg.min_samples_leaf;
        if lc < min || rc < min {
            return;
        }
        let (rg, rh) = (parent.g - lg, parent.h - lh);
        let gain = self.score(lg, lh) + self.score(rg, rh) - self.score(parent.g, parent.h);
        if gain <= MIN_SPLIT_GAIN {
            return;
        }
        let cand = Candidate {
            gain,
            feature,
            threshold,
        };
        if cand.beats(best) {
            *best = Some(cand);
        }
    }

    /// Best split per level node; `None` where no admissible split exists.
    fn find_splits(
        &self,
        level: &[NodeStats],
        splittable: &[bool],
        slot_of_row: &[u32],
        g: &[f64],
        h: &[f64],
    ) -> Vec<Option<Candidate>> {
        let cols = self.cols;
        let mut best: Vec<Option<Candidate>> = vec![None; level.len()];
        let mut neg = vec![Scan::default(); level.len()];
        let mut pos = vec![Scan::default(); level.len()];
        let mut touched: Vec<usize> = Vec::new();

        for f in 0..cols.num_features() {
            let stamp = f + 1;
            let feature = f as u32;

            // Negative values, ascending: the scan accumulates the left side.
            touched.clear();
            for e in cols.ptr[f]..cols.pos_start[f] {
                let row = cols.rows[e] as usize;
                let s = slot_of_row[row];
                if s == NO_SLOT || !splittable[s as usize] {
                    continue;
                }
                let s = s as usize;
                let v = cols.vals[e];
                let st = &mut neg[s];
                if st.stamp != stamp {
                    *st = Scan {
                        stamp,
                        ..Scan::default()
                    };
                    touched.push(s);
                } else if v != st.prev {
                    let left = (st.count, st.g, st.h);
                    let threshold = st.prev;
                    self.consider(&mut best[s], &level[s], left, feature, threshold);
                }
                let st = &mut neg[s];
                st.count += 1;
                st.g += g[row];
                st.h += h[row];
                st.prev = v;
            }
            for &s in &touched {
                let st = neg[s];
                self.consider(&mut best[s], &level[s], (st.count, st.g, st.h), feature, st.prev);
            }

            // Positive values, descending: the scan accumulates the right side.
            touched.clear();
            for e in (cols.pos_start[f]..cols.ptr[f + 1]).rev() {
                let row = cols.rows[e] as usize;
                let s = slot_of_row[row];
                if s == NO_SLOT || !splittable[s as usize] {
                    continue;
                }
                let s = s as usize;
                let v = cols.vals[e];
                let st = &mut pos[s];
                if st.stamp != stamp {
                    *st = Scan {
                        stamp,
                        ..Scan::default()
                    };
                    touched.push(s);
                } else if v != st.prev {
                    let p = &level[s];
                    let left = (p.count - st.count, p.g - st.g, p.h - st.h);
                    self.consider(&mut best[s], p, left, feature, v);
                }
                let st = &mut pos[s];
                st.count += 1;
                st.g += g[row];
                st.h += h[row];
                st.prev = v;
            }
            for &s in &touched {
                let st = pos[s];
                let p = &level[s];
                let negatives = if neg[s].stamp == stamp { neg[s].count } else { 0 };
                if p.count - st.count - negatives > 0 {
                    let left = (p.count - st.count, p.g - st.g, p.h - st.h);
                    self.consider(&mut best[s], p, left, feature, 0.0);
                }
            }
        }
        best
    }

    /// Grows one tree and writes each row's leaf value into `row_value`.
    fn grow(&self, g: &[f64], h: &[f64], row_value: &mut [f64]) -> Tree {
        let n = self.xs.len();
        let mut slot_of_row = vec![0u32; n];
        let mut arena = vec![BuildNode::Leaf(0.0)];
        let mut level_arena = vec![0usize];
        let mut level = vec![NodeStats {
            count: n,
            g: g.iter().sum(),
            h: h.iter().sum(),
        }];

        for depth in 0..=self.cfg.max_depth {
            if level.is_empty() {
                break;
            }
            let splittable: Vec<bool> = level
                .iter()
                .map(|p| depth < self.cfg.max_depth && p.count >= 2 * self.cfg.min_samples_leaf)
                .collect();
            let best = if splittable.iter().any(|&b| b) {
                self.find_splits(&level, &splittable, &slot_of_row, g, h)
            } else {
                vec![None; level.len()]
            };

            // Slot routing for this level: Ok((feature, threshold, left, right)) or Err(leaf value).
            let mut route: Vec<std::result::Result<(u32, f64, u32, u32), f64>> =
                Vec::with_capacity(level.len());
            let mut next_arena = Vec::new();
            for (s, cand) in best.iter().enumerate() {
                match cand {
                    Some(c) => {
                        let (la, ra) = (arena.len(), arena.len() + 1);
                        arena.push(BuildNode::Leaf(0.0));
                        arena.push(BuildNode::Leaf(0.0));
                        arena[level_arena[s]] = BuildNode::Split {
                            feature: c.feature,
                            threshold: c.threshold,
                            left: la,
                            right: ra,
                        };
                        let ls = next_arena.len() as u32;
                        next_arena.push(la);
                        next_arena.push(ra);
                        route.push(Ok((c.feature, c.threshold, ls, ls + 1)));
                    }
                    None => {
                        let v = self.leaf_value(&level[s]);
                        arena[level_arena[s]] = BuildNode::Leaf(v);
                        route.push(Err(v));
                    }
                }
            }

            let mut next = vec![
                NodeStats {
                    count: 0,
                    g: 0.0,
                    h: 0.0
                };
                next_arena.len()
            ];
            for row in 0..n {
                let s = slot_of_row[row];
                if s == NO_SLOT {
                    continue;
                }
                match route[s as usize] {
                    Ok((f, t, ls, rs)) => {
                        let ns = if self.xs[row].get(f) <= t { ls } else { rs };
                        slot_of_row[row] = ns;
                        let st = &mut next[ns as usize];
                        st.count += 1;
                        st.g += g[row];
                        st.h += h[row];
                    }
                    Err(v) => {
                        row_value[row] = v;
                        slot_of_row[row] = NO_SLOT;
                    }
                }
            }
            level = next;
            level_arena = next_arena;
        }
        to_preorder(&arena)
    }
}

fn log_loss(probs: &[f64], ys: &[usize], k: usize) -> f64 {
    let total: f64 = ys
        .iter()
        .enumerate()
        .map(|(i, &y)| -probs[i * k + y].ln())
        .sum();
    total / ys.len() as f64
}

fn fill_probs(margins: &[f64], k: usize, probs: &mut [f64]) {
    for (m, p) in margins.chunks(k).zip(probs.chunks_mut(k)) {
        p.copy_from_slice(ProbDist::softmax(m).as_slice());
    }
}

pub fn train(
    xs: &[SparseVector],
    ys: &[usize],
    num_classes: usize,
    cfg: &TrainConfig,
) -> Result<Ensemble> {
    train_with_history(xs, ys, num_classes, cfg).map(|(m, _)| m)
}

pub fn train_with_history(
    xs: &[SparseVector],
    ys: &[usize],
    num_classes: usize,
    cfg: &TrainConfig,
) -> Result<(Ensemble, TrainHistory)> {
    cfg.validate()?;
    if xs.is_empty() {
        return Err(Error::Train("empty training set".into()));
    }
    if xs.len() != ys.len() {
        return Err(Error::Train(format!("{} inputs but {} labels", xs.len(), ys.len())));
    }
    if num_classes < 2 {
        return Err(Error::Train(format!("need at least 2 classes, got {num_classes}")));
    }
    if let Some(&bad) = ys.iter().find(|&&y| y >= num_classes) {
        return Err(Error::Train(format!(
            "label {bad} out of range for {num_classes} classes"
        )));
    }
    let distinct: BTreeSet<usize> = ys.iter().copied().collect();
    if distinct.len() < 2 {
        return Err(Error::Train("training labels contain fewer than 2 distinct classes".into()));
    }

    let n = xs.len();
    let k = num_classes;
    let mut counts = vec![0usize; k];
    for &y in ys {
        counts[y] += 1;
    }
    // Log class prior; absent classes get half a pseudo-count.
    let base_scores: Vec<f64> = counts
        .iter()
        .map(|&c| {
            let c = if c == 0 { 0.5 } else { c as f64 };
            (c / n as f64).ln()
        })
        .collect();

    let cols = Columns::build(xs);
    let grower = Grower {
        cols: &cols,
        xs,
        cfg,
    };

    let mut margins: Vec<f64> = (0..n).flat_map(|_| base_scores.iter().copied()).collect();
    let mut probs = vec![0.0; n * k];
    fill_probs(&margins, k, &mut probs);
    let initial_loss = log_loss(&probs, ys, k);

    let mut rounds = Vec::with_capacity(cfg.rounds);
    let mut round_loss = Vec::with_capacity(cfg.rounds);
    let mut g = vec![0.0; n];
    let mut h = vec![0.0; n];
    let mut updates = vec![0.0; n * k];
    for _ in 0..cfg.rounds {
        let mut trees = Vec::with_capacity(k);
        let mut row_value = vec![0.0; n];
        for class in 0..k {
            for i in 0..n {
                let p = probs[i * k + class];
                let target = if ys[i] == class { 1.0 } else { 0.0 };
                g[i] = p - target;
                h[i] = (p * (1.0 - p)).max(MIN_HESSIAN);
            }
            trees.push(grower.grow(&g, &h, &mut row_value));
            for i in 0..n {
                updates[i * k + class] = row_value[i];
            }
        }
        for (m, u) in margins.iter_mut().zip(&updates) {
            *m += u;
        }
        fill_probs(&margins, k, &mut probs);
        round_loss.push(log_loss(&probs, ys, k));
        rounds.push(trees);
    }

    let model = Ensemble::from_parts(k, cfg.learning_rate, base_scores, rounds)?;
    Ok((
        model,
        TrainHistory {
            initial_loss,
            round_loss,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sv(pairs: &[(u32, f64)]) -> SparseVector {
        SparseVector::from_pairs(pairs.iter().copied())
    }

    fn cfg(rounds: usize) -> TrainConfig {
        TrainConfig {
            rounds,
            min_samples_leaf: 1,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn separable_binary_feature() {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..20 {
            if i % 2 == 0 {
                xs.push(sv(&[(0, 1.0)]));
                ys.push(1);
            } else {
                xs.push(sv(&[]));
                ys.push(0);
            }
        }
        let m = train(&xs, &ys, 2, &cfg(5)).unwrap();
        assert_eq!(m.top_k_accuracy(&xs, &ys, 1).unwrap(), 1.0);
        // the learned split is "feature 0 <= 0"
        match m.rounds()[0][0].nodes()[0] {
            super::super::TreeNode::Split { feature, threshold, .. } => {
                assert_eq!((feature, threshold), (0, 0.0));
            }
            other => panic!("expected a split, got {other:?}"),
        }
    }

    #[test]
    fn negative_values_split_correctly() {
        // class 1 iff feature 0 is negative; zeros and positives are class 0
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..30 {
            match i % 3 {
                0 => {
                    xs.push(sv(&[(0, -1.0 - i as f64 * 0.01)]));
                    ys.push(1);
                }
                1 => {
                    xs.push(sv(&[]));
                    ys.push(0);
                }
                _ => {
                    xs.push(sv(&[(0, 0.5)]));
                    ys.push(0);
                }
            }
        }
        let m = train(&xs, &ys, 2, &cfg(10)).unwrap();
        assert_eq!(m.top_k_accuracy(&xs, &ys, 1).unwrap(), 1.0);
    }

    #[test]
    fn single_round_staged_equals_full() {
        let xs = vec![sv(&[(0, 0.3)]), sv(&[(1, 0.9)]), sv(&[]), sv(&[(0, 0.1), (1, 0.2)])];
        let ys = vec![0, 1, 2, 0];
        let m = train(&xs, &ys, 3, &cfg(1)).unwrap();
        for x in &xs {
            assert_eq!(m.staged_proba(x), vec![m.predict_proba(x)]);
        }
    }

    #[test]
    fn invalid_inputs() {
        let xs = vec![sv(&[(0, 1.0)]), sv(&[])];
        assert!(matches!(train(&xs, &[0, 2], 2, &cfg(1)), Err(Error::Train(_))));
        assert!(matches!(train(&xs, &[1, 1], 2, &cfg(1)), Err(Error::Train(_))));
        assert!(matches!(train(&[], &[], 2, &cfg(1)), Err(Error::Train(_))));
        assert!(train(&xs, &[0, 1], 2, &TrainConfig { rounds: 0, ..cfg(1) }).is_err());
    }

    #[test]
    fn base_score_reproduces_prior() {
        let xs = vec![sv(&[]); 4];
        let ys = vec![0, 0, 0, 1];
        let m = train(&xs, &ys, 2, &cfg(1)).unwrap();
        assert!((m.base_scores()[0] - 0.75f64.ln()).abs() < 1e-15);
        assert!((m.base_scores()[1] - 0.25f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn root_split_matches_brute_force_search() {
        // 3 features, distinct values; brute force every (feature, threshold)
        let data: Vec<Vec<(u32, f64)>> = vec![
            vec![(0, 0.2), (1, 0.5)],
            vec![(0, 0.7)],
            vec![(1, 0.1), (2, 0.4)],
            vec![(2, 0.9)],
            vec![(0, 0.4), (2, 0.3)],
            vec![],
            vec![(1, 0.8)],
            vec![(0, 0.9), (1, 0.3)],
        ];
        let xs: Vec<SparseVector> = data.iter().map(|d| sv(d)).collect();
        let g = [0.3, -0.8, 0.1, 0.5, -0.2, 0.4, -0.6, 0.7];
        let h = [0.2, 0.1, 0.25, 0.2, 0.15, 0.24, 0.1, 0.2];
        let cfg = TrainConfig {
            max_depth: 1,
            min_samples_leaf: 2,
            lambda: 1.0,
            learning_rate: 1.0,
            rounds: 1,
        };
        let score = |gs: f64, hs: f64| gs * gs / (hs + 1.0);
        let (gt, ht): (f64, f64) = (g.iter().sum(), h.iter().sum());
        let mut best: Option<(f64, u32, f64)> = None;
        for f in 0..3u32 {
            let mut thresholds: Vec<f64> = xs.iter().map(|x| x.get(f)).collect();
            thresholds.sort_by(f64::total_cmp);
            thresholds.dedup();
            for &t in &thresholds {
                let left: Vec<usize> = (0..8).filter(|&i| xs[i].get(f) <= t).collect();
                if left.len() < 2 || 8 - left.len() < 2 {
                    continue;
                }
                let lg: f64 = left.iter().map(|&i| g[i]).sum();
                let lh: f64 = left.iter().map(|&i| h[i]).sum();
                let gain = score(lg, lh) + score(gt - lg, ht - lh) - score(gt, ht);
                if best.is_none_or(|b| gain > b.0 + 1e-12) {
                    best = Some((gain, f, t));
                }
            }
        }
        let (_, bf, bt) = best.unwrap();
        let cols = Columns::build(&xs);
        let grower = Grower { cols: &cols, xs: &xs, cfg: &cfg };
        let mut rv = vec![0.0; 8];
        let tree = grower.grow(&g, &h, &mut rv);
        match tree.nodes()[0] {
            super::super::TreeNode::Split { feature, threshold, .. } => {
                assert_eq!((feature, threshold), (bf, bt));
            }
            other => panic!("expected split, got {other:?}"),
        }
        for (i, x) in xs.iter().enumerate() {
            assert_eq!(rv[i], tree.eval(x));
        }
    }
}
