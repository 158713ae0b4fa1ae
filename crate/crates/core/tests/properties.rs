use std::collections::BTreeMap;

use contact_complexity::evaluation::{bin_index, binned_label_probabilities, group_metrics, Label, NUM_BINS};
use contact_complexity::gbdt::{train, train_with_history, Ensemble, TrainConfig, Tree};
use contact_complexity::introspect::{boosting_trace, skillfulness};
use contact_complexity::routing::{RoutingConfig, RoutingDecision, RoutingSummary};
use contact_complexity::scoring::ScoreRecord;
use contact_complexity::textfeat::{SparseVector, Vocabulary};
use contact_complexity::transcript::{Speaker, Transcript, Utterance};
use proptest::prelude::*;

/// Small labeled dataset of sparse vectors over 6 features and 3 classes.
fn dataset() -> impl Strategy<Value = (Vec<SparseVector>, Vec<usize>)> {
    prop::collection::vec(
        (prop::collection::vec((0u32..6, -2.0f64..2.0), 0..5), 0usize..3),
        12..40,
    )
    .prop_map(|rows| {
        let (xs, ys): (Vec<_>, Vec<_>) = rows
            .into_iter()
            .map(|(pairs, y)| (SparseVector::from_pairs(pairs), y))
            .unzip();
        (xs, ys)
    })
}

fn sparse_input() -> impl Strategy<Value = SparseVector> {
    prop::collection::vec((0u32..6, -3.0f64..3.0), 0..6).prop_map(SparseVector::from_pairs)
}

fn small_config(rounds: usize, learning_rate: f64) -> TrainConfig {
    TrainConfig {
        rounds,
        learning_rate,
        max_depth: 3,
        min_samples_leaf: 2,
        lambda: 1.0,
    }
}

fn random_ensemble() -> impl Strategy<Value = Ensemble> {
    let tree = prop_oneof![
        (-1.0f64..1.0).prop_map(Tree::leaf),
        (0u32..6, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
            .prop_map(|(f, t, l, r)| Tree::stump(f, t, l, r)),
    ];
    (2usize..5, 1usize..8).prop_flat_map(move |(k, m)| {
        (
            prop::collection::vec(-1.0f64..1.0, k),
            prop::collection::vec(prop::collection::vec(tree.clone(), k), m),
        )
            .prop_map(move |(base, rounds)| Ensemble::from_parts(k, 0.1, base, rounds).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn training_loss_never_increases((xs, ys) in dataset(), eta in 0.01f64..=0.3) {
        let (_, history) = train_with_history(&xs, &ys, 3, &small_config(8, eta)).unwrap();
        let mut prev = history.initial_loss;
        for (i, &l) in history.round_loss.iter().enumerate() {
            prop_assert!(l <= prev + 1e-12, "round {} loss {} > {}", i + 1, l, prev);
            prev = l;
        }
    }

    #[test]
    fn training_is_deterministic((xs, ys) in dataset()) {
        let cfg = small_config(5, 0.2);
        let a = serde_json::to_string(&train(&xs, &ys, 3, &cfg).unwrap()).unwrap();
        let b = serde_json::to_string(&train(&xs, &ys, 3, &cfg).unwrap()).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn distributions_are_positive_and_normalized(m in random_ensemble(), x in sparse_input()) {
        let mut all = m.staged_proba(&x);
        all.push(m.predict_proba(&x));
        for p in &all {
            let s: f64 = p.as_slice().iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
            prop_assert!(p.as_slice().iter().all(|&v| v > 0.0));
        }
    }

    #[test]
    fn trace_ends_at_zero_and_is_nonnegative(m in random_ensemble(), x in sparse_input()) {
        let t = boosting_trace(&m, &x);
        prop_assert_eq!(t.phi.len(), m.num_rounds());
        prop_assert_eq!(t.phi[m.num_rounds() - 1].to_bits(), 0.0f64.to_bits());
        prop_assert!(t.phi.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn zero_rounds_add_nothing_once_prediction_settles(
        m in random_ensemble(),
        x in sparse_input(),
        extra in 1usize..6,
    ) {
        let k = m.num_classes();
        let mut rounds = m.rounds().to_vec();
        rounds.extend((0..extra).map(|_| vec![Tree::leaf(0.0); k]));
        let padded = Ensemble::from_parts(k, m.learning_rate(), m.base_scores().to_vec(), rounds).unwrap();
        let t = boosting_trace(&padded, &x);
        let j = m.num_rounds() - 1;
        prop_assert!(t.phi[j..].iter().all(|&v| v == 0.0));
        prop_assert_eq!(skillfulness(&t), skillfulness(&boosting_trace(&m, &x)));
    }

    #[test]
    fn idf_is_monotone_and_at_least_one(docs in prop::collection::vec(prop::collection::vec(0usize..12, 1..8), 1..25)) {
        let words = ["aa", "bb", "cc", "dd", "ee", "ff", "gg", "hh", "ii", "jj", "kk", "ll"];
        let corpus: Vec<Transcript> = docs
            .iter()
            .enumerate()
            .map(|(i, d)| {
                let text: Vec<&str> = d.iter().map(|&w| words[w]).collect();
                Transcript::new(format!("t{i}"), vec![Utterance::new(Speaker::Agent, text.join(" "))])
            })
            .collect();
        let v = Vocabulary::fit(&corpus, 100).unwrap();
        let mut pairs: Vec<(u64, f64)> = (0..v.len() as u32)
            .map(|i| {
                let tok = v.token(i).unwrap();
                (v.df(tok).unwrap(), v.idf(tok).unwrap())
            })
            .collect();
        pairs.sort_by_key(|p| p.0);
        for w in pairs.windows(2) {
            prop_assert!(w[1].1 <= w[0].1);
        }
        prop_assert!(pairs.iter().all(|&(_, idf)| idf >= 1.0));
        for t in &corpus {
            prop_assert_eq!(v.transform(t), v.transform(t));
        }
    }

    #[test]
    fn routing_partitions_and_is_idempotent(qs in prop::collection::vec(0.0f64..=1.0, 0..200)) {
        let cfg = RoutingConfig::default();
        let mut summary = RoutingSummary::default();
        for &q in &qs {
            let d = cfg.decide(q, "7");
            prop_assert_eq!(&d, &cfg.decide(q, "7"));
            summary.add(&d.0);
            if let RoutingDecision::ProductBased(queue) = &d.0 {
                prop_assert_eq!(queue.as_str(), "general");
            }
        }
        prop_assert_eq!(summary.total(), qs.len());
    }

    #[test]
    fn bins_are_total(q in 0.0f64..=1.0) {
        let b = bin_index(q);
        prop_assert!(b < NUM_BINS);
        let lo = b as f64 / NUM_BINS as f64;
        prop_assert!(q >= lo);
        prop_assert!(q < lo + 1.0 / NUM_BINS as f64 || b == NUM_BINS - 1);
    }

    #[test]
    fn evaluation_is_order_invariant_and_counts_support(
        rows in prop::collection::vec((0.0f64..=1.0, any::<Option<bool>>(), any::<Option<bool>>(), 0usize..4), 1..80),
        seed in any::<u64>(),
    ) {
        let records: Vec<ScoreRecord> = rows
            .iter()
            .enumerate()
            .map(|(i, r)| ScoreRecord {
                id: format!("c{i}"),
                length: 1,
                entropy: 0.0,
                skillfulness: 0.0,
                length_n: 0.0,
                entropy_n: 0.0,
                skillfulness_n: 0.0,
                c: r.0,
                q: r.0,
            })
            .collect();
        let corpus: Vec<Transcript> = rows
            .iter()
            .enumerate()
            .map(|(i, r)| Transcript {
                resolved: r.1,
                transferred: r.2,
                ..Transcript::new(format!("c{i}"), Vec::new())
            })
            .collect();
        let labels: BTreeMap<String, Label> = rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.3 < 3)
            .map(|(i, r)| (format!("c{i}"), Label::ALL[r.3]))
            .collect();

        let mut shuffled = records.clone();
        let n = shuffled.len();
        for i in 0..n {
            let j = (seed.wrapping_mul(i as u64 + 1) % n as u64) as usize;
            shuffled.swap(i, j);
        }
        let a = group_metrics(&records, &corpus, 0.05, 0.95).unwrap();
        let b = group_metrics(&shuffled, &corpus, 0.05, 0.95).unwrap();
        prop_assert_eq!(a, b);
        let curve = binned_label_probabilities(&shuffled, &labels);
        prop_assert_eq!(curve.total_support(), labels.len());
    }
}
