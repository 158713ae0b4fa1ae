//! Per-contact complexity hypotheses read off the expert model.
//!
//! * length `L`: agent turns in the transcript,
//! * uncertainty `E`: entropy (nats) of the full-model class distribution,
//! * skillfulness `S`: sum over boosting rounds of `phi(i) = KL(P_i || P_M)`,
//!   where `P_i` is the prediction after the first `i` rounds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gbdt::{Ensemble, ProbDist};
use crate::textfeat::{SparseVector, Vocabulary};
use crate::transcript::{agent_sentence_length, Transcript};

const SIMPLEX_TOLERANCE: f64 = 1e-9;

fn check_simplex(p: &[f64]) -> Result<()> {
    if let Some((i, v)) = p.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
        return Err(Error::Domain(format!("entry {i} = {v} is not a probability")));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
        return Err(Error::Domain(format!("distribution sums to {sum}, not 1")));
    }
    Ok(())
}

/// Shannon entropy in nats, with `0 * ln 0 = 0`.
pub fn entropy(p: &[f64]) -> Result<f64> {
    check_simplex(p)?;
    Ok(entropy_unchecked(p))
}

fn entropy_unchecked(p: &[f64]) -> f64 {
    let h: f64 = p.iter().filter(|&&v| v > 0.0).map(|&v| -v * v.ln()).sum();
    h.max(0.0)
}

/// `KL(p || q) = sum p_k ln(p_k / q_k)` in nats, with `0 * ln(0 / q) = 0`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Domain(format!(
            "dimension mismatch: {} vs {}",
            p.len(),
            q.len()
        )));
    }
    check_simplex(p)?;
    check_simplex(q)?;
    let mut d = 0.0;
    for (k, (&pk, &qk)) in p.iter().zip(q).enumerate() {
        if pk > 0.0 {
            if qk == 0.0 {
                return Err(Error::DivergenceUndefined { index: k, p: pk });
            }
            d += pk * (pk / qk).ln();
        }
    }
    // Rounding can leave a tiny negative sum for near-identical inputs.
    Ok(d.max(0.0))
}

/// Staged distributions `P_1..P_M` and the boosting function `phi`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoostingTrace {
    pub distributions: Vec<ProbDist>,
    pub phi: Vec<f64>,
}

impl BoostingTrace {
    pub fn num_rounds(&self) -> usize {
        self.phi.len()
    }

    /// The full-model distribution `P_M`.
    pub fn final_distribution(&self) -> &ProbDist {
        self.distributions
            .last()
            .expect("a trace always holds at least one round")
    }
}

pub fn boosting_trace(m: &Ensemble, x: &SparseVector) -> BoostingTrace {
    let distributions = m.staged_proba(x);
    let last = distributions.len() - 1;
    let full = distributions[last].as_slice();
    let phi = distributions
        .iter()
        .enumerate()
        .map(|(i, p)| {
            if i == last {
                0.0
            } else {
                kl_divergence(p.as_slice(), full)
                    .expect("softmax outputs are strictly positive and normalized")
            }
        })
        .collect();
    BoostingTrace { distributions, phi }
}

/// Discrete integral of the boosting function over rounds.
pub fn skillfulness(trace: &BoostingTrace) -> f64 {
    trace.phi.iter().sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HypothesisVector {
    pub length: u64,
    pub entropy: f64,
    pub skillfulness: f64,
}

/// Hypotheses for an already-embedded contact, plus the final distribution.
pub fn hypotheses_for_vector(
    m: &Ensemble,
    length: u64,
    x: &SparseVector,
) -> (HypothesisVector, ProbDist) {
    let trace = boosting_trace(m, x);
    let s = skillfulness(&trace);
    let full = trace
        .distributions
        .into_iter()
        .last()
        .expect("a trace always holds at least one round");
    let hv = HypothesisVector {
        length,
        entropy: entropy_unchecked(full.as_slice()),
        skillfulness: s,
    };
    (hv, full)
}

pub fn compute_hypotheses(m: &Ensemble, v: &Vocabulary, t: &Transcript) -> HypothesisVector {
    hypotheses_for_vector(m, agent_sentence_length(t), &v.transform(t)).0
}
