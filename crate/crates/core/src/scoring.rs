//! Absolute and relative complexity scores.
//!
//! Each raw hypothesis is mapped to a standard normal by its own quantile map
//! fitted on the corpus, the normalized values are combined as
//! `C = w * Ln + En + Sn`, and `C` is mapped to `Q` in `[eps, 1 - eps]` by a
//! quantile map onto the uniform distribution fitted on the corpus `C` column.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expert::Expert;
use crate::gbdt::ProbDist;
use crate::introspect::HypothesisVector;
use crate::quantiles::QuantileMap;
use crate::transcript::Transcript;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ComplexityConfig {
    /// Weight on the normalized length hypothesis.
    pub w: f64,
}

impl Default for ComplexityConfig {
    fn default() -> Self {
        Self { w: 2.0 }
    }
}

impl ComplexityConfig {
    pub fn validate(&self) -> Result<()> {
        if self.w > 0.0 && self.w.is_finite() {
            Ok(())
        } else {
            Err(Error::Config(format!("w must be positive, got {}", self.w)))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub id: String,
    pub length: u64,
    pub entropy: f64,
    pub skillfulness: f64,
    pub length_n: f64,
    pub entropy_n: f64,
    pub skillfulness_n: f64,
    /// Absolute complexity score.
    pub c: f64,
    /// Relative complexity score.
    pub q: f64,
}

/// The four fitted quantile maps plus the combiner weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub length: QuantileMap,
    pub entropy: QuantileMap,
    pub skillfulness: QuantileMap,
    pub complexity: QuantileMap,
    pub config: ComplexityConfig,
}

fn normal(q: &QuantileMap, x: f64) -> f64 {
    q.to_normal(x).expect("hypotheses are finite")
}

/// Fits the per-hypothesis normalizing maps.
fn fit_hypothesis_maps(hyps: &[HypothesisVector]) -> Result<[QuantileMap; 3]> {
    let col = |f: fn(&HypothesisVector) -> f64| hyps.iter().map(f).collect::<Vec<f64>>();
    Ok([
        QuantileMap::fit(&col(|h| h.length as f64))?,
        QuantileMap::fit(&col(|h| h.entropy))?,
        QuantileMap::fit(&col(|h| h.skillfulness))?,
    ])
}

fn combine(w: f64, ln: f64, en: f64, sn: f64) -> f64 {
    w * ln + en + sn
}

impl Calibration {
    pub fn fit(hyps: &[HypothesisVector], config: ComplexityConfig) -> Result<Self> {
        config.validate()?;
        if hyps.len() < 2 {
            return Err(Error::Fit(format!(
                "scorer needs at least 2 contacts, got {}",
                hyps.len()
            )));
        }
        let [length, entropy, skillfulness] = fit_hypothesis_maps(hyps)?;
        let cs: Vec<f64> = hyps
            .iter()
            .map(|h| {
                combine(
                    config.w,
                    normal(&length, h.length as f64),
                    normal(&entropy, h.entropy),
                    normal(&skillfulness, h.skillfulness),
                )
            })
            .collect();
        let complexity = QuantileMap::fit(&cs)?;
        Ok(Self {
            length,
            entropy,
            skillfulness,
            complexity,
            config,
        })
    }

    pub fn record(&self, id: &str, h: &HypothesisVector) -> ScoreRecord {
        let length_n = normal(&self.length, h.length as f64);
        let entropy_n = normal(&self.entropy, h.entropy);
        let skillfulness_n = normal(&self.skillfulness, h.skillfulness);
        let c = combine(self.config.w, length_n, entropy_n, skillfulness_n);
        let q = self.complexity.to_uniform(c).expect("combined score is finite");
        ScoreRecord {
            id: id.to_owned(),
            length: h.length,
            entropy: h.entropy,
            skillfulness: h.skillfulness,
            length_n,
            entropy_n,
            skillfulness_n,
            c,
            q,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityModel {
    pub expert: Expert,
    pub calibration: Calibration,
}

pub fn corpus_hypotheses(expert: &Expert, corpus: &[Transcript]) -> Vec<HypothesisVector> {
    corpus.iter().map(|t| expert.hypotheses(t).0).collect()
}

pub fn fit_scorer(
    expert: Expert,
    corpus: &[Transcript],
    cfg: ComplexityConfig,
) -> Result<ComplexityModel> {
    let hyps = corpus_hypotheses(&expert, corpus);
    let calibration = Calibration::fit(&hyps, cfg)?;
    Ok(ComplexityModel {
        expert,
        calibration,
    })
}

impl ComplexityModel {
    pub fn config(&self) -> ComplexityConfig {
        self.calibration.config
    }

    /// Score record together with the expert's full-model class distribution.
    pub fn score_with_distribution(&self, t: &Transcript) -> (ScoreRecord, ProbDist) {
        let (h, p) = self.expert.hypotheses(t);
        (self.calibration.record(&t.id, &h), p)
    }

    pub fn score(&self, t: &Transcript) -> ScoreRecord {
        self.score_with_distribution(t).0
    }

    pub fn batch_score(&self, corpus: &[Transcript]) -> Vec<ScoreRecord> {
        corpus.iter().map(|t| self.score(t)).collect()
    }
}

/// Adjusted Fisher-Pearson sample skewness; `None` for fewer than 3 values
/// or zero variance.
pub fn sample_skewness(xs: &[f64]) -> Option<f64> {
    let n = xs.len();
    if n < 3 {
        return None;
    }
    let nf = n as f64;
    let mean = xs.iter().sum::<f64>() / nf;
    let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / nf;
    let m3 = xs.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / nf;
    // Zero spread up to rounding noise in the mean.
    if m2.sqrt() <= 1e-12 * mean.abs() || m2 < f64::MIN_POSITIVE {
        return None;
    }
    let g1 = m3 / m2.powf(1.5);
    Some(g1 * (nf * (nf - 1.0)).sqrt() / (nf - 2.0))
}

/// Skewness of the `C` column for each candidate weight `w`.
pub fn skewness_report(
    expert: &Expert,
    corpus: &[Transcript],
    weights: &[f64],
) -> Result<Vec<(f64, Option<f64>)>> {
    let hyps = corpus_hypotheses(expert, corpus);
    skewness_from_hypotheses(&hyps, weights)
}

pub fn skewness_from_hypotheses(
    hyps: &[HypothesisVector],
    weights: &[f64],
) -> Result<Vec<(f64, Option<f64>)>> {
    if hyps.len() < 3 {
        return Err(Error::Fit(format!(
            "skewness report needs at least 3 contacts, got {}",
            hyps.len()
        )));
    }
    let [lq, eq, sq] = fit_hypothesis_maps(hyps)?;
    let normalized: Vec<[f64; 3]> = hyps
        .iter()
        .map(|h| {
            [
                normal(&lq, h.length as f64),
                normal(&eq, h.entropy),
                normal(&sq, h.skillfulness),
            ]
        })
        .collect();
    weights
        .iter()
        .map(|&w| {
            ComplexityConfig { w }.validate()?;
            let cs: Vec<f64> = normalized.iter().map(|n| combine(w, n[0], n[1], n[2])).collect();
            Ok((w, sample_skewness(&cs)))
        })
        .collect()
}
