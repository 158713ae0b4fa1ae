//! Two-stage routing: contacts in the extreme complexity bands go straight to
//! junior or senior agents, everything else falls through to a
//! product-line queue chosen from the expert's predicted SIC code.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scoring::{ComplexityModel, ScoreRecord};
use crate::transcript::Transcript;

#[derive(Debug, Clone, PartialEq)]
pub struct RoutingConfig {
    low: f64,
    high: f64,
    queues: BTreeMap<String, String>,
    default_queue: String,
}

impl RoutingConfig {
    pub fn new(
        low: f64,
        high: f64,
        queues: BTreeMap<String, String>,
        default_queue: impl Into<String>,
    ) -> Result<Self> {
        let default_queue = default_queue.into();
        if !(low > 0.0 && low < high && high < 1.0) {
            return Err(Error::Config(format!(
                "routing thresholds must satisfy 0 < low < high < 1, got low={low} high={high}"
            )));
        }
        if default_queue.is_empty() {
            return Err(Error::Config("default queue name must not be empty".into()));
        }
        if let Some((sic, _)) = queues.iter().find(|(_, q)| q.is_empty()) {
            return Err(Error::Config(format!("empty queue name for sic {sic:?}")));
        }
        Ok(Self {
            low,
            high,
            queues,
            default_queue,
        })
    }

    pub fn low(&self) -> f64 {
        self.low
    }

    pub fn high(&self) -> f64 {
        self.high
    }

    pub fn default_queue(&self) -> &str {
        &self.default_queue
    }

    pub fn queues(&self) -> &BTreeMap<String, String> {
        &self.queues
    }

    /// Routing decision for a relative score and predicted SIC code. The flag
    /// is true when the SIC had no queue entry and the default queue was used.
    pub fn decide(&self, q: f64, sic: &str) -> (RoutingDecision, bool) {
        if q < self.low {
            (RoutingDecision::Junior, false)
        } else if q > self.high {
            (RoutingDecision::Senior, false)
        } else {
            match self.queues.get(sic) {
                Some(queue) => (RoutingDecision::ProductBased(queue.clone()), false),
                None => (RoutingDecision::ProductBased(self.default_queue.clone()), true),
            }
        }
    }
}

impl Default for RoutingConfig {
    fn default() -> Self {
        Self::new(0.05, 0.95, BTreeMap::new(), "general").expect("defaults are valid")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RoutingDecision {
    Junior,
    Senior,
    ProductBased(String),
}

impl RoutingDecision {
    pub fn label(&self) -> &'static str {
        match self {
            RoutingDecision::Junior => "junior",
            RoutingDecision::Senior => "senior",
            RoutingDecision::ProductBased(_) => "product",
        }
    }

    pub fn queue(&self) -> Option<&str> {
        match self {
            RoutingDecision::ProductBased(q) => Some(q),
            _ => None,
        }
    }
}

impl fmt::Display for RoutingDecision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RoutingDecision::ProductBased(q) => write!(f, "product({q})"),
            other => f.write_str(other.label()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoutedContact {
    pub record: ScoreRecord,
    pub predicted_sic: String,
    pub decision: RoutingDecision,
    pub used_default_queue: bool,
}

pub fn route(model: &ComplexityModel, cfg: &RoutingConfig, t: &Transcript) -> RoutedContact {
    let (record, p) = model.score_with_distribution(t);
    let predicted_sic = model.expert.class_label(p.argmax()).to_owned();
    let (decision, used_default_queue) = cfg.decide(record.q, &predicted_sic);
    if used_default_queue {
        log::warn!(
            "no queue mapped for sic {predicted_sic:?} (contact {}); using default queue {:?}",
            t.id,
            cfg.default_queue
        );
    }
    RoutedContact {
        record,
        predicted_sic,
        decision,
        used_default_queue,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RoutingSummary {
    pub junior: usize,
    pub senior: usize,
    pub product_based: usize,
}

impl RoutingSummary {
    pub fn total(&self) -> usize {
        self.junior + self.senior + self.product_based
    }

    pub fn add(&mut self, d: &RoutingDecision) {
        match d {
            RoutingDecision::Junior => self.junior += 1,
            RoutingDecision::Senior => self.senior += 1,
            RoutingDecision::ProductBased(_) => self.product_based += 1,
        }
    }
}

pub fn route_batch(
    model: &ComplexityModel,
    cfg: &RoutingConfig,
    corpus: &[Transcript],
) -> (Vec<RoutedContact>, RoutingSummary) {
    let routed: Vec<RoutedContact> = corpus.iter().map(|t| route(model, cfg, t)).collect();
    let mut summary = RoutingSummary::default();
    for r in &routed {
        summary.add(&r.decision);
    }
    (routed, summary)
}

/// Reads a `sic,queue` CSV (header required).
pub fn load_queue_map(path: impl AsRef<Path>) -> Result<BTreeMap<String, String>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading queue map {}", path.display()), e))?;
    parse_queue_map(&text, path)
}

pub fn parse_queue_map(text: &str, path: &Path) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, header)) if header.trim() == "sic,queue" => {}
        Some((i, _)) => {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: "expected header `sic,queue`".into(),
            })
        }
        None => return Ok(map),
    }
    for (i, line) in lines {
        let fields: Vec<&str> = line.trim_end_matches('\r').split(',').collect();
        match fields.as_slice() {
            [sic, queue] if !sic.is_empty() && !queue.is_empty() => {
                map.insert(sic.to_string(), queue.to_string());
            }
            _ => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    message: format!("expected `sic,queue`, got {line:?}"),
                })
            }
        }
    }
    Ok(map)
}
