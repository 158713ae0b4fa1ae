//! Validation procedures over scored contacts: outcome rates of the extreme
//! groups, label probabilities over 20 equal-width score bins, and
//! hypothesis histograms per complexity band.

use std::collections::{BTreeMap, HashMap};
use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scoring::ScoreRecord;
use crate::transcript::Transcript;

pub const NUM_BINS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Low,
    Normal,
    High,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::Low, Label::Normal, Label::High];

    pub fn as_str(&self) -> &'static str {
        match self {
            Label::Low => "low",
            Label::Normal => "normal",
            Label::High => "high",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "low" => Ok(Label::Low),
            "normal" => Ok(Label::Normal),
            "high" => Ok(Label::High),
            other => Err(Error::Eval(format!(
                "unknown label {other:?} (expected low, normal or high)"
            ))),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Parses an `id,label` CSV with header.
pub fn parse_labels(text: &str, path: &Path) -> Result<BTreeMap<String, Label>> {
    let mut out = BTreeMap::new();
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == "id,label" => {}
        Some((i, _)) => {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: "expected header `id,label`".into(),
            })
        }
        None => return Ok(out),
    }
    for (i, line) in lines {
        let err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let (id, label) = line
            .trim_end_matches('\r')
            .split_once(',')
            .ok_or_else(|| err(format!("expected `id,label`, got {line:?}")))?;
        let label = label.parse::<Label>().map_err(|e| err(e.to_string()))?;
        if out.insert(id.to_string(), label).is_some() {
            return Err(err(format!("duplicate label for id {id:?}")));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupMetrics {
    pub name: String,
    pub count: usize,
    pub resolved_known: usize,
    pub transferred_known: usize,
    /// `None` when no contact in the group carries the flag.
    pub resolution_rate: Option<f64>,
    pub transfer_rate: Option<f64>,
}

impl GroupMetrics {
    fn from_contacts<'a>(name: &str, contacts: impl Iterator<Item = &'a Transcript>) -> Self {
        let (mut count, mut rk, mut rt, mut tk, mut tt) = (0, 0, 0, 0, 0);
        for t in contacts {
            count += 1;
            if let Some(r) = t.resolved {
                rk += 1;
                rt += r as usize;
            }
            if let Some(x) = t.transferred {
                tk += 1;
                tt += x as usize;
            }
        }
        let rate = |hits: usize, known: usize| (known > 0).then(|| hits as f64 / known as f64);
        Self {
            name: name.to_string(),
            count,
            resolved_known: rk,
            transferred_known: tk,
            resolution_rate: rate(rt, rk),
            transfer_rate: rate(tt, tk),
        }
    }
}

/// Outcome rates for the low (`Q < low`) and high (`Q > high`) groups.
pub fn group_metrics(
    records: &[ScoreRecord],
    corpus: &[Transcript],
    low: f64,
    high: f64,
) -> Result<(GroupMetrics, GroupMetrics)> {
    let by_id: HashMap<&str, &Transcript> = corpus.iter().map(|t| (t.id.as_str(), t)).collect();
    let mut lows = Vec::new();
    let mut highs = Vec::new();
    for r in records {
        let t = by_id
            .get(r.id.as_str())
            .ok_or_else(|| Error::Eval(format!("scored contact {:?} not found in corpus", r.id)))?;
        if r.q < low {
            lows.push(*t);
        } else if r.q > high {
            highs.push(*t);
        }
    }
    Ok((
        GroupMetrics::from_contacts("low", lows.into_iter()),
        GroupMetrics::from_contacts("high", highs.into_iter()),
    ))
}

/// Bin of a relative score: left-closed intervals of width 1/20, the last one
/// closed on both sides.
pub fn bin_index(q: f64) -> usize {
    let q = q.clamp(0.0, 1.0);
    ((q * NUM_BINS as f64).floor() as usize).min(NUM_BINS - 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bin {
    pub lo: f64,
    pub hi: f64,
    pub support: usize,
    counts: [usize; 3],
}

impl Bin {
    pub fn count(&self, label: Label) -> usize {
        self.counts[label.index()]
    }

    /// Empirical label frequency, `None` for an empty bin.
    pub fn probability(&self, label: Label) -> Option<f64> {
        (self.support > 0).then(|| self.count(label) as f64 / self.support as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinCurve {
    pub bins: Vec<Bin>,
}

impl BinCurve {
    pub fn total_support(&self) -> usize {
        self.bins.iter().map(|b| b.support).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin,lo,hi,support,p_low,p_normal,p_high\n");
        for (i, b) in self.bins.iter().enumerate() {
            let p = |l| b.probability(l).map(|v| format!("{v:.6}")).unwrap_or_default();
            let _ = writeln!(
                s,
                "{},{:.6},{:.6},{},{},{},{}",
                i + 1,
                b.lo,
                b.hi,
                b.support,
                p(Label::Low),
                p(Label::Normal),
                p(Label::High)
            );
        }
        s
    }
}

/// Label frequencies per score bin. Records without a label are skipped.
pub fn binned_label_probabilities(
    records: &[ScoreRecord],
    labels: &BTreeMap<String, Label>,
) -> BinCurve {
    let mut bins: Vec<Bin> = (0..NUM_BINS)
        .map(|i| Bin {
            lo: i as f64 / NUM_BINS as f64,
            hi: (i + 1) as f64 / NUM_BINS as f64,
            support: 0,
            counts: [0; 3],
        })
        .collect();
    for r in records {
        if let Some(&label) = labels.get(&r.id) {
            let b = &mut bins[bin_index(r.q)];
            b.support += 1;
            b.counts[label.index()] += 1;
        }
    }
    BinCurve { bins }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Band {
    Low,
    Medium,
    High,
}

impl Band {
    pub const ALL: [Band; 3] = [Band::Low, Band::Medium, Band::High];

    pub fn of(q: f64, low: f64, high: f64) -> Band {
        if q < low {
            Band::Low
        } else if q > high {
            Band::High
        } else {
            Band::Medium
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Band::Low => "low",
            Band::Medium => "medium",
            Band::High => "high",
        }
    }
}

/// Equal-width histogram over `[lo, hi]`, last bin closed.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Self {
        Self {
            lo,
            hi,
            counts: vec![0; bins.max(1)],
        }
    }

    /// Histogram whose range spans the given values.
    pub fn spanning(values: impl IntoIterator<Item = f64>, bins: usize) -> Self {
        let (lo, hi) = values
            .into_iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if lo > hi {
            Self::new(0.0, 0.0, bins)
        } else {
            Self::new(lo, hi, bins)
        }
    }

    pub fn add(&mut self, v: f64) {
        let n = self.counts.len();
        let width = self.hi - self.lo;
        let i = if width > 0.0 {
            (((v - self.lo) / width * n as f64).floor().max(0.0) as usize).min(n - 1)
        } else {
            0
        };
        self.counts[i] += 1;
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn edges(&self, i: usize) -> (f64, f64) {
        let n = self.counts.len() as f64;
        let w = (self.hi - self.lo) / n;
        (self.lo + w * i as f64, self.lo + w * (i + 1) as f64)
    }
}

pub const HYPOTHESES: [&str; 3] = ["L", "E", "S"];

fn raw_hypotheses(r: &ScoreRecord) -> [f64; 3] {
    [r.length as f64, r.entropy, r.skillfulness]
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandHistograms {
    pub band: Band,
    pub count: usize,
    /// Histograms of raw L, E, S in that order, sharing edges across bands.
    pub histograms: [Histogram; 3],
    /// Mean raw L, E, S; `None` for an empty band.
    pub means: Option<[f64; 3]>,
}

pub fn hypothesis_histograms(
    records: &[ScoreRecord],
    low: f64,
    high: f64,
    bins: usize,
) -> Vec<BandHistograms> {
    let templates: [Histogram; 3] = std::array::from_fn(|k| {
        Histogram::spanning(records.iter().map(|r| raw_hypotheses(r)[k]), bins)
    });
    Band::ALL
        .iter()
        .map(|&band| {
            let mut histograms = templates.clone();
            for h in &mut histograms {
                h.counts.iter_mut().for_each(|c| *c = 0);
            }
            let mut sums = [0.0; 3];
            let mut count = 0;
            for r in records.iter().filter(|r| Band::of(r.q, low, high) == band) {
                count += 1;
                for (k, v) in raw_hypotheses(r).into_iter().enumerate() {
                    histograms[k].add(v);
                    sums[k] += v;
                }
            }
            let means = (count > 0).then(|| sums.map(|s| s / count as f64));
            BandHistograms {
                band,
                count,
                histograms,
                means,
            }
        })
        .collect()
}

pub fn histograms_to_csv(bands: &[BandHistograms]) -> String {
    let mut s = String::from("band,hypothesis,bin,lo,hi,count\n");
    for b in bands {
        for (name, h) in HYPOTHESES.iter().zip(&b.histograms) {
            for (i, c) in h.counts.iter().enumerate() {
                let (lo, hi) = h.edges(i);
                let _ = writeln!(s, "{},{name},{},{lo:.6},{hi:.6},{c}", b.band.as_str(), i + 1);
            }
        }
    }
    s
}

pub fn group_metrics_to_csv(groups: &[&GroupMetrics]) -> String {
    let mut s = String::from("group,count,resolved_known,resolution_rate,transferred_known,transfer_rate\n");
    let fmt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
    for g in groups {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            g.name,
            g.count,
            g.resolved_known,
            fmt(g.resolution_rate),
            g.transferred_known,
            fmt(g.transfer_rate)
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, q: f64) -> ScoreRecord {
        ScoreRecord {
            id: id.into(),
            length: 3,
            entropy: 0.5,
            skillfulness: 2.0,
            length_n: 0.0,
            entropy_n: 0.0,
            skillfulness_n: 0.0,
            c: 0.0,
            q,
        }
    }

    fn contact(id: &str, resolved: Option<bool>, transferred: Option<bool>) -> Transcript {
        Transcript {
            resolved,
            transferred,
            ..Transcript::new(id, vec![])
        }
    }

    #[test]
    fn high_group_resolution_rate() {
        let flags = [true, false, false, false];
        let records: Vec<ScoreRecord> = (0..4).map(|i| rec(&i.to_string(), 0.99)).collect();
        let corpus: Vec<Transcript> = (0..4)
            .map(|i| contact(&i.to_string(), Some(flags[i]), None))
            .collect();
        let (low, high) = group_metrics(&records, &corpus, 0.05, 0.95).unwrap();
        assert_eq!(low.count, 0);
        assert_eq!(high.count, 4);
        assert_eq!(high.resolution_rate, Some(0.25));
        assert_eq!(high.transfer_rate, None);
    }

    #[test]
    fn missing_flags_and_unknown_ids() {
        let (low, _) = group_metrics(&[rec("a", 0.01)], &[contact("a", None, None)], 0.05, 0.95).unwrap();
        assert_eq!((low.count, low.resolution_rate, low.transfer_rate), (1, None, None));
        assert!(group_metrics(&[rec("zz", 0.5)], &[contact("a", None, None)], 0.05, 0.95).is_err());
    }

    #[test]
    fn bin_edges() {
        assert_eq!(bin_index(0.0), 0);
        assert_eq!(bin_index(0.05), 1);
        assert_eq!(bin_index(0.999), 19);
        assert_eq!(bin_index(1.0), 19);
        assert_eq!(bin_index(1.0 - 1e-7), 19);
    }

    #[test]
    fn bin_probabilities() {
        let records = vec![rec("a", 0.31), rec("b", 0.32), rec("c", 0.9), rec("d", 0.5)];
        let mut labels = BTreeMap::new();
        labels.insert("a".to_string(), Label::Low);
        labels.insert("b".to_string(), Label::High);
        labels.insert("c".to_string(), Label::Low);
        let curve = binned_label_probabilities(&records, &labels);
        let b = &curve.bins[bin_index(0.31)];
        assert_eq!(b.probability(Label::Low), Some(0.5));
        assert_eq!(b.probability(Label::High), Some(0.5));
        assert_eq!(curve.bins[0].probability(Label::Low), None);
        assert_eq!(curve.total_support(), 3);
        for b in curve.bins.iter().filter(|b| b.support > 0) {
            let s: f64 = Label::ALL.iter().map(|&l| b.probability(l).unwrap()).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn labels_csv() {
        let p = Path::new("l.csv");
        let l = parse_labels("id,label\na,low\nb,high\n", p).unwrap();
        assert_eq!(l["b"], Label::High);
        assert!(parse_labels("id,label\na,medium\n", p).is_err());
        assert!(parse_labels("id,label\na,low\na,high\n", p).is_err());
        assert!(parse_labels("", p).unwrap().is_empty());
    }

    #[test]
    fn histograms_partition_records() {
        let single = hypothesis_histograms(&[rec("a", 0.5)], 0.05, 0.95, 10);
        let medium = &single[1];
        assert_eq!(medium.count, 1);
        for h in &medium.histograms {
            assert_eq!(h.counts.iter().filter(|&&c| c > 0).count(), 1);
        }
        let records: Vec<ScoreRecord> = (0..100).map(|i| rec(&i.to_string(), i as f64 / 99.0)).collect();
        let bands = hypothesis_histograms(&records, 0.05, 0.95, 7);
        assert_eq!(bands.iter().map(|b| b.count).sum::<usize>(), 100);
        for k in 0..3 {
            assert_eq!(bands.iter().map(|b| b.histograms[k].total()).sum::<usize>(), 100);
        }
    }
}
