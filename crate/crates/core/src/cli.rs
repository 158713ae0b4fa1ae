//! Command implementations behind the `contact-complexity` binary.
//!
//! Every command reads its inputs, computes, and writes its outputs; none of
//! them touches its input files. Configs are TOML files whose keys mirror the
//! `*Settings` structs below; omitted keys take their defaults.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{
    binned_label_probabilities, group_metrics, group_metrics_to_csv, histograms_to_csv,
    hypothesis_histograms, parse_labels, BandHistograms, BinCurve, GroupMetrics,
};
use crate::expert::{train_expert, ExpertConfig, ExpertReport};
use crate::introspect::boosting_trace;
use crate::model_file;
use crate::routing::{load_queue_map, route_batch, RoutedContact, RoutingConfig, RoutingSummary};
use crate::scoring::{fit_scorer, skewness_report, ComplexityConfig, ScoreRecord};
use crate::synth::{corpus_stats, generate_corpus, CorpusStats, SynthConfig};
use crate::transcript::{parse_corpus, save_corpus, Transcript};

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const USAGE: i32 = 1;
    pub const DATA: i32 = 2;
    pub const INTERNAL: i32 = 3;
}

/// Exit code for a failed command: bad inputs map to `DATA`, failed file
/// system operations to `INTERNAL`.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_data_error() {
        exit::DATA
    } else {
        exit::INTERNAL
    }
}

/// Reads a TOML config, or returns the defaults when no path is given.
pub fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading config {}", path.display()), e))?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path)
        .map_err(|e| Error::io(format!("creating directory {}", path.display()), e))
}

fn check_csv_id(id: &str) -> Result<()> {
    if id.contains([',', '\n', '\r', '"']) {
        return Err(Error::Corpus(format!(
            "contact id {id:?} cannot be written to CSV (contains a separator or quote)"
        )));
    }
    Ok(())
}

pub const CORPUS_FILE: &str = "corpus.jsonl";
pub const LABELS_FILE: &str = "labels.csv";

#[derive(Debug, Clone)]
pub struct GenOutput {
    pub corpus_path: PathBuf,
    pub labels_path: PathBuf,
    pub stats: CorpusStats,
}

/// Generates a synthetic corpus into `out_dir` as `corpus.jsonl` and `labels.csv`.
pub fn cmd_gen(cfg: &SynthConfig, out_dir: &Path) -> Result<GenOutput> {
    let corpus = generate_corpus(cfg)?;
    create_dir(out_dir)?;
    let corpus_path = out_dir.join(CORPUS_FILE);
    let labels_path = out_dir.join(LABELS_FILE);
    save_corpus(&corpus_path, &corpus.transcripts)?;
    write_file(&labels_path, &corpus.labels_csv())?;
    Ok(GenOutput {
        corpus_path,
        labels_path,
        stats: corpus_stats(&corpus.transcripts, None),
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub expert: ExpertConfig,
    pub scoring: ComplexityConfig,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub report: ExpertReport,
    pub checksum: String,
}

/// Trains the expert on the training split, fits the scorer on the whole
/// corpus and saves the model.
pub fn cmd_train(corpus_path: &Path, settings: &TrainSettings, model_out: &Path) -> Result<TrainOutput> {
    settings.scoring.validate()?;
    let corpus = parse_corpus(corpus_path)?;
    let (expert, report) = train_expert(&corpus, &settings.expert)?;
    let model = fit_scorer(expert, &corpus, settings.scoring)?;
    let encoded = model_file::encode(&model)?;
    write_file(model_out, &encoded)?;
    let body = encoded.splitn(4, '\n').nth(3).unwrap_or("").trim_end();
    Ok(TrainOutput {
        report,
        checksum: model_file::checksum(body.as_bytes()),
    })
}

pub const SCORE_HEADER: &str = "id,L,E,S,Ln,En,Sn,C,Q";

pub fn scores_to_csv(records: &[ScoreRecord]) -> Result<String> {
    let mut s = format!("{SCORE_HEADER}\n");
    for r in records {
        check_csv_id(&r.id)?;
        let _ = writeln!(
            s,
            "{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            r.id, r.length, r.entropy, r.skillfulness, r.length_n, r.entropy_n, r.skillfulness_n, r.c, r.q
        );
    }
    Ok(s)
}

pub fn parse_scores_csv(text: &str, path: &Path) -> Result<Vec<ScoreRecord>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == SCORE_HEADER => {}
        Some((i, _)) => {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: format!("expected header `{SCORE_HEADER}`"),
            })
        }
        None => return Ok(Vec::new()),
    }
    lines
        .map(|(i, line)| {
            let err = |message: String| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message,
            };
            let f: Vec<&str> = line.trim_end_matches('\r').split(',').collect();
            if f.len() != 9 {
                return Err(err(format!("expected 9 fields, got {}", f.len())));
            }
            let num = |k: usize| {
                f[k].parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| err(format!("field {k} is not a finite number: {:?}", f[k])))
            };
            Ok(ScoreRecord {
                id: f[0].to_string(),
                length: f[1]
                    .parse()
                    .map_err(|_| err(format!("L is not a non-negative integer: {:?}", f[1])))?,
                entropy: num(2)?,
                skillfulness: num(3)?,
                length_n: num(4)?,
                entropy_n: num(5)?,
                skillfulness_n: num(6)?,
                c: num(7)?,
                q: num(8)?,
            })
        })
        .collect()
}

/// Scores every contact of a corpus; returns the records written.
pub fn cmd_score(model_path: &Path, corpus_path: &Path, out: &Path) -> Result<Vec<ScoreRecord>> {
    let model = model_file::load(model_path)?;
    let corpus = parse_corpus(corpus_path)?;
    let records = model.batch_score(&corpus);
    write_file(out, &scores_to_csv(&records)?)?;
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoutingSettings {
    pub t_lo: f64,
    pub t_hi: f64,
    pub default_queue: String,
    /// `sic,queue` CSV; relative paths resolve against the config file's directory.
    pub queue_map: Option<PathBuf>,
}

impl Default for RoutingSettings {
    fn default() -> Self {
        Self {
            t_lo: 0.05,
            t_hi: 0.95,
            default_queue: "general".into(),
            queue_map: None,
        }
    }
}

impl RoutingSettings {
    pub fn load(path: Option<&Path>) -> Result<RoutingConfig> {
        let mut s: RoutingSettings = load_config(path)?;
        if let (Some(q), Some(cfg)) = (&s.queue_map, path) {
            if q.is_relative() {
                let base = cfg.parent().unwrap_or(Path::new(""));
                s.queue_map = Some(base.join(q));
            }
        }
        s.into_config()
    }

    pub fn into_config(self) -> Result<RoutingConfig> {
        let queues = match &self.queue_map {
            Some(p) => load_queue_map(p)?,
            None => BTreeMap::new(),
        };
        RoutingConfig::new(self.t_lo, self.t_hi, queues, self.default_queue)
    }
}

pub const ROUTE_HEADER: &str = "id,Q,decision,queue";

pub fn routes_to_csv(routed: &[RoutedContact]) -> Result<String> {
    let mut s = format!("{ROUTE_HEADER}\n");
    for r in routed {
        check_csv_id(&r.record.id)?;
        let queue = r.decision.queue().unwrap_or("");
        check_csv_id(queue)?;
        let _ = writeln!(s, "{},{:.6},{},{}", r.record.id, r.record.q, r.decision.label(), queue);
    }
    Ok(s)
}

pub fn cmd_route(
    model_path: &Path,
    corpus_path: &Path,
    cfg: &RoutingConfig,
    out: &Path,
) -> Result<RoutingSummary> {
    let model = model_file::load(model_path)?;
    let corpus = parse_corpus(corpus_path)?;
    let (routed, summary) = route_batch(&model, cfg, &corpus);
    write_file(out, &routes_to_csv(&routed)?)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    pub t_lo: f64,
    pub t_hi: f64,
    pub histogram_bins: usize,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            t_lo: 0.05,
            t_hi: 0.95,
            histogram_bins: 20,
        }
    }
}

impl EvalSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_lo > 0.0 && self.t_lo < self.t_hi && self.t_hi < 1.0) {
            return Err(Error::Config(format!(
                "thresholds must satisfy 0 < t_lo < t_hi < 1, got {} and {}",
                self.t_lo, self.t_hi
            )));
        }
        if self.histogram_bins < 1 {
            return Err(Error::Config("histogram_bins must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct EvalOutput {
    pub low: GroupMetrics,
    pub high: GroupMetrics,
    pub curve: BinCurve,
    pub histograms: Vec<BandHistograms>,
}

/// Writes `group_metrics.csv`, `bin_curve.csv` and `histograms.csv` into `out_dir`.
pub fn cmd_eval(
    scores_path: &Path,
    labels_path: &Path,
    corpus_path: &Path,
    settings: &EvalSettings,
    out_dir: &Path,
) -> Result<EvalOutput> {
    settings.validate()?;
    let read = |p: &Path, what: &str| {
        fs::read_to_string(p).map_err(|e| Error::io(format!("reading {what} {}", p.display()), e))
    };
    let records = parse_scores_csv(&read(scores_path, "scores")?, scores_path)?;
    let labels = parse_labels(&read(labels_path, "labels")?, labels_path)?;
    if labels.is_empty() {
        return Err(Error::Eval(format!("labels file {} is empty", labels_path.display())));
    }
    let corpus = parse_corpus(corpus_path)?;
    let (low, high) = group_metrics(&records, &corpus, settings.t_lo, settings.t_hi)?;
    let curve = binned_label_probabilities(&records, &labels);
    let histograms = hypothesis_histograms(&records, settings.t_lo, settings.t_hi, settings.histogram_bins);

    create_dir(out_dir)?;
    write_file(&out_dir.join("group_metrics.csv"), &group_metrics_to_csv(&[&low, &high]))?;
    write_file(&out_dir.join("bin_curve.csv"), &curve.to_csv())?;
    write_file(&out_dir.join("histograms.csv"), &histograms_to_csv(&histograms))?;
    Ok(EvalOutput {
        low,
        high,
        curve,
        histograms,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSettings {
    pub t_lo: f64,
    pub t_hi: f64,
    pub histogram_bins: usize,
    /// Candidate length weights for the skewness sweep.
    pub weights: Vec<f64>,
}

impl Default for ReportSettings {
    fn default() -> Self {
        Self {
            t_lo: 0.05,
            t_hi: 0.95,
            histogram_bins: 20,
            weights: vec![1.0, 2.0, 3.0],
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReportOutput {
    pub traces_written: usize,
    pub histograms: Vec<BandHistograms>,
    pub skewness: Vec<(f64, Option<f64>)>,
}

/// File-system-safe stem for a contact id.
fn trace_stem(id: &str) -> String {
    let s: String = id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect();
    if s.is_empty() || s.starts_with('.') {
        format!("_{s}")
    } else {
        s
    }
}

pub fn trace_csv(phi: &[f64]) -> String {
    let mut s = String::from("round,phi\n");
    for (i, v) in phi.iter().enumerate() {
        let _ = writeln!(s, "{},{v:.6}", i + 1);
    }
    s
}

/// Writes per-contact boosting-function traces under `traces/`, band
/// histograms of the raw hypotheses in `histograms.csv` and the skewness of
/// `C` for each candidate weight in `skewness.csv`.
pub fn cmd_report(
    model_path: &Path,
    corpus_path: &Path,
    settings: &ReportSettings,
    out_dir: &Path,
) -> Result<ReportOutput> {
    EvalSettings {
        t_lo: settings.t_lo,
        t_hi: settings.t_hi,
        histogram_bins: settings.histogram_bins,
    }
    .validate()?;
    let model = model_file::load(model_path)?;
    let corpus: Vec<Transcript> = parse_corpus(corpus_path)?;
    let skewness = skewness_report(&model.expert, &corpus, &settings.weights)?;

    let trace_dir = out_dir.join("traces");
    create_dir(&trace_dir)?;
    let mut used = BTreeMap::new();
    for (i, t) in corpus.iter().enumerate() {
        let trace = boosting_trace(&model.expert.ensemble, &model.expert.embed(t));
        let mut stem = trace_stem(&t.id);
        if used.insert(stem.clone(), i).is_some() {
            stem = format!("{stem}~{i}");
        }
        write_file(&trace_dir.join(format!("{stem}.csv")), &trace_csv(&trace.phi))?;
    }

    let records = model.batch_score(&corpus);
    let histograms = hypothesis_histograms(&records, settings.t_lo, settings.t_hi, settings.histogram_bins);
    write_file(&out_dir.join("histograms.csv"), &histograms_to_csv(&histograms))?;

    let mut sk = String::from("w,skewness\n");
    for (w, g) in &skewness {
        let _ = writeln!(sk, "{w:.6},{}", g.map(|v| format!("{v:.6}")).unwrap_or_default());
    }
    write_file(&out_dir.join("skewness.csv"), &sk)?;
    Ok(ReportOutput {
        traces_written: corpus.len(),
        histograms,
        skewness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str) -> ScoreRecord {
        ScoreRecord {
            id: id.into(),
            length: 7,
            entropy: 0.25,
            skillfulness: 1.5,
            length_n: -0.1,
            entropy_n: 0.2,
            skillfulness_n: 0.3,
            c: 0.3,
            q: 0.55,
        }
    }

    #[test]
    fn score_csv_round_trip() {
        let csv = scores_to_csv(&[rec("a"), rec("b")]).unwrap();
        assert!(csv.starts_with("id,L,E,S,Ln,En,Sn,C,Q\na,7,0.250000,"));
        let back = parse_scores_csv(&csv, Path::new("s.csv")).unwrap();
        assert_eq!(back, vec![rec("a"), rec("b")]);
    }

    #[test]
    fn score_csv_rejects_bad_rows() {
        let p = Path::new("s.csv");
        assert!(parse_scores_csv("nope\n", p).is_err());
        let bad = format!("{SCORE_HEADER}\nx,1,2\n");
        match parse_scores_csv(&bad, p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        let nan = format!("{SCORE_HEADER}\nx,1,NaN,0,0,0,0,0,0.5\n");
        assert!(parse_scores_csv(&nan, p).is_err());
        assert!(scores_to_csv(&[rec("a,b")]).is_err());
    }

    #[test]
    fn trace_stems_are_safe() {
        assert_eq!(trace_stem("easy-00001"), "easy-00001");
        assert_eq!(trace_stem("../x/y"), "_.._x_y");
        assert_eq!(trace_stem(""), "_");
    }

    #[test]
    fn trace_csv_has_one_row_per_round() {
        let csv = trace_csv(&[0.5, 0.25, 0.0]);
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.ends_with("3,0.000000\n"));
    }

    #[test]
    fn settings_parse_from_toml() {
        let s: TrainSettings =
            toml::from_str("[expert]\nseed = 7\n[expert.gbdt]\nrounds = 5\n[scoring]\nw = 3.0\n").unwrap();
        assert_eq!(s.expert.seed, 7);
        assert_eq!(s.expert.gbdt.rounds, 5);
        assert_eq!(s.scoring.w, 3.0);
        assert!(toml::from_str::<TrainSettings>("bogus = 1\n").is_err());
        let r: RoutingSettings = toml::from_str("t_lo = 0.2\nt_hi = 0.8\n").unwrap();
        let cfg = r.into_config().unwrap();
        assert_eq!((cfg.low(), cfg.high()), (0.2, 0.8));
        let g: SynthConfig = toml::from_str("seed = 3\nsize = 100\n").unwrap();
        assert_eq!((g.seed, g.size, g.classes), (3, 100, 10));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), exit::DATA);
        let io = Error::io("x", std::io::Error::other("boom"));
        assert_eq!(exit_code(&io), exit::INTERNAL);
    }
}
