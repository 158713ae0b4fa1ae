//! Chat transcripts, JSONL corpus ingestion, and the length hypothesis.
//!
//! A corpus file holds one JSON object per line:
//!
//! ```text
//! {"id": "t1", "utterances": [{"speaker": "agent", "text": "Hi"}], "sic": "12", "resolved": true}
//! ```
//!
//! `sic`, `resolved` and `transferred` are optional. Blank lines are skipped.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    Agent,
    Customer,
    Bot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    pub speaker: Speaker,
    #[serde(default)]
    pub text: String,
}

impl Utterance {
    pub fn new(speaker: Speaker, text: impl Into<String>) -> Self {
        Self {
            speaker,
            text: text.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transcript {
    pub id: String,
    pub utterances: Vec<Utterance>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sic: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolved: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transferred: Option<bool>,
}

impl Transcript {
    pub fn new(id: impl Into<String>, utterances: Vec<Utterance>) -> Self {
        Self {
            id: id.into(),
            utterances,
            sic: None,
            resolved: None,
            transferred: None,
        }
    }

    /// Concatenation of every utterance text, separated by newlines.
    pub fn document_text(&self) -> String {
        let mut doc = String::new();
        for (i, u) in self.utterances.iter().enumerate() {
            if i > 0 {
                doc.push('\n');
            }
            doc.push_str(&u.text);
        }
        doc
    }
}

/// Length hypothesis: the number of utterances spoken by an agent.
///
/// Each utterance (message turn) counts as one sentence. Customer and bot
/// turns never count.
pub fn agent_sentence_length(t: &Transcript) -> u64 {
    t.utterances
        .iter()
        .filter(|u| u.speaker == Speaker::Agent)
        .count() as u64
}

/// Parses one JSONL record. `line` is 1-based and only used for error messages.
pub fn parse_record(text: &str, path: &Path, line: usize) -> Result<Transcript> {
    let t: Transcript = serde_json::from_str(text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line,
        message: e.to_string(),
    })?;
    if t.id.is_empty() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line,
            message: "empty transcript id".into(),
        });
    }
    Ok(t)
}

/// Parses a corpus from JSONL text; `path` is used for error messages.
pub fn parse_corpus_str(text: &str, path: &Path) -> Result<Vec<Transcript>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let raw = raw.trim_end_matches('\r');
        if raw.trim().is_empty() {
            continue;
        }
        let t = parse_record(raw, path, i + 1)?;
        if !seen.insert(t.id.clone()) {
            return Err(Error::Corpus(format!(
                "{}: line {}: duplicate transcript id {:?}",
                path.display(),
                i + 1,
                t.id
            )));
        }
        out.push(t);
    }
    Ok(out)
}

pub fn parse_corpus(path: impl AsRef<Path>) -> Result<Vec<Transcript>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading corpus {}", path.display()), e))?;
    parse_corpus_str(&text, path)
}

pub fn write_corpus<W: Write>(mut w: W, corpus: &[Transcript]) -> std::io::Result<()> {
    for t in corpus {
        let line = serde_json::to_string(t).map_err(std::io::Error::other)?;
        w.write_all(line.as_bytes())?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn save_corpus(path: impl AsRef<Path>, corpus: &[Transcript]) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_corpus(&mut buf, corpus).map_err(|e| Error::io("serializing corpus", e))?;
    fs::write(path, buf).map_err(|e| Error::io(format!("writing corpus {}", path.display()), e))
}
