//! Versioned, checksummed model container.
//!
//! Layout (UTF-8 text):
//!
//! ```text
//! contact-complexity-model
//! version: 1
//! sha256: <64 hex digits of the body bytes>
//! <body: one line of JSON encoding the ComplexityModel>
//! ```
//!
//! The body holds the vocabulary (tokens, document frequencies, document
//! count, feature cap), the ensemble (learning rate, base scores, per-round
//! per-class trees as pre-order node lists), the SIC label of each class,
//! the three hypothesis quantile maps, the `C` quantile map and the
//! combiner weight. Saving the same model always yields the same bytes.

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::expert::Expert;
use crate::scoring::ComplexityModel;

pub const MAGIC: &str = "contact-complexity-model";
pub const FORMAT_VERSION: u32 = 1;

pub fn checksum(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn encode(model: &ComplexityModel) -> Result<String> {
    let body = serde_json::to_string(model)
        .map_err(|e| Error::Model(format!("cannot encode model: {e}")))?;
    Ok(format!(
        "{MAGIC}\nversion: {FORMAT_VERSION}\nsha256: {}\n{body}\n",
        checksum(body.as_bytes())
    ))
}

fn header<'a>(line: Option<&'a str>, key: &str) -> Result<&'a str> {
    line.and_then(|l| l.strip_prefix(key))
        .and_then(|l| l.strip_prefix(": "))
        .ok_or_else(|| Error::Model(format!("missing `{key}:` header line")))
}

pub fn decode(text: &str) -> Result<ComplexityModel> {
    let mut lines = text.splitn(4, '\n');
    if lines.next() != Some(MAGIC) {
        return Err(Error::Model("not a contact-complexity model file".into()));
    }
    let version = header(lines.next(), "version")?;
    if version != FORMAT_VERSION.to_string() {
        return Err(Error::Model(format!(
            "unsupported format version {version} (expected {FORMAT_VERSION})"
        )));
    }
    let expected = header(lines.next(), "sha256")?;
    let body = lines.next().unwrap_or("");
    let body = body.strip_suffix('\n').unwrap_or(body);
    let actual = checksum(body.as_bytes());
    if actual != expected {
        return Err(Error::Model(format!(
            "checksum mismatch: header says {expected}, body hashes to {actual}"
        )));
    }
    let model: ComplexityModel = serde_json::from_str(body)
        .map_err(|e| Error::Model(format!("malformed model body: {e}")))?;
    let ComplexityModel {
        expert,
        calibration,
    } = model;
    let expert = Expert::new(expert.vocabulary, expert.ensemble, expert.classes)?;
    calibration.config.validate()?;
    Ok(ComplexityModel {
        expert,
        calibration,
    })
}

pub fn save(model: &ComplexityModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode(model)?)
        .map_err(|e| Error::io(format!("writing model {}", path.display()), e))
}

pub fn load(path: impl AsRef<Path>) -> Result<ComplexityModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading model {}", path.display()), e))?;
    decode(&text)
}
