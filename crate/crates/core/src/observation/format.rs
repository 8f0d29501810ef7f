//! Text and JSON encodings of observation sets.
//!
//! Text: one observation per block, one row per line over `0`, `1` and `?`,
//! blocks separated by blank lines. Lines starting with `#` are comments.
//!
//! JSON: `{"observations": [["010", "0?1", ...], ...], "metadata": {...}}`.

use serde::{Deserialize, Serialize};

use super::{Cell, Observation, ObservationSet, PartialRow};
use crate::ca::RuleNumber;
use crate::error::{Error, Result};

/// Provenance of a synthetic observation set.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<RuleNumber>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<u32>,
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub gap_bound: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<u32>,
}

impl Metadata {
    pub fn is_empty(&self) -> bool {
        *self == Metadata::default()
    }
}

/// An observation set together with its metadata.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObservationFile {
    pub set: ObservationSet,
    pub metadata: Metadata,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    observations: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Metadata::is_empty")]
    metadata: Metadata,
}

fn parse_row(text: &str, line: Option<usize>, first: bool) -> Result<PartialRow> {
    let cells = text
        .chars()
        .enumerate()
        .map(|(col, ch)| {
            Cell::from_char(ch).ok_or_else(|| {
                Error::parse(line, format!("invalid character {ch:?} in column {}", col + 1))
            })
        })
        .collect::<Result<Vec<Cell>>>()?;
    if first && cells.contains(&Cell::Unknown) {
        return Err(Error::parse(line, "the first row of an observation may not contain '?'"));
    }
    PartialRow::from_cells(&cells).map_err(|e| Error::parse(line, e.to_string()))
}

/// Parses the text format.
pub fn parse_text(input: &str) -> Result<ObservationSet> {
    let mut observations = Vec::new();
    let mut block: Vec<PartialRow> = Vec::new();
    let mut width = 0usize;
    let mut block_start = 0usize;

    for (idx, raw) in input.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.starts_with('#') {
            continue;
        }
        if line.is_empty() {
            if !block.is_empty() {
                observations.push(Observation::new(std::mem::take(&mut block)).map_err(|e| {
                    Error::parse(Some(block_start), e.to_string())
                })?);
            }
            continue;
        }
        let first = block.is_empty();
        let row = parse_row(line, Some(line_no), first)?;
        if first {
            width = row.len();
            block_start = line_no;
        } else if row.len() != width {
            return Err(Error::parse(
                Some(line_no),
                format!("row has {} cells, expected {width}", row.len()),
            ));
        }
        block.push(row);
    }
    if !block.is_empty() {
        observations.push(
            Observation::new(block).map_err(|e| Error::parse(Some(block_start), e.to_string()))?,
        );
    }
    if observations.is_empty() {
        return Err(Error::parse(None, "input contains no observations"));
    }
    ObservationSet::new(observations)
}

/// Serializes to the text format; `parse_text` inverts it exactly.
pub fn to_text(set: &ObservationSet) -> String {
    let mut out = String::new();
    for (i, obs) in set.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        for row in obs.rows() {
            out.push_str(&row.to_string());
            out.push('\n');
        }
    }
    out
}

/// Parses the JSON format.
pub fn parse_json(input: &str) -> Result<ObservationFile> {
    let doc: Document = serde_json::from_str(input)
        .map_err(|e| Error::parse(Some(e.line()).filter(|&l| l > 0), e.to_string()))?;
    let observations = doc
        .observations
        .iter()
        .enumerate()
        .map(|(i, rows)| {
            let rows = rows
                .iter()
                .enumerate()
                .map(|(n, text)| {
                    parse_row(text, None, n == 0)
                        .map_err(|e| Error::parse(None, format!("observation {i}, row {n}: {e}")))
                })
                .collect::<Result<Vec<_>>>()?;
            Observation::new(rows).map_err(|e| Error::parse(None, format!("observation {i}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let set = ObservationSet::new(observations)
        .map_err(|_| Error::parse(None, "input contains no observations"))?;
    Ok(ObservationFile {
        set,
        metadata: doc.metadata,
    })
}

/// Serializes to pretty-printed JSON.
pub fn to_json(set: &ObservationSet, metadata: &Metadata) -> String {
    let doc = Document {
        observations: set
            .iter()
            .map(|obs| obs.rows().iter().map(|r| r.to_string()).collect())
            .collect(),
        metadata: metadata.clone(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("observation documents always serialize");
    s.push('\n');
    s
}
