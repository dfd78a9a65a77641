// SPDX-License-Identifier: MIT OR Apache-2.0

//! File formats and real-data ingestion.
//!
//! Packed binary layout (all integers little-endian):
//!
//! ```text
//! offset  size                 field
//! 0       8                    magic "RDPGCPD1"
//! 8       4                    T (u32)
//! 12      4                    n (u32)
//! 16      T * ceil(n(n-1)/16)  one block per snapshot: upper triangle,
//!                              row-major over i < j, packed LSB first
//! ```
//!
//! Edge JSON lines: an optional header `{"n": .., "T": ..}` followed by one
//! object per non-empty snapshot, `{"t": 1, "edges": [[1, 2], ...]}`, with
//! 1-based times and nodes and `i < j`. Snapshots without a line are empty.
//! Without a header, `n` and `T` are the largest node and time seen.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::segmentation::{ChangePointSet, DetectionResult};
use crate::series::{packed_len, AdjacencySeries, Snapshot};

pub const MAGIC: &[u8; 8] = b"RDPGCPD1";
const HEADER_LEN: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeriesFormat {
    PackedBinary,
    EdgeJsonl,
}

impl SeriesFormat {
    /// `.jsonl` / `.ndjson` files are edge lists, everything else is packed binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("ndjson") => SeriesFormat::EdgeJsonl,
            _ => SeriesFormat::PackedBinary,
        }
    }
}

pub fn encode_packed(series: &AdjacencySeries) -> Vec<u8> {
    let block = packed_len(series.n());
    let mut out = Vec::with_capacity(HEADER_LEN + block * series.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(series.len() as u32).to_le_bytes());
    out.extend_from_slice(&(series.n() as u32).to_le_bytes());
    for snap in series.snapshots() {
        out.extend_from_slice(snap.packed());
    }
    out
}

pub fn decode_packed(bytes: &[u8]) -> Result<AdjacencySeries> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::format(
            format!("byte {}", bytes.len()),
            "file shorter than the 16-byte header",
        ));
    }
    if &bytes[..8] != MAGIC {
        return Err(Error::format("byte 0", "bad magic, expected \"RDPGCPD1\""));
    }
    let t_len = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let n = u32::from_le_bytes(bytes[12..16].try_into().expect("4 bytes")) as usize;
    if t_len == 0 || n == 0 {
        return Err(Error::format("byte 8", format!("empty series: T = {t_len}, n = {n}")));
    }
    let block = packed_len(n);
    let expected = HEADER_LEN + block * t_len;
    if bytes.len() < expected {
        let t = (bytes.len() - HEADER_LEN) / block.max(1) + 1;
        return Err(Error::format(
            format!("byte {}", bytes.len()),
            format!("truncated block for snapshot t = {t}: expected {expected} bytes in total"),
        ));
    }
    if bytes.len() > expected {
        return Err(Error::format(
            format!("byte {expected}"),
            format!("{} trailing bytes after the last block", bytes.len() - expected),
        ));
    }
    let snapshots = (0..t_len)
        .map(|t| {
            let start = HEADER_LEN + t * block;
            Snapshot::from_packed(n, bytes[start..start + block].to_vec()).map_err(|e| {
                Error::format(format!("byte {start}"), format!("snapshot t = {}: {e}", t + 1))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    AdjacencySeries::new(n, snapshots)
}

#[derive(Serialize, Deserialize)]
struct JsonlHeader {
    n: usize,
    #[serde(rename = "T")]
    t_len: usize,
}

#[derive(Serialize, Deserialize)]
struct JsonlSnapshot {
    t: usize,
    edges: Vec<(usize, usize)>,
}

pub fn encode_jsonl(series: &AdjacencySeries) -> String {
    let mut out = serde_json::to_string(&JsonlHeader {
        n: series.n(),
        t_len: series.len(),
    })
    .expect("plain struct");
    out.push('\n');
    for (t, snap) in series.snapshots().iter().enumerate() {
        let edges: Vec<(usize, usize)> = snap.edges().into_iter().map(|(i, j)| (i + 1, j + 1)).collect();
        if edges.is_empty() {
            continue;
        }
        out.push_str(&serde_json::to_string(&JsonlSnapshot { t: t + 1, edges }).expect("plain struct"));
        out.push('\n');
    }
    out
}

pub fn decode_jsonl(text: &str) -> Result<AdjacencySeries> {
    let mut header: Option<(usize, usize)> = None;
    let mut entries: Vec<(usize, JsonlSnapshot)> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if value.get("t").is_none() && value.get("n").is_some() {
            if header.is_some() || !entries.is_empty() {
                return Err(Error::format(format!("line {line_no}"), "header must be the first line"));
            }
            let h: JsonlHeader = serde_json::from_value(value).map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            header = Some((h.n, h.t_len));
            continue;
        }
        let snap: JsonlSnapshot = serde_json::from_value(value).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        entries.push((line_no, snap));
    }
    let (n, t_len) = match header {
        Some(h) => h,
        None => (
            entries
                .iter()
                .flat_map(|(_, s)| s.edges.iter().map(|&(_, j)| j))
                .max()
                .unwrap_or(0),
            entries.iter().map(|(_, s)| s.t).max().unwrap_or(0),
        ),
    };
    if n == 0 || t_len == 0 {
        return Err(Error::format("line 1", "cannot determine a non-empty series"));
    }
    let mut snapshots = vec![Snapshot::empty(n); t_len];
    let mut seen = vec![false; t_len];
    for (line_no, entry) in entries {
        let at = format!("line {line_no}");
        if entry.t == 0 || entry.t > t_len {
            return Err(Error::format(at, format!("time {} outside 1..={t_len}", entry.t)));
        }
        if std::mem::replace(&mut seen[entry.t - 1], true) {
            return Err(Error::format(at, format!("time {} listed twice", entry.t)));
        }
        for (i, j) in entry.edges {
            if !(1 <= i && i < j && j <= n) {
                return Err(Error::format(
                    at,
                    format!("edge [{i}, {j}] must satisfy 1 <= i < j <= {n}"),
                ));
            }
            snapshots[entry.t - 1].set(i - 1, j - 1, true);
        }
    }
    AdjacencySeries::new(n, snapshots)
}

pub fn write_series(path: &Path, series: &AdjacencySeries, format: SeriesFormat) -> Result<()> {
    let bytes = match format {
        SeriesFormat::PackedBinary => encode_packed(series),
        SeriesFormat::EdgeJsonl => encode_jsonl(series).into_bytes(),
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_series(path: &Path, format: SeriesFormat) -> Result<AdjacencySeries> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    match format {
        SeriesFormat::PackedBinary => decode_packed(&bytes),
        SeriesFormat::EdgeJsonl => {
            let text = String::from_utf8(bytes)
                .map_err(|e| Error::format(format!("byte {}", e.utf8_error().valid_up_to()), "invalid UTF-8"))?;
            decode_jsonl(&text)
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_result(path: &Path, result: &DetectionResult) -> Result<()> {
    write_json(path, result)
}

pub fn read_result(path: &Path) -> Result<DetectionResult> {
    read_json(path)
}

/// Ground truth written next to simulated series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    pub points: ChangePointSet,
    pub scenario: crate::simulate::Scenario,
    pub seed: u64,
}

/// Reads a `p x F` matrix of reals: one row per line, values separated by
/// whitespace or commas. Blank lines and lines starting with `#` are skipped.
pub fn read_matrix(path: &Path) -> Result<Vec<Vec<f64>>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let row = trimmed
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|tok| !tok.is_empty())
            .map(|tok| {
                tok.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Parse {
                        line: idx + 1,
                        message: format!("not a finite number: {tok:?}"),
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: format!("row has {} values, expected {}", row.len(), first.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "no data rows".into(),
        });
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IngestParams {
    pub bins: usize,
    pub threshold: f64,
    pub subsample: Option<usize>,
    pub seed: u64,
}

/// Correlation networks from node activity traces.
///
/// Frames are split into `bins` consecutive windows of `floor(F / bins)`
/// frames (trailing frames dropped). In each window nodes `i` and `j` are
/// linked when the Pearson correlation of their traces exceeds `threshold`;
/// a trace that is constant in a window correlates as 0 with everything. An
/// optional seeded subsample of nodes, in ascending original order, is
/// applied before any correlation is computed.
pub fn ingest_timeseries(rows: &[Vec<f64>], params: &IngestParams) -> Result<AdjacencySeries> {
    let p = rows.len();
    let frames = rows.first().map_or(0, Vec::len);
    if params.bins == 0 {
        return Err(Error::invalid("bins must be positive"));
    }
    if frames < params.bins {
        return Err(Error::invalid(format!(
            "{frames} frames cannot fill {} bins",
            params.bins
        )));
    }
    if !(params.threshold > -1.0 && params.threshold < 1.0) {
        return Err(Error::invalid(format!(
            "threshold must lie in (-1, 1), got {}",
            params.threshold
        )));
    }
    if rows.iter().any(|r| r.len() != frames) {
        return Err(Error::invalid("ragged activity matrix"));
    }
    let nodes: Vec<usize> = match params.subsample {
        Some(k) if k > p => {
            return Err(Error::invalid(format!("cannot subsample {k} of {p} nodes")));
        }
        Some(k) if k < 2 => return Err(Error::invalid("subsample needs at least 2 nodes")),
        Some(k) => {
            let mut rng = rng::stream(params.seed, rng::STREAM_INGEST);
            let mut picked = sample(&mut rng, p, k).into_vec();
            picked.sort_unstable();
            picked
        }
        None => (0..p).collect(),
    };
    if nodes.len() < 2 {
        return Err(Error::invalid("need at least 2 nodes"));
    }
    let width = frames / params.bins;
    let snapshots: Vec<Snapshot> = (0..params.bins)
        .into_par_iter()
        .map(|b| {
            let window = b * width..(b + 1) * width;
            let standardized: Vec<Option<Vec<f64>>> = nodes
                .iter()
                .map(|&i| standardize(&rows[i][window.clone()]))
                .collect();
            let mut snap = Snapshot::empty(nodes.len());
            for a in 0..nodes.len() {
                let Some(x) = &standardized[a] else { continue };
                for (c, other) in standardized.iter().enumerate().skip(a + 1) {
                    let Some(y) = other else { continue };
                    let corr: f64 = x.iter().zip(y).map(|(u, v)| u * v).sum();
                    if corr > params.threshold {
                        snap.set(a, c, true);
                    }
                }
            }
            snap
        })
        .collect();
    AdjacencySeries::new(nodes.len(), snapshots)
}

/// Centered, unit-norm copy; `None` for a constant trace.
fn standardize(x: &[f64]) -> Option<Vec<f64>> {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let centered: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let norm = centered.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm > 1e-12 * (1.0 + mean.abs()) * (x.len() as f64).sqrt()) {
        return None;
    }
    Some(centered.into_iter().map(|v| v / norm).collect())
}
