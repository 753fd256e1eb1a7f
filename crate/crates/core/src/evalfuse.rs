//! Per-ratio evaluation, score tables and two-stream late fusion.
//!
//! Score CSV: `sample_id,p,label,score_0,...,score_{K-1}`. Report CSV:
//! `ratio,accuracy`, one row per progress level. Floats are written with
//! Rust's shortest round-trip formatting, so parsing a written file gives
//! back the same values.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::data::FeatureDataset;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::numerics::Tensor;

pub const DEFAULT_BETA: f64 = 1.5;

/// Rows evaluated per batched prediction.
const CHUNK: usize = 256;

/// Anything that maps a `B x d` batch to `B x K` class scores without
/// mutating state.
pub trait Predictor: Sync {
    fn classes(&self) -> usize;
    fn dim(&self) -> usize;
    fn predict_batch(&self, x: &Tensor) -> Result<Tensor>;
}

impl Predictor for Model {
    fn classes(&self) -> usize {
        self.config.classes
    }

    fn dim(&self) -> usize {
        self.config.d
    }

    fn predict_batch(&self, x: &Tensor) -> Result<Tensor> {
        Model::predict_batch(self, x)
    }
}

/// Index of the largest score; ties go to the lowest index.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreRow {
    pub sample_id: u32,
    pub progress: u8,
    pub label: usize,
    pub scores: Vec<f64>,
}

/// Rows sorted by `(sample_id, p)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreTable {
    pub classes: usize,
    pub rows: Vec<ScoreRow>,
}

impl ScoreTable {
    pub fn new(classes: usize, mut rows: Vec<ScoreRow>) -> Result<Self> {
        rows.sort_by_key(|r| (r.sample_id, r.progress));
        for w in rows.windows(2) {
            if (w[0].sample_id, w[0].progress) == (w[1].sample_id, w[1].progress) {
                return Err(Error::Integrity(format!(
                    "duplicate score row ({}, {})",
                    w[0].sample_id, w[0].progress
                )));
            }
        }
        for r in &rows {
            if r.scores.len() != classes {
                return Err(Error::dim("score row", classes, r.scores.len()));
            }
            if r.label >= classes {
                return Err(Error::Integrity(format!(
                    "label {} out of range for {classes} classes",
                    r.label
                )));
            }
        }
        Ok(ScoreTable { classes, rows })
    }

    /// Largest progress level present.
    pub fn progress(&self) -> u8 {
        self.rows.iter().map(|r| r.progress).max().unwrap_or(0)
    }

    /// Fraction of correct argmax predictions per progress level `1..=P`.
    pub fn accuracy_by_progress(&self) -> Result<Vec<f64>> {
        let p_max = self.progress() as usize;
        if p_max == 0 {
            return Err(Error::Contract("cannot score an empty table".into()));
        }
        let mut hits = vec![0usize; p_max];
        let mut counts = vec![0usize; p_max];
        for r in &self.rows {
            let p = r.progress as usize - 1;
            counts[p] += 1;
            if argmax(&r.scores) == r.label {
                hits[p] += 1;
            }
        }
        if let Some(p) = counts.iter().position(|&c| c != counts[0]) {
            return Err(Error::Integrity(format!(
                "progress {} has {} rows but progress 1 has {}",
                p + 1,
                counts[p],
                counts[0]
            )));
        }
        Ok(hits.iter().zip(&counts).map(|(&h, &c)| h as f64 / c as f64).collect())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    /// `accuracy[p - 1]` for progress `p`.
    pub accuracy: Vec<f64>,
    pub table: ScoreTable,
}

/// Scores every `(sample, p)` record of `ids` and computes accuracy per
/// progress level.
pub fn evaluate_by_ratio<M: Predictor + ?Sized>(ds: &FeatureDataset, ids: &[u32], model: &M) -> Result<Evaluation> {
    if ids.is_empty() {
        return Err(Error::Contract("evaluation split is empty".into()));
    }
    if model.dim() != ds.dim || model.classes() != ds.classes {
        return Err(Error::dim(
            "evaluate_by_ratio",
            format!("d={}, K={}", ds.dim, ds.classes),
            format!("model d={}, K={}", model.dim(), model.classes()),
        ));
    }
    let mut keys = Vec::with_capacity(ids.len() * ds.progress as usize);
    let mut sorted = ids.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    for &id in &sorted {
        for p in 1..=ds.progress {
            let rec = ds.record(id, p).ok_or_else(|| {
                if ds.contains(id) {
                    Error::CorruptDataset(format!("sample {id} has no record at progress {p}"))
                } else {
                    Error::UnknownSample(id)
                }
            })?;
            keys.push((id, p, rec));
        }
    }
    let score_chunk = |chunk: &[(u32, u8, &crate::data::Record)]| -> Result<Vec<ScoreRow>> {
        let data = chunk
            .iter()
            .flat_map(|(_, _, r)| r.features.iter().map(|&f| f as f64))
            .collect();
        let x = Tensor::matrix(chunk.len(), ds.dim, data)?;
        let probs = model.predict_batch(&x)?;
        Ok(chunk
            .iter()
            .enumerate()
            .map(|(i, (id, p, r))| ScoreRow {
                sample_id: *id,
                progress: *p,
                label: r.label as usize,
                scores: probs.row(i).to_vec(),
            })
            .collect())
    };
    #[cfg(feature = "parallel")]
    let chunks: Vec<Result<Vec<ScoreRow>>> = keys.par_chunks(CHUNK).map(score_chunk).collect();
    #[cfg(not(feature = "parallel"))]
    let chunks: Vec<Result<Vec<ScoreRow>>> = keys.chunks(CHUNK).map(score_chunk).collect();
    let mut rows = Vec::with_capacity(keys.len());
    for c in chunks {
        rows.extend(c?);
    }
    let table = ScoreTable::new(ds.classes, rows)?;
    let accuracy = table.accuracy_by_progress()?;
    Ok(Evaluation { accuracy, table })
}

/// `rgb + beta * flow` per row; both tables must cover the same keys with
/// the same labels.
pub fn fuse_streams(rgb: &ScoreTable, flow: &ScoreTable, beta: f64) -> Result<(ScoreTable, Vec<f64>)> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Config(format!("fusion beta must be finite and > 0, got {beta}")));
    }
    if rgb.classes != flow.classes {
        return Err(Error::dim("fuse_streams", rgb.classes, flow.classes));
    }
    let index = |t: &ScoreTable| -> BTreeMap<(u32, u8), usize> {
        t.rows
            .iter()
            .enumerate()
            .map(|(i, r)| ((r.sample_id, r.progress), i))
            .collect()
    };
    let (ri, fi) = (index(rgb), index(flow));
    let mut missing: Vec<String> = Vec::new();
    for k in ri.keys().filter(|k| !fi.contains_key(k)) {
        missing.push(format!("({}, {}) in flow", k.0, k.1));
    }
    for k in fi.keys().filter(|k| !ri.contains_key(k)) {
        missing.push(format!("({}, {}) in rgb", k.0, k.1));
    }
    if !missing.is_empty() {
        return Err(Error::KeyMismatch(missing.join(", ")));
    }
    let mut rows = Vec::with_capacity(rgb.rows.len());
    for (k, &i) in &ri {
        let (a, b) = (&rgb.rows[i], &flow.rows[fi[k]]);
        if a.label != b.label {
            return Err(Error::Integrity(format!(
                "sample {} progress {}: rgb label {} vs flow label {}",
                k.0, k.1, a.label, b.label
            )));
        }
        rows.push(ScoreRow {
            sample_id: a.sample_id,
            progress: a.progress,
            label: a.label,
            scores: a.scores.iter().zip(&b.scores).map(|(x, y)| x + beta * y).collect(),
        });
    }
    let fused = ScoreTable::new(rgb.classes, rows)?;
    let acc = fused.accuracy_by_progress()?;
    Ok((fused, acc))
}

/// `p / P` as a short decimal: `0.1, 0.2, ..., 1.0` for `P = 10`.
pub fn ratio_label(p: usize, progress: usize) -> String {
    let s = format!("{:.6}", p as f64 / progress as f64);
    let s = s.trim_end_matches('0');
    if s.ends_with('.') {
        format!("{s}0")
    } else {
        s.to_string()
    }
}

pub fn report_csv(accuracy: &[f64]) -> String {
    let mut s = String::from("ratio,accuracy\n");
    for (i, a) in accuracy.iter().enumerate() {
        let _ = writeln!(s, "{},{a}", ratio_label(i + 1, accuracy.len()));
    }
    s
}

pub fn write_report(accuracy: &[f64], path: &Path) -> Result<()> {
    fs::write(path, report_csv(accuracy)).map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, line: usize, detail: impl std::fmt::Display) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        detail: format!("line {line}: {detail}"),
    }
}

/// Parses a report into `(ratio, accuracy)` pairs.
pub fn read_report(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some("ratio,accuracy") {
        return Err(csv_error(path, 1, "expected header `ratio,accuracy`"));
    }
    lines
        .enumerate()
        .map(|(i, l)| {
            let (r, a) = l
                .split_once(',')
                .ok_or_else(|| csv_error(path, i + 2, "expected two columns"))?;
            let num = |v: &str| {
                v.parse::<f64>()
                    .map_err(|_| csv_error(path, i + 2, format!("bad number `{v}`")))
            };
            Ok((num(r)?, num(a)?))
        })
        .collect()
}

pub fn scores_csv(table: &ScoreTable) -> String {
    let mut s = String::from("sample_id,p,label");
    for k in 0..table.classes {
        let _ = write!(s, ",score_{k}");
    }
    s.push('\n');
    for r in &table.rows {
        let _ = write!(s, "{},{},{}", r.sample_id, r.progress, r.label);
        for v in &r.scores {
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
    }
    s
}

pub fn write_scores(table: &ScoreTable, path: &Path) -> Result<()> {
    fs::write(path, scores_csv(table)).map_err(|e| Error::io(path, e))
}

pub fn read_scores(path: &Path) -> Result<ScoreTable> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| csv_error(path, 1, "empty file"))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 4 || cols[..3] != ["sample_id", "p", "label"] {
        return Err(csv_error(path, 1, "expected header `sample_id,p,label,score_0,...`"));
    }
    for (k, c) in cols[3..].iter().enumerate() {
        if *c != format!("score_{k}") {
            return Err(csv_error(path, 1, format!("expected column score_{k}, found `{c}`")));
        }
    }
    let classes = cols.len() - 3;
    let mut rows = Vec::new();
    for (i, l) in lines.enumerate() {
        let n = i + 2;
        let f: Vec<&str> = l.split(',').collect();
        if f.len() != classes + 3 {
            return Err(csv_error(
                path,
                n,
                format!("expected {} columns, found {}", classes + 3, f.len()),
            ));
        }
        let bad = |v: &str| csv_error(path, n, format!("bad value `{v}`"));
        rows.push(ScoreRow {
            sample_id: f[0].parse().map_err(|_| bad(f[0]))?,
            progress: f[1].parse().map_err(|_| bad(f[1]))?,
            label: f[2].parse().map_err(|_| bad(f[2]))?,
            scores: f[3..]
                .iter()
                .map(|v| v.parse::<f64>().map_err(|_| bad(v)))
                .collect::<Result<_>>()?,
        });
    }
    ScoreTable::new(classes, rows)
}
