//! Feature datasets, their on-disk format, and triplet construction.
//!
//! A dataset directory holds:
//!
//! * `manifest.txt`: UTF-8 `key=value` lines `dim`, `classes`, `progress`,
//!   `stream` and `count` (number of records in `features.bin`).
//! * `features.bin`: records sorted by `(sample_id, p)`, each
//!   `sample_id: u32 | p: u8 | label: u16 | d x f32`, all little-endian,
//!   no header or padding.
//! * `train_ids.txt` / `test_ids.txt`: one decimal sample id per line.

mod archive;
mod synth;

pub use archive::{load_model, save_model, LoadedModel, MODEL_BIN, MODEL_META};
pub use synth::{generate_synthetic, sample_draw, SampleDraw, SynthConfig};

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const MANIFEST: &str = "manifest.txt";
pub const FEATURES: &str = "features.bin";
pub const TRAIN_IDS: &str = "train_ids.txt";
pub const TEST_IDS: &str = "test_ids.txt";

/// Bytes of a record header: id (4), progress (1), label (2).
pub const RECORD_HEADER: usize = 7;

#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub label: u16,
    pub features: Vec<f32>,
}

/// Per-sample features at every progress level `1..=P`; level `P` is the
/// full observation.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureDataset {
    pub dim: usize,
    pub classes: usize,
    pub progress: u8,
    pub stream: String,
    records: BTreeMap<(u32, u8), Record>,
    pub train_ids: Vec<u32>,
    pub test_ids: Vec<u32>,
}

/// One training unit: partial feature, full feature and label of one sample
/// at one progress level. The progress level is kept for bookkeeping only.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureTriplet {
    pub sample_id: u32,
    pub progress: u8,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub label: usize,
}

impl FeatureDataset {
    pub fn new(dim: usize, classes: usize, progress: u8, stream: impl Into<String>) -> Result<Self> {
        if dim == 0 || classes == 0 || progress == 0 {
            return Err(Error::Config(
                "dataset dim, classes and progress must be positive".into(),
            ));
        }
        if classes > u16::MAX as usize + 1 {
            return Err(Error::Config(format!("{classes} classes do not fit a 16-bit label")));
        }
        let stream = stream.into();
        if stream.contains('\n') || stream.contains('=') {
            return Err(Error::Config(format!("invalid stream name {stream:?}")));
        }
        Ok(FeatureDataset {
            dim,
            classes,
            progress,
            stream,
            records: BTreeMap::new(),
            train_ids: Vec::new(),
            test_ids: Vec::new(),
        })
    }

    pub fn insert(&mut self, sample_id: u32, p: u8, label: u16, features: Vec<f32>) -> Result<()> {
        if features.len() != self.dim {
            return Err(Error::dim("dataset record", self.dim, features.len()));
        }
        if p == 0 || p > self.progress {
            return Err(Error::CorruptDataset(format!(
                "sample {sample_id}: progress {p} outside 1..={}",
                self.progress
            )));
        }
        if label as usize >= self.classes {
            return Err(Error::CorruptDataset(format!(
                "sample {sample_id}: label {label} outside 0..{}",
                self.classes
            )));
        }
        if let Some(existing) = self.label_of(sample_id) {
            if existing != label {
                return Err(Error::CorruptDataset(format!(
                    "sample {sample_id} has labels {existing} and {label}"
                )));
            }
        }
        if self.records.contains_key(&(sample_id, p)) {
            return Err(Error::CorruptDataset(format!("duplicate record ({sample_id}, {p})")));
        }
        self.records.insert((sample_id, p), Record { label, features });
        Ok(())
    }

    pub fn record(&self, sample_id: u32, p: u8) -> Option<&Record> {
        self.records.get(&(sample_id, p))
    }

    pub fn label_of(&self, sample_id: u32) -> Option<u16> {
        self.records
            .range((sample_id, 0)..=(sample_id, u8::MAX))
            .next()
            .map(|(_, r)| r.label)
    }

    pub fn contains(&self, sample_id: u32) -> bool {
        self.label_of(sample_id).is_some()
    }

    /// Distinct sample ids in ascending order.
    pub fn sample_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.records.keys().map(|(id, _)| *id).collect();
        ids.dedup();
        ids
    }

    /// Records in `(sample_id, p)` order.
    pub fn records(&self) -> impl Iterator<Item = (u32, u8, &Record)> {
        self.records.iter().map(|((id, p), r)| (*id, *p, r))
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Checks the full-observation and split invariants.
    pub fn validate(&self) -> Result<()> {
        for id in self.sample_ids() {
            if self.record(id, self.progress).is_none() {
                return Err(Error::CorruptDataset(format!(
                    "sample {id} has no full-observation record (p = {})",
                    self.progress
                )));
            }
        }
        for id in self.train_ids.iter().chain(&self.test_ids) {
            if !self.contains(*id) {
                return Err(Error::CorruptDataset(format!("split lists unknown sample {id}")));
            }
        }
        Ok(())
    }
}

/// One triplet per `(sample, p)` for `p = 1..=P`, in the order of `ids`.
pub fn build_triplets(ds: &FeatureDataset, ids: &[u32]) -> Result<Vec<FeatureTriplet>> {
    let mut out = Vec::with_capacity(ids.len() * ds.progress as usize);
    for &id in ids {
        let full = ds.record(id, ds.progress).ok_or(Error::UnknownSample(id))?;
        let v: Vec<f64> = full.features.iter().map(|&f| f as f64).collect();
        for p in 1..=ds.progress {
            let rec = ds
                .record(id, p)
                .ok_or_else(|| Error::CorruptDataset(format!("sample {id} has no record at progress {p}")))?;
            out.push(FeatureTriplet {
                sample_id: id,
                progress: p,
                x: rec.features.iter().map(|&f| f as f64).collect(),
                v: v.clone(),
                label: rec.label as usize,
            });
        }
    }
    Ok(out)
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_ids(path: &Path, ids: &[u32]) -> Result<()> {
    let mut s = String::new();
    for id in ids {
        s.push_str(&id.to_string());
        s.push('\n');
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

fn read_ids(path: &Path) -> Result<Vec<u32>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    read_text(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            l.trim().parse().map_err(|_| Error::Format {
                path: path.to_path_buf(),
                detail: format!("line {}: `{l}` is not a sample id", i + 1),
            })
        })
        .collect()
}

/// Parses `key=value` lines; blank lines and `#` comments are skipped.
pub(crate) fn parse_key_values(path: &Path, text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Format {
            path: path.to_path_buf(),
            detail: format!("line {}: expected key=value, got `{line}`", i + 1),
        })?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

pub fn save_dataset(ds: &FeatureDataset, dir: &Path) -> Result<()> {
    ds.validate()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest = format!(
        "dim={}\nclasses={}\nprogress={}\nstream={}\ncount={}\n",
        ds.dim,
        ds.classes,
        ds.progress,
        ds.stream,
        ds.len()
    );
    let mpath = dir.join(MANIFEST);
    fs::write(&mpath, manifest).map_err(|e| Error::io(&mpath, e))?;

    let mut bytes = Vec::with_capacity(ds.len() * (RECORD_HEADER + 4 * ds.dim));
    for (id, p, rec) in ds.records() {
        bytes.extend_from_slice(&id.to_le_bytes());
        bytes.push(p);
        bytes.extend_from_slice(&rec.label.to_le_bytes());
        for f in &rec.features {
            bytes.extend_from_slice(&f.to_le_bytes());
        }
    }
    let fpath = dir.join(FEATURES);
    fs::write(&fpath, bytes).map_err(|e| Error::io(&fpath, e))?;
    write_ids(&dir.join(TRAIN_IDS), &ds.train_ids)?;
    write_ids(&dir.join(TEST_IDS), &ds.test_ids)?;
    Ok(())
}

pub fn load_dataset(dir: &Path) -> Result<FeatureDataset> {
    let mpath = dir.join(MANIFEST);
    let text = read_text(&mpath)?;
    let (mut dim, mut classes, mut progress, mut stream, mut count) = (None, None, None, None, None);
    let bad = |detail: String| Error::Format {
        path: mpath.clone(),
        detail,
    };
    for (k, v) in parse_key_values(&mpath, &text)? {
        let num = |v: &str| {
            v.parse::<usize>()
                .map_err(|_| bad(format!("`{k}` is not a number: `{v}`")))
        };
        match k.as_str() {
            "dim" => dim = Some(num(&v)?),
            "classes" => classes = Some(num(&v)?),
            "progress" => {
                let p = num(&v)?;
                progress = Some(u8::try_from(p).map_err(|_| bad(format!("progress {p} exceeds 255")))?);
            }
            "stream" => stream = Some(v),
            "count" => count = Some(num(&v)?),
            other => return Err(bad(format!("unknown key `{other}`"))),
        }
    }
    let missing = |k: &str| bad(format!("missing key `{k}`"));
    let dim = dim.ok_or_else(|| missing("dim"))?;
    let classes = classes.ok_or_else(|| missing("classes"))?;
    let progress = progress.ok_or_else(|| missing("progress"))?;
    let stream = stream.ok_or_else(|| missing("stream"))?;
    let count = count.ok_or_else(|| missing("count"))?;
    let mut ds = FeatureDataset::new(dim, classes, progress, stream)?;

    let fpath = dir.join(FEATURES);
    let bytes = fs::read(&fpath).map_err(|e| Error::io(&fpath, e))?;
    let rec_len = RECORD_HEADER + 4 * dim;
    let tail = bytes.len() % rec_len;
    if tail != 0 {
        let offset = bytes.len() - tail;
        return Err(Error::Format {
            path: fpath,
            detail: format!(
                "truncated record at byte offset {offset}: {tail} bytes remain, a record of dim {dim} needs {rec_len}"
            ),
        });
    }
    if bytes.len() / rec_len != count {
        return Err(Error::Format {
            path: fpath,
            detail: format!(
                "manifest count {count} but the file holds {} records of dim {dim}",
                bytes.len() / rec_len
            ),
        });
    }
    let mut offset = 0;
    while offset < bytes.len() {
        let r = &bytes[offset..offset + rec_len];
        let id = u32::from_le_bytes(r[0..4].try_into().expect("4 bytes"));
        let p = r[4];
        let label = u16::from_le_bytes(r[5..7].try_into().expect("2 bytes"));
        let features = r[RECORD_HEADER..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        ds.insert(id, p, label, features)?;
        offset += rec_len;
    }
    ds.train_ids = read_ids(&dir.join(TRAIN_IDS))?;
    ds.test_ids = read_ids(&dir.join(TEST_IDS))?;
    ds.validate()?;
    Ok(ds)
}
