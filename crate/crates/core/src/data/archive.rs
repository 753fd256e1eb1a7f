//! Model archives: `model.meta` (key=value settings followed by one
//! `tensor <name> <dims> <offset>` line per tensor, dims comma-separated,
//! offset in bytes) and `model.bin` (the tensors as contiguous f32 LE).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::parse_key_values;
use crate::error::{Error, Result};
use crate::memory::{Similarity, WriteMode};
use crate::model::{Model, ModelConfig, ALL_TENSORS};
use crate::numerics::Tensor;
use crate::training::LossWeights;

pub const MODEL_META: &str = "model.meta";
pub const MODEL_BIN: &str = "model.bin";
const FORMAT: &str = "amemnet-model-v1";

#[derive(Clone, Debug, PartialEq)]
pub struct LoadedModel {
    pub model: Model,
    pub weights: LossWeights,
}

/// Saves `model` with f32 payloads. Values that are not f32-representable
/// are rounded; [`Model::round_to_f32`] predicts the loaded result.
pub fn save_model(model: &Model, weights: &LossWeights, dir: &Path) -> Result<()> {
    let c = &model.config;
    let mut meta = String::new();
    let _ = writeln!(meta, "format={FORMAT}");
    for (k, v) in [
        ("d", c.d),
        ("hidden", c.hidden),
        ("h", c.h),
        ("slots", c.slots),
        ("classes", c.classes),
    ] {
        let _ = writeln!(meta, "{k}={v}");
    }
    let _ = writeln!(meta, "similarity={}", c.similarity);
    let _ = writeln!(meta, "write_mode={}", c.write_mode);
    let _ = writeln!(meta, "lambda_cls={}", weights.lambda_cls);
    let _ = writeln!(meta, "lambda_rec={}", weights.lambda_rec);

    let mut bin = Vec::new();
    for (name, t) in model.named_tensors() {
        let dims: Vec<String> = t.shape().iter().map(|d| d.to_string()).collect();
        let _ = writeln!(meta, "tensor {name} {} {}", dims.join(","), bin.len());
        for &v in t.data() {
            bin.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mp = dir.join(MODEL_META);
    fs::write(&mp, meta).map_err(|e| Error::io(&mp, e))?;
    let bp = dir.join(MODEL_BIN);
    fs::write(&bp, bin).map_err(|e| Error::io(&bp, e))
}

struct Entry {
    name: String,
    dims: Vec<usize>,
    offset: usize,
}

pub fn load_model(dir: &Path) -> Result<LoadedModel> {
    let mp = dir.join(MODEL_META);
    let text = fs::read_to_string(&mp).map_err(|e| Error::io(&mp, e))?;
    let bad = |detail: String| Error::Format {
        path: mp.clone(),
        detail,
    };
    let (settings, index): (Vec<&str>, Vec<&str>) = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .partition(|l| !l.starts_with("tensor "));

    let mut sizes = [None; 5];
    let names = ["d", "hidden", "h", "slots", "classes"];
    let (mut similarity, mut write_mode) = (Similarity::default(), WriteMode::default());
    let mut weights = LossWeights::default();
    let mut format = None;
    for (k, v) in parse_key_values(&mp, &settings.join("\n"))? {
        if let Some(i) = names.iter().position(|n| *n == k) {
            sizes[i] = Some(
                v.parse::<usize>()
                    .map_err(|_| bad(format!("`{k}` is not a size: `{v}`")))?,
            );
            continue;
        }
        let float = |v: &str| {
            v.parse::<f64>()
                .map_err(|_| bad(format!("`{k}` is not a number: `{v}`")))
        };
        match k.as_str() {
            "format" => format = Some(v),
            "similarity" => similarity = v.parse().map_err(|e: Error| bad(e.to_string()))?,
            "write_mode" => write_mode = v.parse().map_err(|e: Error| bad(e.to_string()))?,
            "lambda_cls" => weights.lambda_cls = float(&v)?,
            "lambda_rec" => weights.lambda_rec = float(&v)?,
            other => return Err(bad(format!("unknown key `{other}`"))),
        }
    }
    if format.as_deref() != Some(FORMAT) {
        return Err(bad(format!("expected format={FORMAT}, found {format:?}")));
    }
    let mut got = [0usize; 5];
    for (i, s) in sizes.iter().enumerate() {
        got[i] = s.ok_or_else(|| bad(format!("missing key `{}`", names[i])))?;
    }
    let config = ModelConfig {
        d: got[0],
        hidden: got[1],
        h: got[2],
        slots: got[3],
        classes: got[4],
        similarity,
        write_mode,
    };
    config.validate()?;
    weights.validate()?;

    let mut entries = Vec::new();
    for line in index {
        let parts: Vec<&str> = line.split_whitespace().collect();
        let [_, name, dims, offset] = parts[..] else {
            return Err(bad(format!("malformed tensor line `{line}`")));
        };
        let dims = dims
            .split(',')
            .map(|d| d.parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| bad(format!("bad dims in `{line}`")))?;
        let offset = offset.parse().map_err(|_| bad(format!("bad offset in `{line}`")))?;
        entries.push(Entry {
            name: name.to_string(),
            dims,
            offset,
        });
    }

    let bp = dir.join(MODEL_BIN);
    let bin = fs::read(&bp).map_err(|e| Error::io(&bp, e))?;
    let mut model = Model::init(config.clone(), 0)?;
    for e in &entries {
        if !ALL_TENSORS.contains(&e.name.as_str()) {
            return Err(Error::Archive {
                tensor: e.name.clone(),
                detail: "not part of the architecture".into(),
            });
        }
        if entries.iter().filter(|o| o.name == e.name).count() > 1 {
            return Err(Error::Archive {
                tensor: e.name.clone(),
                detail: "listed more than once".into(),
            });
        }
    }
    for (name, slot) in model.named_tensors_mut() {
        let e = entries.iter().find(|e| e.name == name).ok_or_else(|| Error::Archive {
            tensor: name.into(),
            detail: "missing from archive".into(),
        })?;
        let expected = Model::expected_shape(&config, name).expect("known tensor");
        if e.dims != expected {
            return Err(Error::Archive {
                tensor: name.into(),
                detail: format!("shape {:?} does not match metadata, expected {:?}", e.dims, expected),
            });
        }
        let n: usize = expected.iter().product();
        let end = e.offset + 4 * n;
        if end > bin.len() {
            return Err(Error::Archive {
                tensor: name.into(),
                detail: format!(
                    "payload bytes {}..{end} exceed {} bytes in {MODEL_BIN}",
                    e.offset,
                    bin.len()
                ),
            });
        }
        let data = bin[e.offset..end]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
            .collect();
        *slot = Tensor::new(expected, data)?;
    }
    Ok(LoadedModel { model, weights })
}
