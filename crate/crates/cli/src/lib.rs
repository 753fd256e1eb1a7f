//! Subcommand implementations behind the `amemnet` binary. Every command
//! reads its inputs from disk and writes its outputs to disk; nothing else
//! is carried between invocations.

pub mod config;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use amemnet::data::{build_triplets, generate_synthetic, load_dataset, load_model, save_dataset, save_model};
use amemnet::evalfuse::{evaluate_by_ratio, fuse_streams, ratio_label, read_scores, write_report, write_scores};
use amemnet::model::Model;
use amemnet::training::train;
use amemnet::verify::{run_suite, TOLERANCE};
use amemnet::{Error, Result};
use clap::{Parser, Subcommand};

pub const TRAIN_REPORT: &str = "train_report.csv";
pub const THREADS_VAR: &str = "AMEMNET_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "amemnet",
    version,
    about = "Memory-augmented adversarial early action prediction on precomputed features"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the synthetic two-stream benchmark into DIR/rgb and DIR/flow.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override a config key, e.g. `--set seed=3`. Repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Train one stream on the training split and save the model archive
    /// plus train_report.csv into MODELDIR.
    Train {
        /// Dataset directory of one stream.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_name = "MODELDIR")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Score the test split at every progress level.
    Eval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_name = "MODELDIR")]
        model: PathBuf,
        /// Accuracy per observation ratio, `ratio,accuracy`.
        #[arg(long)]
        report: PathBuf,
        /// Per-row class scores, input to `fuse`.
        #[arg(long)]
        scores: PathBuf,
    },
    /// Late-fuse two score tables as rgb + beta * flow.
    Fuse {
        #[arg(long)]
        rgb: PathBuf,
        #[arg(long)]
        flow: PathBuf,
        #[arg(long, default_value_t = amemnet::evalfuse::DEFAULT_BETA)]
        beta: f64,
        #[arg(long)]
        report: PathBuf,
        /// Optionally also write the fused score table.
        #[arg(long)]
        scores: Option<PathBuf>,
    },
    /// Finite-difference check of both training objectives on a miniature
    /// model; exits 1 if any parameter group exceeds the tolerance.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Sizes the global rayon pool from `AMEMNET_THREADS` (0 or unset = auto).
pub fn configure_threads() -> Result<()> {
    let n = match std::env::var(THREADS_VAR) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::Config(format!("{THREADS_VAR} must be a non-negative integer, got `{v}`")))?,
        Err(_) => 0,
    };
    // A pool that already exists (tests calling run twice) is fine.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Runs one subcommand, returning the text to print on stdout.
pub fn run(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Synth { config, out, overrides } => synth(&config, &overrides, &out),
        Command::Train {
            data,
            config,
            out,
            seed,
            epochs,
            mut overrides,
        } => {
            if let Some(s) = seed {
                overrides.push(format!("seed={s}"));
            }
            if let Some(e) = epochs {
                overrides.push(format!("epochs={e}"));
            }
            train_stream(&data, &config, &overrides, &out)
        }
        Command::Eval {
            data,
            model,
            report,
            scores,
        } => eval(&data, &model, &report, &scores),
        Command::Fuse {
            rgb,
            flow,
            beta,
            report,
            scores,
        } => fuse(&rgb, &flow, beta, &report, scores.as_deref()),
        Command::Gradcheck { seed } => gradcheck(seed),
    }
}

fn synth(config: &Path, overrides: &[String], out: &Path) -> Result<String> {
    let cfg = config::load(config, overrides)?;
    let (rgb, flow) = generate_synthetic(&cfg.synth())?;
    let mut msg = String::new();
    for ds in [&rgb, &flow] {
        let dir = out.join(&ds.stream);
        save_dataset(ds, &dir)?;
        let _ = writeln!(
            msg,
            "{}: {} train + {} test samples, {} records -> {}",
            ds.stream,
            ds.train_ids.len(),
            ds.test_ids.len(),
            ds.len(),
            dir.display()
        );
    }
    Ok(msg)
}

fn train_stream(data: &Path, config: &Path, overrides: &[String], out: &Path) -> Result<String> {
    let cfg = config::load(config, overrides)?;
    let ds = load_dataset(data)?;
    let model_cfg = cfg.model(ds.classes)?;
    let train_cfg = cfg.train()?;
    if model_cfg.d != ds.dim {
        return Err(Error::Dimension {
            op: "train",
            expected: format!("config d={}", model_cfg.d),
            found: format!("dataset dim={}", ds.dim),
        });
    }
    if ds.train_ids.is_empty() {
        return Err(Error::Config(format!("{} has no training ids", data.display())));
    }
    let triplets = build_triplets(&ds, &ds.train_ids)?;
    let init = Model::init(model_cfg, cfg.seed)?;
    let (model, report) = train(init, &triplets, &train_cfg)?;
    save_model(&model, &train_cfg.weights, out)?;
    report.write_csv(&out.join(TRAIN_REPORT))?;
    let last = report.records.last();
    let mut msg = format!(
        "trained {} on {} triplets for {} epochs ({} report rows) -> {}\n",
        ds.stream,
        triplets.len(),
        train_cfg.epochs,
        report.records.len(),
        out.display()
    );
    if let Some(r) = last {
        let m = &r.metrics;
        let _ = writeln!(
            msg,
            "final step {}: l_adv {:.4} l_rec {:.4} l_cls_v {:.4} l_cls_x {:.4}",
            r.step, m.l_adv, m.l_rec, m.l_cls_v, m.l_cls_x
        );
    }
    Ok(msg)
}

fn accuracy_table(title: &str, acc: &[f64]) -> String {
    let mut s = format!("{title}\n");
    for (i, a) in acc.iter().enumerate() {
        let _ = writeln!(s, "  {:>4}  {:.4}", ratio_label(i + 1, acc.len()), a);
    }
    s
}

fn eval(data: &Path, model_dir: &Path, report: &Path, scores: &Path) -> Result<String> {
    let ds = load_dataset(data)?;
    let model = load_model(model_dir)?.model;
    let ev = evaluate_by_ratio(&ds, &ds.test_ids, &model)?;
    write_report(&ev.accuracy, report)?;
    write_scores(&ev.table, scores)?;
    Ok(accuracy_table(
        &format!("{} test accuracy by observation ratio", ds.stream),
        &ev.accuracy,
    ))
}

fn fuse(rgb: &Path, flow: &Path, beta: f64, report: &Path, scores: Option<&Path>) -> Result<String> {
    let (fused, acc) = fuse_streams(&read_scores(rgb)?, &read_scores(flow)?, beta)?;
    write_report(&acc, report)?;
    if let Some(p) = scores {
        write_scores(&fused, p)?;
    }
    Ok(accuracy_table(&format!("fused accuracy (beta = {beta})"), &acc))
}

fn gradcheck(seed: u64) -> Result<String> {
    let report = run_suite(seed)?;
    let mut s = String::new();
    for g in &report.groups {
        let _ = writeln!(s, "{:<40} {:<16} {:.3e}", g.case, g.tensor, g.max_rel_error);
    }
    let _ = writeln!(s, "max relative error per parameter group:");
    for (t, e) in report.by_tensor() {
        let _ = writeln!(s, "  {t:<16} {e:.3e}");
    }
    let worst = report.max_rel_error();
    if report.passed() {
        let _ = writeln!(s, "gradcheck passed: worst {worst:.3e} < {TOLERANCE:e}");
        Ok(s)
    } else {
        Err(Error::Integrity(format!(
            "{s}gradcheck failed: worst {worst:.3e} >= {TOLERANCE:e}"
        )))
    }
}
