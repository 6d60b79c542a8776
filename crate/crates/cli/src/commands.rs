use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use pdt_disasm::isa::decoder_by_name;
use pdt_disasm::masks::{global_connections, overlap_mask, reachability_mask};
use pdt_disasm::scores::{
    evaluate, labels_to_scores, load_labels, load_probabilities, load_scores, write_labels,
};
use pdt_disasm::{
    aggregate_rates, truth_from_scores, Analysis, Category, NodeClass, Region, Truth, TruthVector,
    ViolationReport,
};
use rayon::prelude::*;
use serde_json::Value;
use walkdir::WalkDir;

use crate::json::{self, Object};
use crate::{Command, RegionArgs, TruthSource};

struct Loaded {
    region: Region,
    analysis: Analysis,
}

fn load(path: &Path, base: u64, isa: &str) -> Result<Loaded> {
    let decoder = decoder_by_name(isa)?;
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let region = Region::with_base(bytes, base);
    let analysis = Analysis::new_par(decoder, &region)?;
    analysis.check_invariants()?;
    Ok(Loaded { region, analysis })
}

fn load_region(args: &RegionArgs) -> Result<Loaded> {
    load(&args.input, args.base, &args.isa)
}

/// Per-offset scores: labels map to +1/-1, probabilities to logits.
fn scores_from(source: &TruthSource, probabilities: bool, len: usize) -> Result<Vec<f64>> {
    match (&source.labels, &source.scores) {
        (Some(path), _) => Ok(labels_to_scores(&load_labels(path, len)?)),
        (None, Some(path)) if probabilities => Ok(load_probabilities(path, len)?),
        (None, Some(path)) => Ok(load_scores(path, len)?),
        (None, None) => bail!("one of --labels or --scores is required"),
    }
}

fn truth_from(
    source: &TruthSource,
    probabilities: bool,
    analysis: &Analysis,
) -> Result<TruthVector> {
    let len = analysis.region_len();
    match &source.labels {
        Some(path) => Ok(load_labels(path, len)?),
        None => {
            let scores = scores_from(source, probabilities, len)?;
            Ok(truth_from_scores(&scores, &analysis.cfg)?)
        }
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn addresses(region: &Region, offsets: &[usize]) -> Value {
    offsets
        .iter()
        .map(|&o| region.address(o))
        .collect::<Vec<_>>()
        .into()
}

fn report_json(region: &Region, report: &ViolationReport) -> Object {
    Object::new()
        .field("region_len", report.region_len)
        .field("M", addresses(region, &report.mpd))
        .field("N", addresses(region, &report.nop))
        .field("D", addresses(region, &report.des))
        .field("O", addresses(region, &report.oi))
        .field("total", report.total())
}

fn decode_dump(loaded: &Loaded) -> String {
    let cfg = &loaded.analysis.cfg;
    let mut out = String::new();
    for v in 0..cfg.region_len() {
        let (class, kind) = match cfg.class(v) {
            NodeClass::Invalid => ("invalid", "-"),
            NodeClass::Decodable(k) => ("valid", k.name()),
        };
        let succ = cfg.succ(v);
        let succ = if succ.is_empty() {
            "-".to_string()
        } else {
            succ.iter()
                .map(|&s| loaded.region.address(s).to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let _ = writeln!(
            out,
            "{}\t{class}\t{kind}\t{}\t{succ}",
            loaded.region.address(v),
            cfg.length(v)
        );
    }
    out
}

fn pdt_dump(loaded: &Loaded) -> String {
    let forest = &loaded.analysis.forest;
    let mut out = String::new();
    for v in 0..forest.region_len() {
        let parent = forest.ipdom(v);
        let _ = if forest.is_virtual_exit(parent) {
            writeln!(
                out,
                "{} -> exit{}",
                loaded.region.address(v),
                parent - forest.region_len()
            )
        } else {
            writeln!(
                out,
                "{} -> {}",
                loaded.region.address(v),
                loaded.region.address(parent)
            )
        };
    }
    out
}

fn sibling(bin: &Path, ext: &str) -> Option<PathBuf> {
    let path = bin.with_extension(ext);
    path.is_file().then_some(path)
}

fn check_one(bin: &Path, isa: &str, probabilities: bool) -> Result<ViolationReport> {
    let source = TruthSource {
        labels: sibling(bin, "i8"),
        scores: sibling(bin, "f32"),
    };
    if source.labels.is_none() && source.scores.is_none() {
        bail!("no sibling .i8 or .f32 file");
    }
    let source = match source.labels {
        Some(_) => TruthSource {
            scores: None,
            ..source
        },
        None => source,
    };
    let loaded = load(bin, 0, isa)?;
    let truth = truth_from(&source, probabilities, &loaded.analysis)?;
    Ok(loaded.analysis.detect(&truth)?)
}

fn per_category(f: impl Fn(Category) -> Value) -> Object {
    Category::ALL
        .iter()
        .fold(Object::new(), |obj, &c| obj.field(c.key(), f(c)))
}

fn batch_check(dir: &Path, isa: &str, probabilities: bool) -> Result<String> {
    if !dir.is_dir() {
        bail!("{} is not a directory", dir.display());
    }
    let mut bins = Vec::new();
    for entry in WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.with_context(|| format!("walking {}", dir.display()))?;
        let path = entry.path();
        if entry.file_type().is_file() && path.extension().is_some_and(|e| e == "bin") {
            bins.push(path.to_path_buf());
        }
    }

    let results: Vec<_> = bins
        .par_iter()
        .map(|bin| check_one(bin, isa, probabilities))
        .collect();

    let mut reports = Vec::new();
    let mut failures = Vec::new();
    for (bin, result) in bins.iter().zip(results) {
        let name = bin.strip_prefix(dir).unwrap_or(bin).display().to_string();
        match result {
            Ok(report) => reports.push(report),
            Err(e) => {
                if e.downcast_ref::<pdt_disasm::Error>()
                    .is_some_and(pdt_disasm::Error::is_internal)
                {
                    return Err(e.context(name));
                }
                failures.push(Value::from(
                    Object::new()
                        .field("file", name)
                        .field("error", format!("{e:#}")),
                ));
            }
        }
    }

    let summary = aggregate_rates(&reports)?;
    Ok(json::render(
        Object::new()
            .field("files", summary.files)
            .field("total_bytes", summary.total_bytes)
            .field(
                "file_error_rate",
                per_category(|c| json::float(summary.file_error_rate(c))),
            )
            .field(
                "errors_per_mib",
                per_category(|c| json::float(summary.errors_per_mib(c))),
            )
            .field("errors", per_category(|c| summary.error_count(c).into()))
            .field(
                "files_with_errors",
                per_category(|c| summary.files_with(c).into()),
            )
            .field("failures", failures),
    ))
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Decode { region, out } => {
            let loaded = load_region(&region)?;
            emit(&decode_dump(&loaded), out.as_deref())
        }
        Command::Pdt { region, out } => {
            let loaded = load_region(&region)?;
            emit(&pdt_dump(&loaded), out.as_deref())
        }
        Command::Check {
            region,
            source,
            probabilities,
        } => {
            let loaded = load_region(&region)?;
            let truth = truth_from(&source, probabilities, &loaded.analysis)?;
            let report = loaded.analysis.detect(&truth)?;
            emit(&json::render(report_json(&loaded.region, &report)), None)
        }
        Command::Prune {
            region,
            source,
            probabilities,
            mode,
            out_labels,
        } => {
            let loaded = load_region(&region)?;
            let len = loaded.analysis.region_len();
            let scores = scores_from(&source, probabilities, len)?;
            let result = loaded.analysis.prune(&scores, mode)?;
            if let Some(path) = out_labels {
                let mut truth = TruthVector::all(len, Truth::False);
                for &v in &result.retained {
                    truth.0[v] = Truth::True;
                }
                write_labels(&path, &truth)?;
            }
            emit(
                &json::render(
                    Object::new()
                        .field("retained", addresses(&loaded.region, &result.retained))
                        .field("total_raw_score", json::float(result.total_raw_score))
                        .field("mode", result.mode.as_str()),
                ),
                None,
            )
        }
        Command::Masks {
            region,
            window,
            max_steps,
            out_reach,
            out_overlap,
            out_global,
        } => {
            let loaded = load_region(&region)?;
            let cfg = &loaded.analysis.cfg;
            if out_reach.is_none() && out_overlap.is_none() && out_global.is_none() {
                bail!("nothing to write: pass --out-reach, --out-overlap or --out-global");
            }
            if let Some(path) = out_reach {
                write_file(&path, &reachability_mask(cfg, window, max_steps).to_bytes())?;
            }
            if let Some(path) = out_overlap {
                write_file(&path, &overlap_mask(cfg, window).to_bytes())?;
            }
            if let Some(path) = out_global {
                write_file(&path, &global_connections(cfg).to_bytes())?;
            }
            Ok(())
        }
        Command::Eval {
            region,
            labels,
            pred,
        } => {
            let loaded = load_region(&region)?;
            let len = loaded.analysis.region_len();
            let reference = load_labels(&labels, len)?;
            let predicted: Vec<usize> = load_labels(&pred, len)?.true_offsets().collect();
            let r = evaluate(&predicted, &reference);
            emit(
                &json::render(
                    Object::new()
                        .field("precision", json::float(r.precision))
                        .field("recall", json::float(r.recall))
                        .field("f1", json::float(r.f1))
                        .field("tp", r.tp)
                        .field("fp", r.fp)
                        .field("fn", r.fn_),
                ),
                None,
            )
        }
        Command::BatchCheck {
            dir,
            isa,
            probabilities,
        } => emit(&batch_check(&dir, &isa, probabilities)?, None),
    }
}
