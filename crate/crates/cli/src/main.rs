//! `pdt-disasm`: superset CFG dumps, violation reports, pruning and mask
//! features for raw code regions.

mod commands;
mod json;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pdt_disasm::masks::{DEFAULT_MAX_STEPS, DEFAULT_WINDOW};
use pdt_disasm::PropagationMode;

#[derive(Debug, Parser)]
#[command(name = "pdt-disasm", version, about)]
struct Cli {
    /// Worker threads; 0 uses every available core.
    #[arg(long, global = true, env = "PDT_DISASM_THREADS", default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct RegionArgs {
    /// Raw code region.
    input: PathBuf,
    /// Address of the first byte; decimal or 0x-prefixed hex.
    #[arg(long, default_value = "0", value_parser = parse_address)]
    base: u64,
    #[arg(long, default_value = "tbc1")]
    isa: String,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct TruthSource {
    /// Tri-state label file, one i8 per offset.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Score file, one little-endian f32 per offset.
    #[arg(long)]
    scores: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Dump the superset CFG, one offset per line.
    Decode {
        #[command(flatten)]
        region: RegionArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dump the post-dominator forest, one offset per line.
    Pdt {
        #[command(flatten)]
        region: RegionArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Report structural violations of a disassembly result.
    Check {
        #[command(flatten)]
        region: RegionArgs,
        #[command(flatten)]
        source: TruthSource,
        /// Score file holds probabilities rather than logits.
        #[arg(long, requires = "scores")]
        probabilities: bool,
    },
    /// Prune scores into a consistent instruction set.
    Prune {
        #[command(flatten)]
        region: RegionArgs,
        #[command(flatten)]
        source: TruthSource,
        #[arg(long, requires = "scores")]
        probabilities: bool,
        #[arg(long, default_value_t = PropagationMode::Faithful)]
        mode: PropagationMode,
        /// Write the retained set as a label file.
        #[arg(long)]
        out_labels: Option<PathBuf>,
    },
    /// Write attention mask and global adjacency feature files.
    Masks {
        #[command(flatten)]
        region: RegionArgs,
        #[arg(long, default_value_t = DEFAULT_WINDOW)]
        window: usize,
        #[arg(long, default_value_t = DEFAULT_MAX_STEPS)]
        max_steps: usize,
        #[arg(long)]
        out_reach: Option<PathBuf>,
        #[arg(long)]
        out_overlap: Option<PathBuf>,
        #[arg(long)]
        out_global: Option<PathBuf>,
    },
    /// Precision and recall of predicted labels against reference labels.
    Eval {
        #[command(flatten)]
        region: RegionArgs,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        pred: PathBuf,
    },
    /// Check every `*.bin` under a directory against its sibling
    /// `<stem>.i8` or `<stem>.f32` and aggregate error rates.
    BatchCheck {
        dir: PathBuf,
        #[arg(long, default_value = "tbc1")]
        isa: String,
        #[arg(long)]
        probabilities: bool,
    },
}

fn parse_address(s: &str) -> Result<u64, String> {
    let parsed = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => s.parse(),
    };
    parsed.map_err(|e| format!("invalid address {s:?}: {e}"))
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<pdt_disasm::Error>() {
        Some(e) if e.is_internal() => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };

    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
    {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(2);
        }
    };

    match pool.install(|| commands::run(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
