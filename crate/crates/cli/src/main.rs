mod config;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use stml_core::grid::{read_sequence, write_sequence};
use stml_core::harness::{aggregate_reports, register_sequence, run_benchmark, synth_generate, write_line_profile, RunReport};
use stml_core::{AffineStack, ImageSequence};

use config::{run_config, synth_spec, FileConfig, MethodArg, RunFlags, SynthFlags};

/// Groupwise affine registration of image sequences with spatial-only or
/// spatio-temporal multilevel schedules.
#[derive(Debug, Parser)]
#[command(name = "stml", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic sequence and its ground-truth transforms
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        synth: SynthFlags,
    },
    /// Register a sequence file
    Register {
        #[arg(long, value_enum, default_value = "stml")]
        method: MethodArg,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Ground-truth transforms, adds recovery errors to the report
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Also write lineprofile.csv
        #[arg(long)]
        line_profile: bool,
        #[command(flatten)]
        run: RunFlags,
    },
    /// Run both methods on a synthetic sequence
    Bench {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
        #[arg(long)]
        line_profile: bool,
        #[command(flatten)]
        run: RunFlags,
        #[command(flatten)]
        synth: SynthFlags,
    },
    /// Concatenate the report.csv of every run below a directory
    Report {
        #[arg(long)]
        runs: PathBuf,
        /// Output file, stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Synth { out, config, seed, synth } => {
            let file = FileConfig::load_opt(config.as_deref())?;
            let spec = synth_spec(&file, &synth, seed);
            let (seq, truth) = synth_generate(&spec)?;
            fs::create_dir_all(&out)?;
            write_sequence(&seq, out.join("sequence.stsq"))?;
            fs::write(out.join("truth.txt"), truth.to_text())?;
            println!("wrote {} frames of {:?} to {}", seq.len(), spec.dims, out.display());
        }
        Command::Register { method, input, out, truth, config, line_profile, run } => {
            let file = FileConfig::load_opt(config.as_deref())?;
            let cfg = run_config(&file, &run, Some(method));
            let seq = read_sequence(&input).with_context(|| format!("reading {}", input.display()))?;
            let truth = truth
                .map(|p| -> Result<AffineStack> {
                    let text = fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
                    Ok(AffineStack::from_text(&text, seq.len())?)
                })
                .transpose()?;
            let report = register_sequence(&seq, truth.as_ref(), &cfg)?;
            finish(&report, &seq, &out, line_profile)?;
        }
        Command::Bench { config, out, method, line_profile, run, synth } => {
            let file = FileConfig::load_opt(config.as_deref())?;
            let cfg = run_config(&file, &run, method);
            let spec = synth_spec(&file, &synth, Some(cfg.seed));
            let (report, seq, truth) = run_benchmark(&cfg, &spec)?;
            fs::create_dir_all(&out)?;
            fs::write(out.join("truth.txt"), truth.to_text())?;
            finish(&report, &seq, &out, line_profile)?;
        }
        Command::Report { runs, out } => {
            let count = match out {
                Some(path) => aggregate_reports(&runs, fs::File::create(&path)?)?,
                None => aggregate_reports(&runs, std::io::stdout().lock())?,
            };
            if count == 0 {
                bail!("no report.csv found below {}", runs.display());
            }
        }
    }
    Ok(())
}

fn finish(report: &RunReport, seq: &ImageSequence, out: &Path, line_profile: bool) -> Result<()> {
    report.write_outputs(out)?;
    if line_profile {
        let stacks: Vec<(&str, &AffineStack)> = [&report.spml, &report.stml]
            .into_iter()
            .flatten()
            .filter_map(|m| m.transforms.as_ref().map(|y| (m.method.as_str(), y)))
            .collect();
        write_line_profile(out.join("lineprofile.csv"), seq, &stacks)?;
    }
    print_summary(report);
    if report.is_partial() {
        bail!("partial report: {}", report.failures.join("; "));
    }
    Ok(())
}

fn print_summary(report: &RunReport) {
    println!("frames {}  grids {}  lambda {:.4e}  min rho {:.4}", report.frames, report.grids.join(" > "), report.lambda, report.min_rho);
    for m in [&report.spml, &report.stml].into_iter().flatten() {
        let finest = m.levels.last();
        print!(
            "{:>5}: {:.2} s, {} evaluations",
            m.method,
            m.total_time_s,
            m.total_evaluations
        );
        if let Some(r) = finest.and_then(|l| l.reduction_pct) {
            print!(", reduction in D {r:.2}%");
        }
        if let Some(e) = m.recovery {
            print!(", max error {:.4} cells / {:.5}", e.max_translation_cells, e.max_matrix);
        }
        println!();
    }
    if let Some(Some(d)) = report.rel_diff_y_pct.last() {
        println!("rel diff y {d:.3}%");
    }
    if let (Some(s), Some(r)) = (report.speedup, report.finest_eval_ratio) {
        println!("speedup {s:.2}, finest-level evaluation ratio {r:.2}");
    }
}
