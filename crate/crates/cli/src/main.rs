//! `thor`: generate synthetic corpora, run adaptive/uniform sampling over
//! them, and evaluate the resulting traces.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};

use config::ConfigFile;
use thor_core::embeddings::load_embeddings;
use thor_core::pipeline::{
    coverage_csv, evaluate_captions, evaluate_trace, run_sampler, usage_by_participant_csv,
    Corpus, EmbeddingSource, SamplerKind, TraceEvaluation,
};
use thor_core::recognition::{load_captions, KeywordMap};
use thor_core::synth::{generate_corpus, ScenarioSpec};
use thor_core::temporal::{variant_preset, SampleTrace, Variant};

#[derive(Parser)]
#[command(name = "thor", version, about = "Thermal-guided adaptive RGB sampling")]
struct Cli {
    /// Override the randomization seed where one applies (gen).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// TOML run configuration (see README for the schema).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a single config key, e.g. --set fps_max=0.25. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus from a scenario spec.
    Gen(GenArgs),
    /// Run a sampler over a corpus, producing a trace and patches.
    Sample(SampleArgs),
    /// Evaluate traces against a corpus: coverage, usage, energy, recognition.
    Eval(EvalArgs),
    /// Emit the combined plot-ready CSV tables for a set of traces.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Scenario spec TOML.
    #[arg(long, conflicts_with = "reference", required_unless_present = "reference")]
    spec: Option<PathBuf>,
    /// Use the built-in reference benchmark scenario (3 participants,
    /// 48 segments, seed 42).
    #[arg(long)]
    reference: bool,
    /// Output corpus directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SampleArgs {
    /// Corpus directory (contains manifest.jsonl).
    #[arg(long)]
    corpus: PathBuf,
    /// Adaptive variant: thor-high, thor-mid or thor-low.
    #[arg(long, conflicts_with = "uniform", required_unless_present = "uniform")]
    variant: Option<String>,
    /// Uniform baseline period in seconds instead of a variant.
    #[arg(long)]
    uniform: Option<f64>,
    /// Output trace JSONL path.
    #[arg(long)]
    out: PathBuf,
    /// Directory for cropped patch PPMs (default: `<out stem>_patches`
    /// next to the trace; adaptive runs only).
    #[arg(long)]
    patches: Option<PathBuf>,
    /// Skip writing patch files.
    #[arg(long)]
    no_patches: bool,
    /// Externally produced embeddings CSV (frame_id,v0..v63); default is the
    /// built-in block-mean extractor.
    #[arg(long)]
    embeddings: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Trace files to evaluate. Repeatable.
    #[arg(long, required = true)]
    trace: Vec<PathBuf>,
    /// Caption JSONL for recognition scoring.
    #[arg(long)]
    captions: Option<PathBuf>,
    /// Keyword map CSV (activity,keyword); default is the bundled map.
    #[arg(long)]
    keywords: Option<PathBuf>,
    /// Report output directory.
    #[arg(long, default_value = "thor-report")]
    report: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, required = true)]
    trace: Vec<PathBuf>,
    /// Output directory for the combined tables.
    #[arg(long)]
    out: PathBuf,
}

/// Data-level failure (exit 2), as opposed to usage failures (exit 1).
struct DataError(anyhow::Error);

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints help/version on stdout with success status.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => match err.downcast::<DataError>() {
            Ok(DataError(inner)) => {
                eprintln!("error: {inner:#}");
                ExitCode::from(2)
            }
            Err(err) => {
                eprintln!("usage error: {err:#}");
                ExitCode::from(1)
            }
        },
    }
}

fn data<T>(result: Result<T>) -> Result<T> {
    result.map_err(|e| anyhow!(DataError(e)))
}

impl std::fmt::Debug for DataError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

impl std::fmt::Display for DataError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

impl std::error::Error for DataError {}

fn run(cli: Cli) -> Result<()> {
    let mut config = ConfigFile::load(cli.config.as_deref())
        .map_err(|e| anyhow!(DataError(e)))?;
    // gen interprets --set keys as scenario scalars, the rest as run config.
    if !matches!(cli.command, Command::Gen(_)) {
        config.apply_overrides(&cli.sets)?;
    }
    match cli.command {
        Command::Gen(args) => cmd_gen(args, cli.seed, &cli.sets),
        Command::Sample(args) => cmd_sample(args, &config),
        Command::Eval(args) => cmd_eval(args, &config),
        Command::Report(args) => cmd_report(args, &config),
    }
}

fn cmd_gen(args: GenArgs, seed: Option<u64>, sets: &[String]) -> Result<()> {
    let mut spec = if args.reference {
        ScenarioSpec::reference()
    } else {
        let path = args.spec.expect("clap enforces spec xor reference");
        data(ScenarioSpec::load(&path).with_context(|| format!("loading spec {}", path.display())))?
    };
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    // Scenario scalar overrides ride on --set for gen.
    for set in sets {
        let (key, value) = set
            .split_once('=')
            .ok_or_else(|| anyhow!("--set needs key=value, got {set:?}"))?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "noise_sigma" => {
                spec.noise_sigma = value
                    .parse()
                    .map_err(|_| anyhow!("noise_sigma: bad number {value:?}"))?
            }
            "transition_s" => {
                spec.transition_s = value
                    .parse()
                    .map_err(|_| anyhow!("transition_s: bad number {value:?}"))?
            }
            "seed" => {
                spec.seed = value
                    .parse()
                    .map_err(|_| anyhow!("seed: bad integer {value:?}"))?
            }
            _ => return Err(anyhow!("unknown gen --set key {key:?}")),
        }
    }
    let manifest = data(generate_corpus(&spec, &args.out).map_err(Into::into))?;
    eprintln!(
        "generated corpus: {} participants, manifest {}",
        spec.participants.len(),
        manifest.display()
    );
    Ok(())
}

fn cmd_sample(args: SampleArgs, config: &ConfigFile) -> Result<()> {
    let kind = match (&args.variant, args.uniform) {
        (Some(name), None) => {
            let variant = Variant::parse(name).map_err(|e| anyhow!("{e}"))?;
            let cfg = config.sampler_config(variant_preset(variant));
            cfg.validate().map_err(|e| anyhow!("{e}"))?;
            SamplerKind::Variant { variant, config: cfg }
        }
        (None, Some(period_s)) => {
            if period_s <= 0.0 {
                return Err(anyhow!("--uniform period must be positive"));
            }
            SamplerKind::Uniform { period_s }
        }
        _ => unreachable!("clap enforces variant xor uniform"),
    };
    let corpus = data(Corpus::open(&args.corpus).map_err(Into::into))?;
    let embeddings = match &args.embeddings {
        None => EmbeddingSource::Builtin,
        Some(path) => EmbeddingSource::File(data(
            load_embeddings(path).map_err(|e| anyhow!("loading embeddings: {e}")),
        )?),
    };
    let patches_dir = if args.no_patches || matches!(kind, SamplerKind::Uniform { .. }) {
        None
    } else {
        Some(args.patches.clone().unwrap_or_else(|| default_patches_dir(&args.out)))
    };
    let trace = data(
        run_sampler(&corpus, &kind, &config.spatial_config(), &embeddings, patches_dir.as_deref())
            .map_err(Into::into),
    )?;
    data(trace.save(&args.out).map_err(|e| anyhow!("writing trace: {e}")))?;

    let frame_area = corpus.frame_area();
    let sampled_px: u64 = trace
        .records
        .iter()
        .map(|r| r.crop.map_or(frame_area, |[_, _, w, h]| w as u64 * h as u64))
        .sum();
    let ratio = sampled_px as f64 / (corpus.records.len() as u64 * frame_area) as f64;
    eprintln!(
        "sampled {} of {} frames ({} sampler), pixel ratio {:.6}",
        trace.records.len(),
        corpus.records.len(),
        trace.header.sampler,
        ratio
    );
    Ok(())
}

fn default_patches_dir(trace_out: &Path) -> PathBuf {
    let stem = trace_out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "trace".into());
    trace_out.with_file_name(format!("{stem}_patches"))
}

fn evaluate_traces(
    corpus: &Corpus,
    paths: &[PathBuf],
    config: &ConfigFile,
) -> Result<Vec<(String, TraceEvaluation)>> {
    let eval_cfg = config.eval_config()?;
    let mut out = Vec::new();
    for path in paths {
        let trace = data(
            SampleTrace::load(path)
                .map_err(|e| anyhow!("loading trace {}: {e}", path.display())),
        )?;
        let eval = data(evaluate_trace(corpus, &trace, &eval_cfg).map_err(Into::into))?;
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| eval.name.clone());
        out.push((stem, eval));
    }
    Ok(out)
}

fn cmd_eval(args: EvalArgs, config: &ConfigFile) -> Result<()> {
    let corpus = data(Corpus::open(&args.corpus).map_err(Into::into))?;
    let evals = evaluate_traces(&corpus, &args.trace, config)?;
    std::fs::create_dir_all(&args.report)
        .with_context(|| format!("creating {}", args.report.display()))
        .map_err(|e| anyhow!(DataError(e)))?;

    let table: Vec<TraceEvaluation> = evals.iter().map(|(_, e)| e.clone()).collect();
    data(write(args.report.join("coverage.csv"), coverage_csv(&table)))?;
    data(write(
        args.report.join("usage_by_participant.csv"),
        usage_by_participant_csv(&table),
    ))?;
    for (stem, eval) in &evals {
        data(write(
            args.report.join(format!("eval_{stem}.json")),
            serde_json::to_string_pretty(eval)? + "\n",
        ))?;
        eprintln!(
            "{}: coverage {:.1}% overall, usage {:.4}%, device {:.1} mWh ({:+.1}% vs stream), phone {:.2} mWh",
            eval.name,
            eval.coverage.overall.fraction() * 100.0,
            eval.usage.ratio * 100.0,
            eval.device.total_mwh,
            -eval.device_reduction_pct,
            eval.phone.total_mwh,
        );
    }

    if let Some(captions_path) = &args.captions {
        let map = match &args.keywords {
            None => KeywordMap::bundled(),
            Some(p) => data(KeywordMap::load(p).map_err(|e| anyhow!("keywords: {e}")))?,
        };
        let captions = data(load_captions(captions_path).map_err(|e| anyhow!("captions: {e}")))?;
        let report = data(evaluate_captions(&captions, &map).map_err(Into::into))?;
        data(write(
            args.report.join("recognition.json"),
            serde_json::to_string_pretty(&report)? + "\n",
        ))?;
        eprintln!(
            "recognition: P {:.3} R {:.3} F1 {:.3} acc {:.3}",
            report.macro_precision, report.macro_recall, report.macro_f1, report.accuracy
        );
    }

    let summary = serde_json::json!({
        "corpus": corpus.reference,
        "traces": table,
    });
    data(write(
        args.report.join("summary.json"),
        serde_json::to_string_pretty(&summary)? + "\n",
    ))?;
    eprintln!("report written to {}", args.report.display());
    Ok(())
}

fn cmd_report(args: ReportArgs, config: &ConfigFile) -> Result<()> {
    let corpus = data(Corpus::open(&args.corpus).map_err(Into::into))?;
    let evals = evaluate_traces(&corpus, &args.trace, config)?;
    let table: Vec<TraceEvaluation> = evals.into_iter().map(|(_, e)| e).collect();
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))
        .map_err(|e| anyhow!(DataError(e)))?;
    data(write(args.out.join("coverage.csv"), coverage_csv(&table)))?;
    data(write(
        args.out.join("usage_by_participant.csv"),
        usage_by_participant_csv(&table),
    ))?;
    let mut energy = String::from(
        "trace,device_mwh,device_reduction_pct,phone_mwh,phone_reduction_pct\n",
    );
    for e in &table {
        energy.push_str(&format!(
            "{},{:.6},{:.4},{:.6},{:.4}\n",
            e.name, e.device.total_mwh, e.device_reduction_pct, e.phone.total_mwh,
            e.phone_reduction_pct
        ));
    }
    data(write(args.out.join("energy.csv"), energy))?;
    eprintln!("tables written to {}", args.out.display());
    Ok(())
}

fn write(path: PathBuf, contents: String) -> Result<()> {
    std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}
