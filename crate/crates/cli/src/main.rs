//! `dualgrasp`: batch front-end for grasp-pair generation, labeling,
//! normalization, scene rendering and training-sample export.
//!
//! Exit codes: 0 success, 1 unexpected failure, 2 usage or configuration
//! error, 3 I/O error or missing file, 4 dataset validation failure,
//! 5 unusable mesh, 6 dataset schema version mismatch.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use dualgrasp::config::PipelineConfig;
use dualgrasp::dataset;
use dualgrasp::mesh::{primitives, write_obj};
use dualgrasp::par::Exec;
use dualgrasp::pipeline::{self, ObjectReport, Progress};
use dualgrasp::Error;

#[derive(Parser, Debug)]
#[command(name = "dualgrasp", version, about = "Dual-arm grasp pair dataset generator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug)]
struct Common {
    /// Pipeline configuration (TOML).
    #[arg(short, long)]
    config: PathBuf,
    /// Override a config key, e.g. `--set sampling.gamma=0.3`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", value_parser = parse_override)]
    overrides: Vec<(String, String)>,
    /// Worker threads (overrides the config and the environment).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample grasps, pair, label and prune every configured object.
    Generate(Common),
    /// Normalize q_dex and q_score by the dataset-wide maximum σ.
    Finalize(Common),
    /// Render depth scenes and write merged clouds (PLY).
    Render(Common),
    /// Render scenes and write fixed-size training samples.
    Export(Common),
    /// Write score histograms; `--compare` adds a cross-run quartile table.
    Stats {
        #[command(flatten)]
        common: Common,
        /// Further dataset directories to compare against the configured one.
        #[arg(long, num_args = 1..)]
        compare: Vec<PathBuf>,
    },
    /// Check a dataset's schema and invariants.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Dataset directory; defaults to the configured one.
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Write the built-in primitive corpus as OBJ files.
    Corpus {
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_override(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| format!("expected KEY=VALUE, got {s:?}"))
}

fn log(level: &str, event: &str, fields: Value) {
    let mut line = json!({ "level": level, "event": event });
    if let (Some(m), Value::Object(f)) = (line.as_object_mut(), fields) {
        m.extend(f);
    }
    eprintln!("{line}");
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } | Error::InvalidArgument(_) | Error::BadWeights(_) | Error::BadThresholds(..) => 2,
        Error::FileNotFound(_) | Error::Io { .. } => 3,
        Error::Validation(_) | Error::EmptyDataset | Error::Json(_) => 4,
        Error::UnsupportedFormat(_) | Error::MalformedMesh { .. } | Error::EmptyMesh | Error::DegenerateMesh(_) => 5,
        Error::SchemaVersionMismatch { .. } => 6,
        _ => 1,
    }
}

fn load(common: &Common) -> dualgrasp::Result<PipelineConfig> {
    let mut cfg = PipelineConfig::load_with_overrides(&common.config, &common.overrides)?;
    cfg.workers = match common.workers {
        Some(w) => w,
        None => cfg.effective_workers()?,
    };
    Ok(cfg)
}

fn report_fields(r: &ObjectReport) -> Value {
    json!({
        "object": r.name,
        "grasps": r.grasps,
        "shortfall": r.shortfall,
        "candidate_pairs": r.candidate_pairs,
        "feasible_pairs": r.feasible_pairs,
        "pairs": r.kept_pairs,
        "attempts": r.sampling.attempts,
        "elapsed_ms": r.elapsed_ms as u64,
        "warnings": r.warnings.len(),
    })
}

fn generate(cfg: &PipelineConfig) -> dualgrasp::Result<Value> {
    let progress = Progress::default();
    let (manifest, reports) = pipeline::run_generate(cfg, Exec::Parallel, &progress, |r| match r {
        Ok(rep) => {
            log("info", "object_done", report_fields(rep));
            for w in &rep.warnings {
                log("warn", "object_warning", json!({ "object": rep.name, "message": w }));
            }
        }
        Err((src, e)) => log("error", "object_failed", json!({ "object": src, "error": e.to_string() })),
    })?;
    Ok(json!({
        "objects": manifest.objects.len(),
        "pairs": manifest.objects.iter().map(|o| o.pairs).sum::<usize>(),
        "warnings": reports.iter().map(|r| r.warnings.len()).sum::<usize>(),
        "dataset": cfg.output.dataset_dir,
    }))
}

fn stats(cfg: &PipelineConfig, compare: &[PathBuf]) -> dualgrasp::Result<Value> {
    let out = &cfg.output.stats_dir;
    let st = pipeline::run_stats(&cfg.output.dataset_dir, out, cfg.output.histogram_bins)?;
    let mut result = json!({ "pairs": st.pairs, "bins": st.bin_counts, "stats": out });
    if !compare.is_empty() {
        let mut runs = Vec::new();
        for dir in std::iter::once(&cfg.output.dataset_dir).chain(compare) {
            let (_, records) = dataset::read_dataset(dir)?;
            runs.push((dir.display().to_string(), records));
        }
        let csv = pipeline::compare_runs(&runs);
        let path = out.join("quartile.csv");
        std::fs::write(&path, &csv).map_err(|e| Error::io(&path, e))?;
        result["compare"] = json!(path);
    }
    Ok(result)
}

fn validate(dir: &Path) -> dualgrasp::Result<Value> {
    let (manifest, records) = dataset::read_dataset(dir)?;
    Ok(json!({
        "objects": records.len(),
        "pairs": records.iter().map(|r| r.pairs.len()).sum::<usize>(),
        "finalized": manifest.max_sigma.is_some(),
    }))
}

fn corpus(out: &Path) -> dualgrasp::Result<Value> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let shapes = primitives::furniture_corpus();
    for (name, mesh) in &shapes {
        write_obj(mesh, out.join(format!("{name}.obj")))?;
    }
    Ok(json!({ "meshes": shapes.len(), "out": out }))
}

fn run(cmd: &Command) -> dualgrasp::Result<Value> {
    let common = match cmd {
        Command::Corpus { out } => return corpus(out),
        Command::Generate(c) | Command::Finalize(c) | Command::Render(c) | Command::Export(c) => c,
        Command::Stats { common, .. } | Command::Validate { common, .. } => common,
    };
    let cfg = load(common)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::config("workers", e.to_string()))?;
    log("info", "start", json!({ "workers": pool.current_num_threads(), "seed": cfg.seed }));
    pool.install(|| match cmd {
        Command::Generate(_) => generate(&cfg),
        Command::Finalize(_) => pipeline::run_finalize(&cfg).map(|m| json!({ "max_sigma": m })),
        Command::Render(_) => pipeline::run_render(&cfg, Exec::Parallel)
            .map(|s| json!({ "scenes": s.len(), "out": cfg.output.scenes_dir })),
        Command::Export(_) => pipeline::run_export(&cfg, Exec::Parallel).map(|m| {
            json!({
                "scenes": m.scenes.len(),
                "records": m.scenes.iter().map(|s| s.exported).sum::<usize>(),
                "skipped": m.scenes.iter().map(|s| s.skipped).sum::<usize>(),
                "out": cfg.output.export_dir,
            })
        }),
        Command::Stats { compare, .. } => stats(&cfg, compare),
        Command::Validate { dataset, .. } => validate(dataset.as_deref().unwrap_or(&cfg.output.dataset_dir)),
        Command::Corpus { .. } => unreachable!(),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = format!("{:?}", cli.command).split(['(', ' ']).next().unwrap_or_default().to_lowercase();
    let start = Instant::now();
    match run(&cli.command) {
        Ok(mut summary) => {
            summary["elapsed_ms"] = json!(start.elapsed().as_millis() as u64);
            log("info", &format!("{name}_done"), summary);
            ExitCode::SUCCESS
        }
        Err(e) => {
            let code = exit_code(&e);
            log("error", &format!("{name}_failed"), json!({ "error": e.to_string(), "exit_code": code }));
            ExitCode::from(code)
        }
    }
}
