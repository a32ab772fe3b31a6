use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use oodbench::pipeline::{paper_suite, run_pipeline, RunConfig, RunOutput, Stage};

/// Reconstruction-based out-of-distribution detection benchmark.
#[derive(Debug, Parser)]
#[command(name = "oodbench", version, about)]
struct Cli {
    /// JSON run configuration; defaults apply to omitted fields.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory. OODBENCH_OUT takes precedence when set.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Override the global seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for per-image work (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Generate (or ingest) the in-distribution corpus.
    GenerateData,
    /// Run through artifact generation.
    GenerateArtifacts,
    /// Run through model training.
    Train,
    /// Run through slice scoring.
    Score,
    /// Run through evaluation (results.json and tables).
    Evaluate,
    /// Run through the report (figures).
    Report,
    /// Full run; uses the paper-suite preset unless --config is given.
    PaperSuite,
}

impl Command {
    fn stage(self) -> Stage {
        match self {
            Command::GenerateData => Stage::GenerateData,
            Command::GenerateArtifacts => Stage::GenerateArtifacts,
            Command::Train => Stage::Train,
            Command::Score => Stage::Score,
            Command::Evaluate => Stage::Evaluate,
            Command::Report | Command::PaperSuite => Stage::Report,
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match (&cli.config, cli.command) {
        (Some(path), _) => {
            RunConfig::load(path).with_context(|| format!("loading {}", path.display()))?
        }
        (None, Command::PaperSuite) => paper_suite(),
        (None, _) => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = std::env::var_os("OODBENCH_OUT").filter(|v| !v.is_empty()) {
        cfg.output_dir = PathBuf::from(out);
    } else if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn summarize(run: &RunOutput) {
    if let Some(data) = &run.data {
        println!(
            "data: {} train / {} validation slices",
            data.train.len(),
            data.val.len()
        );
    }
    if let Some(a) = &run.artifacts {
        let n: usize = a
            .circle
            .iter()
            .chain(&a.extended)
            .map(|s| s.samples.len())
            .sum();
        println!(
            "artifacts: {n} samples in {} sets",
            a.circle.iter().count() + a.extended.len()
        );
    }
    if let Some(t) = &run.train {
        for m in &t.models {
            if let Some(store) = &m.store {
                let best = store.optimal_epoch().unwrap_or(0);
                println!("model {}: best epoch {best}/{}", m.id, store.epochs());
            } else {
                println!("model {}: {:?}", m.id, m.kind);
            }
        }
    }
    if let Some(r) = &run.results {
        for c in &r.curves {
            println!("circle AUPRC {}: {:.4}", c.scorer, c.curve.auprc);
        }
        for f in &r.extended {
            let p = f
                .wilcoxon
                .map(|t| format!("{:.2e}", t.p_value))
                .unwrap_or_else(|| "n/a".into());
            let rho: Vec<String> = f
                .severity
                .iter()
                .map(|s| {
                    format!(
                        "{}={}",
                        s.parameter,
                        s.rho.map_or("n/a".into(), |r| format!("{r:.3}"))
                    )
                })
                .collect();
            println!(
                "{:<14} score {:.4} vs clean {:.4}  p {p}  rho {}",
                f.family.name(),
                f.mean_artifact_score,
                f.mean_id_score,
                rho.join(" ")
            );
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        anyhow::ensure!(
            n > 0,
            oodbench::Error::Config("--threads must be at least 1".into())
        );
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("starting the worker pool")?;
    }
    let cfg = load_config(cli)?;
    let out = cfg.output_dir.clone();
    let stage = cli.command.stage();
    let result = run_pipeline(&cfg, stage, Some(&out))?;
    summarize(&result);
    println!("wrote {} files under {}", result.files.len(), out.display());
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    err.chain()
        .find_map(|e| e.downcast_ref::<oodbench::Error>())
        .map_or(1, |e| e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
