use std::fmt;
use std::path::{Path, PathBuf};

use super::config::RunConfig;
use super::report;
use super::results::{evaluate, Results};
use super::stages::{
    generate_artifacts, generate_data, score_all, train_models, ArtifactStage, DataStage,
    ScoreStage, TrainStage,
};
use crate::error::Result;

/// Pipeline stages in execution order. Running a stage runs every
/// earlier stage first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    GenerateData,
    GenerateArtifacts,
    Train,
    Score,
    Evaluate,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::GenerateData,
        Stage::GenerateArtifacts,
        Stage::Train,
        Stage::Score,
        Stage::Evaluate,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::GenerateData => "generate-data",
            Stage::GenerateArtifacts => "generate-artifacts",
            Stage::Train => "train",
            Stage::Score => "score",
            Stage::Evaluate => "evaluate",
            Stage::Report => "report",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Everything computed up to the requested stage.
#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub data: Option<DataStage>,
    pub artifacts: Option<ArtifactStage>,
    pub train: Option<TrainStage>,
    pub scores: Option<ScoreStage>,
    pub results: Option<Results>,
    /// Written files relative to the output directory, in write order.
    pub files: Vec<PathBuf>,
}

fn staged<T>(stage: Stage, f: impl FnOnce() -> Result<T>) -> Result<T> {
    f().map_err(|e| e.in_stage(stage.name()))
}

/// Run every stage up to and including `until`. With an output directory
/// each stage writes its files and a `manifest.json` is written last.
pub fn run_pipeline(cfg: &RunConfig, until: Stage, out: Option<&Path>) -> Result<RunOutput> {
    cfg.validate()?;
    let mut run = RunOutput::default();
    let mut done = Vec::new();
    let reached = |s: Stage| s <= until;

    let data = staged(Stage::GenerateData, || {
        let data = generate_data(cfg)?;
        if let Some(out) = out {
            run.files.extend(report::write_data(out, cfg, &data)?);
        }
        Ok(data)
    })?;
    done.push(Stage::GenerateData.name());

    if reached(Stage::GenerateArtifacts) {
        let artifacts = staged(Stage::GenerateArtifacts, || {
            let a = generate_artifacts(cfg, &data)?;
            if let Some(out) = out {
                run.files.extend(report::write_artifacts(out, &a)?);
            }
            Ok(a)
        })?;
        done.push(Stage::GenerateArtifacts.name());
        run.artifacts = Some(artifacts);
    }

    if reached(Stage::Train) {
        let train = staged(Stage::Train, || {
            let t = train_models(cfg, &data)?;
            if let Some(out) = out {
                run.files.extend(report::write_models(out, &t)?);
            }
            Ok(t)
        })?;
        done.push(Stage::Train.name());
        run.train = Some(train);
    }

    if reached(Stage::Score) {
        let artifacts = run.artifacts.as_ref().expect("artifacts precede scoring");
        let train = run.train.as_ref().expect("training precedes scoring");
        let scores = staged(Stage::Score, || {
            let s = score_all(cfg, &data, artifacts, train)?;
            if let Some(out) = out {
                run.files.extend(report::write_scores(out, &s)?);
            }
            Ok(s)
        })?;
        done.push(Stage::Score.name());
        run.scores = Some(scores);
    }

    if reached(Stage::Evaluate) {
        let train = run.train.as_ref().expect("training precedes evaluation");
        let scores = run.scores.as_ref().expect("scoring precedes evaluation");
        let results = staged(Stage::Evaluate, || {
            let r = evaluate(cfg, train, scores)?;
            if let Some(out) = out {
                run.files.extend(report::write_results(out, &r)?);
            }
            Ok(r)
        })?;
        done.push(Stage::Evaluate.name());
        run.results = Some(results);
    }

    if reached(Stage::Report) {
        let results = run
            .results
            .as_ref()
            .expect("evaluation precedes the report");
        let scores = run.scores.as_ref().expect("scoring precedes the report");
        if let Some(out) = out {
            let files = staged(Stage::Report, || {
                report::write_figures(out, cfg, results, scores)
            })?;
            run.files.extend(files);
        }
        done.push(Stage::Report.name());
    }

    if let Some(out) = out {
        let calibration = run
            .scores
            .as_ref()
            .map(|s| s.calibration.clone())
            .unwrap_or_default();
        let manifest = staged(until, || {
            report::write_manifest(out, cfg, &done, calibration, run.files.clone())
        })?;
        run.files.push(manifest);
    }
    run.data = Some(data);
    Ok(run)
}

/// The full pipeline, writing everything under `out`.
pub fn run_experiment(cfg: &RunConfig, out: &Path) -> Result<RunOutput> {
    run_pipeline(cfg, Stage::Report, Some(out))
}
