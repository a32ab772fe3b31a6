//! On-disk outputs of a run.
//!
//! ```text
//! <out>/data/                 corpus (train/, val/, manifest.json)
//! <out>/artifacts/<set>/      artifact corpora with masks
//! <out>/models/               model headers and weight blobs
//! <out>/training_history.csv
//! <out>/scores.csv            one row per (dataset, slice, scorer)
//! <out>/results.json
//! <out>/tables/*.csv
//! <out>/figures/*.svg         each with a .csv holding the plotted numbers
//! <out>/manifest.json
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::results::Results;
use super::stages::{ArtifactStage, DataStage, ScoreStage, TrainStage, ID_VAL};
use super::svg::{emit_svg, pr_points, FigureData, FigureSpec, ScatterPoint};
use crate::artifacts::store::write_artifact_corpus;
use crate::dataset::{write_corpus, GENERATOR_VERSION};
use crate::error::{Error, Result};
use crate::reconstructors::model_io::write_model;
use crate::rng::{derive_seed, tag};

fn write_file(out: &Path, rel: &str, bytes: &[u8]) -> Result<PathBuf> {
    let path = out.join(rel);
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    Ok(PathBuf::from(rel))
}

fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)
            .map_err(|e| Error::Data(format!("csv: {e}")))?;
    }
    w.into_inner().map_err(|e| Error::Data(format!("csv: {e}")))
}

fn write_csv<T: Serialize>(out: &Path, rel: &str, rows: &[T]) -> Result<PathBuf> {
    write_file(out, rel, &csv_bytes(rows)?)
}

pub fn write_data(out: &Path, cfg: &RunConfig, data: &DataStage) -> Result<Vec<PathBuf>> {
    let seed = cfg.external.is_none().then(|| cfg.phantom_config().seed);
    write_corpus(&out.join("data"), &[&data.train, &data.val], seed)?;
    Ok(vec![PathBuf::from("data/manifest.json")])
}

pub fn write_artifacts(out: &Path, artifacts: &ArtifactStage) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for set in artifacts.circle.iter().chain(&artifacts.extended) {
        let samples: Vec<_> = set
            .samples
            .iter()
            .map(|s| (s.source_id.clone(), s.result.clone()))
            .collect();
        let rel = format!("artifacts/{}", set.name);
        write_artifact_corpus(&out.join(&rel), &samples)?;
        files.push(PathBuf::from(format!("{rel}/manifest.json")));
    }
    Ok(files)
}

#[derive(Serialize)]
struct HistoryRow<'a> {
    model: &'a str,
    epoch: usize,
    train_loss: f64,
    val_loss: f64,
}

pub fn write_models(out: &Path, train: &TrainStage) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for (name, model, _) in train.variants() {
        let rel = format!("models/{name}.json");
        let kind = train
            .models
            .iter()
            .find(|m| name == m.id || name.starts_with(&format!("{}@", m.id)))
            .map(|m| m.kind)
            .expect("variant belongs to a model");
        write_model(&out.join(&rel), model, kind)?;
        files.push(PathBuf::from(rel));
    }
    let mut rows = Vec::new();
    for m in &train.models {
        if let Some(store) = &m.store {
            for (e, (t, v)) in store.train_losses.iter().zip(&store.val_losses).enumerate() {
                rows.push(HistoryRow {
                    model: &m.id,
                    epoch: e + 1,
                    train_loss: *t,
                    val_loss: *v,
                });
            }
        }
    }
    files.push(write_csv(out, "training_history.csv", &rows)?);
    Ok(files)
}

#[derive(Serialize)]
struct ScoreRow<'a> {
    dataset: &'a str,
    index: usize,
    slice_id: &'a str,
    source_index: Option<usize>,
    family: Option<&'static str>,
    params: String,
    choices: String,
    seed: Option<u64>,
    scorer: &'a str,
    score: f64,
}

fn joined<'a>(pairs: impl IntoIterator<Item = (&'a str, f64)>) -> String {
    pairs
        .into_iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(";")
}

pub fn write_scores(out: &Path, scores: &ScoreStage) -> Result<Vec<PathBuf>> {
    let mut rows = Vec::new();
    for ds in &scores.datasets {
        for (i, id) in ds.slice_ids.iter().enumerate() {
            let p = ds.params[i].as_ref();
            let params = p
                .map(|p| joined(p.params.kind.values()))
                .unwrap_or_default();
            let choices = p
                .map(|p| joined(p.choices.iter().map(|(k, v)| (k.as_str(), *v))))
                .unwrap_or_default();
            for (scorer, values) in &ds.scores {
                rows.push(ScoreRow {
                    dataset: &ds.name,
                    index: i,
                    slice_id: id,
                    source_index: ds.source_index[i],
                    family: p.map(|p| p.params.family().name()),
                    params: params.clone(),
                    choices: choices.clone(),
                    seed: p.map(|p| p.params.seed),
                    scorer,
                    score: values[i],
                });
            }
        }
    }
    Ok(vec![write_csv(out, "scores.csv", &rows)?])
}

#[derive(Serialize)]
struct LatentCsv<'a> {
    model: &'a str,
    kind: crate::reconstructors::ReconstructorKind,
    latent_dim: Option<usize>,
    train_mse: f64,
    val_mse: f64,
    pca_train_mse: Option<f64>,
    pca_val_mse: Option<f64>,
    val_vs_train_statistic: Option<f64>,
    val_vs_train_p: Option<f64>,
    circle_auprc_abs_error: Option<f64>,
}

#[derive(Serialize)]
struct EpochCsv<'a> {
    model: &'a str,
    optimal_epoch: usize,
    final_epoch: usize,
    optimal_val_loss: f64,
    final_val_loss: f64,
    metric: String,
    auprc_optimal: f64,
    auprc_final: f64,
}

#[derive(Serialize)]
struct MetricCsv<'a> {
    model: &'a str,
    metric: String,
    auprc: f64,
}

#[derive(Serialize)]
struct RhoCsv<'a> {
    family: &'static str,
    parameter: &'a str,
    rho: Option<f64>,
}

#[derive(Serialize)]
struct FamilyCsv {
    family: &'static str,
    n: usize,
    mean_artifact_score: f64,
    mean_id_score: f64,
    wilcoxon_statistic: Option<f64>,
    p_value: Option<f64>,
    significant: bool,
    auprc: Option<f64>,
}

#[derive(Serialize)]
struct CurveCsv<'a> {
    scorer: &'a str,
    threshold: f64,
    precision: f64,
    recall: f64,
    predicted: u64,
}

pub fn write_results(out: &Path, results: &Results) -> Result<Vec<PathBuf>> {
    let mut files = vec![write_file(
        out,
        "results.json",
        results.to_json()?.as_bytes(),
    )?];
    let latent: Vec<LatentCsv> = results
        .latent_sweep
        .iter()
        .map(|r| LatentCsv {
            model: &r.model,
            kind: r.kind,
            latent_dim: r.latent_dim,
            train_mse: r.train_mse,
            val_mse: r.val_mse,
            pca_train_mse: r.pca_train_mse,
            pca_val_mse: r.pca_val_mse,
            val_vs_train_statistic: r.val_vs_train.map(|t| t.statistic),
            val_vs_train_p: r.val_vs_train.map(|t| t.p_value),
            circle_auprc_abs_error: r.circle_auprc_abs_error,
        })
        .collect();
    files.push(write_csv(out, "tables/latent_sweep.csv", &latent)?);
    let epoch: Vec<EpochCsv> = results
        .epoch_study
        .iter()
        .flat_map(|r| {
            r.auprc.iter().map(move |a| EpochCsv {
                model: &r.model,
                optimal_epoch: r.optimal_epoch,
                final_epoch: r.final_epoch,
                optimal_val_loss: r.optimal_val_loss,
                final_val_loss: r.final_val_loss,
                metric: a.metric.to_string(),
                auprc_optimal: a.optimal,
                auprc_final: a.last,
            })
        })
        .collect();
    files.push(write_csv(out, "tables/epoch_study.csv", &epoch)?);
    let metric: Vec<MetricCsv> = results
        .metric_auprc
        .iter()
        .map(|m| MetricCsv {
            model: &m.model,
            metric: m.metric.to_string(),
            auprc: m.auprc,
        })
        .collect();
    files.push(write_csv(out, "tables/metric_auprc.csv", &metric)?);
    let rho: Vec<RhoCsv> = results
        .extended
        .iter()
        .flat_map(|f| {
            f.severity.iter().map(move |s| RhoCsv {
                family: f.family.name(),
                parameter: &s.parameter,
                rho: s.rho,
            })
        })
        .collect();
    files.push(write_csv(out, "tables/severity_rho.csv", &rho)?);
    let fam: Vec<FamilyCsv> = results
        .extended
        .iter()
        .map(|f| FamilyCsv {
            family: f.family.name(),
            n: f.n,
            mean_artifact_score: f.mean_artifact_score,
            mean_id_score: f.mean_id_score,
            wilcoxon_statistic: f.wilcoxon.map(|t| t.statistic),
            p_value: f.wilcoxon.map(|t| t.p_value),
            significant: f.significant,
            auprc: f.auprc,
        })
        .collect();
    files.push(write_csv(out, "tables/extended_summary.csv", &fam)?);
    let curves: Vec<CurveCsv> = results
        .curves
        .iter()
        .flat_map(|c| {
            (0..c.curve.thresholds.len()).map(move |k| CurveCsv {
                scorer: &c.scorer,
                threshold: c.curve.thresholds[k],
                precision: c.curve.precision[k],
                recall: c.curve.recall[k],
                predicted: c.curve.predicted[k],
            })
        })
        .collect();
    files.push(write_csv(out, "tables/pr_curves.csv", &curves)?);
    Ok(files)
}

/// Every figure of the report with its file stem.
pub fn figures(
    cfg: &RunConfig,
    results: &Results,
    scores: &ScoreStage,
) -> Result<Vec<(String, FigureSpec, FigureData)>> {
    let primary = &cfg.primary_ensemble;
    let mut out = Vec::new();

    let groups = scores
        .datasets
        .iter()
        .filter(|d| d.name != super::stages::ID_TRAIN)
        .filter_map(|d| d.scores.get(primary).map(|v| (d.name.clone(), v.clone())))
        .collect();
    out.push((
        "scores_boxplot".to_string(),
        FigureSpec::new(
            format!("Slice score ({primary}) per dataset"),
            "dataset",
            "mean anomaly score",
        ),
        FigureData::Boxplot(groups),
    ));

    let id_val = scores
        .datasets
        .iter()
        .find(|d| d.name == ID_VAL)
        .ok_or_else(|| Error::Data("no validation scores".into()))?;
    let id_scores = &id_val.scores[primary];
    for ds in scores.datasets.iter().filter(|d| d.family.is_some()) {
        let family = ds.family.expect("filtered");
        let art = &ds.scores[primary];
        let names: Vec<&'static str> = ds.params[0]
            .as_ref()
            .map(|p| p.params.kind.values().into_iter().map(|(n, _)| n).collect())
            .unwrap_or_default();
        for (pos, name) in names.iter().enumerate() {
            let points = (0..art.len())
                .map(|i| {
                    let j = ds.source_index[i].expect("artifact samples have a source");
                    let sev = ds.params[i]
                        .as_ref()
                        .expect("artifact samples carry parameters")
                        .params
                        .kind
                        .values()[pos]
                        .1;
                    ScatterPoint {
                        x: id_scores[j],
                        y: art[i],
                        severity: sev,
                    }
                })
                .collect();
            out.push((
                format!("scatter_{family}_{name}"),
                FigureSpec::new(
                    format!("{family}: artifact vs clean slice score, colour = {name}"),
                    "clean slice score",
                    "artifact slice score",
                ),
                FigureData::Scatter(points),
            ));
        }
    }

    if !results.metric_auprc.is_empty() {
        let bars = results
            .metric_auprc
            .iter()
            .map(|m| (format!("{}:{}", m.model, m.metric), m.auprc))
            .collect();
        out.push((
            "metric_auprc".to_string(),
            FigureSpec::new(
                "Circle-set AUPRC per model and metric",
                "model:metric",
                "AUPRC",
            ),
            FigureData::Bar(bars),
        ));
    }
    if !results.curves.is_empty() {
        let series = results
            .curves
            .iter()
            .map(|c| {
                (
                    format!("{} ({:.3})", c.scorer, c.curve.auprc),
                    pr_points(&c.curve),
                )
            })
            .collect();
        out.push((
            "pr_curves".to_string(),
            FigureSpec::new("Circle-set precision-recall", "recall", "precision"),
            FigureData::Curves(series),
        ));
    }
    Ok(out)
}

pub fn write_figures(
    out: &Path,
    cfg: &RunConfig,
    results: &Results,
    scores: &ScoreStage,
) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for (stem, spec, data) in figures(cfg, results, scores)? {
        files.push(write_file(
            out,
            &format!("figures/{stem}.csv"),
            data.to_csv()?.as_bytes(),
        )?);
        files.push(write_file(
            out,
            &format!("figures/{stem}.svg"),
            emit_svg(&spec, &data).as_bytes(),
        )?);
    }
    Ok(files)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub seed: u64,
    pub version: String,
    pub phantom_generator: String,
    pub stages: Vec<String>,
    pub derived_seeds: BTreeMap<String, u64>,
    pub calibration: BTreeMap<String, f64>,
    pub config: RunConfig,
    pub files: Vec<PathBuf>,
}

pub fn derived_seeds(cfg: &RunConfig) -> BTreeMap<String, u64> {
    let mut seeds = BTreeMap::new();
    seeds.insert("phantom".into(), cfg.phantom_config().seed);
    seeds.insert(
        "perceptual".into(),
        derive_seed(cfg.seed, &[tag("perceptual")]),
    );
    for m in &cfg.models {
        seeds.insert(
            format!("model:{}", m.id),
            derive_seed(cfg.seed, &[tag("model"), tag(&m.id), m.reconstructor.seed]),
        );
    }
    seeds
}

pub fn write_manifest(
    out: &Path,
    cfg: &RunConfig,
    stages: &[&str],
    calibration: BTreeMap<String, f64>,
    mut files: Vec<PathBuf>,
) -> Result<PathBuf> {
    files.sort();
    let manifest = Manifest {
        name: cfg.name.clone(),
        seed: cfg.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        phantom_generator: GENERATOR_VERSION.to_string(),
        stages: stages.iter().map(|s| s.to_string()).collect(),
        derived_seeds: derived_seeds(cfg),
        calibration,
        config: cfg.clone(),
        files,
    };
    write_file(
        out,
        "manifest.json",
        (serde_json::to_string_pretty(&manifest)? + "\n").as_bytes(),
    )
}
