use std::fs;
use std::path::Path;

use oodbench::artifacts::ArtifactFamily;
use oodbench::metrics::MetricId;
use oodbench::pipeline::report::figures;
use oodbench::pipeline::svg::{emit_svg, FigureData};
use oodbench::pipeline::{
    run_experiment, run_pipeline, ModelSpec, PhantomSection, RunConfig, Stage, ID_VAL,
};
use oodbench::reconstructors::{ReconstructorConfig, ReconstructorKind};
use oodbench::scoring::EnsembleSpec;
use oodbench::Error;

fn model(id: &str, k: usize) -> ModelSpec {
    ModelSpec {
        id: id.into(),
        reconstructor: ReconstructorConfig {
            latent_dim: k,
            epochs: 6,
            ..ReconstructorConfig::default()
        },
    }
}

fn tiny() -> RunConfig {
    let mut cfg = RunConfig {
        name: "tiny".into(),
        phantom: PhantomSection {
            size: 32,
            n_subjects: 6,
            slices_per_subject: 2,
        },
        train_fraction: 0.5,
        models: vec![model("a", 2), model("b", 6)],
        ensembles: vec![EnsembleSpec::canonical("a", "b")],
        ..RunConfig::default()
    };
    cfg.artifacts.extended_families = vec![
        ArtifactFamily::Blur,
        ArtifactFamily::BiasField,
        ArtifactFamily::BlackStripe,
    ];
    cfg.artifacts.sweep_steps = Some(3);
    cfg
}

#[test]
fn full_run_writes_every_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny();
    let run = run_experiment(&cfg, dir.path()).unwrap();
    let out = dir.path();
    for rel in [
        "data/manifest.json",
        "artifacts/circle/manifest.json",
        "artifacts/blur/manifest.json",
        "models/a.json",
        "models/a.bin",
        "models/b@final.json",
        "training_history.csv",
        "scores.csv",
        "results.json",
        "tables/latent_sweep.csv",
        "tables/epoch_study.csv",
        "tables/metric_auprc.csv",
        "tables/severity_rho.csv",
        "tables/extended_summary.csv",
        "tables/pr_curves.csv",
        "figures/scores_boxplot.svg",
        "figures/pr_curves.svg",
        "figures/metric_auprc.svg",
        "figures/scatter_blur_sigma.svg",
        "manifest.json",
    ] {
        assert!(out.join(rel).is_file(), "missing {rel}");
    }
    let results = run.results.unwrap();
    assert_eq!(results.latent_sweep.len(), 2);
    assert_eq!(results.epoch_study.len(), 2);
    assert_eq!(results.metric_auprc.len(), 2 * MetricId::ALL.len());
    assert_eq!(results.extended.len(), 3);
    assert!(results.curve("canonical").is_some());

    let written: String = fs::read_to_string(out.join("results.json")).unwrap();
    assert_eq!(written, results.to_json().unwrap());

    let history = fs::read_to_string(out.join("training_history.csv")).unwrap();
    assert_eq!(history.lines().count(), 1 + 2 * 6);

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], cfg.seed);
    assert_eq!(manifest["stages"].as_array().unwrap().len(), 6);
    assert!(manifest["calibration"]["a"].as_f64().unwrap() > 0.0);
    assert!(manifest["derived_seeds"]["model:b"].is_u64());
}

#[test]
fn figures_regenerate_from_their_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny();
    let run = run_experiment(&cfg, dir.path()).unwrap();
    let figs = figures(
        &cfg,
        run.results.as_ref().unwrap(),
        run.scores.as_ref().unwrap(),
    )
    .unwrap();
    assert!(figs.len() >= 5);
    for (stem, spec, data) in figs {
        let svg = fs::read_to_string(dir.path().join(format!("figures/{stem}.svg"))).unwrap();
        let csv = fs::read_to_string(dir.path().join(format!("figures/{stem}.csv"))).unwrap();
        let back = FigureData::from_csv(data.kind(), &csv).unwrap();
        assert_eq!(emit_svg(&spec, &back), svg, "{stem}");
    }
}

#[test]
fn scores_csv_has_one_row_per_slice_and_scorer() {
    let dir = tempfile::tempdir().unwrap();
    let run = run_pipeline(&tiny(), Stage::Score, Some(dir.path())).unwrap();
    let scores = run.scores.unwrap();
    let expected: usize = scores
        .datasets
        .iter()
        .map(|d| d.slice_ids.len() * d.scores.len())
        .sum();
    let mut r = csv::Reader::from_path(dir.path().join("scores.csv")).unwrap();
    let headers = r.headers().unwrap().clone();
    assert_eq!(headers.iter().next_back(), Some("score"));
    let rows: Vec<csv::StringRecord> = r.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), expected);
    let id_val = scores.datasets.iter().find(|d| d.name == ID_VAL).unwrap();
    let first = &rows
        .iter()
        .find(|r| &r[0] == ID_VAL && &r[8] == "canonical")
        .unwrap();
    assert_eq!(
        first[9].parse::<f64>().unwrap(),
        id_val.scores["canonical"][0]
    );
    assert!(!dir.path().join("results.json").exists());
}

#[test]
fn stages_are_cumulative() {
    let dir = tempfile::tempdir().unwrap();
    let run = run_pipeline(&tiny(), Stage::GenerateData, Some(dir.path())).unwrap();
    assert!(run.artifacts.is_none() && run.train.is_none());
    assert!(dir.path().join("data/val").is_dir());
    assert!(!dir.path().join("artifacts").exists());
    let manifest = fs::read_to_string(dir.path().join("manifest.json")).unwrap();
    assert!(manifest.contains("generate-data") && !manifest.contains("\"train\""));

    let run = run_pipeline(&tiny(), Stage::Train, None).unwrap();
    assert!(run.artifacts.is_some() && run.train.is_some() && run.scores.is_none());
    assert!(run.files.is_empty());
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_experiment(&tiny(), a.path()).unwrap();
    run_experiment(&tiny(), b.path()).unwrap();
    for rel in [
        "results.json",
        "scores.csv",
        "manifest.json",
        "figures/pr_curves.svg",
        "models/b.bin",
    ] {
        assert_eq!(
            fs::read(a.path().join(rel)).unwrap(),
            fs::read(b.path().join(rel)).unwrap(),
            "{rel}"
        );
    }
}

#[test]
fn identity_model_on_clean_data_has_nothing_to_evaluate() {
    let mut cfg = tiny();
    cfg.models = vec![ModelSpec {
        id: "id".into(),
        reconstructor: ReconstructorConfig {
            kind: ReconstructorKind::Identity,
            ..ReconstructorConfig::default()
        },
    }];
    cfg.ensembles = vec![EnsembleSpec::single("id", MetricId::AbsError)];
    cfg.primary_ensemble = "id:abs_error".into();
    cfg.artifacts.circle_set = false;
    cfg.artifacts.extended_families.clear();

    let scored = run_pipeline(&cfg, Stage::Score, None).unwrap();
    for ds in &scored.scores.unwrap().datasets {
        assert!(
            ds.scores["id:abs_error"].iter().all(|&s| s == 0.0),
            "{}",
            ds.name
        );
    }
    let err = run_pipeline(&cfg, Stage::Evaluate, None).unwrap_err();
    assert!(matches!(
        err,
        Error::Stage {
            stage: "evaluate",
            ..
        }
    ));
    assert!(err.to_string().contains("no positive pixels"), "{err}");
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn invalid_config_is_rejected_before_any_stage() {
    let mut cfg = tiny();
    cfg.primary_ensemble = "missing".into();
    let dir = tempfile::tempdir().unwrap();
    let err = run_pipeline(&cfg, Stage::Report, Some(dir.path())).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(fs::read_dir(dir.path()).unwrap().next().is_none());
}

#[test]
fn external_images_replace_the_phantoms() {
    let src = tempfile::tempdir().unwrap();
    let data = run_pipeline(&tiny(), Stage::GenerateData, None)
        .unwrap()
        .data
        .unwrap();
    let write = |dir: &Path, corpus: &oodbench::dataset::Corpus| {
        fs::create_dir_all(dir).unwrap();
        for (id, img) in corpus.ids.iter().zip(&corpus.images) {
            oodbench::imgcore::io::write_pgm16(&dir.join(format!("{id}.pgm")), img).unwrap();
        }
    };
    write(&src.path().join("train"), &data.train);
    write(&src.path().join("val"), &data.val);
    let mut cfg = tiny();
    cfg.external = Some(oodbench::pipeline::ExternalData {
        train_dir: src.path().join("train"),
        val_dir: src.path().join("val"),
    });
    let run = run_pipeline(&cfg, Stage::Evaluate, None).unwrap();
    let ext = run.data.unwrap();
    assert_eq!(ext.train.ids, data.train.ids);
    assert_eq!(ext.val.len(), data.val.len());
    assert!(run.results.unwrap().curve("canonical").is_some());
}
