use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use super::config::RunConfig;
use crate::artifacts::{
    apply_artifact, sweep_grid, ArtifactFamily, ArtifactKind, ArtifactParams, ArtifactResult,
};
use crate::dataset::{load_external, split_corpus, Corpus, Role};
use crate::error::{Error, Result};
use crate::evaluation::PrAccumulator;
use crate::imgcore::Mask2D;
use crate::metrics::{
    abs_error_map, calibrate_perceptual, calibrated, perceptual_distance, ssim_metric_maps,
    FeatureBank, MetricId, MetricMap,
};
use crate::reconstructors::{
    fit_linear_ae, fit_pca, mean_loss, select_checkpoint, CheckpointPolicy, CheckpointStore, Loss,
    Reconstructor, ReconstructorKind,
};
use crate::rng::{derive_seed, tag, SplitMix64};
use crate::scoring::{ensemble_maps, invert_map, slice_score};
use crate::Image;

/// Attempts per artifact sample before giving up on a slice.
const ARTIFACT_ATTEMPTS: u64 = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct DataStage {
    pub train: Corpus,
    pub val: Corpus,
}

pub fn generate_data(cfg: &RunConfig) -> Result<DataStage> {
    let (train, val) = match &cfg.external {
        Some(ext) => (
            load_external(&ext.train_dir, Role::Train)?,
            load_external(&ext.val_dir, Role::Val)?,
        ),
        None => split_corpus(&cfg.phantom_config(), cfg.train_fraction)?,
    };
    if train.dims() != val.dims() {
        return Err(Error::Data(format!(
            "train images are {:?} but validation images are {:?}",
            train.dims(),
            val.dims()
        )));
    }
    Ok(DataStage { train, val })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArtifactSample {
    /// Index of the source slice in the validation corpus.
    pub source_index: usize,
    pub source_id: String,
    pub result: ArtifactResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArtifactSet {
    pub name: String,
    pub family: ArtifactFamily,
    pub samples: Vec<ArtifactSample>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArtifactStage {
    pub circle: Option<ArtifactSet>,
    pub extended: Vec<ArtifactSet>,
}

pub const CIRCLE_SET: &str = "circle";

fn sample_with_retry(
    cfg: &RunConfig,
    img: &Image,
    label: &str,
    index: usize,
    kind: impl Fn(u64) -> ArtifactKind,
) -> Result<ArtifactResult> {
    let mut last = None;
    for attempt in 0..ARTIFACT_ATTEMPTS {
        let seed = derive_seed(
            cfg.seed,
            &[tag("artifact"), tag(label), index as u64, attempt],
        );
        let params = ArtifactParams::new(kind(seed), seed);
        match apply_artifact(img, &params) {
            Ok(r) => return Ok(r),
            Err(e @ (Error::Data(_) | Error::InvalidInput(_))) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

/// Circle set (uniform radius and intensity, `circle_repeats` per slice)
/// and one sweep per extended family: the validation slices are put in a
/// seeded order and the slice at position `j` gets grid point
/// `floor(j L / n)`.
pub fn generate_artifacts(cfg: &RunConfig, data: &DataStage) -> Result<ArtifactStage> {
    let val = &data.val;
    let n = val.len();
    let circle = if cfg.artifacts.circle_set {
        let family = cfg.artifacts.circle_family;
        let ranges = crate::artifacts::TABLE_ROWS
            .iter()
            .find(|r| r.family == family)
            .expect("every family has a row")
            .params;
        let reps = cfg.artifacts.circle_repeats;
        let samples = (0..n * reps)
            .into_par_iter()
            .map(|i| {
                let j = i % n;
                let result = sample_with_retry(cfg, &val.images[j], CIRCLE_SET, i, |seed| {
                    let mut rng = SplitMix64::keyed(seed, &[tag("circle-draw")]);
                    let radius = rng.uniform(ranges[0].min, ranges[0].max);
                    let intensity = rng.uniform(ranges[1].min, ranges[1].max);
                    match family {
                        ArtifactFamily::CircleSmooth => {
                            ArtifactKind::CircleSmooth { radius, intensity }
                        }
                        _ => ArtifactKind::CircleHard { radius, intensity },
                    }
                })?;
                Ok(ArtifactSample {
                    source_index: j,
                    source_id: val.ids[j].clone(),
                    result,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Some(ArtifactSet {
            name: CIRCLE_SET.into(),
            family,
            samples,
        })
    } else {
        None
    };

    let extended = cfg
        .artifacts
        .extended_families
        .iter()
        .map(|&family| {
            let grid = sweep_grid(family, cfg.artifacts.sweep_steps);
            let mut order: Vec<usize> = (0..n).collect();
            SplitMix64::keyed(cfg.seed, &[tag("sweep-order"), tag(family.name())])
                .shuffle(&mut order);
            let mut point = vec![0; n];
            for (pos, &j) in order.iter().enumerate() {
                point[j] = pos * grid.len() / n;
            }
            let samples = (0..n)
                .into_par_iter()
                .map(|j| {
                    let kind = match grid[point[j]] {
                        ArtifactKind::BiasField { coefficients, .. } => ArtifactKind::BiasField {
                            coefficients,
                            draw: cfg.artifacts.bias_draw,
                        },
                        k => k,
                    };
                    let result =
                        sample_with_retry(cfg, &val.images[j], family.name(), j, |_| kind)?;
                    Ok(ArtifactSample {
                        source_index: j,
                        source_id: val.ids[j].clone(),
                        result,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(ArtifactSet {
                name: family.name().into(),
                family,
                samples,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ArtifactStage { circle, extended })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub id: String,
    pub kind: ReconstructorKind,
    pub latent_dim: Option<usize>,
    pub store: Option<CheckpointStore>,
    /// Model at the configured checkpoint policy.
    pub selected: Reconstructor,
    /// The other checkpoint, kept for the epoch study.
    pub alternate: Option<(CheckpointPolicy, Reconstructor)>,
    /// Train and validation MSE of the closed-form optimum.
    pub pca_mse: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainStage {
    pub models: Vec<TrainedModel>,
}

pub fn variant_name(id: &str, policy: CheckpointPolicy) -> String {
    match policy {
        CheckpointPolicy::Optimal => format!("{id}@optimal"),
        CheckpointPolicy::Final => format!("{id}@final"),
    }
}

fn other(policy: CheckpointPolicy) -> CheckpointPolicy {
    match policy {
        CheckpointPolicy::Optimal => CheckpointPolicy::Final,
        CheckpointPolicy::Final => CheckpointPolicy::Optimal,
    }
}

pub fn train_models(cfg: &RunConfig, data: &DataStage) -> Result<TrainStage> {
    let models = cfg
        .models
        .iter()
        .map(|spec| {
            let mut rc = spec.reconstructor.clone();
            rc.seed = derive_seed(cfg.seed, &[tag("model"), tag(&spec.id), rc.seed]);
            let pixels = data.train.images[0].len();
            rc.validate(pixels)
                .map_err(|e| Error::Config(format!("model `{}`: {e}", spec.id)))?;
            let pca_mse = |k: usize| -> Result<(f64, f64)> {
                let pca = fit_pca(&data.train, k, rc.seed)?;
                Ok((
                    mean_loss(&pca, &data.train.images, Loss::L2)?,
                    mean_loss(&pca, &data.val.images, Loss::L2)?,
                ))
            };
            let trained = match rc.kind {
                ReconstructorKind::LinearAe => {
                    let store = fit_linear_ae(&data.train, &data.val, &rc)?;
                    let selected =
                        Reconstructor::Linear(select_checkpoint(&store, cfg.checkpoint_policy)?);
                    let alt = other(cfg.checkpoint_policy);
                    let alternate = if cfg.epoch_study {
                        Some((alt, Reconstructor::Linear(select_checkpoint(&store, alt)?)))
                    } else {
                        None
                    };
                    TrainedModel {
                        id: spec.id.clone(),
                        kind: rc.kind,
                        latent_dim: Some(rc.latent_dim),
                        store: Some(store),
                        selected,
                        alternate,
                        pca_mse: if cfg.pca_oracle {
                            Some(pca_mse(rc.latent_dim)?)
                        } else {
                            None
                        },
                    }
                }
                ReconstructorKind::Pca => TrainedModel {
                    id: spec.id.clone(),
                    kind: rc.kind,
                    latent_dim: Some(rc.latent_dim),
                    store: None,
                    selected: Reconstructor::Linear(fit_pca(&data.train, rc.latent_dim, rc.seed)?),
                    alternate: None,
                    pca_mse: None,
                },
                ReconstructorKind::Identity => TrainedModel {
                    id: spec.id.clone(),
                    kind: rc.kind,
                    latent_dim: None,
                    store: None,
                    selected: Reconstructor::Identity,
                    alternate: None,
                    pca_mse: None,
                },
                ReconstructorKind::BlurBaseline => TrainedModel {
                    id: spec.id.clone(),
                    kind: rc.kind,
                    latent_dim: None,
                    store: None,
                    selected: Reconstructor::Blur {
                        sigma: rc.blur_sigma,
                    },
                    alternate: None,
                    pca_mse: None,
                },
            };
            Ok(trained)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrainStage { models })
}

impl TrainStage {
    /// Selected models under their ids, then alternates as `id@policy`.
    pub fn variants(&self) -> Vec<(String, &Reconstructor, bool)> {
        let mut out: Vec<_> = self
            .models
            .iter()
            .map(|m| (m.id.clone(), &m.selected, false))
            .collect();
        for m in &self.models {
            if let Some((policy, model)) = &m.alternate {
                out.push((variant_name(&m.id, *policy), model, true));
            }
        }
        out
    }
}

/// Slice scores of one evaluated image set.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetScores {
    /// `id_train`, `id_val`, `circle` or an extended family name.
    pub name: String,
    pub family: Option<ArtifactFamily>,
    pub slice_ids: Vec<String>,
    /// Index of the clean source slice in the validation corpus.
    pub source_index: Vec<Option<usize>>,
    pub params: Vec<Option<crate::artifacts::ResolvedParams>>,
    /// Scorer name -> slice score per image.
    pub scores: BTreeMap<String, Vec<f64>>,
    /// Variant -> per-image MSE of the clipped reconstruction.
    pub mse: BTreeMap<String, Vec<f64>>,
    /// Scorer name -> pooled pixel counts; only for sets with masks.
    pub pr: BTreeMap<String, PrAccumulator>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreStage {
    pub image_size: (usize, usize),
    /// Variant -> perceptual calibration constant.
    pub calibration: BTreeMap<String, f64>,
    pub datasets: Vec<DatasetScores>,
}

pub const ID_TRAIN: &str = "id_train";
pub const ID_VAL: &str = "id_val";

/// A scorer: a named list of `(variant, metric)` maps to average.
#[derive(Debug, Clone, PartialEq)]
struct Scorer {
    name: String,
    members: Vec<(String, MetricId)>,
}

struct Plan {
    variants: Vec<String>,
    scorers: Vec<Scorer>,
}

impl Plan {
    fn needs(&self) -> BTreeMap<&str, BTreeSet<MetricId>> {
        let mut out: BTreeMap<&str, BTreeSet<MetricId>> = self
            .variants
            .iter()
            .map(|v| (v.as_str(), BTreeSet::new()))
            .collect();
        for s in &self.scorers {
            for (v, m) in &s.members {
                out.entry(v.as_str()).or_default().insert(*m);
            }
        }
        out
    }
}

pub fn single_name(variant: &str, metric: MetricId) -> String {
    format!("{variant}:{metric}")
}

fn ensemble_scorers(cfg: &RunConfig, only_primary: bool) -> Vec<Scorer> {
    cfg.ensembles
        .iter()
        .filter(|e| !only_primary || e.name == cfg.primary_ensemble)
        .map(|e| Scorer {
            name: e.name.clone(),
            members: e
                .members
                .iter()
                .map(|m| (m.model.clone(), m.metric))
                .collect(),
        })
        .collect()
}

fn singles(variants: &[String], metrics: &[MetricId]) -> Vec<Scorer> {
    variants
        .iter()
        .flat_map(|v| {
            metrics.iter().map(move |&m| Scorer {
                name: single_name(v, m),
                members: vec![(v.clone(), m)],
            })
        })
        .collect()
}

fn plan_for(cfg: &RunConfig, train: &TrainStage, dataset: &str) -> Plan {
    let selected: Vec<String> = train.models.iter().map(|m| m.id.clone()).collect();
    let all: Vec<String> = train.variants().into_iter().map(|(n, _, _)| n).collect();
    match dataset {
        ID_TRAIN => {
            let mut scorers = singles(&selected, &[MetricId::AbsError]);
            scorers.extend(ensemble_scorers(cfg, true));
            Plan {
                variants: selected,
                scorers,
            }
        }
        ID_VAL | CIRCLE_SET => {
            let mut scorers = singles(&all, &cfg.metrics);
            scorers.extend(ensemble_scorers(cfg, false));
            Plan {
                variants: all,
                scorers,
            }
        }
        _ => {
            let primary = cfg.primary_models();
            let mut scorers = singles(&primary, &[MetricId::AbsError]);
            scorers.extend(ensemble_scorers(cfg, true));
            Plan {
                variants: primary,
                scorers,
            }
        }
    }
}

struct ImageScores {
    scores: Vec<f64>,
    mse: Vec<f64>,
    pr: Vec<PrAccumulator>,
}

struct Engine<'a> {
    cfg: &'a RunConfig,
    bank: &'a FeatureBank,
    models: BTreeMap<String, &'a Reconstructor>,
    calibration: &'a BTreeMap<String, f64>,
}

impl Engine<'_> {
    fn maps_for(
        &self,
        img: &Image,
        img_features: &[Vec<Image>],
        variant: &str,
        metrics: &BTreeSet<MetricId>,
    ) -> Result<(Image, BTreeMap<MetricId, MetricMap>)> {
        let model = self.models[variant];
        let recon = model.reconstruct(img)?;
        let mut maps = BTreeMap::new();
        if metrics.contains(&MetricId::AbsError) {
            maps.insert(MetricId::AbsError, abs_error_map(img, &recon)?);
        }
        let ssim_family = [
            MetricId::Contrast,
            MetricId::Luminance,
            MetricId::Structure,
            MetricId::Ssim,
        ];
        if ssim_family.iter().any(|m| metrics.contains(m)) {
            for m in ssim_metric_maps(img, &recon, &self.cfg.ssim)? {
                if metrics.contains(&m.metric) {
                    maps.insert(m.metric, invert_map(&m)?);
                }
            }
        }
        if metrics.contains(&MetricId::Perceptual) {
            let (w, h) = img.dims();
            let raw = perceptual_distance(img_features, &self.bank.features(&recon), w, h);
            let scale = self.calibration.get(variant).copied().unwrap_or(1.0);
            maps.insert(MetricId::Perceptual, calibrated(&raw, scale)?);
        }
        Ok((recon, maps))
    }

    fn score_image(&self, plan: &Plan, img: &Image, mask: Option<&Mask2D>) -> Result<ImageScores> {
        let needs = plan.needs();
        let features = if needs.values().any(|m| m.contains(&MetricId::Perceptual)) {
            self.bank.features(img)
        } else {
            Vec::new()
        };
        let mut maps: BTreeMap<(&str, MetricId), MetricMap> = BTreeMap::new();
        let mut mse_of = BTreeMap::new();
        for (variant, metrics) in &needs {
            let (recon, m) = self.maps_for(img, &features, variant, metrics)?;
            let sq: f64 = img
                .data()
                .iter()
                .zip(recon.data())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            mse_of.insert(*variant, sq / img.len() as f64);
            for (metric, map) in m {
                maps.insert((variant, metric), map);
            }
        }
        let mse = plan.variants.iter().map(|v| mse_of[v.as_str()]).collect();
        let mut scores = Vec::with_capacity(plan.scorers.len());
        let mut pr = Vec::new();
        for s in &plan.scorers {
            let members: Vec<MetricMap> = s
                .members
                .iter()
                .map(|(v, m)| maps[&(v.as_str(), *m)].clone())
                .collect();
            let anomaly = ensemble_maps(&members)?;
            scores.push(slice_score(&anomaly));
            if let Some(mask) = mask {
                let mut acc = PrAccumulator::new();
                acc.add(&anomaly, mask)?;
                pr.push(acc);
            }
        }
        Ok(ImageScores { scores, mse, pr })
    }
}

/// Perceptual calibration per variant from raw maps of the clean
/// validation slices.
pub fn calibrate(
    cfg: &RunConfig,
    bank: &FeatureBank,
    train: &TrainStage,
    val: &Corpus,
) -> Result<BTreeMap<String, f64>> {
    if !cfg.metrics.contains(&MetricId::Perceptual) {
        return Ok(BTreeMap::new());
    }
    let features: Vec<Vec<Vec<Image>>> = val
        .images
        .par_iter()
        .map(|img| bank.features(img))
        .collect();
    train
        .variants()
        .into_iter()
        .map(|(name, model, _)| {
            let raw = val
                .images
                .par_iter()
                .zip(&features)
                .map(|(img, f)| {
                    let recon = model.reconstruct(img)?;
                    let (w, h) = img.dims();
                    Ok(perceptual_distance(f, &bank.features(&recon), w, h))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((name, calibrate_perceptual(&raw)?))
        })
        .collect()
}

pub fn feature_bank(cfg: &RunConfig) -> Result<FeatureBank> {
    FeatureBank::seeded(
        derive_seed(cfg.seed, &[tag("perceptual")]),
        &cfg.feature_bank.channels,
        cfg.feature_bank.bias_std,
    )
    .map_err(|e| Error::Config(e.to_string()))
}

pub fn score_all(
    cfg: &RunConfig,
    data: &DataStage,
    artifacts: &ArtifactStage,
    train: &TrainStage,
) -> Result<ScoreStage> {
    let bank = feature_bank(cfg)?;
    let calibration = calibrate(cfg, &bank, train, &data.val)?;
    let models = train
        .variants()
        .into_iter()
        .map(|(n, m, _)| (n, m))
        .collect();
    let scorer = Engine {
        cfg,
        bank: &bank,
        models,
        calibration: &calibration,
    };

    let mut datasets = Vec::new();
    for (name, corpus) in [(ID_TRAIN, &data.train), (ID_VAL, &data.val)] {
        let items: Vec<(&Image, Option<&Mask2D>)> =
            corpus.images.iter().map(|i| (i, None)).collect();
        let mut ds = score_set(&scorer, &plan_for(cfg, train, name), name, None, &items)?;
        ds.slice_ids = corpus.ids.clone();
        ds.source_index = if name == ID_VAL {
            (0..corpus.len()).map(Some).collect()
        } else {
            vec![None; corpus.len()]
        };
        ds.params = vec![None; corpus.len()];
        datasets.push(ds);
    }
    for set in artifacts.circle.iter().chain(&artifacts.extended) {
        let items: Vec<(&Image, Option<&Mask2D>)> = set
            .samples
            .iter()
            .map(|s| (&s.result.image, Some(&s.result.gt_mask)))
            .collect();
        let family = if set.name == CIRCLE_SET {
            None
        } else {
            Some(set.family)
        };
        let mut ds = score_set(
            &scorer,
            &plan_for(cfg, train, &set.name),
            &set.name,
            family,
            &items,
        )?;
        ds.slice_ids = set.samples.iter().map(|s| s.source_id.clone()).collect();
        ds.source_index = set.samples.iter().map(|s| Some(s.source_index)).collect();
        ds.params = set
            .samples
            .iter()
            .map(|s| Some(s.result.params_used.clone()))
            .collect();
        datasets.push(ds);
    }
    Ok(ScoreStage {
        image_size: data.val.dims().unwrap_or((0, 0)),
        calibration,
        datasets,
    })
}

fn score_set(
    scorer: &Engine<'_>,
    plan: &Plan,
    name: &str,
    family: Option<ArtifactFamily>,
    items: &[(&Image, Option<&Mask2D>)],
) -> Result<DatasetScores> {
    let per_image = items
        .par_iter()
        .map(|(img, mask)| scorer.score_image(plan, img, *mask))
        .collect::<Result<Vec<_>>>()?;
    let mut scores: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut pr: BTreeMap<String, PrAccumulator> = BTreeMap::new();
    let mut mse: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for im in &per_image {
        for (s, &v) in plan.scorers.iter().zip(&im.scores) {
            scores.entry(s.name.clone()).or_default().push(v);
        }
        for (s, acc) in plan.scorers.iter().zip(&im.pr) {
            pr.entry(s.name.clone()).or_default().merge(acc);
        }
        for (v, &e) in plan.variants.iter().zip(&im.mse) {
            mse.entry(v.clone()).or_default().push(e);
        }
    }
    Ok(DatasetScores {
        name: name.to_string(),
        family,
        slice_ids: Vec::new(),
        source_index: Vec::new(),
        params: Vec::new(),
        scores,
        mse,
        pr,
    })
}
