use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::stages::{
    single_name, variant_name, DatasetScores, ScoreStage, TrainStage, CIRCLE_SET, ID_TRAIN, ID_VAL,
};
use crate::artifacts::ArtifactFamily;
use crate::error::{Error, Result};
use crate::evaluation::{mann_whitney_u, spearman_rho, wilcoxon_signed_rank, PrCurve, TestResult};
use crate::metrics::MetricId;
use crate::reconstructors::{CheckpointPolicy, ReconstructorKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentRow {
    pub model: String,
    pub kind: ReconstructorKind,
    pub latent_dim: Option<usize>,
    pub train_mse: f64,
    pub val_mse: f64,
    pub pca_train_mse: Option<f64>,
    pub pca_val_mse: Option<f64>,
    /// Absolute-error slice scores, validation greater than training.
    pub val_vs_train: Option<TestResult>,
    pub circle_auprc_abs_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochAuprc {
    pub metric: MetricId,
    pub optimal: f64,
    #[serde(rename = "final")]
    pub last: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRow {
    pub model: String,
    pub optimal_epoch: usize,
    pub final_epoch: usize,
    pub optimal_val_loss: f64,
    pub final_val_loss: f64,
    pub auprc: Vec<EpochAuprc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricAuprc {
    pub model: String,
    pub metric: MetricId,
    pub auprc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub scorer: String,
    pub members: Vec<String>,
    pub curve: PrCurve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeverityRho {
    pub parameter: String,
    /// `None` when the parameter or the scores are constant.
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyRow {
    pub family: ArtifactFamily,
    pub n: usize,
    pub mean_artifact_score: f64,
    pub mean_id_score: f64,
    /// Artifact score greater than the paired clean score.
    pub wilcoxon: Option<TestResult>,
    pub significant: bool,
    pub auprc: Option<f64>,
    pub severity: Vec<SeverityRho>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub name: String,
    pub n: usize,
    pub mean_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Results {
    pub name: String,
    pub seed: u64,
    pub image_size: (usize, usize),
    pub n_train: usize,
    pub n_val: usize,
    pub primary_ensemble: String,
    pub alpha: f64,
    pub calibration: BTreeMap<String, f64>,
    pub datasets: Vec<DatasetSummary>,
    pub latent_sweep: Vec<LatentRow>,
    pub epoch_study: Vec<EpochRow>,
    pub metric_auprc: Vec<MetricAuprc>,
    pub curves: Vec<CurveRow>,
    pub extended: Vec<FamilyRow>,
}

impl Results {
    pub fn curve(&self, scorer: &str) -> Option<&CurveRow> {
        self.curves.iter().find(|c| c.scorer == scorer)
    }

    pub fn family(&self, family: ArtifactFamily) -> Option<&FamilyRow> {
        self.extended.iter().find(|f| f.family == family)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn dataset<'a>(scores: &'a ScoreStage, name: &str) -> Result<&'a DatasetScores> {
    scores
        .datasets
        .iter()
        .find(|d| d.name == name)
        .ok_or_else(|| Error::Data(format!("no scores for `{name}`")))
}

fn scorer<'a>(ds: &'a DatasetScores, name: &str) -> Result<&'a [f64]> {
    ds.scores
        .get(name)
        .map(Vec::as_slice)
        .ok_or_else(|| Error::Data(format!("`{}` has no scores for `{name}`", ds.name)))
}

fn auprc(ds: &DatasetScores, name: &str) -> Result<Option<f64>> {
    ds.pr
        .get(name)
        .map(|acc| acc.finish().map(|c| c.auprc))
        .transpose()
}

/// Per-family statistics on the primary ensemble score plus AUPRC.
fn family_row(
    cfg: &RunConfig,
    ds: &DatasetScores,
    id_scores: &[f64],
    family: ArtifactFamily,
) -> Result<FamilyRow> {
    let primary = &cfg.primary_ensemble;
    let art = scorer(ds, primary)?;
    let pairs: Vec<(f64, f64)> = ds
        .source_index
        .iter()
        .zip(art)
        .map(|(j, &a)| (id_scores[j.expect("artifact samples have a source")], a))
        .collect();
    let wilcoxon = match wilcoxon_signed_rank(&pairs) {
        Ok(t) => Some(t),
        Err(Error::Data(_)) => None,
        Err(e) => return Err(e),
    };
    let mut by_param: BTreeMap<&str, (usize, Vec<f64>)> = BTreeMap::new();
    for p in &ds.params {
        let p = p.as_ref().expect("artifact samples carry parameters");
        for (pos, (name, v)) in p.params.kind.values().into_iter().enumerate() {
            by_param
                .entry(name)
                .or_insert_with(|| (pos, Vec::new()))
                .1
                .push(v);
        }
    }
    let mut params: Vec<(&str, (usize, Vec<f64>))> = by_param.into_iter().collect();
    params.sort_by_key(|(_, (pos, _))| *pos);
    let severity = params
        .into_iter()
        .map(|(name, (_, values))| {
            let rho = match spearman_rho(&values, art) {
                Ok(r) => Some(r),
                Err(Error::Numerical(_)) => None,
                Err(e) => return Err(e),
            };
            Ok(SeverityRho {
                parameter: name.to_string(),
                rho,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let significant = wilcoxon.is_some_and(|t| t.p_value < cfg.alpha);
    Ok(FamilyRow {
        family,
        n: art.len(),
        mean_artifact_score: mean(art),
        mean_id_score: mean(&pairs.iter().map(|p| p.0).collect::<Vec<_>>()),
        wilcoxon,
        significant,
        auprc: auprc(ds, primary)?,
        severity,
    })
}

/// Every reported statistic, computed from slice scores and pooled PR counts.
pub fn evaluate(cfg: &RunConfig, train: &TrainStage, scores: &ScoreStage) -> Result<Results> {
    if scores.datasets.iter().all(|d| d.pr.is_empty()) {
        return Err(Error::Data(
            "no artifact set configured: no positive pixels in the ground truth".into(),
        ));
    }
    let id_train = dataset(scores, ID_TRAIN)?;
    let id_val = dataset(scores, ID_VAL)?;
    let circle = scores.datasets.iter().find(|d| d.name == CIRCLE_SET);

    let datasets = scores
        .datasets
        .iter()
        .map(|d| {
            Ok(DatasetSummary {
                name: d.name.clone(),
                n: d.slice_ids.len(),
                mean_score: mean(scorer(d, &cfg.primary_ensemble)?),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut latent_sweep = Vec::new();
    for m in &train.models {
        let abs = single_name(&m.id, MetricId::AbsError);
        let val_vs_train = match mann_whitney_u(scorer(id_train, &abs)?, scorer(id_val, &abs)?) {
            Ok(t) => Some(t),
            Err(Error::Data(_) | Error::InvalidInput(_)) => None,
            Err(e) => return Err(e),
        };
        latent_sweep.push(LatentRow {
            model: m.id.clone(),
            kind: m.kind,
            latent_dim: m.latent_dim,
            train_mse: mean(&id_train.mse[&m.id]),
            val_mse: mean(&id_val.mse[&m.id]),
            pca_train_mse: m.pca_mse.map(|p| p.0),
            pca_val_mse: m.pca_mse.map(|p| p.1),
            val_vs_train,
            circle_auprc_abs_error: circle.map(|c| auprc(c, &abs)).transpose()?.flatten(),
        });
    }

    let mut epoch_study = Vec::new();
    for m in &train.models {
        let (Some(store), Some((alt, _))) = (&m.store, &m.alternate) else {
            continue;
        };
        let optimal_epoch = store.optimal_epoch().expect("trained store is nonempty");
        let final_epoch = store.epochs();
        let name_of = |policy: CheckpointPolicy| {
            if policy == *alt {
                variant_name(&m.id, policy)
            } else {
                m.id.clone()
            }
        };
        let mut rows = Vec::new();
        if let Some(c) = circle {
            for &metric in &cfg.metrics {
                let opt = auprc(c, &single_name(&name_of(CheckpointPolicy::Optimal), metric))?;
                let fin = auprc(c, &single_name(&name_of(CheckpointPolicy::Final), metric))?;
                if let (Some(optimal), Some(last)) = (opt, fin) {
                    rows.push(EpochAuprc {
                        metric,
                        optimal,
                        last,
                    });
                }
            }
        }
        epoch_study.push(EpochRow {
            model: m.id.clone(),
            optimal_epoch,
            final_epoch,
            optimal_val_loss: store.val_losses[optimal_epoch - 1],
            final_val_loss: store.val_losses[final_epoch - 1],
            auprc: rows,
        });
    }

    let mut metric_auprc = Vec::new();
    let mut curves = Vec::new();
    if let Some(c) = circle {
        for m in &train.models {
            for &metric in &cfg.metrics {
                if let Some(a) = auprc(c, &single_name(&m.id, metric))? {
                    metric_auprc.push(MetricAuprc {
                        model: m.id.clone(),
                        metric,
                        auprc: a,
                    });
                }
            }
        }
        for e in &cfg.ensembles {
            if let Some(acc) = c.pr.get(&e.name) {
                curves.push(CurveRow {
                    scorer: e.name.clone(),
                    members: e.members.iter().map(|m| m.to_string()).collect(),
                    curve: acc.finish()?,
                });
            }
        }
        for model in cfg.primary_models() {
            let name = single_name(&model, MetricId::AbsError);
            if let Some(acc) = c.pr.get(&name) {
                curves.push(CurveRow {
                    scorer: name.clone(),
                    members: vec![name],
                    curve: acc.finish()?,
                });
            }
        }
    }

    let id_primary = scorer(id_val, &cfg.primary_ensemble)?;
    let extended = scores
        .datasets
        .iter()
        .filter_map(|d| d.family.map(|f| (d, f)))
        .map(|(d, f)| family_row(cfg, d, id_primary, f))
        .collect::<Result<Vec<_>>>()?;

    Ok(Results {
        name: cfg.name.clone(),
        seed: cfg.seed,
        image_size: scores.image_size,
        n_train: id_train.slice_ids.len(),
        n_val: id_val.slice_ids.len(),
        primary_ensemble: cfg.primary_ensemble.clone(),
        alpha: cfg.alpha,
        calibration: scores.calibration.clone(),
        datasets,
        latent_sweep,
        epoch_study,
        metric_auprc,
        curves,
        extended,
    })
}
