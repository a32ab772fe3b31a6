use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::artifacts::{ArtifactFamily, BiasDraw};
use crate::dataset::PhantomConfig;
use crate::error::{Error, Result};
use crate::metrics::{MetricId, SsimConfig};
use crate::reconstructors::{CheckpointPolicy, ReconstructorConfig, ReconstructorKind};
use crate::scoring::{EnsembleMember, EnsembleSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomSection {
    pub size: usize,
    pub n_subjects: usize,
    pub slices_per_subject: usize,
}

impl Default for PhantomSection {
    fn default() -> Self {
        Self {
            size: 64,
            n_subjects: 40,
            slices_per_subject: 5,
        }
    }
}

/// User-supplied slices replacing the phantom corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalData {
    pub train_dir: PathBuf,
    pub val_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArtifactSection {
    /// Circular-artifact evaluation set built from the validation slices.
    pub circle_set: bool,
    pub circle_family: ArtifactFamily,
    /// Artifacts per validation slice in the circle set.
    pub circle_repeats: usize,
    pub extended_families: Vec<ArtifactFamily>,
    /// Override of the per-parameter step count of the sweep table.
    pub sweep_steps: Option<usize>,
    pub bias_draw: BiasDraw,
}

impl Default for ArtifactSection {
    fn default() -> Self {
        Self {
            circle_set: true,
            circle_family: ArtifactFamily::CircleHard,
            circle_repeats: 2,
            extended_families: ArtifactFamily::EXTENDED.to_vec(),
            sweep_steps: None,
            bias_draw: BiasDraw::Uniform,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub id: String,
    #[serde(default)]
    pub reconstructor: ReconstructorConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureBankSection {
    pub channels: Vec<usize>,
    pub bias_std: f64,
}

impl Default for FeatureBankSection {
    fn default() -> Self {
        Self {
            channels: crate::metrics::FeatureBank::DEFAULT_CHANNELS.to_vec(),
            bias_std: crate::metrics::FeatureBank::DEFAULT_BIAS_STD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    pub seed: u64,
    pub phantom: PhantomSection,
    pub train_fraction: f64,
    pub external: Option<ExternalData>,
    pub artifacts: ArtifactSection,
    pub models: Vec<ModelSpec>,
    pub checkpoint_policy: CheckpointPolicy,
    /// Also evaluate the other checkpoint of every SGD model.
    pub epoch_study: bool,
    /// Fit the closed-form optimum next to every SGD model.
    pub pca_oracle: bool,
    pub metrics: Vec<MetricId>,
    pub ssim: SsimConfig,
    pub feature_bank: FeatureBankSection,
    pub ensembles: Vec<EnsembleSpec>,
    /// Ensemble whose slice score drives the per-family statistics.
    pub primary_ensemble: String,
    pub alpha: f64,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        paper_suite()
    }
}

fn linear_model(id: &str, k: usize) -> ModelSpec {
    ModelSpec {
        id: id.to_string(),
        reconstructor: ReconstructorConfig {
            kind: ReconstructorKind::LinearAe,
            latent_dim: k,
            ..ReconstructorConfig::default()
        },
    }
}

/// Latent sweep `k in {4, 16, 64, 256}` on 64-pixel phantoms with the
/// canonical ensemble of the `k = 4` and `k = 64` models.
pub fn paper_suite() -> RunConfig {
    RunConfig {
        name: "paper-suite".into(),
        seed: 2024,
        phantom: PhantomSection::default(),
        train_fraction: 0.8,
        external: None,
        artifacts: ArtifactSection {
            bias_draw: BiasDraw::Fixed,
            ..ArtifactSection::default()
        },
        models: vec![
            linear_model("k4", 4),
            linear_model("k16", 16),
            linear_model("k64", 64),
            linear_model("k256", 256),
        ],
        checkpoint_policy: CheckpointPolicy::Optimal,
        epoch_study: true,
        pca_oracle: false,
        metrics: MetricId::ALL.to_vec(),
        ssim: SsimConfig {
            window: 5,
            ..SsimConfig::default()
        },
        feature_bank: FeatureBankSection::default(),
        ensembles: vec![EnsembleSpec::canonical("k4", "k64")],
        primary_ensemble: "canonical".into(),
        alpha: 0.01,
        output_dir: PathBuf::from("oodbench-out"),
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("bad run config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let cfg = Self::from_json(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn phantom_config(&self) -> PhantomConfig {
        PhantomConfig {
            size: self.phantom.size,
            seed: crate::rng::derive_seed(self.seed, &[crate::rng::tag("phantom")]),
            n_subjects: self.phantom.n_subjects,
            slices_per_subject: self.phantom.slices_per_subject,
        }
    }

    pub fn model(&self, id: &str) -> Option<&ModelSpec> {
        self.models.iter().find(|m| m.id == id)
    }

    pub fn primary(&self) -> Option<&EnsembleSpec> {
        self.ensembles
            .iter()
            .find(|e| e.name == self.primary_ensemble)
    }

    /// Models that appear in the primary ensemble, in member order.
    pub fn primary_models(&self) -> Vec<String> {
        let mut seen = Vec::new();
        if let Some(p) = self.primary() {
            for m in &p.members {
                if !seen.contains(&m.model) {
                    seen.push(m.model.clone());
                }
            }
        }
        seen
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.external.is_none() {
            self.phantom_config()
                .validate()
                .map_err(|e| Error::Config(e.to_string()))?;
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad(format!(
                "train_fraction must lie in (0, 1), got {}",
                self.train_fraction
            ));
        }
        if self.models.is_empty() {
            return bad("at least one model is required".into());
        }
        let mut ids = BTreeSet::new();
        for m in &self.models {
            if m.id.is_empty() || m.id.contains(['@', ':', ',', '/']) {
                return bad(format!(
                    "model id `{}` must be nonempty without '@', ':', ',' or '/'",
                    m.id
                ));
            }
            if !ids.insert(m.id.as_str()) {
                return bad(format!("model id `{}` defined twice", m.id));
            }
            let pixels = self.phantom.size * self.phantom.size;
            if self.external.is_none() {
                m.reconstructor
                    .validate(pixels)
                    .map_err(|e| Error::Config(format!("model `{}`: {e}", m.id)))?;
            }
        }
        let metrics: BTreeSet<MetricId> = self.metrics.iter().copied().collect();
        if metrics.len() != self.metrics.len() || metrics.is_empty() {
            return bad("metrics must be nonempty and listed once each".into());
        }
        self.ssim.validate()?;
        if self.feature_bank.channels.is_empty() || self.feature_bank.channels.contains(&0) {
            return bad("feature bank channels must be nonempty and positive".into());
        }
        if !(self.feature_bank.bias_std >= 0.0 && self.feature_bank.bias_std.is_finite()) {
            return bad(format!(
                "feature bank bias_std must be finite and >= 0, got {}",
                self.feature_bank.bias_std
            ));
        }
        let mut names = BTreeSet::new();
        for e in &self.ensembles {
            e.validate()?;
            if !names.insert(e.name.as_str()) {
                return bad(format!("ensemble `{}` defined twice", e.name));
            }
            for EnsembleMember { model, metric } in &e.members {
                if !ids.contains(model.as_str()) {
                    return bad(format!(
                        "ensemble `{}` references unknown model `{model}`",
                        e.name
                    ));
                }
                if !metrics.contains(metric) {
                    return bad(format!(
                        "ensemble `{}` uses metric `{metric}` not in the metric set",
                        e.name
                    ));
                }
            }
        }
        if self.primary().is_none() {
            return bad(format!(
                "primary ensemble `{}` is not defined",
                self.primary_ensemble
            ));
        }
        if self.artifacts.circle_set {
            if !self.artifacts.circle_family.is_local() {
                return bad("circle_family must be a local artifact family".into());
            }
            if self.artifacts.circle_repeats == 0 {
                return bad("circle_repeats must be at least 1".into());
            }
        }
        let fams: BTreeSet<ArtifactFamily> =
            self.artifacts.extended_families.iter().copied().collect();
        if fams.len() != self.artifacts.extended_families.len() {
            return bad("extended families must be listed once each".into());
        }
        if self.artifacts.sweep_steps == Some(0) {
            return bad("sweep_steps must be at least 1".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        Ok(())
    }
}
