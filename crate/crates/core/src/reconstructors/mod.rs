//! Reconstruction models.
//!
//! A linear autoencoder `x_hat = mu + D E (x - mu)` trained by minibatch
//! SGD with per-epoch checkpoints, its closed-form L2 optimum (PCA), and
//! two trivial baselines (identity, Gaussian blur). Reconstructions are
//! clipped to `[0, 1]`; training losses are not.

mod linear_ae;
pub mod model_io;
mod pca;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgcore::{convolve2d_separable, gaussian_kernel};
use crate::Image;

pub use linear_ae::{
    fit_linear_ae, loss_and_gradient, mean_loss, select_checkpoint, CheckpointPolicy,
    CheckpointStore, Gradient, LinearAeModel,
};
pub use pca::{fit_pca, fit_pca_images, PCA_MAX_ITERATIONS, PCA_TOLERANCE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReconstructorKind {
    LinearAe,
    Pca,
    Identity,
    BlurBaseline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Loss {
    L1,
    L2,
}

impl Loss {
    /// Per-pixel penalty.
    pub fn penalty(self, e: f64) -> f64 {
        match self {
            Loss::L1 => e.abs(),
            Loss::L2 => e * e,
        }
    }

    /// Derivative of [`Loss::penalty`]; the L1 subgradient at 0 is 0.
    pub fn derivative(self, e: f64) -> f64 {
        match self {
            Loss::L1 => {
                if e > 0.0 {
                    1.0
                } else if e < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            Loss::L2 => 2.0 * e,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconstructorConfig {
    pub kind: ReconstructorKind,
    pub latent_dim: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// The learning rate is halved every this many epochs; 0 disables decay.
    pub lr_decay_every: usize,
    pub loss: Loss,
    pub seed: u64,
    /// Kernel width of the blur baseline.
    pub blur_sigma: f64,
    /// Keep a snapshot of every epoch instead of only the best and last.
    pub keep_all_checkpoints: bool,
}

impl Default for ReconstructorConfig {
    fn default() -> Self {
        Self {
            kind: ReconstructorKind::LinearAe,
            latent_dim: 16,
            epochs: 100,
            batch_size: 4,
            learning_rate: DEFAULT_LEARNING_RATE,
            lr_decay_every: 100,
            loss: Loss::L2,
            seed: 0,
            blur_sigma: 1.0,
            keep_all_checkpoints: false,
        }
    }
}

pub const DEFAULT_LEARNING_RATE: f64 = 10.0;

impl ReconstructorConfig {
    pub fn validate(&self, pixels: usize) -> Result<()> {
        if matches!(
            self.kind,
            ReconstructorKind::LinearAe | ReconstructorKind::Pca
        ) && (self.latent_dim == 0 || self.latent_dim > pixels)
        {
            return Err(Error::Config(format!(
                "latent dimension {} outside 1..={pixels}",
                self.latent_dim
            )));
        }
        if self.kind == ReconstructorKind::LinearAe {
            if self.epochs == 0 {
                return Err(Error::Config("epochs must be at least 1".into()));
            }
            if self.batch_size == 0 {
                return Err(Error::Config("batch size must be at least 1".into()));
            }
            if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
                return Err(Error::Config(format!(
                    "learning rate must be positive, got {}",
                    self.learning_rate
                )));
            }
        }
        if self.kind == ReconstructorKind::BlurBaseline && !(self.blur_sigma > 0.0) {
            return Err(Error::Config(format!(
                "blur sigma must be positive, got {}",
                self.blur_sigma
            )));
        }
        Ok(())
    }
}

/// A trained (or trivial) model mapping an image to its reconstruction.
#[derive(Debug, Clone, PartialEq)]
pub enum Reconstructor {
    Linear(LinearAeModel),
    Identity,
    Blur { sigma: f64 },
}

impl Reconstructor {
    pub fn reconstruct(&self, img: &Image) -> Result<Image> {
        reconstruct(self, img)
    }
}

pub fn reconstruct(model: &Reconstructor, img: &Image) -> Result<Image> {
    match model {
        Reconstructor::Linear(m) => m.reconstruct(img),
        Reconstructor::Identity => Ok(img.map(|v| v.clamp(0.0, 1.0))),
        Reconstructor::Blur { sigma } => {
            let kernel = gaussian_kernel(*sigma)?;
            Ok(convolve2d_separable(img, &kernel)?.map(|v| v.clamp(0.0, 1.0)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_blur_baselines() {
        let img = Image::from_fn(16, 16, |x, y| ((x * 3 + y * 5) % 11) as f64 / 10.0);
        assert_eq!(reconstruct(&Reconstructor::Identity, &img).unwrap(), img);
        let blur = reconstruct(&Reconstructor::Blur { sigma: 1.0 }, &img).unwrap();
        let direct = convolve2d_separable(&img, &gaussian_kernel(1.0).unwrap()).unwrap();
        assert!(blur.max_abs_diff(&direct).unwrap() < 1e-15);
    }

    #[test]
    fn config_validation() {
        let cfg = ReconstructorConfig::default();
        assert!(cfg.validate(256).is_ok());
        let bad = ReconstructorConfig {
            latent_dim: 0,
            ..cfg.clone()
        };
        assert!(bad.validate(256).is_err());
        let bad = ReconstructorConfig {
            latent_dim: 300,
            ..cfg.clone()
        };
        assert!(bad.validate(256).is_err());
        let bad = ReconstructorConfig { epochs: 0, ..cfg };
        assert!(matches!(bad.validate(256), Err(Error::Config(_))));
    }

    #[test]
    fn config_json_defaults() {
        let cfg: ReconstructorConfig =
            serde_json::from_str(r#"{"latent_dim": 4, "loss": "L1"}"#).unwrap();
        assert_eq!(cfg.latent_dim, 4);
        assert_eq!(cfg.loss, Loss::L1);
        assert_eq!(cfg.epochs, 100);
        assert_eq!(cfg.batch_size, 4);
    }
}
