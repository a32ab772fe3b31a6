//! Per-pixel reconstruction-quality maps.
//!
//! Error-like maps are 0 for a perfect reconstruction; similarity-like
//! maps are 1. SSIM and its components use uniform windows with reflect
//! padding. The perceptual map compares unit-normalized responses of a
//! seeded random convolutional feature bank.

mod perceptual;
mod ssim;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::imgcore::Image2D;
use crate::scalar::Real;
use crate::Image;

pub use perceptual::{
    calibrate_perceptual, calibrated, percentile, perceptual_distance, perceptual_map,
    perceptual_raw, FeatureBank, FeatureStage, CALIBRATION_PERCENTILE,
};
pub use ssim::{ssim_maps, ssim_metric_maps, SsimConfig, SsimMaps};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricId {
    AbsError,
    Contrast,
    Luminance,
    Structure,
    Ssim,
    Perceptual,
}

impl MetricId {
    pub const ALL: [MetricId; 6] = [
        MetricId::AbsError,
        MetricId::Contrast,
        MetricId::Luminance,
        MetricId::Structure,
        MetricId::Ssim,
        MetricId::Perceptual,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MetricId::AbsError => "abs_error",
            MetricId::Contrast => "contrast",
            MetricId::Luminance => "luminance",
            MetricId::Structure => "structure",
            MetricId::Ssim => "ssim",
            MetricId::Perceptual => "perceptual",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == name)
    }

    pub fn orientation(self) -> Orientation {
        match self {
            MetricId::AbsError | MetricId::Perceptual => Orientation::ErrorLike,
            _ => Orientation::SimilarityLike,
        }
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// 0 means a perfect reconstruction.
    ErrorLike,
    /// 1 means a perfect reconstruction.
    SimilarityLike,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricMap {
    pub values: Image,
    pub metric: MetricId,
    pub orientation: Orientation,
    /// Set once a similarity map has been turned into an error map.
    pub inverted: bool,
}

impl MetricMap {
    pub fn new(metric: MetricId, values: Image) -> Self {
        Self {
            values,
            metric,
            orientation: metric.orientation(),
            inverted: false,
        }
    }
}

pub fn abs_error<T: Real>(x: &Image2D<T>, x_hat: &Image2D<T>) -> Result<Image2D<T>> {
    x.zip_map(x_hat, |a, b| (a - b).abs())
}

pub fn abs_error_map(x: &Image, x_hat: &Image) -> Result<MetricMap> {
    Ok(MetricMap::new(MetricId::AbsError, abs_error(x, x_hat)?))
}
