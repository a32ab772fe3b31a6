//! Synthetic artifacts with ground-truth masks.
//!
//! Local artifacts (circles, black stripes, patch swaps) mark exactly the
//! pixels they change. Global artifacts (blur, noise, elastic, motion,
//! bias field, ghosting, spikes) mark the whole frame and finish with
//! [`renormalize_global`].
//!
//! [`ArtifactParams`] carry the nominal severity values of the reference
//! sweep table. Spatial sizes in that table (circle radius, patch size)
//! refer to 256-pixel slices; [`apply_artifact`] rescales them to the
//! image at hand. Blur sigma and translation are taken 1 mm = 1 px.

mod global;
mod kspace;
mod local;
pub mod store;
mod sweep;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgcore::{normalize_minmax, Mask2D};
use crate::Image;

pub use global::{
    bias_field, bias_field_map, blur_artifact, elastic_deform, elastic_displacement_field,
    noise_artifact, noise_raw, BIAS_TERMS,
};
pub use kspace::{
    ghosting, ghosting_spectrum, motion_artifact, motion_spectrum, spike, spike_spectrum, SpikeSite,
};
pub use local::{add_black_stripe, add_circle, circle_raster, patch_swap, PATCH_SWAP_ATTEMPTS};
pub use sweep::{sweep_grid, ParamRange, TABLE_ROWS};

/// Reference slice width the nominal spatial sizes refer to.
pub const REFERENCE_SIZE: f64 = 256.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactFamily {
    CircleHard,
    CircleSmooth,
    BlackStripe,
    PatchSwap,
    Blur,
    Noise,
    Elastic,
    Motion,
    BiasField,
    Ghosting,
    Spike,
}

impl ArtifactFamily {
    pub const ALL: [ArtifactFamily; 11] = [
        ArtifactFamily::CircleHard,
        ArtifactFamily::CircleSmooth,
        ArtifactFamily::BlackStripe,
        ArtifactFamily::PatchSwap,
        ArtifactFamily::Blur,
        ArtifactFamily::Noise,
        ArtifactFamily::Elastic,
        ArtifactFamily::Motion,
        ArtifactFamily::BiasField,
        ArtifactFamily::Ghosting,
        ArtifactFamily::Spike,
    ];

    /// The ten families of the extended artifact set.
    pub const EXTENDED: [ArtifactFamily; 10] = [
        ArtifactFamily::CircleSmooth,
        ArtifactFamily::BlackStripe,
        ArtifactFamily::PatchSwap,
        ArtifactFamily::Blur,
        ArtifactFamily::Noise,
        ArtifactFamily::Elastic,
        ArtifactFamily::Motion,
        ArtifactFamily::BiasField,
        ArtifactFamily::Ghosting,
        ArtifactFamily::Spike,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ArtifactFamily::CircleHard => "circle_hard",
            ArtifactFamily::CircleSmooth => "circle_smooth",
            ArtifactFamily::BlackStripe => "black_stripe",
            ArtifactFamily::PatchSwap => "patch_swap",
            ArtifactFamily::Blur => "blur",
            ArtifactFamily::Noise => "noise",
            ArtifactFamily::Elastic => "elastic",
            ArtifactFamily::Motion => "motion",
            ArtifactFamily::BiasField => "bias_field",
            ArtifactFamily::Ghosting => "ghosting",
            ArtifactFamily::Spike => "spike",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == name)
    }

    pub fn is_local(self) -> bool {
        matches!(
            self,
            ArtifactFamily::CircleHard
                | ArtifactFamily::CircleSmooth
                | ArtifactFamily::BlackStripe
                | ArtifactFamily::PatchSwap
        )
    }
}

impl fmt::Display for ArtifactFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How the bias-field polynomial coefficients are chosen from the magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasDraw {
    /// Each coefficient seeded uniform in `[-n, n]`.
    #[default]
    Uniform,
    /// Every coefficient equal to `n`.
    Fixed,
}

/// Severity settings for one family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ArtifactKind {
    CircleHard {
        radius: f64,
        intensity: f64,
    },
    CircleSmooth {
        radius: f64,
        intensity: f64,
    },
    BlackStripe {
        thickness: usize,
    },
    PatchSwap {
        size: f64,
    },
    Blur {
        sigma: f64,
    },
    Noise {
        sigma: f64,
    },
    Elastic {
        control_points: usize,
        max_displacement: f64,
    },
    Motion {
        rotation_deg: f64,
        translation: f64,
    },
    BiasField {
        coefficients: f64,
        #[serde(default)]
        draw: BiasDraw,
    },
    Ghosting {
        ghosts: usize,
        intensity: f64,
    },
    Spike {
        spikes: usize,
        intensity: f64,
    },
}

impl ArtifactKind {
    pub fn family(&self) -> ArtifactFamily {
        match self {
            ArtifactKind::CircleHard { .. } => ArtifactFamily::CircleHard,
            ArtifactKind::CircleSmooth { .. } => ArtifactFamily::CircleSmooth,
            ArtifactKind::BlackStripe { .. } => ArtifactFamily::BlackStripe,
            ArtifactKind::PatchSwap { .. } => ArtifactFamily::PatchSwap,
            ArtifactKind::Blur { .. } => ArtifactFamily::Blur,
            ArtifactKind::Noise { .. } => ArtifactFamily::Noise,
            ArtifactKind::Elastic { .. } => ArtifactFamily::Elastic,
            ArtifactKind::Motion { .. } => ArtifactFamily::Motion,
            ArtifactKind::BiasField { .. } => ArtifactFamily::BiasField,
            ArtifactKind::Ghosting { .. } => ArtifactFamily::Ghosting,
            ArtifactKind::Spike { .. } => ArtifactFamily::Spike,
        }
    }

    /// Named parameter values in sweep-table order.
    pub fn values(&self) -> Vec<(&'static str, f64)> {
        match *self {
            ArtifactKind::CircleHard { radius, intensity }
            | ArtifactKind::CircleSmooth { radius, intensity } => {
                vec![("radius", radius), ("intensity", intensity)]
            }
            ArtifactKind::BlackStripe { thickness } => vec![("thickness", thickness as f64)],
            ArtifactKind::PatchSwap { size } => vec![("patch_size", size)],
            ArtifactKind::Blur { sigma } | ArtifactKind::Noise { sigma } => {
                vec![("sigma", sigma)]
            }
            ArtifactKind::Elastic {
                control_points,
                max_displacement,
            } => vec![
                ("control_points", control_points as f64),
                ("max_displacement", max_displacement),
            ],
            ArtifactKind::Motion {
                rotation_deg,
                translation,
            } => vec![("rotation", rotation_deg), ("translation", translation)],
            ArtifactKind::BiasField { coefficients, .. } => vec![("coefficients", coefficients)],
            ArtifactKind::Ghosting { ghosts, intensity } => {
                vec![("ghosts", ghosts as f64), ("intensity", intensity)]
            }
            ArtifactKind::Spike { spikes, intensity } => {
                vec![("spikes", spikes as f64), ("intensity", intensity)]
            }
        }
    }

    /// Compact file-name friendly rendering, e.g. `sigma0p25`.
    pub fn param_string(&self) -> String {
        self.values()
            .iter()
            .map(|(name, v)| {
                let short: String = name.chars().take(3).collect();
                let mut num = format!("{:.4}", v);
                while num.contains('.') && (num.ends_with('0') || num.ends_with('.')) {
                    num.pop();
                }
                format!("{short}{}", num.replace('.', "p").replace('-', "m"))
            })
            .collect::<Vec<_>>()
            .join("_")
    }

    /// Check every value against the family's sweep-table range.
    pub fn validate(&self) -> Result<()> {
        let family = self.family();
        let row = sweep::table_row(family);
        for ((name, v), range) in self.values().into_iter().zip(row.params) {
            if !(v >= range.min - 1e-12 && v <= range.max + 1e-12) {
                return Err(Error::Config(format!(
                    "{family} {name}={v} outside [{}, {}]",
                    range.min, range.max
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArtifactParams {
    #[serde(flatten)]
    pub kind: ArtifactKind,
    pub seed: u64,
}

impl ArtifactParams {
    pub fn new(kind: ArtifactKind, seed: u64) -> Self {
        Self { kind, seed }
    }

    pub fn family(&self) -> ArtifactFamily {
        self.kind.family()
    }
}

/// Parameters plus every seeded choice made while applying them
/// (centre, orientation, signs, positions, ...).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedParams {
    pub params: ArtifactParams,
    pub choices: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArtifactResult {
    pub image: Image,
    pub gt_mask: Mask2D,
    pub params_used: ResolvedParams,
}

/// [`normalize_minmax`] applied after every global artifact.
pub fn renormalize_global(img: &Image) -> Image {
    normalize_minmax(img)
}

/// Apply `params` to `img`, rescaling nominal spatial sizes by
/// `img.width() / 256`.
pub fn apply_artifact(img: &Image, params: &ArtifactParams) -> Result<ArtifactResult> {
    let scale = img.width() as f64 / REFERENCE_SIZE;
    let seed = params.seed;
    let mut result = match params.kind {
        ArtifactKind::CircleHard { radius, intensity } => {
            add_circle(img, radius * scale, intensity, false, seed)?
        }
        ArtifactKind::CircleSmooth { radius, intensity } => {
            add_circle(img, radius * scale, intensity, true, seed)?
        }
        ArtifactKind::BlackStripe { thickness } => add_black_stripe(img, thickness, seed)?,
        ArtifactKind::PatchSwap { size } => {
            let px = ((size * scale).round() as usize).max(1);
            patch_swap(img, px, seed)?
        }
        ArtifactKind::Blur { sigma } => blur_artifact(img, sigma)?,
        ArtifactKind::Noise { sigma } => noise_artifact(img, sigma, seed)?,
        ArtifactKind::Elastic {
            control_points,
            max_displacement,
        } => elastic_deform(img, control_points, max_displacement, seed)?,
        ArtifactKind::Motion {
            rotation_deg,
            translation,
        } => motion_artifact(img, rotation_deg, translation, seed)?,
        ArtifactKind::BiasField { coefficients, draw } => {
            bias_field(img, coefficients, draw, seed)?
        }
        ArtifactKind::Ghosting { ghosts, intensity } => ghosting(img, ghosts, intensity, seed)?,
        ArtifactKind::Spike { spikes, intensity } => spike(img, spikes, intensity, seed)?,
    };
    result.params_used.params = *params;
    result
        .params_used
        .choices
        .insert("geometry_scale".into(), scale);
    Ok(result)
}

pub(crate) fn resolved(kind: ArtifactKind, seed: u64, choices: &[(&str, f64)]) -> ResolvedParams {
    ResolvedParams {
        params: ArtifactParams::new(kind, seed),
        choices: choices.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_names_round_trip() {
        for f in ArtifactFamily::ALL {
            assert_eq!(ArtifactFamily::from_name(f.name()), Some(f));
        }
        assert_eq!(
            ArtifactFamily::EXTENDED
                .iter()
                .filter(|f| f.is_local())
                .count(),
            3
        );
    }

    #[test]
    fn param_strings() {
        assert_eq!(ArtifactKind::Blur { sigma: 0.25 }.param_string(), "sig0p25");
        assert_eq!(
            ArtifactKind::Ghosting {
                ghosts: 2,
                intensity: 0.6
            }
            .param_string(),
            "gho2_int0p6"
        );
    }

    #[test]
    fn validate_checks_ranges() {
        assert!(ArtifactKind::Blur { sigma: 2.5 }.validate().is_ok());
        assert!(ArtifactKind::Blur { sigma: 3.0 }.validate().is_err());
        assert!(ArtifactKind::Spike {
            spikes: 3,
            intensity: 1.0
        }
        .validate()
        .is_err());
    }

    #[test]
    fn params_serialize_flat() {
        let p = ArtifactParams::new(ArtifactKind::Noise { sigma: 0.1 }, 5);
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(json, r#"{"family":"noise","sigma":0.1,"seed":5}"#);
        let back: ArtifactParams = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p);
    }
}
