//! Anomaly maps and slice scores.
//!
//! Similarity maps are inverted to error maps, member maps are averaged
//! pixelwise into the anomaly map `A`, and the slice score is the mean of
//! `A` over the whole frame, background included.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{MetricId, MetricMap, Orientation};
use crate::Image;

/// Tolerance for values just outside `[0, 1]` from round-off.
const RANGE_SLACK: f64 = 1e-12;

/// Turn a similarity map into an error map (`1 - v`); error maps pass
/// through. A map inverted once cannot be inverted again.
pub fn invert_map(m: &MetricMap) -> Result<MetricMap> {
    match m.orientation {
        Orientation::ErrorLike if m.inverted => Err(Error::invalid(format!(
            "{} map has already been inverted",
            m.metric
        ))),
        Orientation::ErrorLike => Ok(m.clone()),
        Orientation::SimilarityLike => Ok(MetricMap {
            values: m.values.map(|v| 1.0 - v),
            metric: m.metric,
            orientation: Orientation::ErrorLike,
            inverted: true,
        }),
    }
}

/// Pixelwise mean of error-like maps in `[0, 1]`.
pub fn ensemble_maps(maps: &[MetricMap]) -> Result<Image> {
    let first = maps
        .first()
        .ok_or_else(|| Error::invalid("ensemble needs at least one map"))?;
    let (w, h) = first.values.dims();
    let mut sum = vec![0.0; w * h];
    for m in maps {
        if m.orientation != Orientation::ErrorLike {
            return Err(Error::invalid(format!(
                "{} map is not error-like; invert it first",
                m.metric
            )));
        }
        first.values.check_same_dims(&m.values)?;
        for (s, &v) in sum.iter_mut().zip(m.values.data()) {
            if !(-RANGE_SLACK..=1.0 + RANGE_SLACK).contains(&v) {
                return Err(Error::invalid(format!(
                    "{} map value {v} outside [0, 1]",
                    m.metric
                )));
            }
            *s += v;
        }
    }
    let n = maps.len() as f64;
    Image::new(
        w,
        h,
        sum.into_iter().map(|s| (s / n).clamp(0.0, 1.0)).collect(),
    )
}

/// Mean of the anomaly map over all pixels.
pub fn slice_score(anomaly: &Image) -> f64 {
    anomaly.mean()
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EnsembleMember {
    pub model: String,
    pub metric: MetricId,
}

impl fmt::Display for EnsembleMember {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.model, self.metric)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub name: String,
    pub members: Vec<EnsembleMember>,
}

impl EnsembleSpec {
    pub fn new(name: impl Into<String>, members: Vec<EnsembleMember>) -> Result<Self> {
        let spec = Self {
            name: name.into(),
            members,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn single(model: &str, metric: MetricId) -> Self {
        Self {
            name: format!("{model}:{metric}"),
            members: vec![EnsembleMember {
                model: model.to_string(),
                metric,
            }],
        }
    }

    /// Perceptual and contrast maps of a small- and a large-bottleneck model.
    pub fn canonical(model_small: &str, model_large: &str) -> Self {
        let member = |model: &str, metric| EnsembleMember {
            model: model.to_string(),
            metric,
        };
        Self {
            name: "canonical".into(),
            members: vec![
                member(model_small, MetricId::Perceptual),
                member(model_small, MetricId::Contrast),
                member(model_large, MetricId::Perceptual),
                member(model_large, MetricId::Contrast),
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.members.is_empty() {
            return Err(Error::Config(format!(
                "ensemble `{}` has no members",
                self.name
            )));
        }
        let unique: BTreeSet<&EnsembleMember> = self.members.iter().collect();
        if unique.len() != self.members.len() {
            return Err(Error::Config(format!(
                "ensemble `{}` lists a member twice",
                self.name
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn random_map(metric: MetricId, seed: u64) -> MetricMap {
        let mut rng = SplitMix64::new(seed);
        MetricMap::new(metric, Image::from_fn(8, 6, |_, _| rng.next_f64()))
    }

    #[test]
    fn inversion() {
        let ones = MetricMap::new(MetricId::Ssim, Image::filled(4, 4, 1.0));
        let inv = invert_map(&ones).unwrap();
        assert!(inv.values.data().iter().all(|&v| v == 0.0));
        assert_eq!(inv.orientation, Orientation::ErrorLike);
        assert!(invert_map(&inv).is_err());
        let c = MetricMap::new(MetricId::Contrast, Image::filled(1, 1, 0.08257));
        assert!((invert_map(&c).unwrap().values.get(0, 0) - 0.91743).abs() < 1e-12);
        let err = random_map(MetricId::AbsError, 1);
        assert_eq!(invert_map(&err).unwrap(), err);
    }

    #[test]
    fn ensemble_mean_and_bounds() {
        let zero = MetricMap::new(MetricId::AbsError, Image::zeros(3, 3));
        let one = MetricMap::new(MetricId::Perceptual, Image::filled(3, 3, 1.0));
        let a = ensemble_maps(&[zero.clone(), one]).unwrap();
        assert!(a.data().iter().all(|&v| v == 0.5));
        assert_eq!(
            ensemble_maps(std::slice::from_ref(&zero)).unwrap(),
            zero.values
        );

        let maps: Vec<MetricMap> = (0..4).map(|s| random_map(MetricId::AbsError, s)).collect();
        let a = ensemble_maps(&maps).unwrap();
        for i in 0..a.len() {
            let vals: Vec<f64> = maps.iter().map(|m| m.values.data()[i]).collect();
            let mean = vals.iter().sum::<f64>() / 4.0;
            assert!((a.data()[i] - mean).abs() < 1e-15);
            assert!(a.data()[i] >= vals.iter().cloned().fold(f64::INFINITY, f64::min));
            assert!(a.data()[i] <= vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
        }
        let member_mean = maps.iter().map(|m| slice_score(&m.values)).sum::<f64>() / 4.0;
        assert!((slice_score(&a) - member_mean).abs() < 1e-12);
    }

    #[test]
    fn ensemble_rejects_similarity_and_out_of_range() {
        let s = random_map(MetricId::Ssim, 2);
        assert!(ensemble_maps(&[s]).is_err());
        let bad = MetricMap::new(MetricId::Perceptual, Image::filled(2, 2, 1.5));
        assert!(ensemble_maps(&[bad]).is_err());
        assert!(ensemble_maps(&[]).is_err());
    }

    #[test]
    fn slice_scores() {
        assert_eq!(slice_score(&Image::zeros(4, 4)), 0.0);
        assert_eq!(slice_score(&Image::filled(4, 4, 0.5)), 0.5);
        let m = random_map(MetricId::AbsError, 9).values;
        let sum: f64 = m.data().iter().sum();
        assert!((slice_score(&m) - sum / m.len() as f64).abs() < 1e-12);
    }

    #[test]
    fn ensemble_spec_validation() {
        let c = EnsembleSpec::canonical("small", "large");
        assert!(c.validate().is_ok());
        assert_eq!(c.members.len(), 4);
        let dup = vec![c.members[0].clone(), c.members[0].clone()];
        assert!(EnsembleSpec::new("dup", dup).is_err());
        assert!(EnsembleSpec::new("empty", vec![]).is_err());
    }
}
