use super::{MetricId, MetricMap};
use crate::error::{Error, Result};
use crate::imgcore::{bilinear_sample, reflect_index};
use crate::rng::{tag, SplitMix64};
use crate::Image;

/// Percentile of the pooled raw maps that is mapped to 1 by calibration.
pub const CALIBRATION_PERCENTILE: f64 = 99.5;

const NORM_EPS: f64 = 1e-10;

/// One `3x3` convolution layer followed by a rectifier.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStage {
    pub in_channels: usize,
    pub out_channels: usize,
    /// `out x in x 3 x 3`, row-major.
    pub weights: Vec<f64>,
    /// One per output channel, added before the rectifier.
    pub bias: Vec<f64>,
}

impl FeatureStage {
    fn weight(&self, o: usize, i: usize, ky: usize, kx: usize) -> f64 {
        self.weights[((o * self.in_channels + i) * 3 + ky) * 3 + kx]
    }

    /// Same-size convolution with reflect padding, then ReLU.
    fn forward(&self, input: &[Image]) -> Vec<Image> {
        let (w, h) = input[0].dims();
        (0..self.out_channels)
            .map(|o| {
                Image::from_fn(w, h, |x, y| {
                    let mut acc = self.bias[o];
                    for (i, chan) in input.iter().enumerate() {
                        for ky in 0..3 {
                            let sy = reflect_index(y as isize + ky as isize - 1, h);
                            for kx in 0..3 {
                                let sx = reflect_index(x as isize + kx as isize - 1, w);
                                acc += self.weight(o, i, ky, kx) * chan.get(sx, sy);
                            }
                        }
                    }
                    acc.max(0.0)
                })
            })
            .collect()
    }
}

/// Seeded random convolutional features with stride-2 average pooling
/// between stages.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBank {
    pub seed: u64,
    pub stages: Vec<FeatureStage>,
}

impl FeatureBank {
    pub const DEFAULT_CHANNELS: [usize; 3] = [4, 8, 16];
    pub const DEFAULT_BIAS_STD: f64 = 0.3;

    /// Gaussian weights with variance `2 / fan_in` and Gaussian biases with
    /// standard deviation `bias_std`, a pure function of `seed`.
    pub fn seeded(seed: u64, channels: &[usize], bias_std: f64) -> Result<Self> {
        if channels.is_empty() || channels.contains(&0) {
            return Err(Error::invalid(
                "feature bank needs at least one stage with channels",
            ));
        }
        if !(bias_std >= 0.0 && bias_std.is_finite()) {
            return Err(Error::invalid(format!(
                "feature bias std must be finite and >= 0, got {bias_std}"
            )));
        }
        let mut rng = SplitMix64::keyed(seed, &[tag("feature-bank")]);
        let mut brng = SplitMix64::keyed(seed, &[tag("feature-bias")]);
        let mut stages = Vec::with_capacity(channels.len());
        let mut in_channels = 1;
        for &out_channels in channels {
            let fan_in = (in_channels * 9) as f64;
            let std = (2.0 / fan_in).sqrt();
            let weights = (0..out_channels * in_channels * 9)
                .map(|_| rng.normal() * std)
                .collect();
            let bias = (0..out_channels)
                .map(|_| brng.normal() * bias_std)
                .collect();
            stages.push(FeatureStage {
                in_channels,
                out_channels,
                weights,
                bias,
            });
            in_channels = out_channels;
        }
        Ok(Self { seed, stages })
    }

    pub fn default_bank(seed: u64) -> Self {
        Self::seeded(seed, &Self::DEFAULT_CHANNELS, Self::DEFAULT_BIAS_STD)
            .expect("default channels are valid")
    }

    /// Rectified responses of every stage; stage `s` is at `1 / 2^s` scale.
    pub fn features(&self, img: &Image) -> Vec<Vec<Image>> {
        let mut out: Vec<Vec<Image>> = Vec::with_capacity(self.stages.len());
        let mut input = vec![img.clone()];
        for (s, stage) in self.stages.iter().enumerate() {
            if s > 0 {
                input = out[s - 1].iter().map(avg_pool2).collect();
            }
            out.push(stage.forward(&input));
        }
        out
    }
}

fn avg_pool2(img: &Image) -> Image {
    let (w, h) = img.dims();
    Image::from_fn(w / 2, h / 2, |x, y| {
        0.25 * (img.get(2 * x, 2 * y)
            + img.get(2 * x + 1, 2 * y)
            + img.get(2 * x, 2 * y + 1)
            + img.get(2 * x + 1, 2 * y + 1))
    })
}

/// Squared distance of channel-wise unit-normalized feature vectors.
fn stage_distance(a: &[Image], b: &[Image]) -> Image {
    let (w, h) = a[0].dims();
    Image::from_fn(w, h, |x, y| {
        let na = a.iter().map(|c| c.get(x, y).powi(2)).sum::<f64>().sqrt() + NORM_EPS;
        let nb = b.iter().map(|c| c.get(x, y).powi(2)).sum::<f64>().sqrt() + NORM_EPS;
        a.iter()
            .zip(b)
            .map(|(ca, cb)| (ca.get(x, y) / na - cb.get(x, y) / nb).powi(2))
            .sum()
    })
}

/// Bilinear upsampling of a `1 / factor` scale map, pixel centres aligned.
fn upsample(map: &Image, width: usize, height: usize, factor: usize) -> Image {
    if factor == 1 {
        return map.clone();
    }
    let f = factor as f64;
    Image::from_fn(width, height, |x, y| {
        bilinear_sample(map, (x as f64 + 0.5) / f - 0.5, (y as f64 + 0.5) / f - 0.5)
    })
}

fn check_size(img: &Image, stages: usize) -> Result<()> {
    let (w, h) = img.dims();
    let ok = |n: usize| n.is_power_of_two() && n >= 8 && n >> (stages - 1) >= 1;
    if !ok(w) || !ok(h) {
        return Err(Error::invalid(format!(
            "perceptual metric needs power-of-two sides >= 8, got {w}x{h}"
        )));
    }
    Ok(())
}

/// Uncalibrated perceptual distance: stage maps upsampled to full size
/// and averaged.
pub fn perceptual_raw(x: &Image, y: &Image, bank: &FeatureBank) -> Result<Image> {
    x.check_same_dims(y)?;
    check_size(x, bank.stages.len())?;
    let (w, h) = x.dims();
    Ok(perceptual_distance(
        &bank.features(x),
        &bank.features(y),
        w,
        h,
    ))
}

/// [`perceptual_raw`] from precomputed [`FeatureBank::features`] of two
/// `width x height` images.
pub fn perceptual_distance(
    fx: &[Vec<Image>],
    fy: &[Vec<Image>],
    width: usize,
    height: usize,
) -> Image {
    let mut acc = vec![0.0; width * height];
    for (s, (a, b)) in fx.iter().zip(fy).enumerate() {
        let up = upsample(&stage_distance(a, b), width, height, 1 << s);
        acc.iter_mut().zip(up.data()).for_each(|(p, q)| *p += q);
    }
    let n = fx.len() as f64;
    Image::new(width, height, acc.into_iter().map(|v| v / n).collect()).expect("sized buffer")
}

/// Calibrated version of a raw map: `clip(raw / scale, 0, 1)`.
pub fn calibrated(raw: &Image, scale: f64) -> Result<MetricMap> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::invalid(format!(
            "perceptual calibration scale must be positive, got {scale}"
        )));
    }
    Ok(MetricMap::new(
        MetricId::Perceptual,
        raw.map(|v| (v / scale).clamp(0.0, 1.0)),
    ))
}

/// Calibrated perceptual map: `clip(raw / scale, 0, 1)`.
pub fn perceptual_map(x: &Image, y: &Image, bank: &FeatureBank, scale: f64) -> Result<MetricMap> {
    calibrated(&perceptual_raw(x, y, bank)?, scale)
}

/// Linear-interpolation percentile of `values` (`p` in `[0, 100]`).
pub fn percentile(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::invalid("percentile of an empty set"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = (p / 100.0).clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    Ok(sorted[lo] + (sorted[hi] - sorted[lo]) * frac)
}

/// Calibration scale from raw maps of in-distribution validation
/// reconstructions. Falls back to 1 when every raw value is 0.
pub fn calibrate_perceptual(raw_maps: &[Image]) -> Result<f64> {
    let pooled: Vec<f64> = raw_maps
        .iter()
        .flat_map(|m| m.data().iter().copied())
        .collect();
    let q = percentile(&pooled, CALIBRATION_PERCENTILE)?;
    Ok(if q > 0.0 { q } else { 1.0 })
}
