use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgcore::Mask2D;
use crate::Image;

/// Thresholds `0, 0.02, ..., 1`.
pub const N_THRESHOLDS: usize = 51;

pub fn threshold_grid() -> Vec<f64> {
    (0..N_THRESHOLDS).map(|k| k as f64 / 50.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    pub thresholds: Vec<f64>,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    /// Predicted-positive pixel count per threshold.
    pub predicted: Vec<u64>,
    pub auprc: f64,
}

/// Running per-threshold confusion counts, so maps can be streamed
/// without keeping them in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct PrAccumulator {
    grid: Vec<f64>,
    /// Positives / negatives whose highest reached threshold index is `k`.
    pos_at: Vec<u64>,
    neg_at: Vec<u64>,
    positives: u64,
}

impl Default for PrAccumulator {
    fn default() -> Self {
        Self::new()
    }
}

impl PrAccumulator {
    pub fn new() -> Self {
        Self {
            grid: threshold_grid(),
            pos_at: vec![0; N_THRESHOLDS],
            neg_at: vec![0; N_THRESHOLDS],
            positives: 0,
        }
    }

    pub fn add(&mut self, map: &Image, mask: &Mask2D) -> Result<()> {
        if map.dims() != mask.dims() {
            return Err(Error::DimensionMismatch {
                expected: mask.dims(),
                actual: map.dims(),
            });
        }
        for (&a, &label) in map.data().iter().zip(mask.bits()) {
            // number of thresholds t with t <= a
            let reached = self.grid.partition_point(|&t| t <= a);
            if reached == 0 {
                continue;
            }
            let bucket = if label {
                &mut self.pos_at
            } else {
                &mut self.neg_at
            };
            bucket[reached - 1] += 1;
        }
        self.positives += mask.count() as u64;
        Ok(())
    }

    /// Fold in the counts of another accumulator.
    pub fn merge(&mut self, other: &PrAccumulator) {
        self.pos_at
            .iter_mut()
            .zip(&other.pos_at)
            .for_each(|(a, b)| *a += b);
        self.neg_at
            .iter_mut()
            .zip(&other.neg_at)
            .for_each(|(a, b)| *a += b);
        self.positives += other.positives;
    }

    /// Pooled pixel-level PR curve; a pixel is predicted anomalous at
    /// threshold `t` when `A >= t`.
    ///
    /// Thresholds with no predicted pixel report precision 1 but do not
    /// enter the area: the curve is integrated with the trapezoid rule over
    /// the operating points in order of decreasing threshold, starting from
    /// recall 0 at the precision of the first operating point.
    pub fn finish(&self) -> Result<PrCurve> {
        if self.positives == 0 {
            return Err(Error::Data("no positive pixels in the ground truth".into()));
        }
        let mut tp_at = self.pos_at.clone();
        let mut fp_at = self.neg_at.clone();
        for k in (0..N_THRESHOLDS - 1).rev() {
            tp_at[k] += tp_at[k + 1];
            fp_at[k] += fp_at[k + 1];
        }
        let mut precision = Vec::with_capacity(N_THRESHOLDS);
        let mut recall = Vec::with_capacity(N_THRESHOLDS);
        let mut predicted = Vec::with_capacity(N_THRESHOLDS);
        for k in 0..N_THRESHOLDS {
            let (tp, fp) = (tp_at[k], fp_at[k]);
            predicted.push(tp + fp);
            precision.push(if tp + fp == 0 {
                1.0
            } else {
                tp as f64 / (tp + fp) as f64
            });
            recall.push(tp as f64 / self.positives as f64);
        }

        let mut auprc = 0.0;
        let mut prev: Option<(f64, f64)> = None;
        for k in (0..N_THRESHOLDS).rev() {
            if predicted[k] == 0 {
                continue;
            }
            let point = (recall[k], precision[k]);
            let (r0, p0) = prev.unwrap_or((0.0, point.1));
            auprc += (point.0 - r0) * (point.1 + p0) / 2.0;
            prev = Some(point);
        }
        Ok(PrCurve {
            thresholds: self.grid.clone(),
            precision,
            recall,
            predicted,
            auprc,
        })
    }
}

/// [`PrAccumulator`] over a whole set of maps and masks.
pub fn pr_curve(maps: &[Image], masks: &[Mask2D]) -> Result<PrCurve> {
    if maps.len() != masks.len() {
        return Err(Error::invalid(format!(
            "{} anomaly maps but {} masks",
            maps.len(),
            masks.len()
        )));
    }
    let mut acc = PrAccumulator::new();
    for (map, mask) in maps.iter().zip(masks) {
        acc.add(map, mask)?;
    }
    acc.finish()
}
