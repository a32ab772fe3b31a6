use serde::{Deserialize, Serialize};

use super::{MetricId, MetricMap};
use crate::error::{Error, Result};
use crate::imgcore::{reflect_index, Image2D};
use crate::scalar::Real;
use crate::Image;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SsimConfig {
    pub window: usize,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl Default for SsimConfig {
    fn default() -> Self {
        Self {
            window: 7,
            c1: 1e-4,
            c2: 9e-4,
            c3: 4.5e-4,
        }
    }
}

impl SsimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window < 3 || self.window % 2 == 0 {
            return Err(Error::Config(format!(
                "SSIM window must be odd and >= 3, got {}",
                self.window
            )));
        }
        if !(self.c1 > 0.0 && self.c2 > 0.0 && self.c3 > 0.0) {
            return Err(Error::Config("SSIM constants must be positive".into()));
        }
        Ok(())
    }
}

/// Contrast, luminance, structure and their product, all in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SsimMaps<T> {
    pub contrast: Image2D<T>,
    pub luminance: Image2D<T>,
    pub structure: Image2D<T>,
    pub ssim: Image2D<T>,
}

/// Window statistics are computed two-pass per pixel so that flat
/// windows give exactly zero variance.
pub fn ssim_maps<T: Real>(x: &Image2D<T>, y: &Image2D<T>, cfg: &SsimConfig) -> Result<SsimMaps<T>> {
    cfg.validate()?;
    x.check_same_dims(y)?;
    let (w, h) = x.dims();
    if w < cfg.window || h < cfg.window {
        return Err(Error::invalid(format!(
            "{w}x{h} image is smaller than the {}-pixel SSIM window",
            cfg.window
        )));
    }
    let (c1, c2, c3) = (T::lit(cfg.c1), T::lit(cfg.c2), T::lit(cfg.c3));
    let zero = T::zero();
    let one = T::one();
    let two = T::lit(2.0);
    let r = (cfg.window / 2) as isize;
    let count = T::from_usize_lossy(cfg.window * cfg.window);
    // reflected source coordinates of each window row/column, per output position
    let cols: Vec<Vec<usize>> = (0..w as isize)
        .map(|x| (-r..=r).map(|d| reflect_index(x + d, w)).collect())
        .collect();
    let rows: Vec<Vec<usize>> = (0..h as isize)
        .map(|y| (-r..=r).map(|d| reflect_index(y + d, h)).collect())
        .collect();
    let (xd, yd) = (x.data(), y.data());
    let n = w * h;
    let mut c = Vec::with_capacity(n);
    let mut l = Vec::with_capacity(n);
    let mut s = Vec::with_capacity(n);
    let mut ss = Vec::with_capacity(n);
    let mut wx: Vec<T> = Vec::with_capacity(cfg.window * cfg.window);
    let mut wy: Vec<T> = Vec::with_capacity(cfg.window * cfg.window);
    for py in 0..h {
        for px in 0..w {
            wx.clear();
            wy.clear();
            for &qy in &rows[py] {
                for &qx in &cols[px] {
                    wx.push(xd[qy * w + qx]);
                    wy.push(yd[qy * w + qx]);
                }
            }
            let mx = wx.iter().copied().sum::<T>() / count;
            let my = wy.iter().copied().sum::<T>() / count;
            let mut vx = zero;
            let mut vy = zero;
            let mut cov = zero;
            for (&a, &b) in wx.iter().zip(&wy) {
                let (da, db) = (a - mx, b - my);
                vx += da * da;
                vy += db * db;
                cov += da * db;
            }
            let var_x = (vx / count).max(zero);
            let var_y = (vy / count).max(zero);
            let cov = (cov / count).max(zero);
            let (sx, sy) = (var_x.sqrt(), var_y.sqrt());
            let ci = ((two * sx * sy + c2) / (var_x + var_y + c2))
                .min(one)
                .max(zero);
            let li = ((two * mx * my + c1) / (mx * mx + my * my + c1))
                .min(one)
                .max(zero);
            let si = ((cov + c3) / (sx * sy + c3)).min(one).max(zero);
            c.push(ci);
            l.push(li);
            s.push(si);
            ss.push(ci * li * si);
        }
    }
    Ok(SsimMaps {
        contrast: Image2D::new(w, h, c)?,
        luminance: Image2D::new(w, h, l)?,
        structure: Image2D::new(w, h, s)?,
        ssim: Image2D::new(w, h, ss)?,
    })
}

/// [`ssim_maps`] wrapped as contrast, luminance, structure, SSIM metric maps.
pub fn ssim_metric_maps(x: &Image, y: &Image, cfg: &SsimConfig) -> Result<[MetricMap; 4]> {
    let m = ssim_maps(x, y, cfg)?;
    Ok([
        MetricMap::new(MetricId::Contrast, m.contrast),
        MetricMap::new(MetricId::Luminance, m.luminance),
        MetricMap::new(MetricId::Structure, m.structure),
        MetricMap::new(MetricId::Ssim, m.ssim),
    ])
}
