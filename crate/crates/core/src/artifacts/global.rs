use super::{renormalize_global, resolved, ArtifactKind, ArtifactResult, BiasDraw};
use crate::error::{Error, Result};
use crate::imgcore::{bilinear_sample, convolve2d_separable, gaussian_kernel, Mask2D};
use crate::rng::{tag, SplitMix64};
use crate::Image;

/// Exponent pairs `(p, q)` of the bias polynomial `x^p y^q`, `1 <= p + q <= 3`.
pub const BIAS_TERMS: [(u32, u32); 9] = [
    (1, 0),
    (0, 1),
    (2, 0),
    (1, 1),
    (0, 2),
    (3, 0),
    (2, 1),
    (1, 2),
    (0, 3),
];

fn global_result(
    img: &Image,
    raw: &Image,
    kind: ArtifactKind,
    seed: u64,
    choices: &[(&str, f64)],
) -> ArtifactResult {
    ArtifactResult {
        image: renormalize_global(raw),
        gt_mask: Mask2D::full(img.width(), img.height()),
        params_used: resolved(kind, seed, choices),
    }
}

pub fn blur_artifact(img: &Image, sigma: f64) -> Result<ArtifactResult> {
    let kernel = gaussian_kernel(sigma)?;
    let raw = convolve2d_separable(img, &kernel)?;
    Ok(global_result(
        img,
        &raw,
        ArtifactKind::Blur { sigma },
        0,
        &[],
    ))
}

/// `img` plus seeded `N(0, sigma^2)` noise, before renormalization.
pub fn noise_raw(img: &Image, sigma: f64, seed: u64) -> Result<Image> {
    if !(sigma >= 0.0) {
        return Err(Error::invalid(format!(
            "noise sigma must be non-negative, got {sigma}"
        )));
    }
    let mut rng = SplitMix64::keyed(seed, &[tag("noise")]);
    let data = img
        .data()
        .iter()
        .map(|&v| v + sigma * rng.normal())
        .collect();
    Image::new(img.width(), img.height(), data)
}

pub fn noise_artifact(img: &Image, sigma: f64, seed: u64) -> Result<ArtifactResult> {
    let raw = noise_raw(img, sigma, seed)?;
    Ok(global_result(
        img,
        &raw,
        ArtifactKind::Noise { sigma },
        seed,
        &[],
    ))
}

/// Dense backward displacement `(dx, dy)` interpolated bilinearly from an
/// `n x n` control grid spanning the image corners.
pub fn elastic_displacement_field(
    width: usize,
    height: usize,
    control_points: usize,
    max_displacement: f64,
    seed: u64,
) -> Result<(Image, Image)> {
    if control_points < 2 {
        return Err(Error::invalid(format!(
            "elastic grid needs at least 2 control points per axis, got {control_points}"
        )));
    }
    if !(max_displacement >= 0.0) {
        return Err(Error::invalid(format!(
            "elastic displacement must be non-negative, got {max_displacement}"
        )));
    }
    let n = control_points;
    let mut rng = SplitMix64::keyed(seed, &[tag("elastic")]);
    let mut grid_x = Image::zeros(n, n);
    let mut grid_y = Image::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            grid_x.set(i, j, rng.uniform(-max_displacement, max_displacement));
            grid_y.set(i, j, rng.uniform(-max_displacement, max_displacement));
        }
    }
    let to_grid = |p: usize, len: usize| {
        if len <= 1 {
            0.0
        } else {
            p as f64 * (n - 1) as f64 / (len - 1) as f64
        }
    };
    let dx = Image::from_fn(width, height, |x, y| {
        bilinear_sample(&grid_x, to_grid(x, width), to_grid(y, height))
    });
    let dy = Image::from_fn(width, height, |x, y| {
        bilinear_sample(&grid_y, to_grid(x, width), to_grid(y, height))
    });
    Ok((dx, dy))
}

pub fn elastic_deform(
    img: &Image,
    control_points: usize,
    max_displacement: f64,
    seed: u64,
) -> Result<ArtifactResult> {
    if control_points < 4 {
        return Err(Error::invalid(format!(
            "elastic deformation needs at least 4 control points per axis, got {control_points}"
        )));
    }
    let (w, h) = img.dims();
    let (dx, dy) = elastic_displacement_field(w, h, control_points, max_displacement, seed)?;
    let raw = Image::from_fn(w, h, |x, y| {
        bilinear_sample(img, x as f64 + dx.get(x, y), y as f64 + dy.get(x, y))
    });
    Ok(global_result(
        img,
        &raw,
        ArtifactKind::Elastic {
            control_points,
            max_displacement,
        },
        seed,
        &[],
    ))
}

/// Multiplicative field `exp(sum c_pq x^p y^q)` on `[-1, 1]^2` and its
/// coefficients in [`BIAS_TERMS`] order.
pub fn bias_field_map(
    width: usize,
    height: usize,
    magnitude: f64,
    draw: BiasDraw,
    seed: u64,
) -> Result<(Image, Vec<f64>)> {
    if !(magnitude >= 0.0) {
        return Err(Error::invalid(format!(
            "bias coefficient magnitude must be non-negative, got {magnitude}"
        )));
    }
    let mut rng = SplitMix64::keyed(seed, &[tag("bias-field")]);
    let coeffs: Vec<f64> = match draw {
        BiasDraw::Uniform => BIAS_TERMS
            .iter()
            .map(|_| rng.uniform(-magnitude, magnitude))
            .collect(),
        BiasDraw::Fixed => vec![magnitude; BIAS_TERMS.len()],
    };
    let norm = |p: usize, len: usize| {
        if len <= 1 {
            0.0
        } else {
            2.0 * p as f64 / (len - 1) as f64 - 1.0
        }
    };
    let field = Image::from_fn(width, height, |x, y| {
        let (u, v) = (norm(x, width), norm(y, height));
        let log: f64 = BIAS_TERMS
            .iter()
            .zip(&coeffs)
            .map(|(&(p, q), c)| c * u.powi(p as i32) * v.powi(q as i32))
            .sum();
        log.exp()
    });
    Ok((field, coeffs))
}

pub fn bias_field(
    img: &Image,
    magnitude: f64,
    draw: BiasDraw,
    seed: u64,
) -> Result<ArtifactResult> {
    let (field, coeffs) = bias_field_map(img.width(), img.height(), magnitude, draw, seed)?;
    let raw = img.zip_map(&field, |a, b| a * b)?;
    let names = [
        "c10", "c01", "c20", "c11", "c02", "c30", "c21", "c12", "c03",
    ];
    let choices: Vec<(&str, f64)> = names.iter().copied().zip(coeffs).collect();
    Ok(global_result(
        img,
        &raw,
        ArtifactKind::BiasField {
            coefficients: magnitude,
            draw,
        },
        seed,
        &choices,
    ))
}
