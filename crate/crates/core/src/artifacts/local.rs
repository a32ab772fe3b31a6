use super::{resolved, ArtifactKind, ArtifactResult};
use crate::error::{Error, Result};
use crate::imgcore::{erode_mask, foreground_mask, Mask2D};
use crate::rng::{tag, SplitMix64};
use crate::Image;

pub const PATCH_SWAP_ATTEMPTS: usize = 100;

/// Minimum foreground share of a swappable patch.
const PATCH_MIN_FOREGROUND: f64 = 0.1;

/// Disk coverage raster. Hard disks are 1 where the pixel centre lies
/// within `radius`; smooth disks carry the 4x4-supersampled area fraction.
pub fn circle_raster(
    width: usize,
    height: usize,
    cx: f64,
    cy: f64,
    radius: f64,
    smooth: bool,
) -> Image {
    let r2 = radius * radius;
    const SUB: [f64; 4] = [-0.375, -0.125, 0.125, 0.375];
    Image::from_fn(width, height, |x, y| {
        let dx = x as f64 - cx;
        let dy = y as f64 - cy;
        if !smooth {
            return if dx * dx + dy * dy <= r2 { 1.0 } else { 0.0 };
        }
        let mut inside = 0u32;
        for sy in SUB {
            for sx in SUB {
                let (px, py) = (dx + sx, dy + sy);
                if px * px + py * py <= r2 {
                    inside += 1;
                }
            }
        }
        inside as f64 / 16.0
    })
}

/// Blend a disk of intensity `intensity` into the image:
/// `x * (1 - C) + i * C`. The centre is drawn uniformly among foreground
/// pixels far enough from the background for the disk to fit.
pub fn add_circle(
    img: &Image,
    radius: f64,
    intensity: f64,
    smooth: bool,
    seed: u64,
) -> Result<ArtifactResult> {
    if !(radius > 0.0) {
        return Err(Error::invalid(format!(
            "circle radius must be positive, got {radius}"
        )));
    }
    // smooth edges reach up to half a pixel diagonal past the radius
    let margin = if smooth { radius + 1.0 } else { radius };
    let eroded = erode_mask(&foreground_mask(img), margin)?;
    let candidates = eroded.indices();
    if candidates.is_empty() {
        return Err(Error::Data(format!(
            "a circle of radius {radius:.2} does not fit inside the foreground"
        )));
    }
    let mut rng = SplitMix64::keyed(seed, &[tag("circle-center")]);
    let pick = candidates[rng.below(candidates.len() as u64) as usize];
    let (w, h) = img.dims();
    let (cx, cy) = ((pick % w) as f64, (pick / w) as f64);
    let coverage = circle_raster(w, h, cx, cy, radius, smooth);

    let image = img.zip_map(&coverage, |x, c| x * (1.0 - c) + intensity * c)?;
    let gt_mask = Mask2D::new(w, h, coverage.data().iter().map(|&c| c > 0.0).collect())?;
    let kind = if smooth {
        ArtifactKind::CircleSmooth { radius, intensity }
    } else {
        ArtifactKind::CircleHard { radius, intensity }
    };
    Ok(ArtifactResult {
        image,
        gt_mask,
        params_used: resolved(kind, seed, &[("center_x", cx), ("center_y", cy)]),
    })
}

/// Inclusive index range of rows (`rows = true`) or columns holding
/// nonzero pixels.
fn nonzero_extent(img: &Image, rows: bool) -> Option<(usize, usize)> {
    let (w, h) = img.dims();
    let n = if rows { h } else { w };
    let has = |i: usize| {
        if rows {
            (0..w).any(|x| img.get(x, i) != 0.0)
        } else {
            (0..h).any(|y| img.get(i, y) != 0.0)
        }
    };
    let first = (0..n).find(|&i| has(i))?;
    let last = (0..n).rev().find(|&i| has(i))?;
    Some((first, last))
}

/// Zero `thickness` consecutive rows or columns strictly inside the
/// nonzero bounding box.
pub fn add_black_stripe(img: &Image, thickness: usize, seed: u64) -> Result<ArtifactResult> {
    if thickness == 0 {
        return Err(Error::invalid("stripe thickness must be positive"));
    }
    let mut rng = SplitMix64::keyed(seed, &[tag("black-stripe")]);
    let rows = rng.coin();
    let (first, last) = nonzero_extent(img, rows)
        .ok_or_else(|| Error::Data("black stripe needs a nonzero image".into()))?;
    if last < first + thickness + 1 {
        return Err(Error::Data(format!(
            "foreground extent {first}..={last} too narrow for a stripe of {thickness}"
        )));
    }
    // start in [first + 1, last - thickness]
    let span = (last - thickness) - (first + 1) + 1;
    let start = first + 1 + rng.below(span as u64) as usize;

    let (w, h) = img.dims();
    let mut image = img.clone();
    let mut gt_mask = Mask2D::empty(w, h);
    for line in start..start + thickness {
        let coords: Vec<(usize, usize)> = if rows {
            (0..w).map(|x| (x, line)).collect()
        } else {
            (0..h).map(|y| (line, y)).collect()
        };
        for (x, y) in coords {
            if img.get(x, y) != 0.0 {
                gt_mask.set(x, y, true);
            }
            image.set(x, y, 0.0);
        }
    }
    Ok(ArtifactResult {
        image,
        gt_mask,
        params_used: resolved(
            ArtifactKind::BlackStripe { thickness },
            seed,
            &[
                ("orientation_rows", if rows { 1.0 } else { 0.0 }),
                ("start", start as f64),
            ],
        ),
    })
}

fn foreground_share(img: &Image, x0: usize, y0: usize, size: usize) -> f64 {
    let mut n = 0usize;
    for y in y0..y0 + size {
        for x in x0..x0 + size {
            if img.get(x, y) > 0.0 {
                n += 1;
            }
        }
    }
    n as f64 / (size * size) as f64
}

/// Exchange two non-overlapping `size x size` patches that each hold at
/// least 10% foreground. One swap per call.
pub fn patch_swap(img: &Image, size: usize, seed: u64) -> Result<ArtifactResult> {
    let (w, h) = img.dims();
    if size == 0 || size > w || size > h {
        return Err(Error::invalid(format!(
            "patch size {size} does not fit {w}x{h}"
        )));
    }
    let mut rng = SplitMix64::keyed(seed, &[tag("patch-swap")]);
    let draw = |rng: &mut SplitMix64| {
        (
            rng.below((w - size + 1) as u64) as usize,
            rng.below((h - size + 1) as u64) as usize,
        )
    };
    for attempt in 1..=PATCH_SWAP_ATTEMPTS {
        let a = draw(&mut rng);
        let b = draw(&mut rng);
        let disjoint =
            a.0 + size <= b.0 || b.0 + size <= a.0 || a.1 + size <= b.1 || b.1 + size <= a.1;
        if !disjoint
            || foreground_share(img, a.0, a.1, size) < PATCH_MIN_FOREGROUND
            || foreground_share(img, b.0, b.1, size) < PATCH_MIN_FOREGROUND
        {
            continue;
        }
        let mut image = img.clone();
        for dy in 0..size {
            for dx in 0..size {
                let pa = img.get(a.0 + dx, a.1 + dy);
                let pb = img.get(b.0 + dx, b.1 + dy);
                image.set(a.0 + dx, a.1 + dy, pb);
                image.set(b.0 + dx, b.1 + dy, pa);
            }
        }
        let gt_mask = Mask2D::changed_pixels(img, &image)?;
        return Ok(ArtifactResult {
            image,
            gt_mask,
            params_used: resolved(
                ArtifactKind::PatchSwap { size: size as f64 },
                seed,
                &[
                    ("patch_a_x", a.0 as f64),
                    ("patch_a_y", a.1 as f64),
                    ("patch_b_x", b.0 as f64),
                    ("patch_b_y", b.1 as f64),
                    ("attempts", attempt as f64),
                ],
            ),
        });
    }
    Err(Error::Data(format!(
        "no eligible pair of {size}x{size} patches after {PATCH_SWAP_ATTEMPTS} attempts"
    )))
}
