use num_complex::Complex;

use super::{renormalize_global, resolved, ArtifactKind, ArtifactResult};
use crate::error::{Error, Result};
use crate::fourier::{fft2_real, fftshift, ifft2};
use crate::imgcore::Mask2D;
use crate::rng::{tag, SplitMix64};
use crate::{ComplexImage, Image};

/// Lines kept untouched on each side of DC by [`ghosting_spectrum`].
fn preserved_half_band(n: usize) -> usize {
    (n as f64 * 0.05).floor() as usize
}

fn shifted_spectrum(img: &Image) -> Result<ComplexImage> {
    fftshift(&fft2_real(img)?)
}

/// Magnitude image of a centred spectrum, before renormalization.
fn magnitude_of_shifted(k: &ComplexImage) -> Result<Image> {
    Ok(ifft2(&fftshift(k)?)?.magnitude())
}

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

/// Rotate by `angle_deg` about the image centre, then translate by
/// `(tx, ty)`. Samples falling outside the frame read as zero.
fn rigid_move(img: &Image, angle_deg: f64, tx: f64, ty: f64) -> Image {
    let (w, h) = img.dims();
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let (s, c) = angle_deg.to_radians().sin_cos();
    let sample = |x: f64, y: f64| -> f64 {
        if x < -1e-9 || y < -1e-9 || x > (w - 1) as f64 + 1e-9 || y > (h - 1) as f64 + 1e-9 {
            return 0.0;
        }
        let x = x.clamp(0.0, (w - 1) as f64);
        let y = y.clamp(0.0, (h - 1) as f64);
        let (x0, y0) = (x.floor() as usize, y.floor() as usize);
        let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
        let (fx, fy) = (x - x0 as f64, y - y0 as f64);
        let top = img.get(x0, y0) * (1.0 - fx) + img.get(x1, y0) * fx;
        let bottom = img.get(x0, y1) * (1.0 - fx) + img.get(x1, y1) * fx;
        top * (1.0 - fy) + bottom * fy
    };
    Image::from_fn(w, h, |x, y| {
        // inverse map: undo translation, then rotation
        let (px, py) = (x as f64 - tx - cx, y as f64 - ty - cy);
        let sx = c * px + s * py + cx;
        let sy = -s * px + c * py + cy;
        sample(sx, sy)
    })
}

/// Centred composite spectrum: rows `v < H/2` from `img`, the rest from
/// `moved`.
pub fn motion_spectrum(img: &Image, moved: &Image) -> Result<ComplexImage> {
    img.check_same_dims(moved)?;
    let a = shifted_spectrum(img)?;
    let b = shifted_spectrum(moved)?;
    let (w, h) = a.dims();
    let mut out = a;
    for v in h / 2..h {
        for u in 0..w {
            out.set(u, v, b.get(u, v));
        }
    }
    Ok(out)
}

pub fn motion_artifact(
    img: &Image,
    rotation_deg: f64,
    translation: f64,
    seed: u64,
) -> Result<ArtifactResult> {
    let mut rng = SplitMix64::keyed(seed, &[tag("motion")]);
    let rot_sign = rng.sign();
    let trans_sign = rng.sign();
    let along_x = rng.coin();
    let angle = rot_sign * rotation_deg;
    let shift = trans_sign * translation;
    let (tx, ty) = if along_x { (shift, 0.0) } else { (0.0, shift) };
    let moved = rigid_move(img, angle, tx, ty);
    let raw = magnitude_of_shifted(&motion_spectrum(img, &moved)?)?;
    Ok(global_result(
        img,
        &raw,
        ArtifactKind::Motion {
            rotation_deg,
            translation,
        },
        seed,
        &[
            ("rotation_signed", angle),
            ("translation_signed", shift),
            ("axis_x", if along_x { 1.0 } else { 0.0 }),
        ],
    ))
}

/// Scale every line `index mod (ghosts + 1) != 0` of a centred spectrum by
/// `1 - intensity`, leaving the band around DC alone. Lines are rows when
/// `along_rows`, columns otherwise.
pub fn ghosting_spectrum(
    k: &ComplexImage,
    ghosts: usize,
    intensity: f64,
    along_rows: bool,
) -> ComplexImage {
    let (w, h) = k.dims();
    let n = if along_rows { h } else { w };
    let half_band = preserved_half_band(n);
    let centre = n / 2;
    let factor = 1.0 - intensity;
    let mut out = k.clone();
    for line in 0..n {
        if line.abs_diff(centre) <= half_band || line % (ghosts + 1) == 0 {
            continue;
        }
        let cells: Vec<(usize, usize)> = if along_rows {
            (0..w).map(|u| (u, line)).collect()
        } else {
            (0..h).map(|v| (line, v)).collect()
        };
        for (u, v) in cells {
            out.set(u, v, k.get(u, v) * factor);
        }
    }
    out
}

pub fn ghosting(img: &Image, ghosts: usize, intensity: f64, seed: u64) -> Result<ArtifactResult> {
    if !(1..=2).contains(&ghosts) {
        return Err(Error::invalid(format!(
            "ghost count must be 1 or 2, got {ghosts}"
        )));
    }
    if !(0.0..=1.0).contains(&intensity) {
        return Err(Error::invalid(format!(
            "ghost intensity must lie in [0, 1], got {intensity}"
        )));
    }
    let mut rng = SplitMix64::keyed(seed, &[tag("ghosting")]);
    let along_rows = rng.coin();
    let k = ghosting_spectrum(&shifted_spectrum(img)?, ghosts, intensity, along_rows);
    let raw = magnitude_of_shifted(&k)?;
    Ok(global_result(
        img,
        &raw,
        ArtifactKind::Ghosting { ghosts, intensity },
        seed,
        &[("axis_rows", if along_rows { 1.0 } else { 0.0 })],
    ))
}

/// A spike at centred coordinates `(u, v)` with sign `+1` or `-1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpikeSite {
    pub u: usize,
    pub v: usize,
    pub sign: f64,
}

/// Add `sign * intensity * max|K|` at each site and at its Hermitian
/// mirror, so the perturbation stays a real sinusoid.
pub fn spike_spectrum(k: &ComplexImage, sites: &[SpikeSite], intensity: f64) -> ComplexImage {
    let (w, h) = k.dims();
    let peak = k.max_magnitude();
    let mut out = k.clone();
    for s in sites {
        let amp = Complex::new(s.sign * intensity * peak, 0.0);
        let (mu, mv) = ((w - s.u) % w, (h - s.v) % h);
        out.set(s.u, s.v, out.get(s.u, s.v) + amp);
        if (mu, mv) != (s.u, s.v) {
            out.set(mu, mv, out.get(mu, mv) + amp);
        }
    }
    out
}

fn draw_spike_sites(w: usize, h: usize, n: usize, rng: &mut SplitMix64) -> Vec<SpikeSite> {
    let dc = (w / 2, h / 2);
    let mut sites: Vec<SpikeSite> = Vec::with_capacity(n);
    while sites.len() < n {
        let u = rng.below(w as u64) as usize;
        let v = rng.below(h as u64) as usize;
        // offsets from DC; a site must not collide with DC or an earlier site/mirror
        let mirror = ((w - u) % w, (h - v) % h);
        let taken = (u, v) == dc
            || sites.iter().any(|s| {
                let m = ((w - s.u) % w, (h - s.v) % h);
                (s.u, s.v) == (u, v) || m == (u, v) || (s.u, s.v) == mirror
            });
        if taken {
            continue;
        }
        sites.push(SpikeSite {
            u,
            v,
            sign: rng.sign(),
        });
    }
    sites
}

pub fn spike(img: &Image, spikes: usize, intensity: f64, seed: u64) -> Result<ArtifactResult> {
    if !(1..=2).contains(&spikes) {
        return Err(Error::invalid(format!(
            "spike count must be 1 or 2, got {spikes}"
        )));
    }
    if !(intensity > 0.0) {
        return Err(Error::invalid(format!(
            "spike intensity must be positive, got {intensity}"
        )));
    }
    let (w, h) = img.dims();
    let mut rng = SplitMix64::keyed(seed, &[tag("spike")]);
    let sites = draw_spike_sites(w, h, spikes, &mut rng);
    let k = spike_spectrum(&shifted_spectrum(img)?, &sites, intensity);
    let raw = magnitude_of_shifted(&k)?;
    let mut choices = Vec::new();
    let names = [
        ["spike0_u", "spike0_v", "spike0_sign"],
        ["spike1_u", "spike1_v", "spike1_sign"],
    ];
    for (s, n) in sites.iter().zip(names) {
        choices.push((n[0], s.u as f64));
        choices.push((n[1], s.v as f64));
        choices.push((n[2], s.sign));
    }
    Ok(global_result(
        img,
        &raw,
        ArtifactKind::Spike { spikes, intensity },
        seed,
        &choices,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_phantom, PhantomConfig};

    fn phantom(subject: usize) -> Image {
        let cfg = PhantomConfig {
            size: 64,
            seed: 13,
            n_subjects: 8,
            slices_per_subject: 3,
        };
        generate_phantom(&cfg, subject, 2).unwrap()
    }

    #[test]
    fn identity_limits() {
        let img = phantom(0);
        assert!(
            ghosting(&img, 2, 0.0, 1)
                .unwrap()
                .image
                .max_abs_diff(&img)
                .unwrap()
                < 1e-9
        );
        assert!(
            motion_artifact(&img, 0.0, 0.0, 1)
                .unwrap()
                .image
                .max_abs_diff(&img)
                .unwrap()
                < 1e-9
        );
        assert!(
            spike(&img, 1, 1e-12, 1)
                .unwrap()
                .image
                .max_abs_diff(&img)
                .unwrap()
                < 1e-6
        );
    }

    #[test]
    fn rotation_changes_image() {
        let img = phantom(1);
        let out = motion_artifact(&img, 10.0, 0.0, 2).unwrap();
        assert!(out.image.l1_distance(&img).unwrap() > 0.0);
    }

    #[test]
    fn motion_spectrum_energy_bookkeeping() {
        let img = phantom(2);
        let moved = rigid_move(&img, 7.0, 3.0, 0.0);
        let a = shifted_spectrum(&img).unwrap();
        let b = shifted_spectrum(&moved).unwrap();
        let k = motion_spectrum(&img, &moved).unwrap();
        let (w, h) = k.dims();
        let half = |s: &ComplexImage, upper: bool| -> f64 {
            let rows = if upper { 0..h / 2 } else { h / 2..h };
            rows.flat_map(|v| (0..w).map(move |u| (u, v)))
                .map(|(u, v)| s.get(u, v).norm_sqr())
                .sum()
        };
        let expected = half(&a, true) + half(&b, false);
        assert!((k.energy() - expected).abs() <= 1e-9 * expected);
        let (lo, hi) = {
            let (ea, eb) = (a.energy(), b.energy());
            (ea.min(eb), ea.max(eb))
        };
        let cross = (half(&a, false) - half(&b, false))
            .abs()
            .max((half(&a, true) - half(&b, true)).abs());
        assert!(k.energy() >= lo - cross && k.energy() <= hi + cross);
    }

    #[test]
    fn ghosting_preserves_central_band() {
        let img = phantom(3);
        let k = shifted_spectrum(&img).unwrap();
        for along_rows in [true, false] {
            let g = ghosting_spectrum(&k, 1, 0.6, along_rows);
            for line in 32 - 3..=32 + 3 {
                for t in 0..64 {
                    let (u, v) = if along_rows { (t, line) } else { (line, t) };
                    assert_eq!(g.get(u, v), k.get(u, v));
                }
            }
        }
    }

    fn shifted_correlation(img: &Image, along_rows: bool) -> f64 {
        let (w, h) = img.dims();
        let mean = img.mean();
        let mut num = 0.0;
        let mut den = 0.0;
        for y in 0..h {
            for x in 0..w {
                let (sx, sy) = if along_rows {
                    (x, (y + h / 2) % h)
                } else {
                    ((x + w / 2) % w, y)
                };
                num += (img.get(x, y) - mean) * (img.get(sx, sy) - mean);
                den += (img.get(x, y) - mean).powi(2);
            }
        }
        num / den
    }

    #[test]
    fn ghosting_creates_half_period_replica() {
        let img = phantom(4);
        for seed in 0..4 {
            let out = ghosting(&img, 1, 0.6, seed).unwrap();
            let along_rows = out.params_used.choices["axis_rows"] == 1.0;
            assert!(
                shifted_correlation(&out.image, along_rows) > shifted_correlation(&img, along_rows)
            );
        }
    }

    #[test]
    fn single_spike_is_a_pure_sinusoid() {
        let img = phantom(5);
        let k = shifted_spectrum(&img).unwrap();
        let site = SpikeSite {
            u: 40,
            v: 27,
            sign: -1.0,
        };
        let spiked = spike_spectrum(&k, &[site], 0.5);
        let before = ifft2(&fftshift(&k).unwrap()).unwrap();
        let after = ifft2(&fftshift(&spiked).unwrap()).unwrap();
        let diff = Image::from_fn(64, 64, |x, y| after.get(x, y).re - before.get(x, y).re);
        let spectrum = shifted_spectrum(&diff).unwrap();
        let peak = spectrum.max_magnitude();
        for v in 0..64 {
            for u in 0..64 {
                let on_support = (u, v) == (40, 27) || (u, v) == (24, 37);
                let m = spectrum.get(u, v).norm();
                if on_support {
                    assert!((m - peak).abs() < 1e-9 * peak);
                } else {
                    assert!(m < 1e-9 * peak, "leak at ({u},{v}): {m}");
                }
            }
        }
    }

    #[test]
    fn spike_positions_deterministic_and_off_dc() {
        let img = phantom(6);
        for seed in 0..20 {
            let a = spike(&img, 2, 1.0, seed).unwrap();
            let b = spike(&img, 2, 1.0, seed).unwrap();
            assert_eq!(a.params_used, b.params_used);
            let c = &a.params_used.choices;
            assert!((c["spike0_u"], c["spike0_v"]) != (32.0, 32.0));
            assert!((c["spike1_u"], c["spike1_v"]) != (32.0, 32.0));
        }
    }
}
