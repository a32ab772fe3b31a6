//! Seeded phantom corpus, subject-level splits and external ingestion.
//!
//! Corpus directory layout:
//!
//! ```text
//! <root>/manifest.json
//! <root>/<role>/<id>.f32     little-endian f32 raster
//! <root>/<role>/<id>.json    {"width": W, "height": H}
//! ```

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgcore::{convolve2d_separable, gaussian_kernel, io, normalize_minmax, Mask2D};
use crate::rng::{tag, SplitMix64};
use crate::Image;

pub const GENERATOR_VERSION: &str = "phantom-v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Train,
    Val,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Train => "train",
            Role::Val => "val",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhantomConfig {
    pub size: usize,
    pub seed: u64,
    pub n_subjects: usize,
    pub slices_per_subject: usize,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        Self {
            size: 64,
            seed: 2024,
            n_subjects: 48,
            slices_per_subject: 5,
        }
    }
}

impl PhantomConfig {
    pub fn validate(&self) -> Result<()> {
        if ![32, 64, 128].contains(&self.size) {
            return Err(Error::Config(format!(
                "phantom size must be 32, 64 or 128, got {}",
                self.size
            )));
        }
        if self.n_subjects == 0 || self.slices_per_subject == 0 {
            return Err(Error::Config("phantom counts must be positive".into()));
        }
        Ok(())
    }
}

/// A set of equally sized images with unique ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub role: Role,
    pub ids: Vec<String>,
    pub images: Vec<Image>,
}

impl Corpus {
    pub fn new(role: Role, ids: Vec<String>, images: Vec<Image>) -> Result<Self> {
        if ids.len() != images.len() {
            return Err(Error::Data("ids and images differ in length".into()));
        }
        let unique: BTreeSet<&String> = ids.iter().collect();
        if unique.len() != ids.len() {
            return Err(Error::Data("corpus ids are not unique".into()));
        }
        if let Some(first) = images.first() {
            if let Some(bad) = images.iter().position(|im| im.dims() != first.dims()) {
                return Err(Error::Data(format!(
                    "image {} is {:?}, expected {:?}",
                    ids[bad],
                    images[bad].dims(),
                    first.dims()
                )));
            }
        }
        Ok(Self { role, ids, images })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn dims(&self) -> Option<(usize, usize)> {
        self.images.first().map(|im| im.dims())
    }
}

pub fn phantom_id(subject: usize, slice: usize) -> String {
    format!("sub{subject:04}_sl{slice:02}")
}

/// Subject index encoded in a phantom id, if any.
pub fn subject_of(id: &str) -> Option<usize> {
    id.strip_prefix("sub")?.get(..4)?.parse().ok()
}

/// Point-spread width at 64 pixels, scaled with the image size.
const PSF_SIGMA: f64 = 0.5;

struct Ellipse {
    cx: f64,
    cy: f64,
    a: f64,
    b: f64,
    cos: f64,
    sin: f64,
}

impl Ellipse {
    fn new(cx: f64, cy: f64, a: f64, b: f64, angle: f64) -> Self {
        Self {
            cx,
            cy,
            a,
            b,
            cos: angle.cos(),
            sin: angle.sin(),
        }
    }

    /// < 1 inside, > 1 outside.
    fn level(&self, x: f64, y: f64) -> f64 {
        let dx = x - self.cx;
        let dy = y - self.cy;
        let u = dx * self.cos + dy * self.sin;
        let v = -dx * self.sin + dy * self.cos;
        (u / self.a).powi(2) + (v / self.b).powi(2)
    }
}

/// Plane wave `amp * sin(2 pi (fu u + fv v) + phase)` in head coordinates.
#[derive(Clone, Copy)]
struct Wave {
    fu: f64,
    fv: f64,
    phase: f64,
    amp: f64,
}

impl Wave {
    fn random(rng: &mut SplitMix64, min_freq: f64, max_freq: f64, amp: f64) -> Self {
        let f = rng.uniform(min_freq, max_freq);
        let dir = rng.uniform(0.0, std::f64::consts::TAU);
        Self {
            fu: f * dir.cos(),
            fv: f * dir.sin(),
            phase: rng.uniform(0.0, std::f64::consts::TAU),
            amp,
        }
    }

    fn at(&self, u: f64, v: f64) -> f64 {
        self.amp * (std::f64::consts::TAU * (self.fu * u + self.fv * v) + self.phase).sin()
    }
}

/// Anatomy shared by every subject of a seed: cortical folding, deep
/// structures and a fine texture, all in head-relative coordinates.
struct Atlas {
    folds: [(f64, f64, f64); 2],
    ventricle: (f64, f64, f64, f64),
    nuclei: (f64, f64, f64),
    texture: Vec<Wave>,
}

impl Atlas {
    fn new(seed: u64) -> Self {
        let mut rng = SplitMix64::keyed(seed, &[tag("phantom-atlas")]);
        let fold = |rng: &mut SplitMix64, lo: u64, hi: u64, amp: f64| {
            let n = (lo + rng.below(hi - lo + 1)) as f64;
            (n, rng.uniform(0.0, std::f64::consts::TAU), amp)
        };
        let folds = [fold(&mut rng, 7, 10, 0.07), fold(&mut rng, 13, 17, 0.035)];
        let ventricle = (
            rng.uniform(0.1, 0.14),
            rng.uniform(-0.08, 0.0),
            rng.uniform(0.06, 0.08),
            rng.uniform(0.18, 0.24),
        );
        let nuclei = (
            rng.uniform(0.26, 0.32),
            rng.uniform(0.05, 0.15),
            rng.uniform(0.09, 0.12),
        );
        let texture = (0..16)
            .map(|_| Wave::random(&mut rng, 2.5, 5.5, 0.02))
            .collect();
        Self {
            folds,
            ventricle,
            nuclei,
            texture,
        }
    }

    /// Radius of the grey/white boundary at angle `theta`, as a fraction
    /// of the brain radius.
    fn white_radius(&self, theta: f64) -> f64 {
        0.78 + self
            .folds
            .iter()
            .map(|&(n, ph, amp)| amp * (n * theta + ph).sin())
            .sum::<f64>()
    }
}

/// Deterministic brain-like slice for `(cfg.seed, subject, slice)`: a
/// skull ring, a folded grey-matter band over white matter, ventricles
/// and deep nuclei, a fine texture shared across subjects plus subject
/// blobs, texture and smooth bias. Background is exactly zero and the
/// result is rescaled to [0, 1].
pub fn generate_phantom(cfg: &PhantomConfig, subject: usize, slice: usize) -> Result<Image> {
    cfg.validate()?;
    if subject >= cfg.n_subjects || slice >= cfg.slices_per_subject {
        return Err(Error::invalid(format!(
            "phantom index ({subject}, {slice}) out of range"
        )));
    }
    let atlas = Atlas::new(cfg.seed);
    let s = cfg.size as f64;
    let mut srng = SplitMix64::keyed(cfg.seed, &[tag("phantom-subject"), subject as u64]);
    let mut trng = SplitMix64::keyed(
        cfg.seed,
        &[tag("phantom-texture"), subject as u64, slice as u64],
    );

    // Position of the slice within the subject's slab, in [-0.5, 0.5].
    let t = if cfg.slices_per_subject > 1 {
        slice as f64 / (cfg.slices_per_subject - 1) as f64 - 0.5
    } else {
        0.0
    };
    let slab = 1.0 - 0.12 * t * t;

    let cx = s * (0.5 + srng.uniform(-0.01, 0.01));
    let cy = s * (0.5 + srng.uniform(-0.01, 0.01));
    let head_a = s * srng.uniform(0.37, 0.39) * slab;
    let head_b = s * srng.uniform(0.43, 0.45) * slab;
    let head_angle = srng.uniform(-0.08, 0.08);
    let skull = srng.uniform(0.08, 0.11);
    let skull_level = srng.uniform(0.75, 0.95);
    let grey_level = srng.uniform(0.38, 0.46);
    let white_level = srng.uniform(0.6, 0.7);
    let csf_level = srng.uniform(0.1, 0.16);
    let nuclei_level = srng.uniform(0.45, 0.55);
    let ventricle_scale = srng.uniform(0.9, 1.1) * (1.0 - 0.8 * t * t);
    let grad_x = srng.uniform(-0.03, 0.03);
    let grad_y = srng.uniform(-0.03, 0.03);
    let fold_shift = srng.uniform(-0.02, 0.02);

    let n_blobs = 2 + srng.below(3) as usize;
    let blobs: Vec<(Ellipse, f64)> = (0..n_blobs)
        .map(|_| {
            let r = srng.uniform(0.0, 0.5).sqrt();
            let phi = srng.uniform(0.0, std::f64::consts::TAU);
            let a = srng.uniform(0.08, 0.2);
            let b = srng.uniform(0.06, 0.15);
            let angle = srng.uniform(0.0, std::f64::consts::PI);
            (
                Ellipse::new(r * phi.cos(), r * phi.sin() + 0.1 * t, a, b, angle),
                srng.uniform(-0.05, 0.05),
            )
        })
        .collect();
    let subject_texture: Vec<Wave> = (0..6)
        .map(|_| Wave::random(&mut srng, 1.0, 3.0, 0.005))
        .collect();
    let slice_texture: Vec<Wave> = (0..3)
        .map(|_| Wave::random(&mut trng, 1.0, 3.0, 0.008))
        .collect();

    let (va, vb) = (
        atlas.ventricle.2 * ventricle_scale,
        atlas.ventricle.3 * ventricle_scale,
    );
    let ventricles = [
        Ellipse::new(-atlas.ventricle.0, atlas.ventricle.1, va, vb, 0.15),
        Ellipse::new(atlas.ventricle.0, atlas.ventricle.1, va, vb, -0.15),
    ];
    let nr = atlas.nuclei.2 * (1.0 - t.abs());
    let nuclei = [
        Ellipse::new(-atlas.nuclei.0, atlas.nuclei.1, nr, nr * 1.4, 0.0),
        Ellipse::new(atlas.nuclei.0, atlas.nuclei.1, nr, nr * 1.4, 0.0),
    ];

    let (cos, sin) = (head_angle.cos(), head_angle.sin());
    let mut img = Image::zeros(cfg.size, cfg.size);
    for y in 0..cfg.size {
        for x in 0..cfg.size {
            let (dx, dy) = (x as f64 - cx, y as f64 - cy);
            let u = (dx * cos + dy * sin) / head_a;
            let v = (-dx * sin + dy * cos) / head_b;
            let rho = (u * u + v * v).sqrt();
            if rho > 1.0 {
                continue;
            }
            let val = if rho > 1.0 - skull {
                skull_level
            } else {
                // brain-relative coordinates
                let (bu, bv) = (u / (1.0 - skull), v / (1.0 - skull));
                let q = rho / (1.0 - skull);
                let theta = bv.atan2(bu);
                let mut tissue = if q > 0.95 {
                    csf_level
                } else if q > atlas.white_radius(theta) + fold_shift {
                    grey_level
                } else {
                    white_level
                };
                if nuclei.iter().any(|e| e.level(bu, bv) <= 1.0) {
                    tissue = nuclei_level;
                }
                if ventricles.iter().any(|e| e.level(bu, bv) <= 1.0) {
                    tissue = csf_level;
                }
                for (e, delta) in &blobs {
                    tissue += delta * (-e.level(bu, bv)).exp();
                }
                let texture: f64 = atlas
                    .texture
                    .iter()
                    .chain(&subject_texture)
                    .chain(&slice_texture)
                    .map(|w| w.at(bu, bv))
                    .sum();
                tissue + texture
            };
            let bias = 1.0 + grad_x * dx / s + grad_y * dy / s;
            img.set(x, y, (val * bias).clamp(0.02, 1.0));
        }
    }
    let inside = Mask2D::from_fn(cfg.size, cfg.size, |x, y| img.get(x, y) > 0.0);
    let kernel = gaussian_kernel(PSF_SIGMA * s / 64.0)?;
    let mut img = convolve2d_separable(&img, &kernel)?;
    for (v, &keep) in img.data_mut().iter_mut().zip(inside.bits()) {
        *v = if keep {
            (*v + trng.uniform(-0.006, 0.006)).clamp(0.02, 1.0)
        } else {
            0.0
        };
    }
    Ok(normalize_minmax(&img))
}

/// All slices of the listed subjects.
pub fn generate_subjects(cfg: &PhantomConfig, role: Role, subjects: &[usize]) -> Result<Corpus> {
    use rayon::prelude::*;
    let keys: Vec<(usize, usize)> = subjects
        .iter()
        .flat_map(|&s| (0..cfg.slices_per_subject).map(move |z| (s, z)))
        .collect();
    let images = keys
        .par_iter()
        .map(|&(s, z)| generate_phantom(cfg, s, z))
        .collect::<Result<Vec<_>>>()?;
    let ids = keys.iter().map(|&(s, z)| phantom_id(s, z)).collect();
    Corpus::new(role, ids, images)
}

/// Seeded subject-level partition. Returns `(train, val)` subject indices,
/// each sorted ascending.
pub fn split_subjects(
    n_subjects: usize,
    seed: u64,
    train_fraction: f64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let n_train = (train_fraction * n_subjects as f64).round() as usize;
    if n_train == 0 || n_train >= n_subjects {
        return Err(Error::Config(format!(
            "train fraction {train_fraction} of {n_subjects} subjects leaves one side empty"
        )));
    }
    let mut order: Vec<usize> = (0..n_subjects).collect();
    SplitMix64::keyed(seed, &[tag("split")]).shuffle(&mut order);
    let mut train = order[..n_train].to_vec();
    let mut val = order[n_train..].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    Ok((train, val))
}

/// Subject-level train/validation split of the phantom corpus.
pub fn split_corpus(cfg: &PhantomConfig, train_fraction: f64) -> Result<(Corpus, Corpus)> {
    cfg.validate()?;
    let (train, val) = split_subjects(cfg.n_subjects, cfg.seed, train_fraction)?;
    Ok((
        generate_subjects(cfg, Role::Train, &train)?,
        generate_subjects(cfg, Role::Val, &val)?,
    ))
}

/// Load every `.f32` (with sidecar) or `.pgm` file in `dir`, sorted by
/// name. Images are rescaled with [`normalize_minmax`]; ids are the file
/// stems.
pub fn load_external(dir: &Path, role: Role) -> Result<Corpus> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths: Vec<_> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()),
                Some("f32") | Some("pgm")
            )
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Data(format!(
            "no .f32 or .pgm images in {}",
            dir.display()
        )));
    }
    let mut ids = Vec::with_capacity(paths.len());
    let mut images = Vec::with_capacity(paths.len());
    for p in &paths {
        let img = match p.extension().and_then(|e| e.to_str()) {
            Some("pgm") => io::read_pgm(p)?,
            _ => io::read_raw(p)?,
        };
        let id = p
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| Error::Data(format!("bad file name {}", p.display())))?
            .to_string();
        ids.push(id);
        images.push(normalize_minmax(&img));
    }
    Corpus::new(role, ids, images)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub generator: String,
    pub size: (usize, usize),
    pub seed: Option<u64>,
    pub roles: Vec<RoleEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoleEntry {
    pub role: Role,
    pub ids: Vec<String>,
}

pub fn write_corpus(root: &Path, corpora: &[&Corpus], seed: Option<u64>) -> Result<CorpusManifest> {
    let size = corpora
        .iter()
        .find_map(|c| c.dims())
        .ok_or_else(|| Error::Data("nothing to write".into()))?;
    for corpus in corpora {
        let dir = root.join(corpus.role.as_str());
        for (id, img) in corpus.ids.iter().zip(&corpus.images) {
            io::write_raw(&dir.join(format!("{id}.f32")), img)?;
        }
    }
    let manifest = CorpusManifest {
        generator: GENERATOR_VERSION.to_string(),
        size,
        seed,
        roles: corpora
            .iter()
            .map(|c| RoleEntry {
                role: c.role,
                ids: c.ids.clone(),
            })
            .collect(),
    };
    let path = root.join("manifest.json");
    fs::write(&path, serde_json::to_vec_pretty(&manifest)?).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

/// Read one role of a corpus written by [`write_corpus`], in manifest order.
pub fn read_corpus(root: &Path, role: Role) -> Result<Corpus> {
    let path = root.join("manifest.json");
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: CorpusManifest = serde_json::from_slice(&bytes)
        .map_err(|e| Error::Data(format!("bad manifest {}: {e}", path.display())))?;
    let entry = manifest
        .roles
        .iter()
        .find(|r| r.role == role)
        .ok_or_else(|| Error::Data(format!("manifest has no `{}` role", role.as_str())))?;
    let dir = root.join(role.as_str());
    let images = entry
        .ids
        .iter()
        .map(|id| io::read_raw(&dir.join(format!("{id}.f32"))))
        .collect::<Result<Vec<_>>>()?;
    Corpus::new(role, entry.ids.clone(), images)
}
