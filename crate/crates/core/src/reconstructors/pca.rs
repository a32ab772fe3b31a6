use super::linear_ae::{dot, pixel_mean, LinearAeModel};
use crate::dataset::Corpus;
use crate::error::{Error, Result};
use crate::rng::{tag, SplitMix64};
use crate::Image;

pub const PCA_TOLERANCE: f64 = 1e-10;
pub const PCA_MAX_ITERATIONS: usize = 10_000;

/// Dense symmetric matrix, row-major.
struct SymMatrix {
    n: usize,
    a: Vec<f64>,
}

impl SymMatrix {
    fn apply(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| dot(&self.a[i * self.n..(i + 1) * self.n], v))
            .collect()
    }
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Remove the components along each (orthonormal) vector in `basis`;
/// two passes for numerical orthogonality.
fn project_out(v: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for b in basis {
            let c = dot(v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
    }
}

fn random_unit_orthogonal(n: usize, basis: &[Vec<f64>], rng: &mut SplitMix64) -> Result<Vec<f64>> {
    for _ in 0..16 {
        let mut v: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        project_out(&mut v, basis);
        let len = norm(&v);
        if len > 1e-8 {
            v.iter_mut().for_each(|x| *x /= len);
            return Ok(v);
        }
    }
    Err(Error::Numerical(
        "could not draw a vector orthogonal to the found components".into(),
    ))
}

/// Top `k` eigenpairs by power iteration, deflating each found vector by
/// projection. Eigenvalues at round-off level are returned as 0 with an
/// arbitrary orthonormal completion.
fn top_eigenpairs(s: &SymMatrix, k: usize, rng: &mut SplitMix64) -> Result<Vec<(f64, Vec<f64>)>> {
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut pairs = Vec::with_capacity(k);
    let mut scale = 0.0f64;
    for comp in 0..k {
        let mut v = random_unit_orthogonal(s.n, &vectors, rng)?;
        let mut lambda = 0.0;
        let mut converged = false;
        for _ in 0..PCA_MAX_ITERATIONS {
            let mut w = s.apply(&v);
            project_out(&mut w, &vectors);
            lambda = dot(&v, &w);
            let wn = norm(&w);
            if comp == 0 {
                scale = scale.max(wn);
            }
            if wn <= 1e-13 * scale.max(f64::MIN_POSITIVE) {
                lambda = 0.0;
                converged = true;
                break;
            }
            let residual: f64 = w
                .iter()
                .zip(&v)
                .map(|(a, b)| (a - lambda * b).powi(2))
                .sum::<f64>()
                .sqrt();
            w.iter_mut().for_each(|x| *x /= wn);
            v = w;
            if residual <= PCA_TOLERANCE * scale {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Numerical(format!(
                "power iteration for component {} did not converge in {PCA_MAX_ITERATIONS} iterations",
                comp + 1
            )));
        }
        vectors.push(v.clone());
        pairs.push((lambda.max(0.0), v));
    }
    Ok(pairs)
}

/// Closed-form L2-optimal linear autoencoder: the top `k` principal
/// directions of the training set serve as both encoder and decoder.
pub fn fit_pca_images(images: &[Image], k: usize, seed: u64) -> Result<LinearAeModel> {
    let first = images
        .first()
        .ok_or_else(|| Error::Data("training corpus is empty".into()))?;
    let (w, h) = first.dims();
    let d = w * h;
    let n = images.len();
    if k == 0 || k > d.min(n) {
        return Err(Error::invalid(format!(
            "PCA latent dimension {k} outside 1..={}",
            d.min(n)
        )));
    }
    for img in images {
        first.check_same_dims(img)?;
    }
    let mean = pixel_mean(images);
    let rows: Vec<Vec<f64>> = images
        .iter()
        .map(|img| img.data().iter().zip(&mean).map(|(x, m)| x - m).collect())
        .collect();
    let mut rng = SplitMix64::keyed(seed, &[tag("pca")]);

    let components: Vec<Vec<f64>> = if n < d {
        // Gram route: eigenvectors of X X^T mapped back through X^T
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = dot(&rows[i], &rows[j]);
                a[i * n + j] = v;
                a[j * n + i] = v;
            }
        }
        let pairs = top_eigenpairs(&SymMatrix { n, a }, k, &mut rng)?;
        let mut out: Vec<Vec<f64>> = Vec::with_capacity(k);
        for (lambda, v) in pairs {
            let mut u = vec![0.0; d];
            if lambda > 0.0 {
                for (coef, row) in v.iter().zip(&rows) {
                    u.iter_mut().zip(row).for_each(|(a, b)| *a += coef * b);
                }
                project_out(&mut u, &out);
            }
            let len = norm(&u);
            if lambda > 0.0 && len > 1e-12 {
                u.iter_mut().for_each(|x| *x /= len);
            } else {
                u = random_unit_orthogonal(d, &out, &mut rng)?;
            }
            out.push(u);
        }
        out
    } else {
        let mut a = vec![0.0; d * d];
        for row in &rows {
            for i in 0..d {
                let ri = row[i];
                if ri == 0.0 {
                    continue;
                }
                let line = &mut a[i * d..(i + 1) * d];
                line.iter_mut().zip(row).for_each(|(x, y)| *x += ri * y);
            }
        }
        top_eigenpairs(&SymMatrix { n: d, a }, k, &mut rng)?
            .into_iter()
            .map(|(_, v)| v)
            .collect()
    };

    let flat: Vec<f64> = components.into_iter().flatten().collect();
    Ok(LinearAeModel {
        width: w,
        height: h,
        latent_dim: k,
        mean,
        encoder: flat.clone(),
        decoder: flat,
        epoch: 0,
        train_losses: Vec::new(),
        val_losses: Vec::new(),
    })
}

pub fn fit_pca(train: &Corpus, k: usize, seed: u64) -> Result<LinearAeModel> {
    fit_pca_images(&train.images, k, seed)
}
