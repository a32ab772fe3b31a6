use serde::{Deserialize, Serialize};

use super::{Loss, ReconstructorConfig};
use crate::dataset::Corpus;
use crate::error::{Error, Result};
use crate::rng::{tag, SplitMix64};
use crate::Image;

/// `x_hat = mu + sum_i (E_i . (x - mu)) atom_i`.
///
/// `encoder` and `decoder` are both `k x d` row-major; row `i` of
/// `decoder` is column `i` of the decoder matrix `D`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearAeModel {
    pub width: usize,
    pub height: usize,
    pub latent_dim: usize,
    pub mean: Vec<f64>,
    pub encoder: Vec<f64>,
    pub decoder: Vec<f64>,
    /// 1-based epoch of this snapshot; 0 for closed-form models.
    pub epoch: usize,
    pub train_losses: Vec<f64>,
    pub val_losses: Vec<f64>,
}

/// Inner product with eight independent accumulators so the loop
/// vectorizes; the summation order is fixed, so results are reproducible.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

impl LinearAeModel {
    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn encoder_row(&self, i: usize) -> &[f64] {
        let d = self.pixels();
        &self.encoder[i * d..(i + 1) * d]
    }

    pub fn decoder_atom(&self, i: usize) -> &[f64] {
        let d = self.pixels();
        &self.decoder[i * d..(i + 1) * d]
    }

    fn check_dims(&self, img: &Image) -> Result<()> {
        if img.dims() != (self.width, self.height) {
            return Err(Error::DimensionMismatch {
                expected: (self.width, self.height),
                actual: img.dims(),
            });
        }
        Ok(())
    }

    fn centred(&self, img: &Image) -> Vec<f64> {
        img.data()
            .iter()
            .zip(&self.mean)
            .map(|(x, m)| x - m)
            .collect()
    }

    fn encode_centred(&self, r: &[f64]) -> Vec<f64> {
        (0..self.latent_dim)
            .map(|i| dot(self.encoder_row(i), r))
            .collect()
    }

    /// `D z` without the mean.
    fn decode_centred(&self, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.pixels()];
        for (i, &zi) in z.iter().enumerate() {
            axpy(zi, self.decoder_atom(i), &mut out);
        }
        out
    }

    /// Latent code of `img`.
    pub fn encode(&self, img: &Image) -> Result<Vec<f64>> {
        self.check_dims(img)?;
        Ok(self.encode_centred(&self.centred(img)))
    }

    /// Unclipped reconstruction, the quantity the training loss sees.
    pub fn reconstruct_raw(&self, img: &Image) -> Result<Image> {
        self.check_dims(img)?;
        let z = self.encode_centred(&self.centred(img));
        let mut out = self.decode_centred(&z);
        axpy(1.0, &self.mean, &mut out);
        Image::new(self.width, self.height, out)
    }

    pub fn reconstruct(&self, img: &Image) -> Result<Image> {
        Ok(self.reconstruct_raw(img)?.map(|v| v.clamp(0.0, 1.0)))
    }

    fn without_history(&self) -> Self {
        Self {
            train_losses: Vec::new(),
            val_losses: Vec::new(),
            ..self.clone()
        }
    }
}

/// Gradient of the batch loss with respect to encoder and decoder, laid
/// out like the model fields.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub encoder: Vec<f64>,
    pub decoder: Vec<f64>,
}

/// Per-image residual terms shared by the loss, its gradient and the SGD step.
struct Pass {
    r: Vec<f64>,
    z: Vec<f64>,
    /// dLoss/dx_hat for this image, already divided by `d`.
    g: Vec<f64>,
    /// `D^T g`.
    dtg: Vec<f64>,
    loss: f64,
}

fn forward_backward(model: &LinearAeModel, img: &Image, loss: Loss) -> Pass {
    let d = model.pixels() as f64;
    let r = model.centred(img);
    let z = model.encode_centred(&r);
    let xr = model.decode_centred(&z);
    let mut total = 0.0;
    let g: Vec<f64> = xr
        .iter()
        .zip(&r)
        .map(|(a, b)| {
            let e = a - b;
            total += loss.penalty(e);
            loss.derivative(e) / d
        })
        .collect();
    let dtg = (0..model.latent_dim)
        .map(|i| dot(model.decoder_atom(i), &g))
        .collect();
    Pass {
        r,
        z,
        g,
        dtg,
        loss: total / d,
    }
}

/// Mean per-pixel loss of the unclipped reconstruction over `batch` and
/// its gradient. The mean vector is fixed and receives no gradient.
pub fn loss_and_gradient(
    model: &LinearAeModel,
    batch: &[Image],
    loss: Loss,
) -> Result<(f64, Gradient)> {
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let d = model.pixels();
    let k = model.latent_dim;
    let mut grad = Gradient {
        encoder: vec![0.0; k * d],
        decoder: vec![0.0; k * d],
    };
    let scale = 1.0 / batch.len() as f64;
    let mut total = 0.0;
    for img in batch {
        model.check_dims(img)?;
        let p = forward_backward(model, img, loss);
        total += p.loss;
        for i in 0..k {
            axpy(scale * p.z[i], &p.g, &mut grad.decoder[i * d..(i + 1) * d]);
            axpy(
                scale * p.dtg[i],
                &p.r,
                &mut grad.encoder[i * d..(i + 1) * d],
            );
        }
    }
    Ok((total * scale, grad))
}

/// Mean per-pixel loss of the unclipped reconstruction over `images`.
pub fn mean_loss(model: &LinearAeModel, images: &[Image], loss: Loss) -> Result<f64> {
    if images.is_empty() {
        return Err(Error::invalid("no images to evaluate"));
    }
    let mut total = 0.0;
    for img in images {
        let xr = model.reconstruct_raw(img)?;
        total += xr
            .data()
            .iter()
            .zip(img.data())
            .map(|(a, b)| loss.penalty(a - b))
            .sum::<f64>()
            / model.pixels() as f64;
    }
    Ok(total / images.len() as f64)
}

pub(crate) fn pixel_mean(images: &[Image]) -> Vec<f64> {
    let d = images[0].len();
    let mut mean = vec![0.0; d];
    for img in images {
        axpy(1.0, img.data(), &mut mean);
    }
    let n = images.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    mean
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckpointPolicy {
    /// Lowest validation loss, earliest epoch on ties.
    Optimal,
    Final,
}

/// Training record: full loss histories plus model snapshots. Only the
/// best and last epochs are retained unless every epoch was requested.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointStore {
    pub train_losses: Vec<f64>,
    pub val_losses: Vec<f64>,
    /// Snapshots in increasing epoch order, histories stripped.
    pub snapshots: Vec<LinearAeModel>,
}

impl CheckpointStore {
    pub fn epochs(&self) -> usize {
        self.val_losses.len()
    }

    /// 1-based epoch with the lowest validation loss.
    pub fn optimal_epoch(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, &v) in self.val_losses.iter().enumerate() {
            if best.is_none_or(|(_, b)| v < b) {
                best = Some((i + 1, v));
            }
        }
        best.map(|(e, _)| e)
    }
}

pub fn select_checkpoint(
    store: &CheckpointStore,
    policy: CheckpointPolicy,
) -> Result<LinearAeModel> {
    let epoch = match policy {
        CheckpointPolicy::Optimal => store.optimal_epoch(),
        CheckpointPolicy::Final => (store.epochs() > 0).then_some(store.epochs()),
    }
    .ok_or_else(|| Error::invalid("checkpoint store is empty"))?;
    let snap = store
        .snapshots
        .iter()
        .find(|m| m.epoch == epoch)
        .ok_or_else(|| Error::Data(format!("no snapshot retained for epoch {epoch}")))?;
    let mut model = snap.clone();
    model.train_losses = store.train_losses[..epoch].to_vec();
    model.val_losses = store.val_losses[..epoch].to_vec();
    Ok(model)
}

/// Seeded Gaussian initialisation scaled by `1 / sqrt(d)`.
fn init_model(width: usize, height: usize, k: usize, mean: Vec<f64>, seed: u64) -> LinearAeModel {
    let d = width * height;
    let scale = 1.0 / (d as f64).sqrt();
    let mut rng = SplitMix64::keyed(seed, &[tag("linear-ae-init")]);
    let encoder = (0..k * d).map(|_| rng.normal() * scale).collect();
    let decoder = (0..k * d).map(|_| rng.normal() * scale).collect();
    LinearAeModel {
        width,
        height,
        latent_dim: k,
        mean,
        encoder,
        decoder,
        epoch: 0,
        train_losses: Vec::new(),
        val_losses: Vec::new(),
    }
}

/// One minibatch step `theta -= lr * grad`, returning the batch loss.
///
/// Equivalent to [`loss_and_gradient`] followed by an update, but fused
/// row by row so each encoder and decoder row is streamed twice per batch.
fn sgd_step(model: &mut LinearAeModel, batch: &[&Image], loss: Loss, lr: f64) -> f64 {
    let d = model.pixels();
    let k = model.latent_dim;
    let nb = batch.len();
    let rs: Vec<Vec<f64>> = batch.iter().map(|img| model.centred(img)).collect();
    let mut zs = vec![vec![0.0; k]; nb];
    for i in 0..k {
        let row = model.encoder_row(i);
        for (z, r) in zs.iter_mut().zip(&rs) {
            z[i] = dot(row, r);
        }
    }
    let mut gs = vec![vec![0.0; d]; nb];
    for i in 0..k {
        let atom = model.decoder_atom(i);
        for (g, z) in gs.iter_mut().zip(&zs) {
            axpy(z[i], atom, g);
        }
    }
    let mut total = 0.0;
    for (g, r) in gs.iter_mut().zip(&rs) {
        let mut sum = 0.0;
        for (gj, rj) in g.iter_mut().zip(r) {
            let e = *gj - rj;
            sum += loss.penalty(e);
            *gj = loss.derivative(e) / d as f64;
        }
        total += sum / d as f64;
    }
    let step = lr / nb as f64;
    let mut dtg = vec![0.0; nb];
    for i in 0..k {
        let atom = &mut model.decoder[i * d..(i + 1) * d];
        for (t, g) in dtg.iter_mut().zip(&gs) {
            *t = dot(atom, g);
        }
        for (g, z) in gs.iter().zip(&zs) {
            axpy(-step * z[i], g, atom);
        }
        let row = &mut model.encoder[i * d..(i + 1) * d];
        for (t, r) in dtg.iter().zip(&rs) {
            axpy(-step * t, r, row);
        }
    }
    total / nb as f64
}

pub fn fit_linear_ae(
    train: &Corpus,
    val: &Corpus,
    cfg: &ReconstructorConfig,
) -> Result<CheckpointStore> {
    let (w, h) = train
        .dims()
        .ok_or_else(|| Error::Data("training corpus is empty".into()))?;
    let val_dims = val
        .dims()
        .ok_or_else(|| Error::Data("validation corpus is empty".into()))?;
    if val_dims != (w, h) {
        return Err(Error::DimensionMismatch {
            expected: (w, h),
            actual: val_dims,
        });
    }
    cfg.validate(w * h)?;
    let k = cfg.latent_dim;
    let mut model = init_model(w, h, k, pixel_mean(&train.images), cfg.seed);

    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut store = CheckpointStore {
        train_losses: Vec::with_capacity(cfg.epochs),
        val_losses: Vec::with_capacity(cfg.epochs),
        snapshots: Vec::new(),
    };
    for epoch in 1..=cfg.epochs {
        let halvings = if cfg.lr_decay_every == 0 {
            0
        } else {
            (epoch - 1) / cfg.lr_decay_every
        };
        let lr = cfg.learning_rate * 0.5f64.powi(halvings as i32);
        let mut rng = SplitMix64::keyed(cfg.seed, &[tag("linear-ae-epoch"), epoch as u64]);
        rng.shuffle(&mut order);

        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let images: Vec<&Image> = batch.iter().map(|&i| &train.images[i]).collect();
            epoch_loss += sgd_step(&mut model, &images, cfg.loss, lr) * batch.len() as f64;
        }
        let train_loss = epoch_loss / train.len() as f64;
        model.epoch = epoch;
        let val_loss = mean_loss(&model, &val.images, cfg.loss)?;
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(Error::Numerical(format!(
                "linear autoencoder diverged at epoch {epoch} with learning rate {lr:e}"
            )));
        }
        store.train_losses.push(train_loss);
        store.val_losses.push(val_loss);

        if cfg.keep_all_checkpoints {
            store.snapshots.push(model.without_history());
        } else {
            // keep the current best and the running last snapshot
            let best_epoch = store.optimal_epoch().unwrap_or(epoch);
            store.snapshots.retain(|m| m.epoch == best_epoch);
            store.snapshots.push(model.without_history());
        }
    }
    Ok(store)
}
