//! Model files: a JSON header plus, for linear models, a little-endian
//! `f32` blob holding `mean[d]`, `encoder[k*d]`, `decoder[k*d]` in that
//! order. Encoder and decoder rows are `k` vectors of length `d`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{LinearAeModel, Reconstructor, ReconstructorKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelHeader {
    pub kind: ReconstructorKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linear: Option<LinearHeader>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blur_sigma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearHeader {
    pub width: usize,
    pub height: usize,
    pub k: usize,
    pub epoch: usize,
    pub train_losses: Vec<f64>,
    pub val_losses: Vec<f64>,
    pub blob: String,
}

pub fn blob_path(header_path: &Path) -> PathBuf {
    header_path.with_extension("bin")
}

/// Write `model` to `path` (JSON header) and its `.bin` blob.
/// `kind` distinguishes SGD-trained from closed-form linear models.
pub fn write_model(path: &Path, model: &Reconstructor, kind: ReconstructorKind) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let header = match model {
        Reconstructor::Identity => ModelHeader {
            kind: ReconstructorKind::Identity,
            linear: None,
            blur_sigma: None,
        },
        Reconstructor::Blur { sigma } => ModelHeader {
            kind: ReconstructorKind::BlurBaseline,
            linear: None,
            blur_sigma: Some(*sigma),
        },
        Reconstructor::Linear(m) => {
            let blob = blob_path(path);
            let mut bytes = Vec::with_capacity(4 * (m.mean.len() + 2 * m.encoder.len()));
            for v in m.mean.iter().chain(&m.encoder).chain(&m.decoder) {
                bytes.extend_from_slice(&(*v as f32).to_le_bytes());
            }
            fs::write(&blob, bytes).map_err(|e| Error::io(&blob, e))?;
            ModelHeader {
                kind,
                linear: Some(LinearHeader {
                    width: m.width,
                    height: m.height,
                    k: m.latent_dim,
                    epoch: m.epoch,
                    train_losses: m.train_losses.clone(),
                    val_losses: m.val_losses.clone(),
                    blob: blob
                        .file_name()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_default(),
                }),
                blur_sigma: None,
            }
        }
    };
    let json = serde_json::to_string_pretty(&header)?;
    fs::write(path, json).map_err(|e| Error::io(path, e))
}

pub fn read_model(path: &Path) -> Result<(ModelHeader, Reconstructor)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let header: ModelHeader = serde_json::from_str(&text)?;
    let model = match header.kind {
        ReconstructorKind::Identity => Reconstructor::Identity,
        ReconstructorKind::BlurBaseline => Reconstructor::Blur {
            sigma: header.blur_sigma.ok_or_else(|| {
                Error::Data(format!("{}: blur model without sigma", path.display()))
            })?,
        },
        ReconstructorKind::LinearAe | ReconstructorKind::Pca => {
            let lin = header.linear.as_ref().ok_or_else(|| {
                Error::Data(format!(
                    "{}: linear model without parameters",
                    path.display()
                ))
            })?;
            let blob = path.with_file_name(&lin.blob);
            let bytes = fs::read(&blob).map_err(|e| Error::io(&blob, e))?;
            let d = lin.width * lin.height;
            let expected = 4 * (d + 2 * lin.k * d);
            if bytes.len() != expected {
                return Err(Error::Data(format!(
                    "{}: expected {expected} bytes, found {}",
                    blob.display(),
                    bytes.len()
                )));
            }
            let values: Vec<f64> = bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                .collect();
            let (mean, rest) = values.split_at(d);
            let (encoder, decoder) = rest.split_at(lin.k * d);
            Reconstructor::Linear(LinearAeModel {
                width: lin.width,
                height: lin.height,
                latent_dim: lin.k,
                mean: mean.to_vec(),
                encoder: encoder.to_vec(),
                decoder: decoder.to_vec(),
                epoch: lin.epoch,
                train_losses: lin.train_losses.clone(),
                val_losses: lin.val_losses.clone(),
            })
        }
    };
    Ok((header, model))
}
