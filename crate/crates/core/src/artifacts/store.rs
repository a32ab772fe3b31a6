//! On-disk artifact corpora.
//!
//! Each sample is stored as `<id>__<family>__<param-string>__s<seed>.f32`
//! with a `_mask.f32` companion (0/1 values) and the usual `.json` sidecars.
//! `manifest.json` lists every sample with its resolved parameters.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ArtifactResult, ResolvedParams};
use crate::error::{Error, Result};
use crate::imgcore::io::{read_mask, read_raw, write_mask, write_raw};
use crate::imgcore::Mask2D;
use crate::Image;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub source_id: String,
    pub file: String,
    pub mask_file: String,
    pub params: ResolvedParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactManifest {
    pub entries: Vec<ArtifactEntry>,
}

pub fn sample_stem(source_id: &str, params: &ResolvedParams) -> String {
    format!(
        "{}__{}__{}__s{}",
        source_id,
        params.params.family(),
        params.params.kind.param_string(),
        params.params.seed
    )
}

pub fn write_artifact_corpus(
    root: &Path,
    samples: &[(String, ArtifactResult)],
) -> Result<ArtifactManifest> {
    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    let mut entries = Vec::with_capacity(samples.len());
    for (id, result) in samples {
        let stem = sample_stem(id, &result.params_used);
        let file = format!("{stem}.f32");
        let mask_file = format!("{stem}_mask.f32");
        write_raw(&root.join(&file), &result.image)?;
        write_mask(&root.join(&mask_file), &result.gt_mask)?;
        entries.push(ArtifactEntry {
            source_id: id.clone(),
            file,
            mask_file,
            params: result.params_used.clone(),
        });
    }
    let manifest = ArtifactManifest { entries };
    let path = root.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&manifest)?;
    fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

pub fn read_artifact_manifest(root: &Path) -> Result<ArtifactManifest> {
    let path = root.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn read_artifact_sample(root: &Path, entry: &ArtifactEntry) -> Result<(Image, Mask2D)> {
    Ok((
        read_raw(&root.join(&entry.file))?,
        read_mask(&root.join(&entry.mask_file))?,
    ))
}
