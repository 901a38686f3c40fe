//! The JSON manifest that binds models to their prediction files.
//!
//! ```json
//! {
//!   "class_names": ["large_bowel", "small_bowel", "stomach"],
//!   "truth_csv": "truth.csv",
//!   "slices": [{"id": "s0", "height": 64, "width": 64, "truth_rle_row_refs": ["s0"]}],
//!   "models": [{"model_id": "m0", "name": "U-Net A", "pred_dir": "preds/m0"}]
//! }
//! ```
//!
//! `truth_rle_row_refs` lists the `id` cells of the truth CSV rows for the
//! slice: either one id shared by every class, or one id per class in
//! `class_names` order. The row for class `c` is `(refs[c], class_names[c])`.
//! Relative paths resolve against the manifest's directory. The prediction
//! for slice `s` of model `m` is `<pred_dir>/<s>.dipe`.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::tensor::{Dims, SliceId};
use crate::io::tensor_file::read_dims;

pub const DEFAULT_TRUTH_CSV: &str = "truth.csv";

fn default_truth_csv() -> String {
    DEFAULT_TRUTH_CSV.to_string()
}

fn default_include() -> bool {
    true
}

fn is_true(v: &bool) -> bool {
    *v
}

/// The manifest document as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestFile {
    pub class_names: Vec<String>,
    #[serde(default = "default_truth_csv")]
    pub truth_csv: String,
    pub slices: Vec<SliceRecord>,
    pub models: Vec<ModelRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SliceRecord {
    pub id: String,
    pub height: usize,
    pub width: usize,
    pub truth_rle_row_refs: Vec<String>,
    /// Slices with `include: false` are listed but skipped by every metric.
    #[serde(default = "default_include", skip_serializing_if = "is_true")]
    pub include: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelRecord {
    pub model_id: String,
    pub name: String,
    pub pred_dir: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SliceEntry {
    pub id: SliceId,
    pub dims: Dims,
    /// `(csv id, class name)` per class.
    pub truth_rows: Vec<(String, String)>,
    pub include: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelEntry {
    pub model_id: String,
    pub name: String,
    pub pred_dir: PathBuf,
}

/// A validated manifest: every prediction file exists and agrees with its
/// slice's dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub class_names: Vec<String>,
    pub truth_csv: PathBuf,
    pub slices: Vec<SliceEntry>,
    pub models: Vec<ModelEntry>,
}

impl Manifest {
    pub fn n_models(&self) -> usize {
        self.models.len()
    }

    pub fn n_slices(&self) -> usize {
        self.slices.len()
    }

    pub fn model_ids(&self) -> Vec<String> {
        self.models.iter().map(|m| m.model_id.clone()).collect()
    }

    pub fn prediction_path(&self, model: usize, slice: usize) -> PathBuf {
        prediction_path(&self.models[model].pred_dir, &self.slices[slice].id)
    }
}

pub fn prediction_path(pred_dir: &Path, slice: &SliceId) -> PathBuf {
    pred_dir.join(format!("{slice}.dipe"))
}

fn resolve(root: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        root.join(p)
    }
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: ManifestFile = serde_json::from_str(&text).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let root = path.parent().unwrap_or_else(|| Path::new("."));
    validate_manifest(file, root)
}

/// Validates a parsed manifest, resolving relative paths against `root`.
pub fn validate_manifest(file: ManifestFile, root: &Path) -> Result<Manifest> {
    let classes = file.class_names.len();
    if classes == 0 {
        return Err(Error::EmptyManifest("class_names"));
    }
    if file.slices.is_empty() {
        return Err(Error::EmptyManifest("slices"));
    }
    if file.models.is_empty() {
        return Err(Error::EmptyManifest("models"));
    }

    let mut seen = HashSet::new();
    let mut slices = Vec::with_capacity(file.slices.len());
    for record in file.slices {
        let id = SliceId::new(record.id)?;
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateSlice(id.to_string()));
        }
        let dims = Dims::new(classes, record.height, record.width)?;
        let truth_rows = match record.truth_rle_row_refs.len() {
            1 => file
                .class_names
                .iter()
                .map(|c| (record.truth_rle_row_refs[0].clone(), c.clone()))
                .collect(),
            n if n == classes => record
                .truth_rle_row_refs
                .iter()
                .cloned()
                .zip(file.class_names.iter().cloned())
                .collect(),
            n => {
                return Err(Error::invalid(format!(
                    "manifest: slice {id} has {n} truth_rle_row_refs, expected 1 or {classes}"
                )))
            }
        };
        slices.push(SliceEntry {
            id,
            dims,
            truth_rows,
            include: record.include,
        });
    }

    let mut seen = HashSet::new();
    let mut models = Vec::with_capacity(file.models.len());
    for record in file.models {
        if record.model_id.is_empty() {
            return Err(Error::invalid("manifest: model_id must be non-empty"));
        }
        if !seen.insert(record.model_id.clone()) {
            return Err(Error::DuplicateModel(record.model_id));
        }
        models.push(ModelEntry {
            model_id: record.model_id,
            name: record.name,
            pred_dir: resolve(root, &record.pred_dir),
        });
    }

    let manifest = Manifest {
        class_names: file.class_names,
        truth_csv: resolve(root, &file.truth_csv),
        slices,
        models,
    };
    if !manifest.truth_csv.is_file() {
        return Err(Error::io(
            &manifest.truth_csv,
            std::io::Error::new(std::io::ErrorKind::NotFound, "ground-truth csv not found"),
        ));
    }

    // Header checks run in parallel; the first failure in (model, slice)
    // order is reported so the message does not depend on scheduling.
    let pairs: Vec<(usize, usize)> = (0..manifest.n_models())
        .flat_map(|m| (0..manifest.n_slices()).map(move |s| (m, s)))
        .collect();
    let checks: Vec<Result<()>> = pairs
        .par_iter()
        .map(|&(m, s)| check_prediction(&manifest, m, s))
        .collect();
    checks.into_iter().collect::<Result<()>>()?;
    Ok(manifest)
}

fn check_prediction(manifest: &Manifest, model: usize, slice: usize) -> Result<()> {
    let path = manifest.prediction_path(model, slice);
    let entry = &manifest.slices[slice];
    let model_id = &manifest.models[model].model_id;
    if !path.is_file() {
        return Err(Error::MissingPrediction {
            model: model_id.clone(),
            slice: entry.id.to_string(),
            path,
        });
    }
    let dims = read_dims(&path)?;
    entry.dims.ensure_same(&dims, || {
        format!(
            "model {model_id:?} slice {:?} ({})",
            entry.id.as_str(),
            path.display()
        )
    })
}

pub fn write_manifest(path: impl AsRef<Path>, file: &ManifestFile) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(file).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
