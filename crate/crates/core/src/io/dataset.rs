use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::manifest::Manifest;
use crate::io::rle::{decode_rle, read_rle_csv};
use crate::io::tensor::{Dims, MaskSet, ProbabilityMap, SliceId};
use crate::io::tensor_file::read_probability_map;

/// Ground truth and every model's probability maps for the included
/// slices of a manifest, held in memory. Immutable once built.
#[derive(Debug, Clone)]
pub struct Dataset {
    class_names: Vec<String>,
    slice_ids: Vec<SliceId>,
    model_ids: Vec<String>,
    model_names: Vec<String>,
    truth: Vec<MaskSet>,
    /// `predictions[model][slice]`
    predictions: Vec<Vec<ProbabilityMap>>,
}

impl Dataset {
    /// Loads every included slice of a validated manifest.
    pub fn load(manifest: &Manifest) -> Result<Self> {
        let table = read_rle_csv(&manifest.truth_csv)?;
        let included: Vec<usize> = (0..manifest.n_slices())
            .filter(|&s| manifest.slices[s].include)
            .collect();
        if included.is_empty() {
            return Err(Error::EmptyManifest("included slices"));
        }

        let truth: Vec<MaskSet> = included
            .par_iter()
            .map(|&s| {
                let entry = &manifest.slices[s];
                let dims = entry.dims;
                let mut bits = Vec::with_capacity(dims.len());
                for key in &entry.truth_rows {
                    // an absent row is an empty mask
                    let encoding = table.get(key).map(String::as_str).unwrap_or("");
                    let plane = decode_rle(encoding, dims.height, dims.width).map_err(|e| {
                        Error::invalid(format!(
                            "truth row ({}, {}) for slice {}: {e}",
                            key.0, key.1, entry.id
                        ))
                    })?;
                    bits.extend_from_slice(plane.bits());
                }
                MaskSet::from_bits(dims, bits)
            })
            .collect::<Vec<_>>()
            .into_iter()
            .collect::<Result<_>>()?;

        let predictions = (0..manifest.n_models())
            .map(|m| {
                included
                    .par_iter()
                    .map(|&s| {
                        let path = manifest.prediction_path(m, s);
                        let map = read_probability_map(&path)?;
                        manifest.slices[s].dims.ensure_same(&map.dims(), || {
                            format!("prediction {}", path.display())
                        })?;
                        Ok(map)
                    })
                    .collect::<Vec<_>>()
                    .into_iter()
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;

        Ok(Dataset {
            class_names: manifest.class_names.clone(),
            slice_ids: included
                .iter()
                .map(|&s| manifest.slices[s].id.clone())
                .collect(),
            model_ids: manifest.models.iter().map(|m| m.model_id.clone()).collect(),
            model_names: manifest.models.iter().map(|m| m.name.clone()).collect(),
            truth,
            predictions,
        })
    }

    /// Builds a dataset from in-memory tensors. Model ids are `m0, m1, ...`
    /// and slice ids `s0, s1, ...`.
    pub fn from_parts(truth: Vec<MaskSet>, predictions: Vec<Vec<ProbabilityMap>>) -> Result<Self> {
        if truth.is_empty() {
            return Err(Error::EmptyManifest("slices"));
        }
        if predictions.is_empty() {
            return Err(Error::EmptyManifest("models"));
        }
        let classes = truth[0].dims().classes;
        for (s, mask) in truth.iter().enumerate() {
            if mask.dims().classes != classes {
                return Err(Error::DimensionMismatch {
                    context: format!("truth slice {s}"),
                    expected: (classes, mask.dims().height, mask.dims().width),
                    found: (mask.dims().classes, mask.dims().height, mask.dims().width),
                });
            }
        }
        for (m, maps) in predictions.iter().enumerate() {
            if maps.len() != truth.len() {
                return Err(Error::invalid(format!(
                    "model {m} has {} predictions for {} slices",
                    maps.len(),
                    truth.len()
                )));
            }
            for (s, map) in maps.iter().enumerate() {
                truth[s]
                    .dims()
                    .ensure_same(&map.dims(), || format!("model m{m} slice s{s}"))?;
            }
        }
        Ok(Dataset {
            class_names: (0..classes).map(|c| format!("class{c}")).collect(),
            slice_ids: (0..truth.len())
                .map(|s| SliceId::new(format!("s{s}")).unwrap())
                .collect(),
            model_ids: (0..predictions.len()).map(|m| format!("m{m}")).collect(),
            model_names: (0..predictions.len()).map(|m| format!("m{m}")).collect(),
            truth,
            predictions,
        })
    }

    pub fn n_models(&self) -> usize {
        self.predictions.len()
    }

    pub fn n_slices(&self) -> usize {
        self.truth.len()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn slice_ids(&self) -> &[SliceId] {
        &self.slice_ids
    }

    pub fn model_ids(&self) -> &[String] {
        &self.model_ids
    }

    pub fn model_names(&self) -> &[String] {
        &self.model_names
    }

    pub fn model_index(&self, model_id: &str) -> Option<usize> {
        self.model_ids.iter().position(|m| m == model_id)
    }

    pub fn truth(&self, slice: usize) -> &MaskSet {
        &self.truth[slice]
    }

    pub fn prediction(&self, model: usize, slice: usize) -> &ProbabilityMap {
        &self.predictions[model][slice]
    }

    pub fn slice_dims(&self, slice: usize) -> Dims {
        self.truth[slice].dims()
    }

    /// Replaces one model's predictions, keeping ids. Used to build
    /// counterfactual pools in tests and tools.
    pub fn with_model_predictions(&self, model: usize, maps: Vec<ProbabilityMap>) -> Result<Self> {
        let mut predictions = self.predictions.clone();
        if maps.len() != self.n_slices() {
            return Err(Error::invalid(
                "prediction count does not match slice count",
            ));
        }
        for (s, map) in maps.iter().enumerate() {
            self.slice_dims(s)
                .ensure_same(&map.dims(), || format!("replacement slice {s}"))?;
        }
        predictions[model] = maps;
        Ok(Dataset {
            predictions,
            ..self.clone()
        })
    }

    /// Replaces the ground truth, keeping predictions.
    pub fn with_truth(&self, truth: Vec<MaskSet>) -> Result<Self> {
        if truth.len() != self.n_slices() {
            return Err(Error::invalid("truth count does not match slice count"));
        }
        for (s, mask) in truth.iter().enumerate() {
            self.slice_dims(s)
                .ensure_same(&mask.dims(), || format!("replacement truth slice {s}"))?;
        }
        Ok(Dataset {
            truth,
            ..self.clone()
        })
    }
}
