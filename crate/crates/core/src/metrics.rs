//! Dice and IoU between mask sets, and per-model validation scores.
//!
//! Per slice, each class contributes `2|A∩B| / (|A|+|B|)` (Dice) or
//! `|A∩B| / |A∪B|` (IoU); a class where both planes are empty counts as 1.
//! Class values are averaged with equal weight, then slices are averaged
//! with equal weight. All sums are `f64` in ascending index order.

use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::io::{Dataset, MaskSet, ProbabilityMap};
use crate::num::{json_f64, json_number};

/// Probability cut-off; a pixel is foreground when `p >= threshold`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Threshold(f64);

impl Threshold {
    pub const DEFAULT: Threshold = Threshold(0.5);

    pub fn new(t: f64) -> Result<Self> {
        if t > 0.0 && t < 1.0 {
            Ok(Threshold(t))
        } else {
            Err(Error::InvalidThreshold(t))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl Default for Threshold {
    fn default() -> Self {
        Threshold::DEFAULT
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

pub fn threshold(map: &ProbabilityMap, t: Threshold) -> MaskSet {
    let bits = map
        .values()
        .iter()
        .map(|&v| (v as f64 >= t.0) as u8)
        .collect();
    MaskSet::from_bits_unchecked(map.dims(), bits)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Overlap {
    both: u64,
    a: u64,
    b: u64,
}

fn overlap(a: &[u8], b: &[u8]) -> Overlap {
    let mut o = Overlap::default();
    for (&x, &y) in a.iter().zip(b) {
        o.a += x as u64;
        o.b += y as u64;
        o.both += (x & y) as u64;
    }
    o
}

fn class_dice(o: Overlap) -> f64 {
    let total = o.a + o.b;
    if total == 0 {
        1.0
    } else {
        2.0 * o.both as f64 / total as f64
    }
}

fn class_iou(o: Overlap) -> f64 {
    let union = o.a + o.b - o.both;
    if union == 0 {
        1.0
    } else {
        o.both as f64 / union as f64
    }
}

/// Dice and IoU of one slice, each the unweighted class mean.
pub fn dice_iou(a: &MaskSet, b: &MaskSet) -> Result<(f64, f64)> {
    a.dims()
        .ensure_same(&b.dims(), || "mask sets".to_string())?;
    let classes = a.dims().classes;
    let mut dice_sum = 0.0;
    let mut iou_sum = 0.0;
    for c in 0..classes {
        let o = overlap(a.class_bits(c), b.class_bits(c));
        dice_sum += class_dice(o);
        iou_sum += class_iou(o);
    }
    Ok((dice_sum / classes as f64, iou_sum / classes as f64))
}

pub fn dice(a: &MaskSet, b: &MaskSet) -> Result<f64> {
    dice_iou(a, b).map(|(d, _)| d)
}

pub fn iou(a: &MaskSet, b: &MaskSet) -> Result<f64> {
    dice_iou(a, b).map(|(_, i)| i)
}

/// Sums in slice order and divides once. The only reduction used for
/// slice means, so results do not depend on how per-slice values were
/// computed.
pub(crate) fn ordered_mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Mean Dice and IoU of a sequence of (prediction, truth) slice pairs.
pub(crate) fn mean_dice_iou<'a, I>(pairs: I) -> Result<(f64, f64)>
where
    I: IndexedParallelIterator<Item = (&'a MaskSet, &'a MaskSet)>,
{
    let per_slice: Vec<(f64, f64)> = pairs
        .map(|(p, t)| dice_iou(p, t))
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<_>>()?;
    let dice: Vec<f64> = per_slice.iter().map(|v| v.0).collect();
    let iou: Vec<f64> = per_slice.iter().map(|v| v.1).collect();
    Ok((ordered_mean(&dice), ordered_mean(&iou)))
}

/// Every model's thresholded predictions, `masks[model][slice]`.
#[derive(Debug, Clone)]
pub struct ThresholdedPool {
    threshold: Threshold,
    masks: Vec<Vec<MaskSet>>,
}

impl ThresholdedPool {
    pub fn new(dataset: &Dataset, t: Threshold) -> Self {
        let masks = (0..dataset.n_models())
            .map(|m| {
                (0..dataset.n_slices())
                    .into_par_iter()
                    .map(|s| threshold(dataset.prediction(m, s), t))
                    .collect()
            })
            .collect();
        ThresholdedPool {
            threshold: t,
            masks,
        }
    }

    pub fn threshold(&self) -> Threshold {
        self.threshold
    }

    pub fn n_models(&self) -> usize {
        self.masks.len()
    }

    pub fn mask(&self, model: usize, slice: usize) -> &MaskSet {
        &self.masks[model][slice]
    }

    pub fn model(&self, model: usize) -> &[MaskSet] {
        &self.masks[model]
    }
}

/// Per-model mean Dice (and IoU) against ground truth, in dataset model order.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelScores {
    pub model_ids: Vec<String>,
    pub dice: Vec<f64>,
    pub iou: Vec<f64>,
}

impl ModelScores {
    /// Scores from plain Dice values (IoU unknown, stored as NaN).
    pub fn from_dice(model_ids: Vec<String>, dice: Vec<f64>) -> Result<Self> {
        if model_ids.len() != dice.len() {
            return Err(Error::invalid("model id and score counts differ"));
        }
        if let Some(d) = dice.iter().find(|d| !(0.0..=1.0).contains(*d)) {
            return Err(Error::invalid(format!("dice score {d} is outside [0, 1]")));
        }
        let iou = vec![f64::NAN; dice.len()];
        Ok(ModelScores {
            model_ids,
            dice,
            iou,
        })
    }

    pub fn len(&self) -> usize {
        self.dice.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dice.is_empty()
    }

    /// `{"model_id": {"dice": ..., "iou": ...}, ...}` with 17 significant digits.
    pub fn to_json(&self) -> String {
        let mut root = Map::new();
        for (m, id) in self.model_ids.iter().enumerate() {
            let mut entry = Map::new();
            entry.insert("dice".into(), json_number(self.dice[m]));
            if !self.iou[m].is_nan() {
                entry.insert("iou".into(), json_number(self.iou[m]));
            }
            root.insert(id.clone(), Value::Object(entry));
        }
        let mut text = serde_json::to_string_pretty(&Value::Object(root)).unwrap();
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let bad = |m: String| Error::invalid(format!("scores json: {m}"));
        let value: Value = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
        let root = value
            .as_object()
            .ok_or_else(|| bad("expected an object keyed by model_id".into()))?;
        let mut scores = ModelScores {
            model_ids: Vec::new(),
            dice: Vec::new(),
            iou: Vec::new(),
        };
        for (id, entry) in root {
            let dice = entry
                .get("dice")
                .and_then(json_f64)
                .ok_or_else(|| bad(format!("model {id:?} has no numeric \"dice\"")))?;
            if !(0.0..=1.0).contains(&dice) {
                return Err(bad(format!("model {id:?} dice {dice} outside [0, 1]")));
            }
            let iou = entry.get("iou").and_then(json_f64).unwrap_or(f64::NAN);
            scores.model_ids.push(id.clone());
            scores.dice.push(dice);
            scores.iou.push(iou);
        }
        if scores.is_empty() {
            return Err(bad("no models".into()));
        }
        Ok(scores)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ModelScores::from_json(&text).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    /// Reorders to match `model_ids`; every id must be present.
    pub fn aligned_to(&self, model_ids: &[String]) -> Result<Self> {
        if model_ids.len() != self.len() {
            return Err(Error::invalid(format!(
                "scores list {} models, expected {}",
                self.len(),
                model_ids.len()
            )));
        }
        let mut out = ModelScores {
            model_ids: model_ids.to_vec(),
            dice: Vec::with_capacity(model_ids.len()),
            iou: Vec::with_capacity(model_ids.len()),
        };
        for id in model_ids {
            let m =
                self.model_ids.iter().position(|x| x == id).ok_or_else(|| {
                    Error::invalid(format!("scores have no entry for model {id:?}"))
                })?;
            out.dice.push(self.dice[m]);
            out.iou.push(self.iou[m]);
        }
        Ok(out)
    }
}

/// Mean Dice/IoU of every model's thresholded predictions against truth.
pub fn score_models(dataset: &Dataset, t: Threshold) -> Result<ModelScores> {
    score_pool(dataset, &ThresholdedPool::new(dataset, t))
}

pub fn score_pool(dataset: &Dataset, pool: &ThresholdedPool) -> Result<ModelScores> {
    let mut dice = Vec::with_capacity(pool.n_models());
    let mut iou = Vec::with_capacity(pool.n_models());
    for m in 0..pool.n_models() {
        let (d, i) = mean_dice_iou(
            (0..dataset.n_slices())
                .into_par_iter()
                .map(|s| (pool.mask(m, s), dataset.truth(s))),
        )?;
        dice.push(d);
        iou.push(i);
    }
    Ok(ModelScores {
        model_ids: dataset.model_ids().to_vec(),
        dice,
        iou,
    })
}
