//! Deterministic synthetic validation sets and model zoos.
//!
//! Ground truth per (slice, class) is a union of random ellipses (or empty).
//! Each correlation group owns a perturbation field of elliptical blobs
//! centred on truth boundaries; every model of the group flips the pixels
//! under those blobs. Each model additionally flips pixels within
//! `noise_band` pixels of the truth boundary with probability `noise_rate`.
//! The thresholded prediction is exactly `truth XOR (group ∪ own flips)`, so
//! raising a model's noise rate only ever adds errors.
//!
//! Probabilities are `0.5 ± margin`, where the margin grows with the
//! fraction of the 3×3 neighbourhood sharing the pixel's label; values stay
//! within `[0.02, 0.98]` and never equal 0.5.
//!
//! Randomness comes from ChaCha8 keyed with `seed` (via
//! `SeedableRng::seed_from_u64`) and a 64-bit stream id per purpose:
//!
//! | stream                                  | draws                    |
//! |-----------------------------------------|--------------------------|
//! | `1 << 56 | slice`                       | truth shapes             |
//! | `2 << 56 | group << 28 | slice`         | group blobs              |
//! | `3 << 56 | noise_stream << 28 | slice`  | per-pixel flip uniforms  |
//! | `4 << 56 | noise_stream << 28 | slice`  | per-pixel margin jitter  |
//!
//! A uniform in `[0, 1)` is `(next_u64() >> 11) * 2^-53`.

use std::path::Path;

use rand_chacha::rand_core::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{
    encode_bits, load_manifest, prediction_path, write_manifest, write_probability_map,
    write_rle_csv, Dims, Manifest, ManifestFile, ModelRecord, ProbabilityMap, RleRow, SliceId,
    SliceRecord, DEFAULT_TRUTH_CSV,
};

const STREAM_TRUTH: u64 = 1;
const STREAM_GROUP: u64 = 2;
const STREAM_NOISE: u64 = 3;
const STREAM_MARGIN: u64 = 4;

fn default_empty_rate() -> f64 {
    0.2
}

fn default_group_blobs() -> u32 {
    2
}

fn default_group_radius() -> f64 {
    0.08
}

fn default_noise_band() -> u32 {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthModel {
    /// Probability of flipping each pixel in the boundary band, in `[0, 0.5)`.
    pub noise_rate: f64,
    /// Models with the same tag share the group perturbation.
    pub correlation_group: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Random stream for the model's own noise; defaults to the model's
    /// position. Two models with equal stream, rate and group are identical.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_stream: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub seed: u64,
    pub slices: usize,
    pub dims: Dims,
    pub models: Vec<SynthModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_names: Option<Vec<String>>,
    /// Chance that a class is absent from a slice.
    #[serde(default = "default_empty_rate")]
    pub empty_rate: f64,
    /// Maximum perturbation blobs per (group, slice, non-empty class).
    #[serde(default = "default_group_blobs")]
    pub group_blobs: u32,
    /// Maximum blob radius as a fraction of `min(height, width)`.
    #[serde(default = "default_group_radius")]
    pub group_radius: f64,
    /// Width in pixels of the boundary band where per-model noise applies.
    #[serde(default = "default_noise_band")]
    pub noise_band: u32,
}

impl SynthSpec {
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let spec: SynthSpec = serde_json::from_str(&text).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.dims.validate()?;
        if self.slices == 0 {
            return Err(Error::invalid("synth: at least one slice is required"));
        }
        if self.models.is_empty() {
            return Err(Error::invalid("synth: at least one model is required"));
        }
        for (i, m) in self.models.iter().enumerate() {
            if !(0.0..0.5).contains(&m.noise_rate) {
                return Err(Error::invalid(format!(
                    "synth: model {i} noise_rate {} must lie in [0, 0.5)",
                    m.noise_rate
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.empty_rate) {
            return Err(Error::invalid("synth: empty_rate must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.group_radius) {
            return Err(Error::invalid("synth: group_radius must lie in [0, 1]"));
        }
        if let Some(names) = &self.class_names {
            if names.len() != self.dims.classes {
                return Err(Error::invalid(
                    "synth: class_names length must equal dims.classes",
                ));
            }
        }
        let ids = self.model_ids();
        let mut sorted = ids.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != ids.len() {
            return Err(Error::invalid("synth: model ids must be unique"));
        }
        Ok(())
    }

    pub fn model_ids(&self) -> Vec<String> {
        self.models
            .iter()
            .enumerate()
            .map(|(i, m)| m.model_id.clone().unwrap_or_else(|| format!("m{i}")))
            .collect()
    }

    fn class_names(&self) -> Vec<String> {
        if let Some(names) = &self.class_names {
            return names.clone();
        }
        if self.dims.classes == 3 {
            return ["large_bowel", "small_bowel", "stomach"]
                .map(String::from)
                .to_vec();
        }
        (0..self.dims.classes)
            .map(|c| format!("class{c}"))
            .collect()
    }

    fn slice_id(&self, s: usize) -> String {
        format!("slice_{s:04}")
    }
}

fn stream(seed: u64, kind: u64, a: u64, b: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((kind << 56) | ((a & 0x0fff_ffff) << 28) | (b & 0x0fff_ffff));
    rng
}

fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn uniform_in(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * uniform(rng)
}

fn below(rng: &mut ChaCha8Rng, n: usize) -> usize {
    ((uniform(rng) * n as f64) as usize).min(n - 1)
}

fn paint_ellipse(plane: &mut [u8], h: usize, w: usize, cy: f64, cx: f64, ry: f64, rx: f64) {
    for y in 0..h {
        let dy = (y as f64 + 0.5 - cy) / ry;
        if dy.abs() > 1.0 {
            continue;
        }
        for x in 0..w {
            let dx = (x as f64 + 0.5 - cx) / rx;
            if dx * dx + dy * dy <= 1.0 {
                plane[y * w + x] = 1;
            }
        }
    }
}

/// Pixels whose 4-neighbourhood contains the other label.
fn boundary(plane: &[u8], h: usize, w: usize) -> Vec<usize> {
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let v = plane[y * w + x];
            let differs = (y > 0 && plane[(y - 1) * w + x] != v)
                || (y + 1 < h && plane[(y + 1) * w + x] != v)
                || (x > 0 && plane[y * w + x - 1] != v)
                || (x + 1 < w && plane[y * w + x + 1] != v);
            if differs && v == 1 {
                out.push(y * w + x);
            }
        }
    }
    out
}

/// Pixels within Chebyshev distance `band` of a boundary pixel.
fn band_mask(edges: &[usize], h: usize, w: usize, band: usize) -> Vec<u8> {
    let mut mask = vec![0u8; h * w];
    for &p in edges {
        let (y, x) = (p / w, p % w);
        for yy in y.saturating_sub(band)..=(y + band).min(h - 1) {
            for xx in x.saturating_sub(band)..=(x + band).min(w - 1) {
                mask[yy * w + xx] = 1;
            }
        }
    }
    mask
}

fn truth_slice(spec: &SynthSpec, s: usize) -> Vec<u8> {
    let Dims {
        classes,
        height: h,
        width: w,
    } = spec.dims;
    let mut rng = stream(spec.seed, STREAM_TRUTH, 0, s as u64);
    let short = h.min(w) as f64;
    let mut bits = vec![0u8; classes * h * w];
    for c in 0..classes {
        let plane = &mut bits[c * h * w..(c + 1) * h * w];
        let empty = uniform(&mut rng) < spec.empty_rate;
        let blobs = 1 + below(&mut rng, 2);
        for _ in 0..blobs {
            let cy = uniform_in(&mut rng, 0.2, 0.8) * h as f64;
            let cx = uniform_in(&mut rng, 0.2, 0.8) * w as f64;
            let ry = (uniform_in(&mut rng, 0.08, 0.22) * short).max(1.0);
            let rx = (uniform_in(&mut rng, 0.08, 0.22) * short).max(1.0);
            if !empty {
                paint_ellipse(plane, h, w, cy, cx, ry, rx);
            }
        }
    }
    bits
}

fn group_field(spec: &SynthSpec, group: u32, s: usize, truth: &[u8]) -> Vec<u8> {
    let Dims {
        classes,
        height: h,
        width: w,
    } = spec.dims;
    let mut rng = stream(spec.seed, STREAM_GROUP, group as u64, s as u64);
    let short = h.min(w) as f64;
    let mut field = vec![0u8; classes * h * w];
    for c in 0..classes {
        let plane = &truth[c * h * w..(c + 1) * h * w];
        let edges = boundary(plane, h, w);
        let out = &mut field[c * h * w..(c + 1) * h * w];
        let blobs = if spec.group_blobs == 0 {
            0
        } else {
            below(&mut rng, spec.group_blobs as usize + 1)
        };
        for _ in 0..blobs {
            let pick = uniform(&mut rng);
            let ry = (uniform_in(&mut rng, 0.4, 1.0) * spec.group_radius * short).max(1.0);
            let rx = (uniform_in(&mut rng, 0.4, 1.0) * spec.group_radius * short).max(1.0);
            if edges.is_empty() {
                continue;
            }
            let p = edges[((pick * edges.len() as f64) as usize).min(edges.len() - 1)];
            let (cy, cx) = ((p / w) as f64 + 0.5, (p % w) as f64 + 0.5);
            paint_ellipse(out, h, w, cy, cx, ry, rx);
        }
    }
    field
}

fn model_slice(
    spec: &SynthSpec,
    model: usize,
    s: usize,
    truth: &[u8],
    bands: &[u8],
    group: &[u8],
) -> Result<ProbabilityMap> {
    let dims = spec.dims;
    let (h, w) = (dims.height, dims.width);
    let cfg = &spec.models[model];
    let stream_id = cfg.noise_stream.unwrap_or(model as u64);
    let mut noise = stream(spec.seed, STREAM_NOISE, stream_id, s as u64);
    let mut jitter = stream(spec.seed, STREAM_MARGIN, stream_id, s as u64);

    let mut labels = Vec::with_capacity(dims.len());
    for p in 0..dims.len() {
        // one draw per pixel keeps the flip sets nested across noise rates
        let u = uniform(&mut noise);
        let flip = group[p] == 1 || (bands[p] == 1 && u < cfg.noise_rate);
        labels.push(truth[p] ^ flip as u8);
    }

    let mut values = Vec::with_capacity(dims.len());
    for c in 0..dims.classes {
        let plane = &labels[c * h * w..(c + 1) * h * w];
        for y in 0..h {
            for x in 0..w {
                let v = plane[y * w + x];
                let mut same = 0u32;
                let mut total = 0u32;
                for yy in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                    for xx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                        total += 1;
                        same += (plane[yy * w + xx] == v) as u32;
                    }
                }
                let agree = same as f64 / total as f64;
                let margin = 0.02 + 0.44 * agree + 0.02 * uniform(&mut jitter);
                let p = if v == 1 { 0.5 + margin } else { 0.5 - margin };
                values.push(p as f32);
            }
        }
    }
    ProbabilityMap::new(dims, values)
}

/// Writes `manifest.json`, `truth.csv` and `preds/<model_id>/<slice>.dipe`
/// under `out_dir` and returns the loaded manifest.
pub fn generate(spec: &SynthSpec, out_dir: impl AsRef<Path>) -> Result<Manifest> {
    spec.validate()?;
    let out_dir = out_dir.as_ref();
    let dims = spec.dims;
    let (h, w) = (dims.height, dims.width);
    let class_names = spec.class_names();
    let model_ids = spec.model_ids();
    let mkdir = |p: &Path| std::fs::create_dir_all(p).map_err(|e| Error::io(p, e));
    mkdir(out_dir)?;
    let pred_dirs: Vec<String> = model_ids.iter().map(|id| format!("preds/{id}")).collect();
    for d in &pred_dirs {
        mkdir(&out_dir.join(d))?;
    }

    let mut groups: Vec<u32> = spec.models.iter().map(|m| m.correlation_group).collect();
    groups.sort_unstable();
    groups.dedup();

    let mut truth_rows = Vec::with_capacity(spec.slices * dims.classes);
    let mut slice_records = Vec::with_capacity(spec.slices);
    for s in 0..spec.slices {
        let slice_id = spec.slice_id(s);
        let truth = truth_slice(spec, s);
        let mut bands = vec![0u8; dims.len()];
        for c in 0..dims.classes {
            let plane = &truth[c * h * w..(c + 1) * h * w];
            let band = band_mask(&boundary(plane, h, w), h, w, spec.noise_band as usize);
            bands[c * h * w..(c + 1) * h * w].copy_from_slice(&band);
            truth_rows.push(RleRow {
                id: slice_id.clone(),
                class: class_names[c].clone(),
                segmentation: encode_bits(plane),
            });
        }
        let fields: Vec<(u32, Vec<u8>)> = groups
            .iter()
            .map(|&g| (g, group_field(spec, g, s, &truth)))
            .collect();
        let sid = SliceId::new(slice_id.clone())?;
        for (m, cfg) in spec.models.iter().enumerate() {
            let field = &fields
                .iter()
                .find(|(g, _)| *g == cfg.correlation_group)
                .expect("group field")
                .1;
            let map = model_slice(spec, m, s, &truth, &bands, field)?;
            write_probability_map(&map, prediction_path(&out_dir.join(&pred_dirs[m]), &sid))?;
        }
        slice_records.push(SliceRecord {
            id: slice_id.clone(),
            height: h,
            width: w,
            truth_rle_row_refs: vec![slice_id],
            include: true,
        });
    }
    write_rle_csv(out_dir.join(DEFAULT_TRUTH_CSV), &truth_rows)?;

    let file = ManifestFile {
        class_names,
        truth_csv: DEFAULT_TRUTH_CSV.to_string(),
        slices: slice_records,
        models: spec
            .models
            .iter()
            .enumerate()
            .map(|(m, cfg)| ModelRecord {
                model_id: model_ids[m].clone(),
                name: cfg.name.clone().unwrap_or_else(|| {
                    format!(
                        "synthetic group {} noise {}",
                        cfg.correlation_group, cfg.noise_rate
                    )
                }),
                pred_dir: pred_dirs[m].clone(),
            })
            .collect(),
    };
    let manifest_path = out_dir.join("manifest.json");
    write_manifest(&manifest_path, &file)?;
    load_manifest(&manifest_path)
}
