//! Soft plurality voting: member probability maps are averaged pixel-wise
//! and class-wise, then thresholded.

use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::{
    encode_bits, write_probability_map, write_rle_csv, Dataset, ProbabilityMap, RleRow,
};
use crate::metrics::{dice_iou, ordered_mean, threshold, Threshold};
use crate::selection::EnsembleSelection;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleScore {
    pub dice: f64,
    pub iou: f64,
}

fn summation_order(dataset: &Dataset, members: &[usize]) -> Result<Vec<usize>> {
    if members.is_empty() {
        return Err(Error::invalid("cannot fuse an empty ensemble"));
    }
    let mut order = members.to_vec();
    order.sort_unstable();
    order.dedup();
    if order.len() != members.len() {
        return Err(Error::invalid("ensemble members must be distinct"));
    }
    if let Some(&m) = order.iter().find(|&&m| m >= dataset.n_models()) {
        return Err(Error::invalid(format!(
            "member {m} out of range for {} models",
            dataset.n_models()
        )));
    }
    Ok(order)
}

/// Mean of the members' maps for one slice. Members are summed in ascending
/// index order in `f64` and divided once, so any permutation of `members`
/// gives the same bits.
pub fn fuse(dataset: &Dataset, members: &[usize], slice: usize) -> Result<ProbabilityMap> {
    let order = summation_order(dataset, members)?;
    fuse_ordered(dataset, &order, slice)
}

fn fuse_ordered(dataset: &Dataset, order: &[usize], slice: usize) -> Result<ProbabilityMap> {
    let dims = dataset.slice_dims(slice);
    let mut acc = vec![0.0f64; dims.len()];
    for &m in order {
        let map = dataset.prediction(m, slice);
        dims.ensure_same(&map.dims(), || format!("member {m} slice {slice}"))?;
        for (a, &v) in acc.iter_mut().zip(map.values()) {
            *a += v as f64;
        }
    }
    let count = order.len() as f64;
    let values = acc.into_iter().map(|a| (a / count) as f32).collect();
    ProbabilityMap::new(dims, values)
}

/// Mean Dice and IoU of the thresholded fused output over all slices.
pub fn evaluate_members(
    dataset: &Dataset,
    members: &[usize],
    t: Threshold,
) -> Result<EnsembleScore> {
    let order = summation_order(dataset, members)?;
    let per_slice = (0..dataset.n_slices())
        .into_par_iter()
        .map(|s| {
            let fused = fuse_ordered(dataset, &order, s)?;
            dice_iou(&threshold(&fused, t), dataset.truth(s))
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let dice: Vec<f64> = per_slice.iter().map(|v| v.0).collect();
    let iou: Vec<f64> = per_slice.iter().map(|v| v.1).collect();
    Ok(EnsembleScore {
        dice: ordered_mean(&dice),
        iou: ordered_mean(&iou),
    })
}

pub fn evaluate_ensemble(
    dataset: &Dataset,
    selection: &EnsembleSelection,
    t: Threshold,
) -> Result<EnsembleScore> {
    selection.validate(dataset.n_models())?;
    evaluate_members(dataset, &selection.members, t)
}

/// Writes `fused.csv` (thresholded masks as RLE rows) into `out_dir`, and
/// with `write_maps` also `<slice>.dipe` fused probability maps.
pub fn export_fused(
    dataset: &Dataset,
    members: &[usize],
    t: Threshold,
    out_dir: &Path,
    write_maps: bool,
) -> Result<()> {
    let order = summation_order(dataset, members)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let fused = (0..dataset.n_slices())
        .into_par_iter()
        .map(|s| fuse_ordered(dataset, &order, s))
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for (s, map) in fused.iter().enumerate() {
        let id = dataset.slice_ids()[s].to_string();
        let mask = threshold(map, t);
        for (c, class) in dataset.class_names().iter().enumerate() {
            rows.push(RleRow {
                id: id.clone(),
                class: class.clone(),
                segmentation: encode_bits(mask.class_bits(c)),
            });
        }
        if write_maps {
            write_probability_map(map, out_dir.join(format!("{id}.dipe")))?;
        }
    }
    write_rle_csv(out_dir.join("fused.csv"), &rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::{Dims, MaskSet};

    fn dataset(values: &[&[f32]]) -> Dataset {
        let dims = Dims::new(1, 1, values[0].len()).unwrap();
        let truth = MaskSet::from_bits(dims, vec![1, 0, 1, 0][..dims.len()].to_vec()).unwrap();
        let predictions = values
            .iter()
            .map(|v| vec![ProbabilityMap::new(dims, v.to_vec()).unwrap()])
            .collect();
        Dataset::from_parts(vec![truth], predictions).unwrap()
    }

    #[test]
    fn single_member_is_identity() {
        let ds = dataset(&[&[0.1, 0.7, 0.33, 1.0]]);
        assert_eq!(&fuse(&ds, &[0], 0).unwrap(), ds.prediction(0, 0));
    }

    #[test]
    fn two_member_mean() {
        let ds = dataset(&[&[0.2, 0.0, 1.0, 0.5], &[0.8, 0.0, 1.0, 0.25]]);
        let fused = fuse(&ds, &[0, 1], 0).unwrap();
        assert_eq!(fused.values(), &[0.5, 0.0, 1.0, 0.375]);
    }

    #[test]
    fn identical_members_idempotent() {
        let v: &[f32] = &[0.1, 0.7, 0.33, 0.9];
        let ds = dataset(&[v, v, v]);
        assert_eq!(fuse(&ds, &[0, 1, 2], 0).unwrap().values(), v);
        assert_eq!(
            evaluate_members(&ds, &[0, 1, 2], Threshold::DEFAULT).unwrap(),
            evaluate_members(&ds, &[1], Threshold::DEFAULT).unwrap()
        );
    }

    #[test]
    fn permutation_invariant_bits() {
        let ds = dataset(&[
            &[0.1, 0.7, 0.3, 0.9],
            &[0.2, 0.6, 0.123, 0.01],
            &[0.77, 0.5, 0.3, 0.3],
        ]);
        let a = fuse(&ds, &[0, 1, 2], 0).unwrap();
        let b = fuse(&ds, &[2, 0, 1], 0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn perfect_member_scores_one() {
        let ds = dataset(&[&[0.9, 0.1, 0.8, 0.2]]);
        let score = evaluate_members(&ds, &[0], Threshold::DEFAULT).unwrap();
        assert_eq!(
            score,
            EnsembleScore {
                dice: 1.0,
                iou: 1.0
            }
        );
    }

    #[test]
    fn rejects_bad_members() {
        let ds = dataset(&[&[0.1, 0.7, 0.33, 1.0]]);
        assert!(fuse(&ds, &[], 0).is_err());
        assert!(fuse(&ds, &[0, 0], 0).is_err());
        assert!(fuse(&ds, &[3], 0).is_err());
    }

    #[test]
    fn export_writes_rle_and_maps() {
        let ds = dataset(&[&[0.9, 0.1, 0.8, 0.2], &[0.9, 0.1, 0.1, 0.2]]);
        let dir = tempfile::tempdir().unwrap();
        export_fused(&ds, &[0, 1], Threshold::DEFAULT, dir.path(), true).unwrap();
        let text = std::fs::read_to_string(dir.path().join("fused.csv")).unwrap();
        assert_eq!(text, "id,class,segmentation\ns0,class0,1 1\n");
        let map = crate::io::read_probability_map(dir.path().join("s0.dipe")).unwrap();
        assert_eq!(map, fuse(&ds, &[0, 1], 0).unwrap());
    }
}
