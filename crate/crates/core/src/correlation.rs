//! Pairwise model agreement: the mean Dice between two models' thresholded
//! outputs over the validation slices, arranged as a symmetric matrix.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::Dataset;
use crate::metrics::{dice, ordered_mean, Threshold, ThresholdedPool};

/// Symmetric matrix of mean pairwise Dice with a unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    model_ids: Vec<String>,
    values: Vec<f64>,
}

impl CorrelationMatrix {
    /// Checks symmetry and the unit diagonal exactly, and the `[0, 1]` range.
    pub fn new(model_ids: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = model_ids.len();
        if n == 0 {
            return Err(Error::invalid(
                "correlation matrix needs at least one model",
            ));
        }
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(Error::invalid(format!(
                "correlation matrix must be {n}x{n} to match its model ids"
            )));
        }
        for (i, row) in rows.iter().enumerate() {
            if row[i] != 1.0 {
                return Err(Error::invalid(format!(
                    "correlation diagonal [{i}][{i}] is {}, expected 1",
                    row[i]
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::invalid(format!(
                        "correlation [{i}][{j}] = {v} is outside [0, 1]"
                    )));
                }
                if v.to_bits() != rows[j][i].to_bits() {
                    return Err(Error::invalid(format!(
                        "correlation matrix is not symmetric at [{i}][{j}]"
                    )));
                }
            }
        }
        Ok(CorrelationMatrix {
            model_ids,
            values: rows.into_iter().flatten().collect(),
        })
    }

    pub fn n(&self) -> usize {
        self.model_ids.len()
    }

    pub fn model_ids(&self) -> &[String] {
        &self.model_ids
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.n();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n()).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(1.0, f64::min)
    }

    /// Header of model ids, then one row per model. Values use the shortest
    /// decimal that parses back to the same `f64`.
    pub fn to_csv(&self) -> String {
        let mut out = self.model_ids.join(",");
        out.push('\n');
        for i in 0..self.n() {
            let row: Vec<String> = self.row(i).iter().map(f64::to_string).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::invalid("correlation csv is empty"))?;
        let model_ids: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
        let mut rows = Vec::with_capacity(model_ids.len());
        for (r, line) in lines.enumerate() {
            let row = line
                .split(',')
                .enumerate()
                .map(|(c, cell)| {
                    cell.trim().parse::<f64>().map_err(|_| {
                        Error::invalid(format!(
                            "correlation csv row {} column {}: {cell:?} is not a number",
                            r + 1,
                            c + 1
                        ))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        CorrelationMatrix::new(model_ids, rows)
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        CorrelationMatrix::from_csv(&text).map_err(|e| Error::Csv {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    /// Binary greyscale pixmap, one pixel per cell, brightness linear in the
    /// value over `[min, 1]`. A constant matrix renders fully white.
    pub fn to_pgm(&self) -> Vec<u8> {
        let n = self.n();
        let lo = self.min();
        let mut out = format!("P5\n{n} {n}\n255\n").into_bytes();
        for &v in &self.values {
            let level = if lo >= 1.0 {
                255.0
            } else {
                (255.0 * (v - lo) / (1.0 - lo)).round()
            };
            out.push(level.clamp(0.0, 255.0) as u8);
        }
        out
    }
}

/// Mean Dice between models `i` and `j` over all slices; 1 when `i == j`.
pub fn pairwise_dice(pool: &ThresholdedPool, i: usize, j: usize) -> Result<f64> {
    if i == j {
        return Ok(1.0);
    }
    let a = pool.model(i);
    let b = pool.model(j);
    let per_slice = a
        .par_iter()
        .zip(b.par_iter())
        .map(|(x, y)| dice(x, y))
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
    Ok(ordered_mean(&per_slice))
}

/// Full matrix; each unordered pair is computed once and mirrored.
pub fn correlation_matrix(dataset: &Dataset, t: Threshold) -> Result<CorrelationMatrix> {
    correlation_from_pool(
        dataset.model_ids().to_vec(),
        &ThresholdedPool::new(dataset, t),
    )
}

pub fn correlation_from_pool(
    model_ids: Vec<String>,
    pool: &ThresholdedPool,
) -> Result<CorrelationMatrix> {
    let n = pool.n_models();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let values = pairs
        .par_iter()
        .map(|&(i, j)| pairwise_dice(pool, i, j))
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
    let mut rows = vec![vec![1.0; n]; n];
    for (&(i, j), v) in pairs.iter().zip(values) {
        rows[i][j] = v;
        rows[j][i] = v;
    }
    CorrelationMatrix::new(model_ids, rows)
}

/// Writes `path` (CSV) and a sibling `.pgm` heatmap; returns the pgm path.
pub fn export_heatmap(c: &CorrelationMatrix, path: impl AsRef<Path>) -> Result<PathBuf> {
    let csv_path = path.as_ref();
    let pgm_path = csv_path.with_extension("pgm");
    std::fs::write(csv_path, c.to_csv()).map_err(|e| Error::io(csv_path, e))?;
    std::fs::write(&pgm_path, c.to_pgm()).map_err(|e| Error::io(&pgm_path, e))?;
    Ok(pgm_path)
}

/// Plain-text rendering for terminals.
pub fn render_matrix(c: &CorrelationMatrix) -> String {
    let width = c
        .model_ids()
        .iter()
        .map(String::len)
        .max()
        .unwrap_or(0)
        .max(6);
    let mut out = format!("{:width$}", "");
    for id in c.model_ids() {
        write!(out, " {id:>width$}").unwrap();
    }
    out.push('\n');
    for (i, id) in c.model_ids().iter().enumerate() {
        write!(out, "{id:width$}").unwrap();
        for v in c.row(i) {
            write!(out, " {v:>width$.4}").unwrap();
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("m{i}")).collect()
    }

    #[test]
    fn identity_matrix_csv_and_pgm() {
        let c = CorrelationMatrix::new(ids(2), vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(c.to_csv(), "m0,m1\n1,0\n0,1\n");
        let pgm = c.to_pgm();
        assert_eq!(&pgm[..11], b"P5\n2 2\n255\n");
        assert_eq!(&pgm[11..], &[255, 0, 0, 255]);
    }

    #[test]
    fn all_ones_pgm_is_uniform() {
        let c = CorrelationMatrix::new(ids(3), vec![vec![1.0; 3]; 3]).unwrap();
        let pgm = c.to_pgm();
        assert!(pgm[pgm.len() - 9..].iter().all(|&b| b == 255));
    }

    #[test]
    fn pgm_is_linear_over_min_to_one() {
        let c = CorrelationMatrix::new(ids(2), vec![vec![1.0, 0.6], vec![0.6, 1.0]]).unwrap();
        assert_eq!(&c.to_pgm()[11..], &[255, 0, 0, 255]);
        let c = CorrelationMatrix::new(
            ids(3),
            vec![
                vec![1.0, 0.5, 0.75],
                vec![0.5, 1.0, 0.5],
                vec![0.75, 0.5, 1.0],
            ],
        )
        .unwrap();
        assert_eq!(c.to_pgm()[11 + 2], 128);
    }

    #[test]
    fn rejects_invariant_violations() {
        assert!(CorrelationMatrix::new(ids(2), vec![vec![1.0, 0.3], vec![0.4, 1.0]]).is_err());
        assert!(CorrelationMatrix::new(ids(2), vec![vec![0.9, 0.3], vec![0.3, 1.0]]).is_err());
        assert!(CorrelationMatrix::new(ids(2), vec![vec![1.0, 1.3], vec![1.3, 1.0]]).is_err());
        assert!(CorrelationMatrix::new(ids(2), vec![vec![1.0]]).is_err());
        assert!(CorrelationMatrix::new(vec![], vec![]).is_err());
    }

    #[test]
    fn csv_round_trip_exact() {
        let v = 0.1 + 0.2;
        let c = CorrelationMatrix::new(ids(2), vec![vec![1.0, v], vec![v, 1.0]]).unwrap();
        let back = CorrelationMatrix::from_csv(&c.to_csv()).unwrap();
        assert_eq!(back, c);
        assert!(CorrelationMatrix::from_csv("a,b\n1,x\nx,1\n").is_err());
    }
}
