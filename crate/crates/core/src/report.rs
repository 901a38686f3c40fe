//! Budget sweeps: every strategy at every k, fused and evaluated, plus the
//! all-models reference row.

use std::fmt::Write as _;
use std::ops::RangeInclusive;
use std::str::FromStr;

use rayon::prelude::*;

use crate::correlation::{correlation_from_pool, CorrelationMatrix};
use crate::error::{Error, Result};
use crate::fusion::evaluate_members;
use crate::io::Dataset;
use crate::metrics::{score_pool, ModelScores, Threshold, ThresholdedPool};
use crate::num::format_sig17;
use crate::selection::{select, select_all, Strategy};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub k: usize,
    pub strategy: Strategy,
    /// Member indices in order of addition.
    pub members: Vec<usize>,
    pub dice: f64,
    pub iou: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub model_ids: Vec<String>,
    pub scores: ModelScores,
    pub correlation: CorrelationMatrix,
    /// Ordered by k, then by strategy in request order; the all-models row
    /// comes last. Empty when the k range is empty.
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn row(&self, strategy: Strategy, k: usize) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.strategy == strategy && r.k == k)
    }

    pub fn reference(&self) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.strategy == Strategy::All)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Table,
    Csv,
    /// Wide CSV: one row per k, one dice column per strategy, plus the
    /// all-models value repeated on every row (a horizontal reference line).
    Series,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table" => Ok(Format::Table),
            "csv" => Ok(Format::Csv),
            "series" => Ok(Format::Series),
            _ => Err(Error::invalid(format!(
                "unknown format {s:?} (expected table, csv or series)"
            ))),
        }
    }
}

/// Parses `"2..9"` / `"2..=9"` (inclusive), `"3"`, `"2.."` (through n) or
/// `"..5"` (from 1).
pub fn parse_k_range(text: &str, n: usize) -> Result<RangeInclusive<usize>> {
    let bad = || Error::invalid(format!("invalid k range {text:?}"));
    let num = |s: &str, default: usize| -> Result<usize> {
        let s = s.trim();
        if s.is_empty() {
            Ok(default)
        } else {
            s.parse().map_err(|_| bad())
        }
    };
    match text.split_once("..") {
        Some((lo, hi)) => {
            let hi = hi.strip_prefix('=').unwrap_or(hi);
            Ok(num(lo, 1)?..=num(hi, n)?)
        }
        None => {
            let k = num(text, 0)?;
            if text.trim().is_empty() {
                return Err(bad());
            }
            Ok(k..=k)
        }
    }
}

/// Runs every strategy for every k in `k_range`. Scores and the correlation
/// matrix are computed once and shared by all selections.
pub fn sweep(
    dataset: &Dataset,
    strategies: &[Strategy],
    k_range: RangeInclusive<usize>,
    t: Threshold,
) -> Result<SweepReport> {
    let n = dataset.n_models();
    if !k_range.is_empty() && (*k_range.start() == 0 || *k_range.end() > n) {
        return Err(Error::invalid(format!(
            "k range {}..{} is outside 1..{n}",
            k_range.start(),
            k_range.end()
        )));
    }
    let pool = ThresholdedPool::new(dataset, t);
    let scores = score_pool(dataset, &pool)?;
    let correlation = correlation_from_pool(dataset.model_ids().to_vec(), &pool)?;
    drop(pool);

    let mut wanted: Vec<Strategy> = Vec::new();
    for &s in strategies {
        if s != Strategy::All && !wanted.contains(&s) {
            wanted.push(s);
        }
    }

    let mut selections = Vec::new();
    if !k_range.is_empty() {
        for k in k_range {
            for &s in &wanted {
                selections.push(select(s, &correlation, &scores.dice, k, Some(dataset), t)?);
            }
        }
        selections.push(select_all(n)?);
    }

    let evaluated = selections
        .par_iter()
        .map(|sel| evaluate_members(dataset, &sel.members, t))
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let rows = selections
        .into_iter()
        .zip(evaluated)
        .map(|(sel, score)| SweepRow {
            k: sel.k,
            strategy: sel.strategy,
            members: sel.members,
            dice: score.dice,
            iou: score.iou,
        })
        .collect();

    Ok(SweepReport {
        model_ids: dataset.model_ids().to_vec(),
        scores,
        correlation,
        rows,
    })
}

pub fn render(report: &SweepReport, format: Format) -> String {
    match format {
        Format::Csv => render_csv(report),
        Format::Table => render_table(report),
        Format::Series => render_series(report),
    }
}

fn render_csv(report: &SweepReport) -> String {
    let mut out = String::from("k,strategy,dice,iou\n");
    for r in &report.rows {
        writeln!(
            out,
            "{},{},{},{}",
            r.k,
            r.strategy,
            format_sig17(r.dice),
            format_sig17(r.iou)
        )
        .unwrap();
    }
    out
}

fn render_table(report: &SweepReport) -> String {
    let mut out = format!(
        "{:>3}  {:<13} {:>7} {:>7}  members\n",
        "k", "strategy", "dice", "iou"
    );
    for r in &report.rows {
        let members: Vec<&str> = r
            .members
            .iter()
            .map(|&m| report.model_ids[m].as_str())
            .collect();
        writeln!(
            out,
            "{:>3}  {:<13} {:>7.4} {:>7.4}  {}",
            r.k,
            r.strategy.as_str(),
            r.dice,
            r.iou,
            members.join(" ")
        )
        .unwrap();
    }
    out
}

fn render_series(report: &SweepReport) -> String {
    let mut strategies: Vec<Strategy> = Vec::new();
    let mut ks: Vec<usize> = Vec::new();
    for r in report.rows.iter().filter(|r| r.strategy != Strategy::All) {
        if !strategies.contains(&r.strategy) {
            strategies.push(r.strategy);
        }
        if !ks.contains(&r.k) {
            ks.push(r.k);
        }
    }
    let mut out = String::from("k");
    for s in &strategies {
        write!(out, ",{s}").unwrap();
    }
    out.push_str(",all\n");
    let all = report
        .reference()
        .map(|r| format_sig17(r.dice))
        .unwrap_or_default();
    for k in ks {
        write!(out, "{k}").unwrap();
        for &s in &strategies {
            let cell = report
                .row(s, k)
                .map(|r| format_sig17(r.dice))
                .unwrap_or_default();
            write!(out, ",{cell}").unwrap();
        }
        writeln!(out, ",{all}").unwrap();
    }
    out
}

/// One parsed line of the sweep CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub k: usize,
    pub strategy: Strategy,
    pub dice: f64,
    pub iou: f64,
}

pub fn parse_csv(text: &str) -> Result<Vec<CsvRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some("k,strategy,dice,iou") => {}
        other => {
            return Err(Error::invalid(format!(
                "sweep csv: unexpected header {other:?}"
            )))
        }
    }
    lines
        .filter(|l| !l.is_empty())
        .enumerate()
        .map(|(i, line)| {
            let bad = || Error::invalid(format!("sweep csv: malformed row {}: {line:?}", i + 1));
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != 4 {
                return Err(bad());
            }
            Ok(CsvRow {
                k: cells[0].parse().map_err(|_| bad())?,
                strategy: cells[1].parse()?,
                dice: cells[2].parse().map_err(|_| bad())?,
                iou: cells[3].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}
