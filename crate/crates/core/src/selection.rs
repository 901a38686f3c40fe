//! Ensemble construction strategies.
//!
//! The diversity-promoting strategy starts from the model with the best
//! validation Dice and then, one model at a time, adds the remaining model
//! with the lowest average score
//!
//! ```text
//! score(i, E) = mean over j in E of ((1 - d_i) + C[i][j])
//! ```
//!
//! where `d_i` is the model's Dice against ground truth and `C` the pairwise
//! agreement matrix. Candidates are visited in ascending index order and the
//! running best is replaced only on a strictly lower score, or an equal score
//! with a strictly higher `d_i`; remaining ties therefore go to the lowest
//! index. Comparisons are exact.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde_json::{json, Value};

use crate::correlation::CorrelationMatrix;
use crate::error::{Error, Result};
use crate::fusion::evaluate_members;
use crate::io::Dataset;
use crate::metrics::Threshold;
use crate::num::json_number;

/// Largest pool `select_exhaustive` will enumerate.
pub const EXHAUSTIVE_LIMIT: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    Dipe,
    DipeAblated,
    TopK,
    All,
    Exhaustive,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::Dipe,
        Strategy::DipeAblated,
        Strategy::TopK,
        Strategy::All,
        Strategy::Exhaustive,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Dipe => "dipe",
            Strategy::DipeAblated => "dipe_ablated",
            Strategy::TopK => "topk",
            Strategy::All => "all",
            Strategy::Exhaustive => "exhaustive",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "dipe" => Ok(Strategy::Dipe),
            "dipe_ablated" | "ablated" => Ok(Strategy::DipeAblated),
            "topk" | "top_k" | "baseline" => Ok(Strategy::TopK),
            "all" => Ok(Strategy::All),
            "exhaustive" | "oracle" => Ok(Strategy::Exhaustive),
            _ => Err(Error::invalid(format!(
                "unknown strategy {s:?} (expected dipe, dipe-ablated, topk, all or exhaustive)"
            ))),
        }
    }
}

/// Score of adding `candidate` to the current ensemble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionScore {
    pub candidate: usize,
    pub value: f64,
}

/// One greedy step: every candidate considered and the one added.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionStep {
    pub candidates: Vec<SelectionScore>,
    pub chosen: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSelection {
    pub strategy: Strategy,
    pub k: usize,
    /// Model indices in order of addition.
    pub members: Vec<usize>,
    /// Greedy steps after the first member (empty for non-greedy strategies).
    pub trace: Vec<SelectionStep>,
}

impl EnsembleSelection {
    /// Members in ascending index order.
    pub fn sorted_members(&self) -> Vec<usize> {
        let mut m = self.members.clone();
        m.sort_unstable();
        m
    }

    pub fn to_json(&self, model_ids: &[String]) -> String {
        let trace: Vec<Value> = self
            .trace
            .iter()
            .enumerate()
            .map(|(s, step)| {
                let candidates: Vec<Value> = step
                    .candidates
                    .iter()
                    .map(|c| json!({ "model_id": model_ids[c.candidate], "score": json_number(c.value) }))
                    .collect();
                json!({
                    "step": s + 2,
                    "candidates": candidates,
                    "chosen": model_ids[step.chosen],
                })
            })
            .collect();
        let members: Vec<&str> = self
            .members
            .iter()
            .map(|&m| model_ids[m].as_str())
            .collect();
        let value = json!({
            "strategy": self.strategy.as_str(),
            "k": self.k,
            "members": members,
            "trace": trace,
        });
        let mut text = serde_json::to_string_pretty(&value).unwrap();
        text.push('\n');
        text
    }

    /// Parses selection JSON, mapping member ids to indices in `model_ids`.
    pub fn from_json(text: &str, model_ids: &[String]) -> Result<Self> {
        let bad = |m: String| Error::invalid(format!("selection json: {m}"));
        let value: Value = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
        let index_of = |id: &Value| -> Result<usize> {
            let id = id
                .as_str()
                .ok_or_else(|| bad("model ids must be strings".into()))?;
            model_ids
                .iter()
                .position(|m| m == id)
                .ok_or_else(|| bad(format!("unknown model {id:?}")))
        };
        let strategy: Strategy = value["strategy"]
            .as_str()
            .ok_or_else(|| bad("missing \"strategy\"".into()))?
            .parse()?;
        let k = value["k"]
            .as_u64()
            .ok_or_else(|| bad("missing integer \"k\"".into()))? as usize;
        let members = value["members"]
            .as_array()
            .ok_or_else(|| bad("missing \"members\"".into()))?
            .iter()
            .map(index_of)
            .collect::<Result<Vec<_>>>()?;
        let mut trace = Vec::new();
        if let Some(steps) = value["trace"].as_array() {
            for step in steps {
                let candidates = step["candidates"]
                    .as_array()
                    .ok_or_else(|| bad("trace step without candidates".into()))?
                    .iter()
                    .map(|c| {
                        Ok(SelectionScore {
                            candidate: index_of(&c["model_id"])?,
                            value: c["score"]
                                .as_f64()
                                .ok_or_else(|| bad("candidate without score".into()))?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                trace.push(SelectionStep {
                    candidates,
                    chosen: index_of(&step["chosen"])?,
                });
            }
        }
        let selection = EnsembleSelection {
            strategy,
            k,
            members,
            trace,
        };
        selection.validate(model_ids.len())?;
        Ok(selection)
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.members.is_empty() {
            return Err(Error::invalid("selection has no members"));
        }
        if self.members.len() != self.k.min(n) {
            return Err(Error::invalid(format!(
                "selection lists {} members for k = {}",
                self.members.len(),
                self.k
            )));
        }
        let mut seen = vec![false; n];
        for &m in &self.members {
            if m >= n || std::mem::replace(&mut seen[m], true) {
                return Err(Error::invalid(format!(
                    "invalid or repeated member index {m}"
                )));
            }
        }
        Ok(())
    }
}

fn check_inputs(c: &CorrelationMatrix, d: &[f64], k: usize) -> Result<usize> {
    let n = c.n();
    if d.len() != n {
        return Err(Error::invalid(format!(
            "{} model scores for a {n}x{n} correlation matrix",
            d.len()
        )));
    }
    if let Some(v) = d.iter().find(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("model score {v} is not finite")));
    }
    check_k(k, n)?;
    Ok(n)
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::KOutOfRange { k, n });
    }
    Ok(())
}

fn check_candidate(i: usize, ensemble: &[usize]) -> Result<()> {
    if ensemble.is_empty() {
        return Err(Error::invalid("average score needs a non-empty ensemble"));
    }
    if ensemble.contains(&i) {
        return Err(Error::invalid(format!(
            "model {i} is already in the ensemble"
        )));
    }
    Ok(())
}

/// Mean over ensemble members `j` of `(1 - d_i) + C[i][j]`.
pub fn avg_score(
    i: usize,
    ensemble: &[usize],
    c: &CorrelationMatrix,
    d: &[f64],
) -> Result<SelectionScore> {
    check_candidate(i, ensemble)?;
    let error = 1.0 - d[i];
    let sum: f64 = ensemble.iter().map(|&j| error + c.get(i, j)).sum();
    Ok(SelectionScore {
        candidate: i,
        value: sum / ensemble.len() as f64,
    })
}

/// Mean over ensemble members `j` of `C[i][j]` (no accuracy term).
pub fn avg_correlation(
    i: usize,
    ensemble: &[usize],
    c: &CorrelationMatrix,
) -> Result<SelectionScore> {
    check_candidate(i, ensemble)?;
    let sum: f64 = ensemble.iter().map(|&j| c.get(i, j)).sum();
    Ok(SelectionScore {
        candidate: i,
        value: sum / ensemble.len() as f64,
    })
}

/// Index of the largest score; ties go to the lowest index.
pub fn argmax(d: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in d.iter().enumerate().skip(1) {
        if v > d[best] {
            best = i;
        }
    }
    best
}

fn greedy<F>(
    strategy: Strategy,
    c: &CorrelationMatrix,
    d: &[f64],
    k: usize,
    score: F,
) -> Result<EnsembleSelection>
where
    F: Fn(usize, &[usize]) -> Result<SelectionScore>,
{
    let n = check_inputs(c, d, k)?;
    let mut members = vec![argmax(d)];
    let mut in_ensemble = vec![false; n];
    in_ensemble[members[0]] = true;
    let mut trace = Vec::with_capacity(k - 1);

    for _ in 1..k {
        let mut chosen = None;
        let mut best = f64::INFINITY;
        let mut best_d = 0.0;
        let mut candidates = Vec::with_capacity(n - members.len());
        for i in (0..n).filter(|&i| !in_ensemble[i]) {
            let s = score(i, &members)?;
            if s.value < best || (s.value == best && d[i] > best_d) || chosen.is_none() {
                chosen = Some(i);
                best = s.value;
                best_d = d[i];
            }
            candidates.push(s);
        }
        let chosen = chosen.expect("k <= n leaves a candidate");
        in_ensemble[chosen] = true;
        members.push(chosen);
        trace.push(SelectionStep { candidates, chosen });
    }

    Ok(EnsembleSelection {
        strategy,
        k,
        members,
        trace,
    })
}

/// Diversity-promoting greedy selection of `k` models.
pub fn select_dipe(c: &CorrelationMatrix, d: &[f64], k: usize) -> Result<EnsembleSelection> {
    greedy(Strategy::Dipe, c, d, k, |i, e| avg_score(i, e, c, d))
}

/// As [`select_dipe`] with the `1 - d_i` term removed from the score.
pub fn select_dipe_ablated(
    c: &CorrelationMatrix,
    d: &[f64],
    k: usize,
) -> Result<EnsembleSelection> {
    greedy(Strategy::DipeAblated, c, d, k, |i, e| {
        avg_correlation(i, e, c)
    })
}

/// The `k` models with the highest scores, best first; ties go to the
/// lowest index.
pub fn select_topk(d: &[f64], k: usize) -> Result<EnsembleSelection> {
    let n = d.len();
    check_k(k, n)?;
    if let Some(v) = d.iter().find(|v| v.is_nan()) {
        return Err(Error::invalid(format!("model score {v} is not a number")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[b].total_cmp(&d[a]).then(a.cmp(&b)));
    order.truncate(k);
    Ok(EnsembleSelection {
        strategy: Strategy::TopK,
        k,
        members: order,
        trace: Vec::new(),
    })
}

/// Every model, in index order.
pub fn select_all(n: usize) -> Result<EnsembleSelection> {
    check_k(n, n)?;
    Ok(EnsembleSelection {
        strategy: Strategy::All,
        k: n,
        members: (0..n).collect(),
        trace: Vec::new(),
    })
}

/// Lexicographic enumeration of k-subsets of `0..n`.
pub(crate) fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k == 0 || k > n {
        return out;
    }
    let mut current: Vec<usize> = (0..k).collect();
    loop {
        out.push(current.clone());
        let Some(pos) = (0..k).rev().find(|&p| current[p] < n - k + p) else {
            return out;
        };
        current[pos] += 1;
        for q in pos + 1..k {
            current[q] = current[q - 1] + 1;
        }
    }
}

/// The size-`k` subset with the highest fused validation Dice, found by
/// enumerating every subset. Ties go to the lexicographically smallest set.
pub fn select_exhaustive(dataset: &Dataset, k: usize, t: Threshold) -> Result<EnsembleSelection> {
    let n = dataset.n_models();
    if n > EXHAUSTIVE_LIMIT {
        return Err(Error::TooManyModels {
            n,
            limit: EXHAUSTIVE_LIMIT,
        });
    }
    check_k(k, n)?;
    let subsets = combinations(n, k);
    let scores = subsets
        .par_iter()
        .map(|members| evaluate_members(dataset, members, t).map(|e| e.dice))
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
    let best = argmax(&scores);
    Ok(EnsembleSelection {
        strategy: Strategy::Exhaustive,
        k,
        members: subsets[best].clone(),
        trace: Vec::new(),
    })
}

/// Runs any strategy. `dataset` is only needed for the exhaustive search.
pub fn select(
    strategy: Strategy,
    c: &CorrelationMatrix,
    d: &[f64],
    k: usize,
    dataset: Option<&Dataset>,
    t: Threshold,
) -> Result<EnsembleSelection> {
    match strategy {
        Strategy::Dipe => select_dipe(c, d, k),
        Strategy::DipeAblated => select_dipe_ablated(c, d, k),
        Strategy::TopK => select_topk(d, k),
        Strategy::All => select_all(d.len()),
        Strategy::Exhaustive => {
            let dataset = dataset.ok_or_else(|| {
                Error::invalid("the exhaustive strategy needs the prediction manifest")
            })?;
            select_exhaustive(dataset, k, t)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("m{i}")).collect()
    }

    /// Four models with d = (0.90, 0.88, 0.86, 0.80).
    fn four() -> (CorrelationMatrix, Vec<f64>) {
        let c = CorrelationMatrix::new(
            ids(4),
            vec![
                vec![1.0, 0.95, 0.70, 0.60],
                vec![0.95, 1.0, 0.75, 0.65],
                vec![0.70, 0.75, 1.0, 0.55],
                vec![0.60, 0.65, 0.55, 1.0],
            ],
        )
        .unwrap();
        (c, vec![0.90, 0.88, 0.86, 0.80])
    }

    #[test]
    fn avg_score_examples() {
        let c = CorrelationMatrix::new(ids(2), vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(avg_score(1, &[0], &c, &[0.5, 1.0]).unwrap().value, 0.0);

        let c = CorrelationMatrix::new(ids(2), vec![vec![1.0, 0.8], vec![0.8, 1.0]]).unwrap();
        let s = avg_score(1, &[0], &c, &[0.5, 0.9]).unwrap().value;
        assert!((s - 0.9).abs() < 1e-12);

        let c = CorrelationMatrix::new(ids(2), vec![vec![1.0, 0.95], vec![0.95, 1.0]]).unwrap();
        let s = avg_score(1, &[0], &c, &[0.9, 0.9051]).unwrap().value;
        assert!((s - 1.0449).abs() < 1e-12);
    }

    #[test]
    fn avg_score_contract() {
        let (c, d) = four();
        assert!(avg_score(0, &[0, 1], &c, &d).is_err());
        assert!(avg_score(0, &[], &c, &d).is_err());
        assert!(avg_correlation(2, &[2], &c).is_err());
    }

    #[test]
    fn dipe_four_model_trace() {
        let (c, d) = four();
        let sel = select_dipe(&c, &d, 3).unwrap();
        assert_eq!(sel.members, vec![0, 3, 2]);
        let step2: Vec<f64> = sel.trace[0].candidates.iter().map(|s| s.value).collect();
        for (got, want) in step2.iter().zip([1.07, 0.84, 0.80]) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
        let step3: Vec<f64> = sel.trace[1].candidates.iter().map(|s| s.value).collect();
        for (got, want) in step3.iter().zip([0.92, 0.765]) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn ablated_four_model() {
        let (c, d) = four();
        let sel = select_dipe_ablated(&c, &d, 2).unwrap();
        assert_eq!(sel.members, vec![0, 3]);
        let s: Vec<f64> = sel.trace[0].candidates.iter().map(|s| s.value).collect();
        assert_eq!(s, vec![0.95, 0.70, 0.60]);
        assert_eq!(
            select_dipe_ablated(&c, &d, 1).unwrap().members,
            select_dipe(&c, &d, 1).unwrap().members
        );
    }

    #[test]
    fn k_bounds() {
        let (c, d) = four();
        assert!(matches!(
            select_dipe(&c, &d, 0),
            Err(Error::KOutOfRange { k: 0, n: 4 })
        ));
        assert!(matches!(
            select_dipe(&c, &d, 5),
            Err(Error::KOutOfRange { .. })
        ));
        assert!(select_topk(&d, 0).is_err());
        assert_eq!(select_dipe(&c, &d, 1).unwrap().members, vec![0]);
        let mut all = select_dipe(&c, &d, 4).unwrap().members;
        all.sort();
        assert_eq!(all, vec![0, 1, 2, 3]);
    }

    #[test]
    fn tie_on_score_prefers_higher_dice() {
        // Both candidates score 0.625: (1 - 0.625) + 0.25 and (1 - 0.75) + 0.375.
        let c = CorrelationMatrix::new(
            ids(3),
            vec![
                vec![1.0, 0.25, 0.375],
                vec![0.25, 1.0, 0.5],
                vec![0.375, 0.5, 1.0],
            ],
        )
        .unwrap();
        let d = [1.0, 0.625, 0.75];
        let sel = select_dipe(&c, &d, 2).unwrap();
        assert_eq!(
            sel.trace[0].candidates[0].value,
            sel.trace[0].candidates[1].value
        );
        assert_eq!(sel.members, vec![0, 2]);
    }

    #[test]
    fn full_tie_prefers_lowest_index() {
        let c = CorrelationMatrix::new(
            ids(3),
            vec![
                vec![1.0, 0.5, 0.5],
                vec![0.5, 1.0, 0.5],
                vec![0.5, 0.5, 1.0],
            ],
        )
        .unwrap();
        let d = [0.75, 0.75, 0.75];
        assert_eq!(select_dipe(&c, &d, 2).unwrap().members, vec![0, 1]);
        assert_eq!(select_topk(&d, 2).unwrap().members, vec![0, 1]);
    }

    #[test]
    fn topk_examples() {
        let d = [0.9051, 0.9045, 0.9054];
        assert_eq!(select_topk(&d, 2).unwrap().members, vec![2, 0]);
        assert_eq!(select_topk(&d, 3).unwrap().sorted_members(), vec![0, 1, 2]);
    }

    #[test]
    fn combinations_lexicographic() {
        assert_eq!(
            combinations(4, 2),
            vec![
                vec![0, 1],
                vec![0, 2],
                vec![0, 3],
                vec![1, 2],
                vec![1, 3],
                vec![2, 3]
            ]
        );
        assert_eq!(combinations(3, 3), vec![vec![0, 1, 2]]);
        assert_eq!(combinations(12, 6).len(), 924);
    }

    #[test]
    fn strategy_names() {
        for s in Strategy::ALL {
            assert_eq!(s.as_str().parse::<Strategy>().unwrap(), s);
        }
        assert_eq!(
            "dipe-ablated".parse::<Strategy>().unwrap(),
            Strategy::DipeAblated
        );
        assert!("greedy".parse::<Strategy>().is_err());
    }

    #[test]
    fn json_round_trip() {
        let (c, d) = four();
        let sel = select_dipe(&c, &d, 3).unwrap();
        let text = sel.to_json(&ids(4));
        assert!(text.contains("\"members\""));
        let back = EnsembleSelection::from_json(&text, &ids(4)).unwrap();
        assert_eq!(back, sel);
        assert!(EnsembleSelection::from_json(&text, &ids(2)).is_err());
    }
}
