//! Diversity-promoting ensembles of segmentation models.
//!
//! Candidate models are represented by their stored per-class probability
//! maps on a validation set. The pipeline scores each model against ground
//! truth ([`metrics`]), measures how much model outputs agree
//! ([`correlation`]), picks a budget-limited ensemble ([`selection`]) and
//! fuses it by averaging probabilities ([`fusion`]). [`report`] sweeps the
//! budget for several strategies and [`synth`] generates reproducible model
//! zoos to run everything on.

pub mod correlation;
pub mod error;
pub mod fusion;
pub mod io;
pub mod metrics;
pub mod num;
pub mod report;
pub mod selection;
pub mod synth;

pub use correlation::{correlation_matrix, export_heatmap, pairwise_dice, CorrelationMatrix};
pub use error::{Error, Result};
pub use fusion::{evaluate_ensemble, evaluate_members, fuse, EnsembleScore};
pub use io::{load_manifest, Dataset, Dims, Manifest, MaskSet, Plane, ProbabilityMap, SliceId};
pub use metrics::{dice, iou, score_models, threshold, ModelScores, Threshold, ThresholdedPool};
pub use report::{render, sweep, Format, SweepReport, SweepRow};
pub use selection::{
    avg_correlation, avg_score, select, select_all, select_dipe, select_dipe_ablated,
    select_exhaustive, select_topk, EnsembleSelection, SelectionScore, SelectionStep, Strategy,
};
pub use synth::{generate, SynthModel, SynthSpec};
