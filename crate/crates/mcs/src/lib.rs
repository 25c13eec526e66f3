//! Multivariate conformal selection: pick the test points whose unobserved
//! vector response lies in a target region, with finite-sample control of the
//! false discovery rate (FDR).
//!
//! Given labeled calibration data, unlabeled test covariates, and a region of
//! "desirable" responses, the pipeline is:
//!
//! 1. score every point with a nonconformity score (fixed distance-based
//!    scores in [`score`], or a trained network in [`learn`]);
//! 2. turn calibration and test scores into randomized conformal p-values
//!    ([`conformal`]);
//! 3. run a Benjamini–Hochberg pass over the p-values and keep the winners.
//!
//! The guarantee — expected false discovery proportion at most the nominal
//! level `q` — holds for any score and any predictor, in finite samples,
//! as long as calibration rows are exchangeable with test rows and are never
//! touched by training. Everything else in the crate (predictors, simulated
//! data, baselines, benchmarks, the `mcs` binary) exists to exercise that
//! pipeline.
//!
//! # Modules
//!
//! - [`region`] — target regions (orthants, balls, their complements, a
//!   half-line) with membership, signed depth, and a plain-text spec format
//! - [`score`] — distance-based nonconformity scores over a region and a
//!   predictor
//! - [`conformal`] — conformal p-values, the BH-style selection rule, and
//!   FDP/power audits
//! - [`learn`] — trainable two-layer score, optimized through smooth
//!   (soft-rank) p-values, validated by replaying hard selection
//! - [`softsort`] — differentiable ranks backing [`learn`]
//! - [`predict`] — small built-in predictors (ridge, k-NN, logistic)
//! - [`baselines`] — per-dimension and indicator-based selection baselines
//! - [`simgen`] — synthetic data-generating settings and selection tasks
//! - [`bench`] — paired benchmark harness with FDR/power summaries
//! - [`dataset`] — labeled/unlabeled datasets and their CSV form
//! - [`cli`] — the `mcs` binary (`simulate | select | train-score |
//!   benchmark | sweep`)
//!
//! # Examples
//!
//! Each major capability has a runnable example under `examples/`:
//!
//! | example | shows |
//! |---|---|
//! | `regions` | building regions, membership vs. interior, depth, specs |
//! | `soft_ranks` | soft ranks approaching hard ranks, gradients through them |
//! | `select_simulated` | one full selection pass on simulated data, audited |
//! | `distance_scores` | regular vs. clipped vs. probability-clipped scores |
//! | `learned_score` | training a score and the power it buys |
//! | `baselines` | the four baseline selectors next to calibrated selection |
//! | `benchmark_table` | paired benchmark with mean FDR/power and errors |
//! | `level_sweep` | realized FDR and power as the nominal level varies |
//! | `csv_pipeline` | the file-based workflow driven from the library |
//!
//! ```bash
//! cargo run --example regions
//! cargo run --release --example learned_score   # the heavier ones
//! ```
//!
//! # Selecting in five lines
//!
//! ```no_run
//! # fn main() -> mcs::Result<()> {
//! # let (cal, test): (mcs::dataset::LabeledDataset, mcs::dataset::UnlabeledDataset) = unimplemented!();
//! let region = mcs::region::TargetRegion::orthant(vec![0.0, 0.0])?;
//! let predictor = mcs::predict::fit_ridge(cal.x(), cal.y(), 0.1)?;
//! let score = mcs::score::DistScore {
//!     region: &region,
//!     predictor: &predictor,
//!     spec: mcs::score::DistScoreSpec::default(),
//! };
//! let mut rng = rand::rng();
//! let sel = mcs::conformal::mcs_select(&cal, &test, &region, &score, 0.1, &mut rng)?;
//! # Ok(()) }
//! ```

pub mod baselines;
pub mod bench;
pub mod cli;
pub mod conformal;
pub mod dataset;
pub mod error;
pub mod learn;
mod linalg;
pub mod predict;
pub mod region;
pub mod score;
pub mod simgen;
pub mod softsort;

pub use error::{Error, Result};
