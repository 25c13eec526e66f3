//! Conformal p-values and FDR-controlled selection.
//!
//! Given calibration scores `V_1..V_n` and a test score `V̂_j`, the conformal
//! p-value is the randomized rank
//!
//! ```text
//! p_j = ( #{i : V_i < V̂_j} + U_j * (1 + #{i : V_i = V̂_j}) ) / (n + 1)
//! ```
//!
//! with `U_j` drawn uniformly from (0, 1]. When test and calibration scores
//! are exchangeable, `p_j` is super-uniform, and running Benjamini–Hochberg
//! on the `p_j` controls the false discovery rate of the selected set at the
//! nominal level — with a finite sample, not just asymptotically.

use rand::Rng;

use crate::dataset::{LabeledDataset, UnlabeledDataset};
use crate::error::{Error, Result};
use crate::region::TargetRegion;
use crate::score::NonconformityScore;

/// Conformal p-values; every entry lies in `(0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PValues(Vec<f64>);

impl PValues {
    /// Wrap a vector of p-values, checking each lies in `(0, 1]`.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty { what: "p-values" });
        }
        for &v in &values {
            if !(v.is_finite() && v > 0.0 && v <= 1.0) {
                return Err(Error::InvalidArgument {
                    what: "p-value",
                    why: format!("must lie in (0, 1], got {v}"),
                });
            }
        }
        Ok(PValues(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn check_scores(what: &'static str, scores: &[f64]) -> Result<()> {
    if scores.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { what })
    }
}

/// Conformal p-values with caller-supplied tie-break draws (`U_j` in `(0, 1]`,
/// one per test score). The randomized variant [`conformal_p_values`] should
/// be preferred; this entry point exists so results can be reproduced or
/// de-randomized (`U_j = 1` gives the conservative deterministic p-value).
pub fn conformal_p_values_with_draws(
    cal_scores: &[f64],
    test_scores: &[f64],
    draws: &[f64],
) -> Result<PValues> {
    if test_scores.is_empty() {
        return Err(Error::Empty {
            what: "test scores",
        });
    }
    check_scores("calibration scores", cal_scores)?;
    check_scores("test scores", test_scores)?;
    if draws.len() != test_scores.len() {
        return Err(Error::DimensionMismatch {
            what: "tie-break draws",
            expected: test_scores.len(),
            got: draws.len(),
        });
    }
    for &u in draws {
        if !(u.is_finite() && u > 0.0 && u <= 1.0) {
            return Err(Error::InvalidArgument {
                what: "tie-break draw",
                why: format!("must lie in (0, 1], got {u}"),
            });
        }
    }

    let mut sorted = cal_scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let values = test_scores
        .iter()
        .zip(draws)
        .map(|(&v, &u)| {
            let below = sorted.partition_point(|&s| s < v);
            let at_or_below = sorted.partition_point(|&s| s <= v);
            let ties = at_or_below - below;
            (below as f64 + u * (1 + ties) as f64) / (n + 1) as f64
        })
        .collect();
    PValues::new(values)
}

/// Conformal p-values with randomized tie-breaking.
///
/// Draws one uniform per test score, in index order, so results are
/// reproducible from the rng seed alone.
pub fn conformal_p_values<R: Rng + ?Sized>(
    cal_scores: &[f64],
    test_scores: &[f64],
    rng: &mut R,
) -> Result<PValues> {
    // random::<f64>() is uniform on [0, 1); flip it to (0, 1] so a p-value
    // can never be exactly zero.
    let draws: Vec<f64> = test_scores.iter().map(|_| 1.0 - rng.random::<f64>()).collect();
    conformal_p_values_with_draws(cal_scores, test_scores, &draws)
}

/// Outcome of a Benjamini–Hochberg pass over conformal p-values.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    /// Selected test indices (0-based), ascending.
    pub selected: Vec<usize>,
    /// The largest feasible step `k*`; zero when nothing is selected.
    pub k_star: usize,
    /// The p-value cutoff `q * k_star / m` actually applied.
    pub threshold: f64,
    /// The p-values the decision was made from.
    pub p_values: PValues,
}

/// Benjamini–Hochberg selection at nominal level `q`:
/// `k* = max{k : #{j : p_j <= q k / m} >= k}` and the selected set is every
/// index with `p_j <= q k* / m`.
pub fn bh_select(p_values: &PValues, q: f64) -> Result<SelectionResult> {
    if !(q.is_finite() && q > 0.0 && q < 1.0) {
        return Err(Error::InvalidArgument {
            what: "nominal level q",
            why: format!("must lie in (0, 1), got {q}"),
        });
    }
    let m = p_values.len();
    let mut sorted = p_values.values().to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut k_star = 0;
    for k in (1..=m).rev() {
        let cutoff = q * k as f64 / m as f64;
        if sorted.partition_point(|&v| v <= cutoff) >= k {
            k_star = k;
            break;
        }
    }
    let threshold = q * k_star as f64 / m as f64;
    let selected = p_values
        .values()
        .iter()
        .enumerate()
        .filter(|&(_, &v)| v <= threshold)
        .map(|(j, _)| j)
        .collect();
    Ok(SelectionResult {
        selected,
        k_star,
        threshold,
        p_values: p_values.clone(),
    })
}

/// The full pipeline: score calibration pairs and test covariates (test
/// responses replaced by the region's boundary point), convert to conformal
/// p-values, and select by Benjamini–Hochberg at level `q`.
///
/// FDR control requires the score to be regionally monotone; the built-in
/// scores guarantee that.
pub fn mcs_select<R: Rng + ?Sized>(
    cal: &LabeledDataset,
    test: &UnlabeledDataset,
    region: &TargetRegion,
    score: &dyn NonconformityScore,
    q: f64,
    rng: &mut R,
) -> Result<SelectionResult> {
    if cal.covariate_dim() != test.covariate_dim() {
        return Err(Error::DimensionMismatch {
            what: "test covariates",
            expected: cal.covariate_dim(),
            got: test.covariate_dim(),
        });
    }
    if cal.response_dim() != region.dim() {
        return Err(Error::DimensionMismatch {
            what: "region dimension",
            expected: cal.response_dim(),
            got: region.dim(),
        });
    }
    let boundary = region.boundary_point();
    let cal_scores: Vec<f64> = (0..cal.n())
        .map(|i| score.score(cal.x_row(i), cal.y_row(i)))
        .collect::<Result<_>>()?;
    let test_scores: Vec<f64> = (0..test.n())
        .map(|j| score.score(test.x_row(j), &boundary))
        .collect::<Result<_>>()?;
    let p = conformal_p_values(&cal_scores, &test_scores, rng)?;
    bh_select(&p, q)
}

/// False discovery proportion and power of a selected index set against the
/// ground truth membership vector (`true` = response in region).
///
/// Both ratios use the `max(·, 1)` convention in the denominator, so an empty
/// selection has FDP 0 and a truth vector with no in-region points has power 0.
pub fn fdp_and_power(selected: &[usize], truth_in_region: &[bool]) -> (f64, f64) {
    let mut false_sel = 0usize;
    let mut true_sel = 0usize;
    for &j in selected {
        assert!(
            j < truth_in_region.len(),
            "selected index {j} out of range for {} test points",
            truth_in_region.len()
        );
        if truth_in_region[j] {
            true_sel += 1;
        } else {
            false_sel += 1;
        }
    }
    let total_true = truth_in_region.iter().filter(|&&t| t).count();
    let fdp = false_sel as f64 / selected.len().max(1) as f64;
    let power = true_sel as f64 / total_true.max(1) as f64;
    (fdp, power)
}
