//! Univariate comparison methods.
//!
//! Each baseline reduces the multivariate selection problem to one or more
//! univariate conformal selections and reuses the main pipeline with
//! [`HalfLine`](crate::region::TargetRegion::HalfLine) regions:
//!
//! * [`cs_int`] — select per response dimension at level `q`, intersect.
//! * [`cs_ib`] — the Bonferroni repair: per-dimension level `q / d`.
//! * [`cs_is`] — tune a common per-dimension level on a held-out part of the
//!   calibration set.
//! * [`bi_select`] — collapse the response to the binary indicator of region
//!   membership, fit a logistic classifier, and run univariate selection on
//!   the predicted probabilities.
//!
//! The intersection methods require an orthant target (the region must
//! factor across dimensions); the binary reduction works for any region.

use ndarray::Axis;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::conformal::{fdp_and_power, mcs_select};
use crate::dataset::{LabeledDataset, UnlabeledDataset};
use crate::error::{Error, Result};
use crate::predict::{fit_logistic, Predictor};
use crate::region::TargetRegion;
use crate::score::{DistScore, DistScoreSpec, ProbScore, ScoreKind};

/// Restriction of a multi-output predictor to one response coordinate.
struct CoordinatePredictor<'a> {
    inner: &'a dyn Predictor,
    coord: usize,
}

impl Predictor for CoordinatePredictor<'_> {
    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }

    fn output_dim(&self) -> usize {
        1
    }

    fn predict_one(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![self.inner.predict_one(x)?[self.coord]])
    }
}

fn orthant_cutoffs<'r>(region: &'r TargetRegion, what: &'static str) -> Result<&'r [f64]> {
    match region {
        TargetRegion::Orthant { cutoffs } => Ok(cutoffs),
        _ => Err(Error::InvalidArgument {
            what,
            why: format!(
                "requires an orthant target region (got {})",
                region.kind_name()
            ),
        }),
    }
}

fn check_baseline_dims(
    cal: &LabeledDataset,
    test: &UnlabeledDataset,
    region: &TargetRegion,
) -> Result<()> {
    if cal.response_dim() != region.dim() {
        return Err(Error::DimensionMismatch {
            what: "region dimension",
            expected: cal.response_dim(),
            got: region.dim(),
        });
    }
    if test.covariate_dim() != cal.covariate_dim() {
        return Err(Error::DimensionMismatch {
            what: "test covariates",
            expected: cal.covariate_dim(),
            got: test.covariate_dim(),
        });
    }
    Ok(())
}

fn intersect_sorted(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

/// Run the univariate clipped-score selection for every dimension at the
/// given per-dimension level and intersect the selections. Each dimension
/// draws its tie-break randomness from a stream derived from `rng`.
fn cs_int_at_level<R: Rng + ?Sized>(
    cal: &LabeledDataset,
    test: &UnlabeledDataset,
    cutoffs: &[f64],
    predictor: &dyn Predictor,
    level: f64,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let mut acc: Option<Vec<usize>> = None;
    for (k, &cutoff) in cutoffs.iter().enumerate() {
        let sub_region = TargetRegion::half_line(cutoff)?;
        let y_col = cal.y().column(k).to_owned().insert_axis(Axis(1));
        let cal_k = LabeledDataset::new(cal.x().to_owned(), y_col)?;
        let coord = CoordinatePredictor {
            inner: predictor,
            coord: k,
        };
        let score = DistScore {
            region: &sub_region,
            predictor: &coord,
            spec: DistScoreSpec {
                kind: ScoreKind::Clipped,
                ..DistScoreSpec::default()
            },
        };
        let mut dim_rng = ChaCha8Rng::seed_from_u64(rng.next_u64());
        let selection = mcs_select(&cal_k, test, &sub_region, &score, level, &mut dim_rng)?;
        acc = Some(match acc {
            None => selection.selected,
            Some(prev) => intersect_sorted(&prev, &selection.selected),
        });
        // An empty intersection can only stay empty, but the remaining
        // dimensions still consume their rng draws so the stream layout does
        // not depend on the data.
    }
    Ok(acc.unwrap_or_default())
}

/// Intersection baseline: univariate selection at level `q` in every response
/// dimension, then the intersection of the selected sets. Anti-conservative
/// in general — the intersection of several level-`q` selections does not
/// control FDR at `q`.
pub fn cs_int<R: Rng + ?Sized>(
    cal: &LabeledDataset,
    test: &UnlabeledDataset,
    region: &TargetRegion,
    predictor: &dyn Predictor,
    q: f64,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let cutoffs = orthant_cutoffs(region, "cs_int region")?;
    check_baseline_dims(cal, test, region)?;
    cs_int_at_level(cal, test, cutoffs, predictor, q, rng)
}

/// Bonferroni-adjusted intersection baseline: [`cs_int`] with per-dimension
/// level `q / d`. Controls FDR but is very conservative as `d` grows.
pub fn cs_ib<R: Rng + ?Sized>(
    cal: &LabeledDataset,
    test: &UnlabeledDataset,
    region: &TargetRegion,
    predictor: &dyn Predictor,
    q: f64,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let cutoffs = orthant_cutoffs(region, "cs_ib region")?;
    check_baseline_dims(cal, test, region)?;
    let level = q / cutoffs.len() as f64;
    cs_int_at_level(cal, test, cutoffs, predictor, level, rng)
}

/// Tuning knobs for [`cs_is`].
#[derive(Debug, Clone)]
pub struct CsIsSpec {
    /// Fraction of the calibration set held out for level tuning.
    pub holdout_fraction: f64,
    /// Number of candidate levels, evenly spaced over `[q/d, q]`.
    pub grid_size: usize,
}

impl Default for CsIsSpec {
    fn default() -> Self {
        CsIsSpec {
            holdout_fraction: 0.5,
            grid_size: 20,
        }
    }
}

impl CsIsSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction < 1.0) {
            return Err(Error::InvalidArgument {
                what: "holdout fraction",
                why: "must lie strictly between 0 and 1".to_string(),
            });
        }
        if self.grid_size == 0 {
            return Err(Error::Empty {
                what: "level grid",
            });
        }
        Ok(())
    }

    /// Candidate per-dimension levels, ascending over `[q/d, q]` (just `[q]`
    /// for a single-element grid).
    fn grid(&self, q: f64, d: usize) -> Vec<f64> {
        let lo = q / d as f64;
        if self.grid_size == 1 {
            return vec![q];
        }
        (0..self.grid_size)
            .map(|i| lo + (q - lo) * i as f64 / (self.grid_size - 1) as f64)
            .collect()
    }
}

/// Searched-intersection baseline: hold out part of the calibration set,
/// evaluate the intersection selection at each candidate common level against
/// the held-out labels, keep the largest level whose holdout false discovery
/// proportion stays at or below `q` (falling back to the Bonferroni level
/// `q/d` when none passes), and select on the test set at that level.
pub fn cs_is<R: Rng + ?Sized>(
    cal: &LabeledDataset,
    test: &UnlabeledDataset,
    region: &TargetRegion,
    predictor: &dyn Predictor,
    q: f64,
    spec: &CsIsSpec,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let cutoffs = orthant_cutoffs(region, "cs_is region")?;
    check_baseline_dims(cal, test, region)?;
    spec.validate()?;

    let n = cal.n();
    let n_hold = (spec.holdout_fraction * n as f64).floor() as usize;
    if n_hold == 0 || n_hold >= n {
        return Err(Error::InvalidArgument {
            what: "holdout split",
            why: format!("{n} calibration rows leave an empty part at fraction {}", spec.holdout_fraction),
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let (hold_idx, fit_idx) = order.split_at(n_hold);
    let holdout = cal.subset(hold_idx)?;
    let cal_rest = cal.subset(fit_idx)?;
    let holdout_test = holdout.unlabeled();
    let mut truth = Vec::with_capacity(holdout.n());
    for i in 0..holdout.n() {
        truth.push(region.contains(holdout.y_row(i))?);
    }

    let fallback = q / cutoffs.len() as f64;
    let chosen = search_level(&spec.grid(q, cutoffs.len()), q, fallback, |level| {
        let selected = cs_int_at_level(&cal_rest, &holdout_test, cutoffs, predictor, level, rng)?;
        Ok(fdp_and_power(&selected, &truth).0)
    })?;
    cs_int_at_level(&cal_rest, test, cutoffs, predictor, chosen, rng)
}

/// Scan candidate levels from the largest down and keep the first whose
/// holdout false discovery proportion stays at or below `q`; use `fallback`
/// when none qualifies. Lower levels are not evaluated once one passes.
fn search_level<F>(levels_ascending: &[f64], q: f64, fallback: f64, mut holdout_fdp: F) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    for &level in levels_ascending.iter().rev() {
        if holdout_fdp(level)? <= q {
            return Ok(level);
        }
    }
    Ok(fallback)
}

/// Settings of the logistic classifier inside [`bi_select`].
#[derive(Debug, Clone)]
pub struct BiSpec {
    /// Gradient-descent steps for the classifier fit.
    pub steps: usize,
    /// Gradient-descent learning rate.
    pub lr: f64,
    /// Clipping constant of the univariate score.
    pub big_m: f64,
}

impl Default for BiSpec {
    fn default() -> Self {
        BiSpec {
            steps: 500,
            lr: 0.1,
            big_m: 1e6,
        }
    }
}

impl BiSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidArgument {
                what: "bi learning rate",
                why: "must be positive and finite".to_string(),
            });
        }
        if !(self.big_m > 0.0 && self.big_m.is_finite()) {
            return Err(Error::InvalidArgument {
                what: "bi big_m",
                why: "must be positive and finite".to_string(),
            });
        }
        Ok(())
    }
}

/// Binary-indicator baseline. The response collapses to `1{y in region}`;
/// half the calibration set (chosen by `rng`) fits a logistic classifier of
/// that indicator, the other half calibrates a univariate clipped selection
/// on the predicted probability with the half-line target `{ y >= 0.5 }`.
/// Works for every region variant since only membership is consulted.
pub fn bi_select<R: Rng + ?Sized>(
    cal: &LabeledDataset,
    test: &UnlabeledDataset,
    region: &TargetRegion,
    q: f64,
    spec: &BiSpec,
    rng: &mut R,
) -> Result<Vec<usize>> {
    check_baseline_dims(cal, test, region)?;
    spec.validate()?;
    let n = cal.n();
    if n < 2 {
        return Err(Error::InvalidArgument {
            what: "bi calibration set",
            why: "needs at least 2 rows to split".to_string(),
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let (fit_idx, cal_idx) = order.split_at(n / 2);
    let fit_part = cal.subset(fit_idx)?;
    let cal_part = cal.subset(cal_idx)?;

    let mut fit_labels = Vec::with_capacity(fit_part.n());
    for i in 0..fit_part.n() {
        fit_labels.push(region.contains(fit_part.y_row(i))?);
    }
    let classifier = fit_logistic(fit_part.x(), &fit_labels, spec.steps, spec.lr)?;

    // Pseudo-responses for the calibration half: the membership indicator as
    // a scalar, selected against the half-line `{ y >= 0.5 }` whose boundary
    // value 0.5 zeroes the indicator for test points.
    let mut pseudo = ndarray::Array2::zeros((cal_part.n(), 1));
    for i in 0..cal_part.n() {
        pseudo[[i, 0]] = if region.contains(cal_part.y_row(i))? { 1.0 } else { 0.0 };
    }
    let cal_binary = LabeledDataset::new(cal_part.x().to_owned(), pseudo)?;
    let half_line = TargetRegion::half_line(0.5)?;
    let score = ProbScore {
        region: &half_line,
        classifier: &classifier,
        big_m: spec.big_m,
    };
    let selection = mcs_select(&cal_binary, test, &half_line, &score, q, rng)?;
    Ok(selection.selected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    /// Predictor returning the first `d` covariates unchanged.
    struct TakeX {
        p: usize,
        d: usize,
    }

    impl Predictor for TakeX {
        fn input_dim(&self) -> usize {
            self.p
        }

        fn output_dim(&self) -> usize {
            self.d
        }

        fn predict_one(&self, x: &[f64]) -> Result<Vec<f64>> {
            if x.len() != self.p {
                return Err(Error::DimensionMismatch {
                    what: "covariates",
                    expected: self.p,
                    got: x.len(),
                });
            }
            Ok(x[..self.d].to_vec())
        }
    }

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    /// d=1: constant calibration/test layout where the intersection method
    /// degenerates to a single univariate selection.
    #[test]
    fn single_dimension_matches_univariate_selection() {
        let n = 15;
        let m = 6;
        let mut r = rng(1);
        let x_cal = Array2::from_shape_fn((n, 2), |_| r.random_range(-1.0..1.0));
        let y_cal = Array2::from_shape_fn((n, 1), |_| r.random_range(-1.0..3.0));
        let cal = LabeledDataset::new(x_cal, y_cal).unwrap();
        let x_test = Array2::from_shape_fn((m, 2), |_| r.random_range(-1.0..1.0));
        let test = UnlabeledDataset::new(x_test).unwrap();
        let region = TargetRegion::orthant(vec![0.5]).unwrap();
        let predictor = TakeX { p: 2, d: 1 };

        let mut rng_int = rng(7);
        let got = cs_int(&cal, &test, &region, &predictor, 0.3, &mut rng_int).unwrap();

        // Replicate the derived per-dimension stream by hand.
        let mut outer = rng(7);
        let mut derived = ChaCha8Rng::seed_from_u64(outer.next_u64());
        let half = TargetRegion::half_line(0.5).unwrap();
        let coord = CoordinatePredictor {
            inner: &predictor,
            coord: 0,
        };
        let score = DistScore {
            region: &half,
            predictor: &coord,
            spec: DistScoreSpec::default(),
        };
        let direct = mcs_select(&cal, &test, &half, &score, 0.3, &mut derived).unwrap();
        assert_eq!(got, direct.selected);

        // cs_ib at d=1 uses the same level q/1 = q.
        let mut rng_ib = rng(7);
        let ib = cs_ib(&cal, &test, &region, &predictor, 0.3, &mut rng_ib).unwrap();
        assert_eq!(ib, got);
    }

    /// One dimension deterministically selects everything, the other nothing:
    /// the intersection is empty.
    #[test]
    fn empty_dimension_empties_the_intersection() {
        let n = 20;
        let m = 5;
        // Dimension 0: calibration labels interior (y=1 > 0), predictions at
        // depth 2 -> calibration scores M-2, test scores -2 => all selected.
        // Dimension 1: calibration labels outside (y=-1), predictions deep
        // inside (depth 5) -> calibration scores -5; test predictions outside
        // (depth 0) -> test scores 0 above every calibration score => none
        // selected.
        let mut x_cal = Array2::zeros((n, 2));
        let mut y_cal = Array2::zeros((n, 2));
        for i in 0..n {
            x_cal[[i, 0]] = 2.0; // dim-0 prediction, depth 2
            x_cal[[i, 1]] = 5.0; // dim-1 prediction, depth 5
            y_cal[[i, 0]] = 1.0;
            y_cal[[i, 1]] = -1.0;
        }
        let mut x_test = Array2::zeros((m, 2));
        for j in 0..m {
            x_test[[j, 0]] = 2.0;
            x_test[[j, 1]] = -3.0; // outside the half-line, depth 0
        }
        let cal = LabeledDataset::new(x_cal, y_cal).unwrap();
        let test = UnlabeledDataset::new(x_test).unwrap();
        let region = TargetRegion::orthant(vec![0.0, 0.0]).unwrap();
        let predictor = TakeX { p: 2, d: 2 };

        let mut r = rng(3);
        let got = cs_int(&cal, &test, &region, &predictor, 0.3, &mut r).unwrap();
        assert!(got.is_empty());

        // Dimension 0 alone would have selected everything.
        let region0 = TargetRegion::orthant(vec![0.0]).unwrap();
        let cal0 = LabeledDataset::new(
            cal.x().to_owned(),
            cal.y().column(0).to_owned().insert_axis(Axis(1)),
        )
        .unwrap();
        let predictor0 = TakeX { p: 2, d: 1 };
        let mut r0 = rng(3);
        let all = cs_int(&cal0, &test, &region0, &predictor0, 0.3, &mut r0).unwrap();
        assert_eq!(all, (0..m).collect::<Vec<_>>());
    }

    #[test]
    fn non_orthant_regions_are_rejected() {
        let cal = LabeledDataset::new(Array2::zeros((4, 2)), Array2::zeros((4, 2))).unwrap();
        let test = UnlabeledDataset::new(Array2::zeros((2, 2))).unwrap();
        let ball = TargetRegion::ball(vec![0.0, 0.0], 1.0).unwrap();
        let predictor = TakeX { p: 2, d: 2 };
        let mut r = rng(0);
        assert!(cs_int(&cal, &test, &ball, &predictor, 0.3, &mut r).is_err());
        assert!(cs_ib(&cal, &test, &ball, &predictor, 0.3, &mut r).is_err());
        assert!(
            cs_is(&cal, &test, &ball, &predictor, 0.3, &CsIsSpec::default(), &mut r).is_err()
        );
        // The binary reduction accepts any region.
        assert!(bi_select(&cal, &test, &ball, 0.3, &BiSpec::default(), &mut r).is_ok());
    }

    /// Everything in-region: holdout FDP is 0 at every level, so the largest
    /// grid level (q itself) is chosen and the result matches a hand-replayed
    /// cs_int on the retained calibration part.
    #[test]
    fn searched_level_picks_largest_passing() {
        let n = 24;
        let m = 6;
        let mut x_cal = Array2::zeros((n, 2));
        let mut y_cal = Array2::zeros((n, 2));
        for i in 0..n {
            x_cal[[i, 0]] = 2.0;
            x_cal[[i, 1]] = 2.0;
            y_cal[[i, 0]] = 1.0;
            y_cal[[i, 1]] = 1.0;
        }
        let x_test = Array2::from_elem((m, 2), 2.0);
        let cal = LabeledDataset::new(x_cal, y_cal).unwrap();
        let test = UnlabeledDataset::new(x_test).unwrap();
        let region = TargetRegion::orthant(vec![0.0, 0.0]).unwrap();
        let predictor = TakeX { p: 2, d: 2 };
        let spec = CsIsSpec {
            holdout_fraction: 0.5,
            grid_size: 4,
        };

        let mut r = rng(11);
        let got = cs_is(&cal, &test, &region, &predictor, 0.3, &spec, &mut r).unwrap();

        // Replay: shuffle, one holdout evaluation at the top level q (which
        // passes immediately), then the final selection at q.
        let mut replay = rng(11);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut replay);
        let (hold_idx, fit_idx) = order.split_at(12);
        let cal_rest = cal.subset(fit_idx).unwrap();
        let holdout_test = cal.subset(hold_idx).unwrap().unlabeled();
        let cutoffs = [0.0, 0.0];
        let _ = cs_int_at_level(&cal_rest, &holdout_test, &cutoffs, &predictor, 0.3, &mut replay)
            .unwrap();
        let expect =
            cs_int_at_level(&cal_rest, &test, &cutoffs, &predictor, 0.3, &mut replay).unwrap();
        assert_eq!(got, expect);
        assert_eq!(got, (0..m).collect::<Vec<_>>());
    }

    /// The level-search rule in isolation: largest passing candidate wins,
    /// lower candidates are never touched once one passes, and an
    /// all-failing grid falls back to the Bonferroni level.
    #[test]
    fn level_search_rule() {
        let levels = [0.1, 0.2, 0.3];
        // Monotone holdout FDP: only the smallest level passes.
        let got = search_level(&levels, 0.3, 0.05, |l| Ok(2.0 * l)).unwrap();
        assert_eq!(got, 0.1);
        // Every level fails: fallback.
        let got = search_level(&levels, 0.3, 0.05, |_| Ok(1.0)).unwrap();
        assert_eq!(got, 0.05);
        // Every level passes: the largest is kept after a single evaluation.
        let mut calls = 0;
        let got = search_level(&levels, 0.3, 0.05, |_| {
            calls += 1;
            Ok(0.0)
        })
        .unwrap();
        assert_eq!(got, 0.3);
        assert_eq!(calls, 1);
        // Errors propagate.
        assert!(search_level(&levels, 0.3, 0.05, |_| Err(Error::Empty { what: "x" })).is_err());
    }

    #[test]
    fn holdout_split_needs_both_parts() {
        let cal = LabeledDataset::new(Array2::zeros((1, 2)), Array2::zeros((1, 2))).unwrap();
        let test = UnlabeledDataset::new(Array2::zeros((2, 2))).unwrap();
        let region = TargetRegion::orthant(vec![0.0, 0.0]).unwrap();
        let predictor = TakeX { p: 2, d: 2 };
        let mut r = rng(0);
        let err = cs_is(
            &cal,
            &test,
            &region,
            &predictor,
            0.3,
            &CsIsSpec::default(),
            &mut r,
        );
        assert!(err.is_err());
    }

    /// A separable membership pattern: the classifier learns it, power is
    /// near-total, and the false discovery rate tracks the nominal level —
    /// staying within Monte Carlo slack of q and shrinking with it.
    #[test]
    fn binary_reduction_on_separable_data() {
        let region = TargetRegion::orthant(vec![0.0]).unwrap();
        let reps = 20;
        let mut fdp_sum = [0.0; 2];
        let mut power_sum = [0.0; 2];
        let qs = [0.2, 0.05];
        for rep in 0..reps {
            let mut r = rng(100 + rep);
            let n = 200;
            let m = 100;
            let x_cal = Array2::from_shape_fn((n, 3), |_| r.random_range(-1.0..1.0));
            let y_cal = Array2::from_shape_fn((n, 1), |(i, _)| x_cal[[i, 0]]);
            let cal = LabeledDataset::new(x_cal, y_cal).unwrap();
            let x_test = Array2::from_shape_fn((m, 3), |_| r.random_range(-1.0..1.0));
            let truth: Vec<bool> = (0..m).map(|j| x_test[[j, 0]] >= 0.0).collect();
            let test = UnlabeledDataset::new(x_test).unwrap();
            for (slot, &q) in qs.iter().enumerate() {
                let selected =
                    bi_select(&cal, &test, &region, q, &BiSpec::default(), &mut r).unwrap();
                let (fdp, power) = fdp_and_power(&selected, &truth);
                fdp_sum[slot] += fdp;
                power_sum[slot] += power;
                // Selections are sorted, in-range, unique.
                assert!(selected.windows(2).all(|w| w[0] < w[1]));
                assert!(selected.iter().all(|&j| j < m));
            }
        }
        let mean_fdp_20 = fdp_sum[0] / reps as f64;
        let mean_fdp_05 = fdp_sum[1] / reps as f64;
        let mean_power_20 = power_sum[0] / reps as f64;
        assert!(mean_fdp_20 <= 0.2 + 0.06, "mean FDP at q=0.2: {mean_fdp_20}");
        assert!(mean_fdp_05 <= 0.05 + 0.05, "mean FDP at q=0.05: {mean_fdp_05}");
        assert!(mean_fdp_05 < mean_fdp_20, "FDP should shrink with q");
        assert!(mean_power_20 >= 0.5, "mean power {mean_power_20}");
    }

    #[test]
    fn binary_reduction_is_seeded_and_handles_degenerate_classifiers() {
        let mut r = rng(5);
        let n = 30;
        let m = 10;
        let x_cal = Array2::from_shape_fn((n, 2), |_| r.random_range(-1.0..1.0));
        let y_cal = Array2::from_shape_fn((n, 2), |_| r.random_range(-1.0..1.0));
        let cal = LabeledDataset::new(x_cal, y_cal).unwrap();
        let x_test = Array2::from_shape_fn((m, 2), |_| r.random_range(-1.0..1.0));
        let test = UnlabeledDataset::new(x_test).unwrap();
        let ball = TargetRegion::ball(vec![0.0, 0.0], 0.8).unwrap();

        // Zero training steps leave the classifier constant at probability
        // 1/2: every test score ties and the selection is driven purely by
        // the tie-break draws — the call must still succeed.
        let frozen = BiSpec {
            steps: 0,
            ..BiSpec::default()
        };
        let mut r1 = rng(21);
        let a = bi_select(&cal, &test, &ball, 0.3, &frozen, &mut r1).unwrap();
        let mut r2 = rng(21);
        let b = bi_select(&cal, &test, &ball, 0.3, &frozen, &mut r2).unwrap();
        assert_eq!(a, b);

        // All labels on one side (tiny ball contains nothing): the
        // classifier is degenerate but the pipeline stays valid.
        let tiny = TargetRegion::ball(vec![9.0, 9.0], 0.01).unwrap();
        let mut r3 = rng(22);
        let sel = bi_select(&cal, &test, &tiny, 0.3, &BiSpec::default(), &mut r3).unwrap();
        assert!(sel.iter().all(|&j| j < m));
    }

    #[test]
    fn intersect_sorted_basics() {
        assert_eq!(intersect_sorted(&[0, 2, 4], &[1, 2, 3, 4]), vec![2, 4]);
        assert_eq!(intersect_sorted(&[], &[1, 2]), Vec::<usize>::new());
        assert_eq!(intersect_sorted(&[5], &[5]), vec![5]);
    }

    #[test]
    fn spec_validation() {
        assert!(CsIsSpec::default().validate().is_ok());
        assert!(CsIsSpec {
            holdout_fraction: 0.0,
            grid_size: 5
        }
        .validate()
        .is_err());
        assert!(CsIsSpec {
            holdout_fraction: 0.5,
            grid_size: 0
        }
        .validate()
        .is_err());
        assert!(BiSpec::default().validate().is_ok());
        assert!(BiSpec {
            lr: 0.0,
            ..BiSpec::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn dimension_mismatches_are_rejected() {
        let cal = LabeledDataset::new(Array2::zeros((6, 2)), Array2::zeros((6, 2))).unwrap();
        let test = UnlabeledDataset::new(Array2::zeros((2, 3))).unwrap(); // wrong p
        let region = TargetRegion::orthant(vec![0.0, 0.0]).unwrap();
        let predictor = TakeX { p: 2, d: 2 };
        let mut r = rng(0);
        assert!(cs_int(&cal, &test, &region, &predictor, 0.3, &mut r).is_err());
        let region3 = TargetRegion::orthant(vec![0.0, 0.0, 0.0]).unwrap();
        let test_ok = UnlabeledDataset::new(Array2::zeros((2, 2))).unwrap();
        assert!(cs_int(&cal, &test_ok, &region3, &predictor, 0.3, &mut r).is_err());
    }
}
