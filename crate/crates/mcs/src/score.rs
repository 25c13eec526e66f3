//! Nonconformity scores.
//!
//! A score `V(x, y)` orders covariate/response pairs so that responses inside
//! the target region never score below responses outside it (*regional
//! monotonicity*). Selection compares test scores — evaluated at a region
//! boundary point, since the test response is unobserved — against
//! calibration scores; the monotonicity property is what turns small
//! p-values into evidence that the true response lies in the region.
//!
//! Two distance-based families are provided. The *regular* score uses the
//! region depth of both the response and the prediction; the *clipped* score
//! replaces the response term with a large constant times an interior
//! indicator, which concentrates in-region calibration scores at the top and
//! in practice buys more selection power.

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::predict::{LogisticModel, Predictor};
use crate::region::{Norm, TargetRegion};

/// A regionally monotone nonconformity score.
///
/// Implementations must guarantee: if `y_out` is outside the region and
/// `y_in` inside, then `score(x, y_out) <= score(x, y_in)` for every `x`.
pub trait NonconformityScore {
    /// Evaluate `V(x, y)`.
    fn score(&self, x: &[f64], y: &[f64]) -> Result<f64>;
}

/// Which distance-based score family to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreKind {
    /// `depth(y) - depth(prediction)`.
    Regular,
    /// `M * 1{y interior} - depth(prediction)`.
    Clipped,
    /// `M * 1{y interior} - prob_in_region(x)`; needs a classifier.
    ProbClipped,
}

impl FromStr for ScoreKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "regular" => Ok(ScoreKind::Regular),
            "clipped" => Ok(ScoreKind::Clipped),
            "prob_clipped" => Ok(ScoreKind::ProbClipped),
            other => Err(Error::InvalidArgument {
                what: "score kind",
                why: format!("expected regular, clipped or prob_clipped, got {other:?}"),
            }),
        }
    }
}

impl std::fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ScoreKind::Regular => "regular",
            ScoreKind::Clipped => "clipped",
            ScoreKind::ProbClipped => "prob_clipped",
        })
    }
}

/// Configuration of a distance-based score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistScoreSpec {
    pub kind: ScoreKind,
    /// Clipping constant `M`; must dominate every other score term.
    pub big_m: f64,
    /// Norm used for region depths.
    pub norm: Norm,
}

impl Default for DistScoreSpec {
    fn default() -> Self {
        DistScoreSpec {
            kind: ScoreKind::Clipped,
            big_m: 1e6,
            norm: Norm::L2,
        }
    }
}

impl DistScoreSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.big_m.is_finite() && self.big_m > 0.0) {
            return Err(Error::InvalidArgument {
                what: "big_m",
                why: format!("must be finite and positive, got {}", self.big_m),
            });
        }
        Ok(())
    }
}

/// Regular distance score: `depth(y) - depth(prediction)`, where depth is the
/// distance to the region complement.
pub fn score_regular(
    region: &TargetRegion,
    prediction: &[f64],
    y: &[f64],
    norm: Norm,
) -> Result<f64> {
    let dy = region.dist_to_complement(y, norm)?;
    let dp = region.dist_to_complement(prediction, norm)?;
    Ok(dy - dp)
}

/// Clipped distance score: `big_m * 1{y in interior} - depth(prediction)`.
pub fn score_clipped(
    region: &TargetRegion,
    prediction: &[f64],
    y: &[f64],
    big_m: f64,
    norm: Norm,
) -> Result<f64> {
    let indicator = if region.interior(y)? { big_m } else { 0.0 };
    let dp = region.dist_to_complement(prediction, norm)?;
    Ok(indicator - dp)
}

/// Probability-based clipped score:
/// `big_m * 1{y in interior} - prob_in_region`.
pub fn score_prob_clipped(
    region: &TargetRegion,
    prob_in_region: f64,
    y: &[f64],
    big_m: f64,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&prob_in_region) {
        return Err(Error::InvalidArgument {
            what: "prob_in_region",
            why: format!("must be in [0,1], got {prob_in_region}"),
        });
    }
    let indicator = if region.interior(y)? { big_m } else { 0.0 };
    Ok(indicator - prob_in_region)
}

/// A distance-based score bound to a region and a fitted predictor.
pub struct DistScore<'a> {
    pub region: &'a TargetRegion,
    pub predictor: &'a dyn Predictor,
    pub spec: DistScoreSpec,
}

impl NonconformityScore for DistScore<'_> {
    fn score(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.spec.validate()?;
        let prediction = self.predictor.predict_one(x)?;
        match self.spec.kind {
            ScoreKind::Regular => score_regular(self.region, &prediction, y, self.spec.norm),
            ScoreKind::Clipped => {
                score_clipped(self.region, &prediction, y, self.spec.big_m, self.spec.norm)
            }
            ScoreKind::ProbClipped => Err(Error::InvalidArgument {
                what: "score kind",
                why: "prob_clipped needs a classifier; use ProbScore".into(),
            }),
        }
    }
}

/// The probability-based score bound to a region and a logistic classifier
/// predicting membership.
pub struct ProbScore<'a> {
    pub region: &'a TargetRegion,
    pub classifier: &'a LogisticModel,
    pub big_m: f64,
}

impl NonconformityScore for ProbScore<'_> {
    fn score(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let prob = self.classifier.predict_prob(x)?;
        score_prob_clipped(self.region, prob, y, self.big_m)
    }
}
