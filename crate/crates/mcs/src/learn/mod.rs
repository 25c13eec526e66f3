//! Learned nonconformity scores.
//!
//! A small neural network `f` maps a configurable arrangement of covariates,
//! plug-in predictions, and (optionally) responses to a real value; the score
//! of a labeled point is `big_m * 1{y interior} - f(inputs)`, which keeps the
//! clipped structure required for finite-sample FDR control while letting the
//! data shape the tie-breaking term. Training maximizes a smooth surrogate of
//! the selection count (or minimizes a signed p-value penalty), with
//! gradients flowing end-to-end through soft ranks and batch normalization.
//! Validation replays the selection pipeline on held-out splits and keeps the
//! epoch with the highest average power.

mod mlp;

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::conformal::{bh_select, conformal_p_values, fdp_and_power};
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::predict::{model_io, Predictor};
use crate::region::TargetRegion;
use crate::score::NonconformityScore;
use crate::softsort::{soft_rank, soft_rank_with_plan};

use mlp::{Grads, Mlp};

/// Which inputs the learned network consumes.
///
/// Families that exclude the response (`CovariateOnly`, `PredictionOnly`,
/// `CovariateAndPrediction`) yield regionally monotone scores by
/// construction. Families that include it (`FullWithY`, `AllInputs`) rely on
/// `big_m` dominating the network output; that condition is checked after
/// training and its failure is a hard error.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub enum InputFamily {
    /// `[x]`
    CovariateOnly,
    /// `[prediction]`
    PredictionOnly,
    /// `[x, prediction]`
    #[default]
    CovariateAndPrediction,
    /// `[x, y]`
    FullWithY,
    /// `[x, prediction, y]`
    AllInputs,
}

impl InputFamily {
    pub const ALL: [InputFamily; 5] = [
        InputFamily::CovariateOnly,
        InputFamily::PredictionOnly,
        InputFamily::CovariateAndPrediction,
        InputFamily::FullWithY,
        InputFamily::AllInputs,
    ];

    /// Numeric id, 1 through 5.
    pub fn id(self) -> u8 {
        match self {
            InputFamily::CovariateOnly => 1,
            InputFamily::PredictionOnly => 2,
            InputFamily::CovariateAndPrediction => 3,
            InputFamily::FullWithY => 4,
            InputFamily::AllInputs => 5,
        }
    }

    pub fn from_id(id: u8) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.id() == id)
            .ok_or_else(|| Error::InvalidArgument {
                what: "input family",
                why: format!("unknown family id {id}; expected 1..=5"),
            })
    }

    pub fn name(self) -> &'static str {
        match self {
            InputFamily::CovariateOnly => "covariate_only",
            InputFamily::PredictionOnly => "prediction_only",
            InputFamily::CovariateAndPrediction => "covariate_and_prediction",
            InputFamily::FullWithY => "full_with_y",
            InputFamily::AllInputs => "all_inputs",
        }
    }

    /// Does the input arrangement contain the raw covariates?
    pub fn uses_covariates(self) -> bool {
        !matches!(self, InputFamily::PredictionOnly)
    }

    /// Does the input arrangement contain the plug-in prediction?
    pub fn uses_prediction(self) -> bool {
        matches!(
            self,
            InputFamily::PredictionOnly
                | InputFamily::CovariateAndPrediction
                | InputFamily::AllInputs
        )
    }

    /// Does the input arrangement contain the response itself?
    pub fn uses_response(self) -> bool {
        matches!(self, InputFamily::FullWithY | InputFamily::AllInputs)
    }

    /// Length of the concatenated input vector.
    pub fn input_dim(self, covariate_dim: usize, response_dim: usize) -> usize {
        let mut n = 0;
        if self.uses_covariates() {
            n += covariate_dim;
        }
        if self.uses_prediction() {
            n += response_dim;
        }
        if self.uses_response() {
            n += response_dim;
        }
        n
    }
}

impl std::fmt::Display for InputFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for InputFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Ok(id) = s.parse::<u8>() {
            return Self::from_id(id);
        }
        Self::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidArgument {
                what: "input family",
                why: format!("unknown family {s:?}; expected a name like covariate_and_prediction or an id 1..=5"),
            })
    }
}

/// Training objective.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum TrainLoss {
    /// Negative log of a softened selection count built from soft ranks of
    /// the smooth p-values.
    SmoothSelection,
    /// Signed sum of smooth p-values: in-region points push their p-values
    /// down, out-of-region points push them up (weighted by `gamma`).
    #[default]
    PPenalty,
}

impl TrainLoss {
    pub fn name(self) -> &'static str {
        match self {
            TrainLoss::SmoothSelection => "smooth_selection",
            TrainLoss::PPenalty => "p_penalty",
        }
    }
}

impl std::fmt::Display for TrainLoss {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for TrainLoss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "smooth_selection" | "l1" | "L1" => Ok(TrainLoss::SmoothSelection),
            "p_penalty" | "l2" | "L2" => Ok(TrainLoss::PPenalty),
            _ => Err(Error::InvalidArgument {
                what: "training loss",
                why: format!("unknown loss {s:?}; expected smooth_selection or p_penalty"),
            }),
        }
    }
}

/// Hyper-parameters for [`train_score`].
#[derive(Debug, Clone)]
pub struct TrainConfig {
    /// Nominal FDR level used by the validation selections.
    pub q: f64,
    pub loss: TrainLoss,
    pub family: InputFamily,
    /// Hidden width of the two-layer network.
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    /// Temperature of the sigmoid inside the smooth-selection loss.
    pub tau: f64,
    /// Out-of-region weight of the p-penalty loss.
    pub gamma: f64,
    /// Soft-rank regularization strength.
    pub epsilon: f64,
    /// Number of random validation partitions per epoch.
    pub k_partitions: usize,
    /// Clipping constant of the resulting score.
    pub big_m: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            q: 0.1,
            loss: TrainLoss::default(),
            family: InputFamily::default(),
            hidden: 64,
            epochs: 200,
            learning_rate: 1e-2,
            momentum: 0.9,
            tau: 0.01,
            gamma: 0.5,
            epsilon: 0.1,
            k_partitions: 100,
            big_m: 1e6,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &'static str, why: &str| {
            Err(Error::InvalidArgument {
                what,
                why: why.to_string(),
            })
        };
        if !(self.q > 0.0 && self.q < 1.0) {
            return bad("q", "must lie strictly between 0 and 1");
        }
        if self.hidden == 0 {
            return bad("hidden width", "must be at least 1");
        }
        if self.epochs == 0 {
            return bad("epochs", "must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate", "must be positive and finite");
        }
        if !(self.momentum >= 0.0 && self.momentum < 1.0) {
            return bad("momentum", "must lie in [0, 1)");
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad("tau", "must be positive and finite");
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return bad("gamma", "must be nonnegative and finite");
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon", "must be positive and finite");
        }
        if self.k_partitions == 0 {
            return bad("validation partitions", "must be at least 1");
        }
        if !(self.big_m > 0.0 && self.big_m.is_finite()) {
            return bad("big_m", "must be positive and finite");
        }
        Ok(())
    }
}

/// A trained score network plus the metadata needed to evaluate it.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreModel {
    mlp: Mlp,
    family: InputFamily,
    big_m: f64,
    covariate_dim: usize,
    response_dim: usize,
}

impl ScoreModel {
    /// Freshly initialized network (uniform `±1/sqrt(fan_in)` layers, identity
    /// batchnorm), deterministic in `seed`.
    pub fn init(
        family: InputFamily,
        covariate_dim: usize,
        response_dim: usize,
        hidden: usize,
        big_m: f64,
        seed: u64,
    ) -> Result<Self> {
        if covariate_dim == 0 {
            return Err(Error::Empty {
                what: "covariate dimension",
            });
        }
        if response_dim == 0 {
            return Err(Error::Empty {
                what: "response dimension",
            });
        }
        if hidden == 0 {
            return Err(Error::InvalidArgument {
                what: "hidden width",
                why: "must be at least 1".to_string(),
            });
        }
        if !(big_m > 0.0 && big_m.is_finite()) {
            return Err(Error::InvalidArgument {
                what: "big_m",
                why: "must be positive and finite".to_string(),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mlp = Mlp::init(family.input_dim(covariate_dim, response_dim), hidden, &mut rng);
        Ok(ScoreModel {
            mlp,
            family,
            big_m,
            covariate_dim,
            response_dim,
        })
    }

    pub fn family(&self) -> InputFamily {
        self.family
    }

    pub fn big_m(&self) -> f64 {
        self.big_m
    }

    pub fn covariate_dim(&self) -> usize {
        self.covariate_dim
    }

    pub fn response_dim(&self) -> usize {
        self.response_dim
    }

    pub fn hidden(&self) -> usize {
        self.mlp.hidden()
    }

    /// Length of the concatenated input rows the network expects.
    pub fn input_dim(&self) -> usize {
        self.mlp.in_dim()
    }

    pub fn param_count(&self) -> usize {
        self.mlp.param_count()
    }

    /// Trainable parameters in a fixed order (`w1` row-major, `b1`, batchnorm
    /// scale, batchnorm shift, `w2`, `b2`); running statistics are excluded.
    pub fn params_flat(&self) -> Vec<f64> {
        self.mlp.flatten()
    }

    pub fn set_params_flat(&mut self, params: &[f64]) -> Result<()> {
        if params.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "model parameters",
            });
        }
        self.mlp.set_from_flat(params)
    }

    /// Run the network on a batch of pre-assembled input rows.
    ///
    /// In training mode batch normalization uses batch statistics and updates
    /// the running statistics (hence `&mut`); in evaluation mode rows are
    /// independent and the model is untouched.
    pub fn forward(&mut self, inputs: ArrayView2<'_, f64>, training: bool) -> Result<Array1<f64>> {
        self.check_inputs(inputs)?;
        if training {
            Ok(self.mlp.forward_train(inputs, true).0)
        } else {
            Ok(self.mlp.forward_eval(inputs))
        }
    }

    /// Evaluation-mode forward that does not require `&mut`.
    pub fn forward_eval(&self, inputs: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        self.check_inputs(inputs)?;
        Ok(self.mlp.forward_eval(inputs))
    }

    fn check_inputs(&self, inputs: ArrayView2<'_, f64>) -> Result<()> {
        if inputs.nrows() == 0 {
            return Err(Error::Empty {
                what: "network input batch",
            });
        }
        if inputs.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                what: "network input width",
                expected: self.input_dim(),
                got: inputs.ncols(),
            });
        }
        if inputs.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "network inputs",
            });
        }
        Ok(())
    }

    fn eval_one(&self, input: &[f64]) -> f64 {
        let view = ArrayView2::from_shape((1, input.len()), input).expect("row shape");
        self.mlp.forward_eval(view)[0]
    }

    /// Score of one point: `big_m * 1{y_or_r interior} - f(inputs)`.
    ///
    /// Passing a region boundary point for `y_or_r` zeroes the indicator,
    /// which is how test points are scored. `mu_pred` is ignored by families
    /// that do not consume the prediction.
    pub fn score_eval(
        &self,
        region: &TargetRegion,
        x: &[f64],
        mu_pred: &[f64],
        y_or_r: &[f64],
    ) -> Result<f64> {
        if region.dim() != self.response_dim {
            return Err(Error::DimensionMismatch {
                what: "region dimension",
                expected: self.response_dim,
                got: region.dim(),
            });
        }
        if x.len() != self.covariate_dim {
            return Err(Error::DimensionMismatch {
                what: "covariate vector",
                expected: self.covariate_dim,
                got: x.len(),
            });
        }
        if y_or_r.len() != self.response_dim {
            return Err(Error::DimensionMismatch {
                what: "response vector",
                expected: self.response_dim,
                got: y_or_r.len(),
            });
        }
        let mut input = Vec::with_capacity(self.input_dim());
        if self.family.uses_covariates() {
            input.extend_from_slice(x);
        }
        if self.family.uses_prediction() {
            if mu_pred.len() != self.response_dim {
                return Err(Error::DimensionMismatch {
                    what: "prediction vector",
                    expected: self.response_dim,
                    got: mu_pred.len(),
                });
            }
            input.extend_from_slice(mu_pred);
        }
        if self.family.uses_response() {
            input.extend_from_slice(y_or_r);
        }
        if input.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "score inputs",
            });
        }
        let indicator = if region.interior(y_or_r)? { 1.0 } else { 0.0 };
        Ok(self.big_m * indicator - self.eval_one(&input))
    }

    /// Write the model to a versioned text file.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        out.push_str(&format!("{} score\n", model_io::MAGIC));
        out.push_str(&format!(
            "{} {} {} {} {}\n",
            self.family.id(),
            self.covariate_dim,
            self.response_dim,
            self.hidden(),
            self.big_m
        ));
        for row in self.mlp.w1.rows() {
            out.push_str(&model_io::join(row.iter()));
            out.push('\n');
        }
        for part in [
            &self.mlp.b1,
            &self.mlp.gamma,
            &self.mlp.beta,
            &self.mlp.run_mean,
            &self.mlp.run_var,
            &self.mlp.w2,
        ] {
            out.push_str(&model_io::join(part.iter()));
            out.push('\n');
        }
        out.push_str(&model_io::join(std::iter::once(&self.mlp.b2)));
        out.push('\n');
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut r = model_io::Reader::new(&text);
        r.expect_kind("score")?;
        let meta = r.floats("model shape", 5)?;
        let family = InputFamily::from_id(model_io::index(meta[0])? as u8)
            .map_err(|_| Error::ModelFormat(format!("bad family id {}", meta[0])))?;
        let covariate_dim = model_io::index(meta[1])?;
        let response_dim = model_io::index(meta[2])?;
        let hidden = model_io::index(meta[3])?;
        let big_m = meta[4];
        if covariate_dim == 0 || response_dim == 0 || hidden == 0 {
            return Err(Error::ModelFormat("zero dimension in model shape".to_string()));
        }
        if !(big_m > 0.0 && big_m.is_finite()) {
            return Err(Error::ModelFormat(format!("bad clipping constant {big_m}")));
        }
        let in_dim = family.input_dim(covariate_dim, response_dim);
        let mut w1 = Array2::zeros((in_dim, hidden));
        for i in 0..in_dim {
            let row = r.floats("layer1 weights", hidden)?;
            for (j, v) in row.into_iter().enumerate() {
                w1[[i, j]] = v;
            }
        }
        let b1 = Array1::from_vec(r.floats("layer1 bias", hidden)?);
        let gamma = Array1::from_vec(r.floats("batchnorm scale", hidden)?);
        let beta = Array1::from_vec(r.floats("batchnorm shift", hidden)?);
        let run_mean = Array1::from_vec(r.floats("running mean", hidden)?);
        let run_var = Array1::from_vec(r.floats("running variance", hidden)?);
        let w2 = Array1::from_vec(r.floats("layer2 weights", hidden)?);
        let b2 = r.floats("layer2 bias", 1)?[0];
        r.finish()?;
        let mlp = Mlp {
            w1,
            b1,
            gamma,
            beta,
            run_mean,
            run_var,
            w2,
            b2,
        };
        if mlp.flatten().iter().any(|v| !v.is_finite())
            || mlp.run_mean.iter().chain(mlp.run_var.iter()).any(|v| !v.is_finite())
        {
            return Err(Error::ModelFormat("non-finite model parameter".to_string()));
        }
        if mlp.run_var.iter().any(|&v| v < 0.0) {
            return Err(Error::ModelFormat("negative running variance".to_string()));
        }
        Ok(ScoreModel {
            mlp,
            family,
            big_m,
            covariate_dim,
            response_dim,
        })
    }
}

/// Adapter that turns a [`ScoreModel`] into a [`NonconformityScore`] for the
/// selection pipeline. The predictor is only consulted for families that
/// consume the plug-in prediction.
pub struct LearnedScore<'a> {
    pub model: &'a ScoreModel,
    pub region: &'a TargetRegion,
    pub predictor: Option<&'a dyn Predictor>,
}

impl NonconformityScore for LearnedScore<'_> {
    fn score(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let mu = if self.model.family().uses_prediction() {
            let predictor = self.predictor.ok_or_else(|| Error::InvalidArgument {
                what: "learned score",
                why: format!(
                    "input family {} consumes the prediction; a fitted predictor is required",
                    self.model.family()
                ),
            })?;
            predictor.predict_one(x)?
        } else {
            Vec::new()
        };
        self.model.score_eval(self.region, x, &mu, y)
    }
}

fn predictions_for(
    family: InputFamily,
    predictor: Option<&dyn Predictor>,
    data: &LabeledDataset,
) -> Result<Option<Array2<f64>>> {
    if !family.uses_prediction() {
        return Ok(None);
    }
    let predictor = predictor.ok_or_else(|| Error::InvalidArgument {
        what: "input family",
        why: format!("family {family} consumes the prediction; a fitted predictor is required"),
    })?;
    if predictor.input_dim() != data.covariate_dim() {
        return Err(Error::DimensionMismatch {
            what: "predictor input dimension",
            expected: data.covariate_dim(),
            got: predictor.input_dim(),
        });
    }
    if predictor.output_dim() != data.response_dim() {
        return Err(Error::DimensionMismatch {
            what: "predictor output dimension",
            expected: data.response_dim(),
            got: predictor.output_dim(),
        });
    }
    Ok(Some(predictor.predict(data.x())?))
}

/// Assemble the network input matrix for a dataset. When `boundary` is given
/// it replaces every response (how test-side scores are formed); otherwise the
/// true responses are used.
fn build_inputs(
    family: InputFamily,
    data: &LabeledDataset,
    mu: Option<&Array2<f64>>,
    boundary: Option<&[f64]>,
) -> Array2<f64> {
    let n = data.n();
    let in_dim = family.input_dim(data.covariate_dim(), data.response_dim());
    let mut out = Array2::zeros((n, in_dim));
    let mut row_buf = Vec::with_capacity(in_dim);
    for i in 0..n {
        row_buf.clear();
        if family.uses_covariates() {
            row_buf.extend_from_slice(data.x_row(i));
        }
        if family.uses_prediction() {
            let mu = mu.expect("prediction matrix required for this family");
            row_buf.extend(mu.row(i).iter().copied());
        }
        if family.uses_response() {
            match boundary {
                Some(r) => row_buf.extend_from_slice(r),
                None => row_buf.extend_from_slice(data.y_row(i)),
            }
        }
        debug_assert_eq!(row_buf.len(), in_dim);
        for (j, v) in row_buf.iter().enumerate() {
            out[[i, j]] = *v;
        }
    }
    out
}

fn check_learn_dims(model: &ScoreModel, region: &TargetRegion, data: &LabeledDataset) -> Result<()> {
    if region.dim() != model.response_dim() {
        return Err(Error::DimensionMismatch {
            what: "region dimension",
            expected: model.response_dim(),
            got: region.dim(),
        });
    }
    if data.covariate_dim() != model.covariate_dim() {
        return Err(Error::DimensionMismatch {
            what: "covariate dimension",
            expected: model.covariate_dim(),
            got: data.covariate_dim(),
        });
    }
    if data.response_dim() != model.response_dim() {
        return Err(Error::DimensionMismatch {
            what: "response dimension",
            expected: model.response_dim(),
            got: data.response_dim(),
        });
    }
    Ok(())
}

/// Smooth conformal p-values of the second split against the first.
///
/// For each point of `test_part`, the vector of calibration scores plus that
/// point's test-side score (network evaluated with the response replaced by
/// the region's boundary point) is soft-ranked; the test element's soft rank
/// divided by `n' + 1` is its smooth p-value. As `epsilon` shrinks and in the
/// absence of ties this converges to the deterministic upper-rank p-value.
pub fn smooth_p_values(
    model: &ScoreModel,
    region: &TargetRegion,
    predictor: Option<&dyn Predictor>,
    cal_part: &LabeledDataset,
    test_part: &LabeledDataset,
    epsilon: f64,
) -> Result<Vec<f64>> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidArgument {
            what: "epsilon",
            why: "must be positive and finite".to_string(),
        });
    }
    if cal_part.n() == 0 {
        return Err(Error::Empty {
            what: "calibration-role split",
        });
    }
    if test_part.n() == 0 {
        return Err(Error::Empty {
            what: "test-role split",
        });
    }
    check_learn_dims(model, region, cal_part)?;
    check_learn_dims(model, region, test_part)?;

    let family = model.family();
    let mu_cal = predictions_for(family, predictor, cal_part)?;
    let mu_test = predictions_for(family, predictor, test_part)?;

    let inputs_cal = build_inputs(family, cal_part, mu_cal.as_ref(), None);
    let f_cal = model.forward_eval(inputs_cal.view())?;
    let mut cal_scores = Vec::with_capacity(cal_part.n());
    for i in 0..cal_part.n() {
        let indicator = if region.interior(cal_part.y_row(i))? { 1.0 } else { 0.0 };
        cal_scores.push(model.big_m() * indicator - f_cal[i]);
    }

    let r = region.boundary_point();
    let inputs_test = build_inputs(family, test_part, mu_test.as_ref(), Some(&r));
    let f_test = model.forward_eval(inputs_test.view())?;

    let n = cal_scores.len();
    let mut buf = Vec::with_capacity(n + 1);
    let mut out = Vec::with_capacity(test_part.n());
    for j in 0..test_part.n() {
        buf.clear();
        buf.extend_from_slice(&cal_scores);
        buf.push(-f_test[j]);
        let ranks = soft_rank(&buf, epsilon)?;
        out.push(ranks[n] / (n as f64 + 1.0));
    }
    Ok(out)
}

fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

fn check_p_bar(p_bar: &[f64]) -> Result<()> {
    if p_bar.is_empty() {
        return Err(Error::Empty {
            what: "smooth p-values",
        });
    }
    if p_bar.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "smooth p-values",
        });
    }
    Ok(())
}

/// Smooth-selection loss: the negative log of a softened selection count.
///
/// Soft ranks `a` of the smooth p-values stand in for the sort of the
/// step-up procedure, `sigmoid((q a_j / m' - p_j) / tau)` softens each
/// comparison, and the log-sum-exp of `a_j s_j` aggregates them.
pub fn loss_smooth_selection(p_bar: &[f64], q: f64, tau: f64, epsilon: f64) -> Result<f64> {
    check_p_bar(p_bar)?;
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidArgument {
            what: "q",
            why: "must lie strictly between 0 and 1".to_string(),
        });
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidArgument {
            what: "tau",
            why: "must be positive and finite".to_string(),
        });
    }
    let a = soft_rank(p_bar, epsilon)?;
    let m = p_bar.len() as f64;
    let t: Vec<f64> = a
        .iter()
        .zip(p_bar)
        .map(|(&aj, &pj)| aj * sigmoid((q * aj / m - pj) / tau))
        .collect();
    Ok(-log_sum_exp(&t))
}

fn log_sum_exp(t: &[f64]) -> f64 {
    let mx = t.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    mx + t.iter().map(|&v| (v - mx).exp()).sum::<f64>().ln()
}

/// Smooth-selection loss together with its gradient in the smooth p-values.
fn loss_smooth_selection_grad(
    p_bar: &[f64],
    q: f64,
    tau: f64,
    epsilon: f64,
) -> Result<(f64, Vec<f64>)> {
    let m = p_bar.len() as f64;
    let (a, plan) = soft_rank_with_plan(p_bar, epsilon)?;
    let mut s = Vec::with_capacity(p_bar.len());
    let mut t = Vec::with_capacity(p_bar.len());
    for (&aj, &pj) in a.iter().zip(p_bar) {
        let sj = sigmoid((q * aj / m - pj) / tau);
        s.push(sj);
        t.push(aj * sj);
    }
    let lse = log_sum_exp(&t);
    let loss = -lse;

    // d loss / d t_j = -softmax(t)_j; t_j = a_j s_j with
    // s_j = sigmoid((q a_j / m - p_j) / tau).
    let mut grad_a = vec![0.0; p_bar.len()];
    let mut grad_direct = vec![0.0; p_bar.len()];
    for j in 0..p_bar.len() {
        let w = -((t[j] - lse).exp());
        let slope = s[j] * (1.0 - s[j]);
        grad_a[j] = w * (s[j] + a[j] * slope * q / (m * tau));
        grad_direct[j] = w * a[j] * slope * (-1.0 / tau);
    }
    let through_ranks = plan.vjp(&grad_a)?;
    let grad: Vec<f64> = grad_direct
        .iter()
        .zip(&through_ranks)
        .map(|(d, r)| d + r)
        .collect();
    Ok((loss, grad))
}

/// P-penalty loss: `sum_j p_j * (1{in region} - gamma * 1{not in region})`.
pub fn loss_p_penalty(p_bar: &[f64], in_region: &[bool], gamma: f64) -> Result<f64> {
    check_p_bar(p_bar)?;
    if in_region.len() != p_bar.len() {
        return Err(Error::DimensionMismatch {
            what: "region indicators",
            expected: p_bar.len(),
            got: in_region.len(),
        });
    }
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidArgument {
            what: "gamma",
            why: "must be nonnegative and finite".to_string(),
        });
    }
    Ok(p_bar
        .iter()
        .zip(in_region)
        .map(|(&p, &inside)| p * if inside { 1.0 } else { -gamma })
        .sum())
}

fn loss_p_penalty_grad(p_bar: &[f64], in_region: &[bool], gamma: f64) -> Result<(f64, Vec<f64>)> {
    let loss = loss_p_penalty(p_bar, in_region, gamma)?;
    let grad = in_region
        .iter()
        .map(|&inside| if inside { 1.0 } else { -gamma })
        .collect();
    Ok((loss, grad))
}

/// One training batch: the first `n1` rows play the calibration role (inputs
/// built from true responses, `interior1` flags), the rest play the test role
/// (inputs built at the boundary point, `in_region2` labels for the loss).
struct EpochBatch<'a> {
    inputs: ArrayView2<'a, f64>,
    n1: usize,
    interior1: &'a [bool],
    in_region2: &'a [bool],
}

/// Forward + loss + full backward over one batch. Pure in the model when
/// `update_running` is false, which is what the gradient checks rely on.
fn batch_loss_and_grads(
    mlp: &mut Mlp,
    batch: &EpochBatch<'_>,
    config: &TrainConfig,
    big_m: f64,
    update_running: bool,
    epoch: usize,
) -> Result<(f64, Grads)> {
    let n1 = batch.n1;
    let m1 = batch.inputs.nrows() - n1;
    debug_assert!(n1 >= 1 && m1 >= 1);
    let (f, cache) = mlp.forward_train(batch.inputs, update_running);
    if f.iter().any(|v| !v.is_finite()) {
        return Err(Error::TrainingDiverged { epoch });
    }

    let cal_scores: Vec<f64> = (0..n1)
        .map(|i| big_m * if batch.interior1[i] { 1.0 } else { 0.0 } - f[i])
        .collect();

    // Per test-role point: soft-rank the calibration scores plus its own
    // score, keep the plan for the backward pass.
    let mut p_bar = Vec::with_capacity(m1);
    let mut plans = Vec::with_capacity(m1);
    let mut buf = Vec::with_capacity(n1 + 1);
    for j in 0..m1 {
        buf.clear();
        buf.extend_from_slice(&cal_scores);
        buf.push(-f[n1 + j]);
        let (ranks, plan) = soft_rank_with_plan(&buf, config.epsilon)?;
        p_bar.push(ranks[n1] / (n1 as f64 + 1.0));
        plans.push(plan);
    }

    let (loss, dp_bar) = match config.loss {
        TrainLoss::SmoothSelection => {
            loss_smooth_selection_grad(&p_bar, config.q, config.tau, config.epsilon)?
        }
        TrainLoss::PPenalty => loss_p_penalty_grad(&p_bar, batch.in_region2, config.gamma)?,
    };
    if !loss.is_finite() {
        return Err(Error::TrainingDiverged { epoch });
    }

    // Pull each dL/dp_j back through its soft-rank, accumulating into the
    // score gradient; scores depend on f with a plain sign flip.
    let mut d_cal = vec![0.0; n1];
    let mut df = Array1::<f64>::zeros(n1 + m1);
    let mut upstream = vec![0.0; n1 + 1];
    for j in 0..m1 {
        upstream[n1] = dp_bar[j] / (n1 as f64 + 1.0);
        let g = plans[j].vjp(&upstream)?;
        for i in 0..n1 {
            d_cal[i] += g[i];
        }
        df[n1 + j] = -g[n1];
    }
    for i in 0..n1 {
        df[i] = -d_cal[i];
    }
    Ok((loss, mlp.backward(&cache, &df)))
}

/// Training loss and its gradient in the flat parameter vector, for one fixed
/// calibration-role/test-role split. Batch normalization runs in training
/// mode (batch statistics) but the stored running statistics are left
/// untouched, so the function is pure in the model and suitable for
/// finite-difference comparison. Loss knobs come from `config`; the clipping
/// constant comes from the model.
pub fn training_loss_and_grad(
    model: &ScoreModel,
    region: &TargetRegion,
    predictor: Option<&dyn Predictor>,
    cal_part: &LabeledDataset,
    test_part: &LabeledDataset,
    config: &TrainConfig,
) -> Result<(f64, Vec<f64>)> {
    config.validate()?;
    if cal_part.n() == 0 {
        return Err(Error::Empty {
            what: "calibration-role split",
        });
    }
    if test_part.n() == 0 {
        return Err(Error::Empty {
            what: "test-role split",
        });
    }
    check_learn_dims(model, region, cal_part)?;
    check_learn_dims(model, region, test_part)?;

    let family = model.family();
    let mu_cal = predictions_for(family, predictor, cal_part)?;
    let mu_test = predictions_for(family, predictor, test_part)?;
    let inputs_cal = build_inputs(family, cal_part, mu_cal.as_ref(), None);
    let r = region.boundary_point();
    let inputs_test = build_inputs(family, test_part, mu_test.as_ref(), Some(&r));

    let n1 = cal_part.n();
    let m1 = test_part.n();
    let mut batch = Array2::zeros((n1 + m1, model.input_dim()));
    for i in 0..n1 {
        batch.row_mut(i).assign(&inputs_cal.row(i));
    }
    for j in 0..m1 {
        batch.row_mut(n1 + j).assign(&inputs_test.row(j));
    }
    let mut interior1 = Vec::with_capacity(n1);
    for i in 0..n1 {
        interior1.push(region.interior(cal_part.y_row(i))?);
    }
    let mut in_region2 = Vec::with_capacity(m1);
    for j in 0..m1 {
        in_region2.push(region.contains(test_part.y_row(j))?);
    }

    let mut mlp = model.mlp.clone();
    let (loss, grads) = batch_loss_and_grads(
        &mut mlp,
        &EpochBatch {
            inputs: batch.view(),
            n1,
            interior1: &interior1,
            in_region2: &in_region2,
        },
        config,
        model.big_m(),
        false,
        0,
    )?;
    Ok((loss, Mlp::flatten_grads(&grads)))
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    /// 1-based epoch number.
    pub epoch: usize,
    /// Training loss of the epoch's batch (before the parameter update).
    pub loss: f64,
    /// Average selection power over the validation partitions (after the
    /// update).
    pub mean_val_power: f64,
}

/// Outcome of [`train_score`]: the best-epoch snapshot plus the full log.
#[derive(Debug, Clone)]
pub struct TrainedScore {
    pub model: ScoreModel,
    /// 1-based epoch whose snapshot was kept.
    pub best_epoch: usize,
    pub log: Vec<EpochRecord>,
}

/// Index (1-based) of the best epoch: highest mean validation power,
/// earliest epoch on ties.
pub(crate) fn best_epoch_index(powers: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in powers.iter().enumerate() {
        if p > powers[best] {
            best = i;
        }
    }
    best + 1
}

/// Train a score network.
///
/// Each epoch randomly halves `train` into a calibration-role and a test-role
/// split, builds smooth p-values, backpropagates the configured loss, and
/// takes a momentum gradient step. Validation then replays the full selection
/// pipeline (hard p-values, step-up rule at `config.q`) on `config.k_partitions`
/// random halvings of `val` and records the mean power; the returned model is
/// the snapshot of the epoch with the highest mean validation power (earliest
/// on ties). The run is deterministic in `config.seed`.
pub fn train_score(
    train: &LabeledDataset,
    val: &LabeledDataset,
    region: &TargetRegion,
    predictor: Option<&dyn Predictor>,
    config: &TrainConfig,
) -> Result<TrainedScore> {
    config.validate()?;
    if train.n() < 2 {
        return Err(Error::InvalidArgument {
            what: "training split",
            why: "needs at least 2 rows to partition".to_string(),
        });
    }
    if val.n() < 2 {
        return Err(Error::InvalidArgument {
            what: "validation split",
            why: "needs at least 2 rows to partition".to_string(),
        });
    }
    if train.covariate_dim() != val.covariate_dim() {
        return Err(Error::DimensionMismatch {
            what: "validation covariate dimension",
            expected: train.covariate_dim(),
            got: val.covariate_dim(),
        });
    }
    if train.response_dim() != val.response_dim() {
        return Err(Error::DimensionMismatch {
            what: "validation response dimension",
            expected: train.response_dim(),
            got: val.response_dim(),
        });
    }

    let p = train.covariate_dim();
    let d = train.response_dim();
    let family = config.family;
    let mut model = ScoreModel::init(family, p, d, config.hidden, config.big_m, config.seed)?;
    check_learn_dims(&model, region, train)?;

    let mu_train = predictions_for(family, predictor, train)?;
    let mu_val = predictions_for(family, predictor, val)?;
    let r = region.boundary_point();
    let train_labeled = build_inputs(family, train, mu_train.as_ref(), None);
    let train_boundary = build_inputs(family, train, mu_train.as_ref(), Some(&r));
    let val_labeled = build_inputs(family, val, mu_val.as_ref(), None);
    let val_boundary = build_inputs(family, val, mu_val.as_ref(), Some(&r));

    let mut interior_train = Vec::with_capacity(train.n());
    let mut contains_train = Vec::with_capacity(train.n());
    for i in 0..train.n() {
        interior_train.push(region.interior(train.y_row(i))?);
        contains_train.push(region.contains(train.y_row(i))?);
    }
    let mut interior_val = Vec::with_capacity(val.n());
    let mut truth_val = Vec::with_capacity(val.n());
    for i in 0..val.n() {
        interior_val.push(region.interior(val.y_row(i))?);
        truth_val.push(region.contains(val.y_row(i))?);
    }

    // Independent, reproducible randomness streams: epoch partitions and the
    // validation partitions / tie-break draws never interact.
    let mut rng_part = ChaCha8Rng::seed_from_u64(config.seed);
    rng_part.set_stream(1);
    let mut rng_val = ChaCha8Rng::seed_from_u64(config.seed);
    rng_val.set_stream(2);

    let n_train = train.n();
    let n_val = val.n();
    let in_dim = model.input_dim();
    let n1 = n_train / 2;
    let mut order: Vec<usize> = (0..n_train).collect();
    let mut val_order: Vec<usize> = (0..n_val).collect();
    let mut velocity = vec![0.0; model.param_count()];
    let mut batch = Array2::zeros((n_train, in_dim));
    let mut log = Vec::with_capacity(config.epochs);
    let mut best_power = f64::NEG_INFINITY;
    let mut best_epoch = 0;
    let mut best_mlp: Option<Mlp> = None;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng_part);
        let (part1, part2) = order.split_at(n1);
        for (k, &i) in part1.iter().enumerate() {
            batch.row_mut(k).assign(&train_labeled.row(i));
        }
        for (k, &j) in part2.iter().enumerate() {
            batch.row_mut(n1 + k).assign(&train_boundary.row(j));
        }
        let interior1: Vec<bool> = part1.iter().map(|&i| interior_train[i]).collect();
        let in_region2: Vec<bool> = part2.iter().map(|&j| contains_train[j]).collect();

        let (loss, grads) = batch_loss_and_grads(
            &mut model.mlp,
            &EpochBatch {
                inputs: batch.view(),
                n1,
                interior1: &interior1,
                in_region2: &in_region2,
            },
            config,
            config.big_m,
            true,
            epoch,
        )?;

        let g = Mlp::flatten_grads(&grads);
        let mut theta = model.mlp.flatten();
        for i in 0..theta.len() {
            velocity[i] = config.momentum * velocity[i] + g[i];
            theta[i] -= config.learning_rate * velocity[i];
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::TrainingDiverged { epoch });
        }
        model.mlp.set_from_flat(&theta)?;

        // Validation: hard selection pipeline on the updated snapshot.
        let f_lab = model.mlp.forward_eval(val_labeled.view());
        let f_bnd = if family.uses_response() {
            model.mlp.forward_eval(val_boundary.view())
        } else {
            f_lab.clone()
        };
        let mut cal_side = Vec::with_capacity(n_val);
        let mut test_side = Vec::with_capacity(n_val);
        for i in 0..n_val {
            let indicator = if interior_val[i] { 1.0 } else { 0.0 };
            cal_side.push(config.big_m * indicator - f_lab[i]);
            test_side.push(-f_bnd[i]);
        }
        if cal_side.iter().chain(test_side.iter()).any(|v| !v.is_finite()) {
            return Err(Error::TrainingDiverged { epoch });
        }
        let mut power_acc = 0.0;
        for _ in 0..config.k_partitions {
            val_order.shuffle(&mut rng_val);
            let (v1, v2) = val_order.split_at(n_val / 2);
            let cal_scores: Vec<f64> = v1.iter().map(|&i| cal_side[i]).collect();
            let test_scores: Vec<f64> = v2.iter().map(|&i| test_side[i]).collect();
            let p_values = conformal_p_values(&cal_scores, &test_scores, &mut rng_val)?;
            let selection = bh_select(&p_values, config.q)?;
            let truth: Vec<bool> = v2.iter().map(|&i| truth_val[i]).collect();
            let (_, power) = fdp_and_power(&selection.selected, &truth);
            power_acc += power;
        }
        let mean_val_power = power_acc / config.k_partitions as f64;

        log.push(EpochRecord {
            epoch,
            loss,
            mean_val_power,
        });
        if mean_val_power > best_power {
            best_power = mean_val_power;
            best_epoch = epoch;
            best_mlp = Some(model.mlp.clone());
        }
    }

    model.mlp = best_mlp.expect("at least one epoch runs");
    debug_assert_eq!(
        best_epoch,
        best_epoch_index(&log.iter().map(|r| r.mean_val_power).collect::<Vec<_>>())
    );

    // Families that feed the response into the network need the clipping
    // constant to dominate the network output, otherwise an in-region
    // calibration point could score below an out-of-region one.
    if family.uses_response() {
        let mut max_abs = 0.0f64;
        for inputs in [&train_labeled, &train_boundary, &val_labeled, &val_boundary] {
            let f = model.mlp.forward_eval(inputs.view());
            for v in f.iter() {
                max_abs = max_abs.max(v.abs());
            }
        }
        if config.big_m <= 2.0 * max_abs {
            return Err(Error::BigMTooSmall {
                big_m: config.big_m,
                max_abs,
            });
        }
    }

    Ok(TrainedScore {
        model,
        best_epoch,
        log,
    })
}
