//! Point predictors for the conditional mean of the response, plus a logistic
//! classifier for probability-based scores.
//!
//! Nonconformity scores compare a response (or a region boundary point)
//! against `mu_hat(x)`, so any model that maps covariates to a response-space
//! point fits behind the [`Predictor`] trait. The crate ships ridge
//! regression and k-nearest-neighbor averaging; both serialize to a plain
//! text format so a fitted model can be reused across CLI runs.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::linalg;

/// A fitted map from covariates to a point in response space.
pub trait Predictor {
    /// Covariate dimension the model expects.
    fn input_dim(&self) -> usize;
    /// Response dimension the model produces.
    fn output_dim(&self) -> usize;
    /// Predict the response for a single covariate vector.
    fn predict_one(&self, x: &[f64]) -> Result<Vec<f64>>;

    /// Predict a whole block, one row per observation.
    fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let mut out = Array2::zeros((x.nrows(), self.output_dim()));
        for (i, row) in x.rows().into_iter().enumerate() {
            let xi = row.to_slice().expect("row-major input");
            let yi = self.predict_one(xi)?;
            out.row_mut(i).assign(&Array1::from_vec(yi));
        }
        Ok(out)
    }
}

fn check_x_dim(expected: usize, x: &[f64]) -> Result<()> {
    if x.len() != expected {
        return Err(Error::DimensionMismatch {
            what: "covariates",
            expected,
            got: x.len(),
        });
    }
    Ok(())
}

/// Linear model fit by ridge-penalized least squares.
///
/// Weights have shape `(p + 1) x d`; row 0 is the (unpenalized) intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeModel {
    weights: Array2<f64>,
    lambda: f64,
}

/// Fit a linear model of `y` on `x` with an `l2` penalty of strength `lambda`
/// on the slopes (the intercept is never penalized).
pub fn fit_ridge(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>, lambda: f64) -> Result<RidgeModel> {
    let n = x.nrows();
    let p = x.ncols();
    let d = y.ncols();
    if n == 0 {
        return Err(Error::Empty {
            what: "training rows",
        });
    }
    if y.nrows() != n {
        return Err(Error::DimensionMismatch {
            what: "response rows",
            expected: n,
            got: y.nrows(),
        });
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::InvalidArgument {
            what: "ridge lambda",
            why: format!("must be finite and >= 0, got {lambda}"),
        });
    }

    // Normal equations on the design [1 X], accumulated without materializing
    // the full design matrix.
    let q = p + 1;
    let mut gram = Array2::<f64>::zeros((q, q));
    let mut xty = Array2::<f64>::zeros((q, d));
    for i in 0..n {
        let xi = x.row(i);
        gram[[0, 0]] += 1.0;
        for a in 0..p {
            gram[[0, a + 1]] += xi[a];
            for b in a..p {
                gram[[a + 1, b + 1]] += xi[a] * xi[b];
            }
        }
        let yi = y.row(i);
        for c in 0..d {
            xty[[0, c]] += yi[c];
            for a in 0..p {
                xty[[a + 1, c]] += xi[a] * yi[c];
            }
        }
    }
    for a in 0..q {
        for b in 0..a {
            gram[[a, b]] = gram[[b, a]];
        }
    }
    for a in 1..q {
        gram[[a, a]] += lambda;
    }

    let weights = linalg::solve_spd(&gram, &xty).ok_or(Error::SingularSystem)?;
    Ok(RidgeModel { weights, lambda })
}

impl RidgeModel {
    /// Fitted weights, intercept in row 0.
    pub fn weights(&self) -> ArrayView2<'_, f64> {
        self.weights.view()
    }

    /// Penalty strength used at fit time.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Serialize to the crate's plain-text model format.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let p = self.input_dim();
        let d = self.output_dim();
        let mut out = String::new();
        writeln!(out, "{} ridge", model_io::MAGIC).unwrap();
        writeln!(out, "{p} {d} {}", self.lambda).unwrap();
        for row in self.weights.rows() {
            writeln!(out, "{}", model_io::join(row.iter())).unwrap();
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    /// Load a model previously written by [`RidgeModel::save`].
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut r = model_io::Reader::new(&text);
        r.expect_kind("ridge")?;
        let head = r.floats("header", 3)?;
        let (p, d) = (model_io::index(head[0])?, model_io::index(head[1])?);
        let lambda = head[2];
        let mut weights = Array2::zeros((p + 1, d));
        for i in 0..=p {
            let row = r.floats("weight row", d)?;
            for (j, v) in row.into_iter().enumerate() {
                weights[[i, j]] = v;
            }
        }
        r.finish()?;
        Ok(RidgeModel { weights, lambda })
    }
}

impl Predictor for RidgeModel {
    fn input_dim(&self) -> usize {
        self.weights.nrows() - 1
    }

    fn output_dim(&self) -> usize {
        self.weights.ncols()
    }

    fn predict_one(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_x_dim(self.input_dim(), x)?;
        let d = self.output_dim();
        let mut out = vec![0.0; d];
        for (c, slot) in out.iter_mut().enumerate() {
            let mut v = self.weights[[0, c]];
            for (a, xa) in x.iter().enumerate() {
                v += self.weights[[a + 1, c]] * xa;
            }
            *slot = v;
        }
        Ok(out)
    }
}

/// k-nearest-neighbor regression: predict the average response of the `k`
/// training points closest in Euclidean distance (ties broken by row order).
#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    x: Array2<f64>,
    y: Array2<f64>,
    k: usize,
}

/// Memorize the training data for k-nearest-neighbor prediction.
pub fn fit_knn(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>, k: usize) -> Result<KnnModel> {
    let n = x.nrows();
    if n == 0 {
        return Err(Error::Empty {
            what: "training rows",
        });
    }
    if y.nrows() != n {
        return Err(Error::DimensionMismatch {
            what: "response rows",
            expected: n,
            got: y.nrows(),
        });
    }
    if k == 0 || k > n {
        return Err(Error::InvalidArgument {
            what: "knn k",
            why: format!("must be in 1..={n}, got {k}"),
        });
    }
    Ok(KnnModel {
        x: x.to_owned(),
        y: y.to_owned(),
        k,
    })
}

impl KnnModel {
    /// Number of neighbors averaged per prediction.
    pub fn k(&self) -> usize {
        self.k
    }

    /// Serialize to the crate's plain-text model format.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let (n, p) = (self.x.nrows(), self.x.ncols());
        let d = self.y.ncols();
        let mut out = String::new();
        writeln!(out, "{} knn", model_io::MAGIC).unwrap();
        writeln!(out, "{n} {p} {d} {}", self.k).unwrap();
        for row in self.x.rows() {
            writeln!(out, "{}", model_io::join(row.iter())).unwrap();
        }
        for row in self.y.rows() {
            writeln!(out, "{}", model_io::join(row.iter())).unwrap();
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    /// Load a model previously written by [`KnnModel::save`].
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut r = model_io::Reader::new(&text);
        r.expect_kind("knn")?;
        let head = r.floats("header", 4)?;
        let n = model_io::index(head[0])?;
        let p = model_io::index(head[1])?;
        let d = model_io::index(head[2])?;
        let k = model_io::index(head[3])?;
        let mut x = Array2::zeros((n, p));
        for i in 0..n {
            let row = r.floats("x row", p)?;
            for (j, v) in row.into_iter().enumerate() {
                x[[i, j]] = v;
            }
        }
        let mut y = Array2::zeros((n, d));
        for i in 0..n {
            let row = r.floats("y row", d)?;
            for (j, v) in row.into_iter().enumerate() {
                y[[i, j]] = v;
            }
        }
        r.finish()?;
        fit_knn(x.view(), y.view(), k)
    }
}

impl Predictor for KnnModel {
    fn input_dim(&self) -> usize {
        self.x.ncols()
    }

    fn output_dim(&self) -> usize {
        self.y.ncols()
    }

    fn predict_one(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_x_dim(self.input_dim(), x)?;
        let n = self.x.nrows();
        let mut order: Vec<(f64, usize)> = (0..n)
            .map(|i| {
                let d2: f64 = self
                    .x
                    .row(i)
                    .iter()
                    .zip(x)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                (d2, i)
            })
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| {
            a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
        };
        if self.k < n {
            order.select_nth_unstable_by(self.k - 1, cmp);
        }
        let d = self.output_dim();
        let mut out = vec![0.0; d];
        for &(_, i) in &order[..self.k] {
            for (c, slot) in out.iter_mut().enumerate() {
                *slot += self.y[[i, c]];
            }
        }
        for v in &mut out {
            *v /= self.k as f64;
        }
        Ok(out)
    }
}

/// Logistic classifier with intercept, fit by full-batch gradient descent.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    // Length p + 1; index 0 is the intercept.
    weights: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean cross-entropy and its gradient at `w` (intercept first).
fn log_loss_and_grad(w: &[f64], x: ArrayView2<'_, f64>, labels: &[bool]) -> (f64, Vec<f64>) {
    let n = x.nrows();
    let mut loss = 0.0;
    let mut grad = vec![0.0; w.len()];
    for (i, &label) in labels.iter().enumerate().take(n) {
        let xi = x.row(i);
        let mut z = w[0];
        for (a, xa) in xi.iter().enumerate() {
            z += w[a + 1] * xa;
        }
        let y = if label { 1.0 } else { 0.0 };
        // softplus(z) - y z, computed stably.
        loss += z.max(0.0) + (-z.abs()).exp().ln_1p() - y * z;
        let err = sigmoid(z) - y;
        grad[0] += err;
        for (a, xa) in xi.iter().enumerate() {
            grad[a + 1] += err * xa;
        }
    }
    let scale = 1.0 / n as f64;
    for g in &mut grad {
        *g *= scale;
    }
    (loss * scale, grad)
}

/// Fit a logistic classifier of `labels` on `x`. A degenerate single-class
/// label vector is allowed; the fit simply drifts toward that class.
pub fn fit_logistic(
    x: ArrayView2<'_, f64>,
    labels: &[bool],
    steps: usize,
    lr: f64,
) -> Result<LogisticModel> {
    let n = x.nrows();
    if n == 0 {
        return Err(Error::Empty {
            what: "training rows",
        });
    }
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            what: "labels",
            expected: n,
            got: labels.len(),
        });
    }
    if !(lr.is_finite() && lr > 0.0) {
        return Err(Error::InvalidArgument {
            what: "learning rate",
            why: format!("must be finite and positive, got {lr}"),
        });
    }
    let mut w = vec![0.0; x.ncols() + 1];
    for _ in 0..steps {
        let (_, grad) = log_loss_and_grad(&w, x, labels);
        for (wa, ga) in w.iter_mut().zip(&grad) {
            *wa -= lr * ga;
        }
    }
    Ok(LogisticModel { weights: w })
}

impl LogisticModel {
    /// Covariate dimension the classifier expects.
    pub fn input_dim(&self) -> usize {
        self.weights.len() - 1
    }

    /// Predicted probability of the positive class.
    pub fn predict_prob(&self, x: &[f64]) -> Result<f64> {
        check_x_dim(self.input_dim(), x)?;
        let mut z = self.weights[0];
        for (a, xa) in x.iter().enumerate() {
            z += self.weights[a + 1] * xa;
        }
        Ok(sigmoid(z))
    }

    /// Serialize to the crate's plain-text model format.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = String::new();
        writeln!(out, "{} logistic", model_io::MAGIC).unwrap();
        writeln!(out, "{}", self.input_dim()).unwrap();
        writeln!(out, "{}", model_io::join(self.weights.iter())).unwrap();
        std::fs::write(path, out)?;
        Ok(())
    }

    /// Load a model previously written by [`LogisticModel::save`].
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut r = model_io::Reader::new(&text);
        r.expect_kind("logistic")?;
        let p = model_io::index(r.floats("header", 1)?[0])?;
        let weights = r.floats("weights", p + 1)?;
        r.finish()?;
        Ok(LogisticModel { weights })
    }
}

/// Load a serialized predictor, dispatching on the kind recorded in the file.
/// Only point predictors (`ridge`, `knn`) can stand in for [`Predictor`].
pub fn load_predictor(path: impl AsRef<Path>) -> Result<Box<dyn Predictor>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let kind = model_io::peek_kind(&text)?;
    match kind.as_str() {
        "ridge" => Ok(Box::new(RidgeModel::load(path)?)),
        "knn" => Ok(Box::new(KnnModel::load(path)?)),
        other => Err(Error::ModelFormat(format!(
            "kind {other:?} is not a point predictor"
        ))),
    }
}

/// Shared pieces of the plain-text model format: a `mcs-model v1 <kind>`
/// header followed by whitespace-separated numbers, one logical row per line.
pub(crate) mod model_io {
    use crate::error::{Error, Result};

    pub(crate) const MAGIC: &str = "mcs-model v1";

    pub(crate) fn join<'a>(vals: impl Iterator<Item = &'a f64>) -> String {
        vals.map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
    }

    pub(crate) fn index(v: f64) -> Result<usize> {
        if v.fract() == 0.0 && v >= 0.0 && v <= u32::MAX as f64 {
            Ok(v as usize)
        } else {
            Err(Error::ModelFormat(format!("expected a small integer, got {v}")))
        }
    }

    pub(crate) fn peek_kind(text: &str) -> Result<String> {
        let first = text.lines().next().unwrap_or("");
        match first.strip_prefix(MAGIC) {
            Some(kind) if !kind.trim().is_empty() => Ok(kind.trim().to_string()),
            _ => Err(Error::ModelFormat(format!(
                "bad or missing header; expected \"{MAGIC} <kind>\""
            ))),
        }
    }

    pub(crate) struct Reader<'a> {
        lines: std::str::Lines<'a>,
        header: &'a str,
    }

    impl<'a> Reader<'a> {
        pub(crate) fn new(text: &'a str) -> Self {
            let mut lines = text.lines();
            let header = lines.next().unwrap_or("");
            Reader { lines, header }
        }

        pub(crate) fn expect_kind(&mut self, kind: &str) -> Result<()> {
            let got = peek_kind(self.header)?;
            if got != kind {
                return Err(Error::ModelFormat(format!(
                    "model kind is {got:?}, expected {kind:?}"
                )));
            }
            Ok(())
        }

        pub(crate) fn floats(&mut self, what: &str, n: usize) -> Result<Vec<f64>> {
            let line = self
                .lines
                .next()
                .ok_or_else(|| Error::ModelFormat(format!("missing {what} line")))?;
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|_| Error::ModelFormat(format!("bad number {t:?} in {what}")))
                })
                .collect::<Result<_>>()?;
            if vals.len() != n {
                return Err(Error::ModelFormat(format!(
                    "{what}: expected {n} values, got {}",
                    vals.len()
                )));
            }
            Ok(vals)
        }

        pub(crate) fn finish(&mut self) -> Result<()> {
            match self.lines.find(|l| !l.trim().is_empty()) {
                None => Ok(()),
                Some(extra) => Err(Error::ModelFormat(format!(
                    "unexpected trailing content {extra:?}"
                ))),
            }
        }
    }
}
