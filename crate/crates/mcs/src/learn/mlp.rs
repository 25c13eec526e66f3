//! The two-layer perceptron behind the learned score: affine → batch
//! normalization → rectifier → affine → scalar. Forward and backward passes
//! are hand-rolled; the batchnorm backward differentiates through the batch
//! statistics, which matters because training batches are small.

use ndarray::{Array1, Array2, ArrayView2};
use rand::prelude::*;

use crate::error::{Error, Result};

pub(crate) const BN_EPS: f64 = 1e-5;
pub(crate) const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Mlp {
    /// `in_dim x h`.
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub run_mean: Array1<f64>,
    pub run_var: Array1<f64>,
    /// `h`.
    pub w2: Array1<f64>,
    pub b2: f64,
}

/// Intermediate values of a training-mode forward pass, kept for backward.
pub(crate) struct Cache {
    input: Array2<f64>,
    inv_std: Array1<f64>,
    hhat: Array2<f64>,
    act: Array2<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct Grads {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub w2: Array1<f64>,
    pub b2: f64,
}

impl Mlp {
    /// Fresh network: uniform `±1/sqrt(fan_in)` affine layers, identity
    /// batchnorm with unit running variance.
    pub(crate) fn init<R: Rng + ?Sized>(in_dim: usize, hidden: usize, rng: &mut R) -> Self {
        let bound1 = 1.0 / (in_dim as f64).sqrt();
        let w1 = Array2::from_shape_fn((in_dim, hidden), |_| rng.random_range(-bound1..bound1));
        let b1 = Array1::from_shape_fn(hidden, |_| rng.random_range(-bound1..bound1));
        let bound2 = 1.0 / (hidden as f64).sqrt();
        let w2 = Array1::from_shape_fn(hidden, |_| rng.random_range(-bound2..bound2));
        let b2 = rng.random_range(-bound2..bound2);
        Mlp {
            w1,
            b1,
            gamma: Array1::ones(hidden),
            beta: Array1::zeros(hidden),
            run_mean: Array1::zeros(hidden),
            run_var: Array1::ones(hidden),
            w2,
            b2,
        }
    }

    pub(crate) fn in_dim(&self) -> usize {
        self.w1.nrows()
    }

    pub(crate) fn hidden(&self) -> usize {
        self.w1.ncols()
    }

    /// Training-mode forward over a batch: batchnorm uses batch statistics.
    /// Running statistics are updated only when `update_running` is set
    /// (gradient checks probe the network without touching them).
    pub(crate) fn forward_train(
        &mut self,
        input: ArrayView2<'_, f64>,
        update_running: bool,
    ) -> (Array1<f64>, Cache) {
        let n = input.nrows();
        let h = self.hidden();
        let pre = input.dot(&self.w1) + &self.b1;

        let mean = pre.sum_axis(ndarray::Axis(0)) / n as f64;
        let mut var = Array1::<f64>::zeros(h);
        for i in 0..n {
            for j in 0..h {
                let c = pre[[i, j]] - mean[j];
                var[j] += c * c;
            }
        }
        var /= n as f64; // biased variance normalizes the batch
        let inv_std = var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());

        if update_running {
            // The running variance tracks the unbiased estimate.
            let unbiased = if n > 1 {
                var.mapv(|v| v * n as f64 / (n - 1) as f64)
            } else {
                var.clone()
            };
            for j in 0..h {
                self.run_mean[j] = (1.0 - BN_MOMENTUM) * self.run_mean[j] + BN_MOMENTUM * mean[j];
                self.run_var[j] = (1.0 - BN_MOMENTUM) * self.run_var[j] + BN_MOMENTUM * unbiased[j];
            }
        }

        let mut hhat = pre;
        for i in 0..n {
            for j in 0..h {
                hhat[[i, j]] = (hhat[[i, j]] - mean[j]) * inv_std[j];
            }
        }
        let mut act = Array2::<f64>::zeros((n, h));
        for i in 0..n {
            for j in 0..h {
                act[[i, j]] = (self.gamma[j] * hhat[[i, j]] + self.beta[j]).max(0.0);
            }
        }
        let out = act.dot(&self.w2) + self.b2;
        (
            out,
            Cache {
                input: input.to_owned(),
                inv_std,
                hhat,
                act,
            },
        )
    }

    /// Evaluation-mode forward: batchnorm uses the stored running statistics,
    /// so rows are independent and the pass never mutates the model.
    pub(crate) fn forward_eval(&self, input: ArrayView2<'_, f64>) -> Array1<f64> {
        let n = input.nrows();
        let h = self.hidden();
        let pre = input.dot(&self.w1) + &self.b1;
        let inv_std = self.run_var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
        let mut act = Array2::<f64>::zeros((n, h));
        for i in 0..n {
            for j in 0..h {
                let hhat = (pre[[i, j]] - self.run_mean[j]) * inv_std[j];
                act[[i, j]] = (self.gamma[j] * hhat + self.beta[j]).max(0.0);
            }
        }
        act.dot(&self.w2) + self.b2
    }

    /// Backward pass for a training-mode forward, given the loss gradient
    /// with respect to each scalar output.
    pub(crate) fn backward(&self, cache: &Cache, dout: &Array1<f64>) -> Grads {
        let n = cache.act.nrows();
        let h = self.hidden();

        let db2 = dout.sum();
        let dw2 = cache.act.t().dot(dout);

        // Through the second affine layer and the rectifier.
        let mut dbn = Array2::<f64>::zeros((n, h));
        for i in 0..n {
            for j in 0..h {
                if cache.act[[i, j]] > 0.0 {
                    dbn[[i, j]] = dout[i] * self.w2[j];
                }
            }
        }

        let mut dgamma = Array1::<f64>::zeros(h);
        let mut dbeta = Array1::<f64>::zeros(h);
        for i in 0..n {
            for j in 0..h {
                dgamma[j] += dbn[[i, j]] * cache.hhat[[i, j]];
                dbeta[j] += dbn[[i, j]];
            }
        }

        // Batchnorm backward through the batch statistics:
        // dh_i = inv_std/n * (n*dxhat_i - sum_k dxhat_k - hhat_i * sum_k dxhat_k*hhat_k)
        let mut sum_dxhat = vec![0.0; h];
        let mut sum_dxhat_hhat = vec![0.0; h];
        let mut dxhat = dbn; // reuse: dxhat = dbn * gamma
        for i in 0..n {
            for j in 0..h {
                dxhat[[i, j]] *= self.gamma[j];
                sum_dxhat[j] += dxhat[[i, j]];
                sum_dxhat_hhat[j] += dxhat[[i, j]] * cache.hhat[[i, j]];
            }
        }
        let mut dpre = Array2::<f64>::zeros((n, h));
        for i in 0..n {
            for j in 0..h {
                dpre[[i, j]] = cache.inv_std[j] / n as f64
                    * (n as f64 * dxhat[[i, j]]
                        - sum_dxhat[j]
                        - cache.hhat[[i, j]] * sum_dxhat_hhat[j]);
            }
        }

        let dw1 = cache.input.t().dot(&dpre);
        let db1 = dpre.sum_axis(ndarray::Axis(0));
        Grads {
            w1: dw1,
            b1: db1,
            gamma: dgamma,
            beta: dbeta,
            w2: dw2,
            b2: db2,
        }
    }

    /// Number of trainable parameters (running statistics excluded).
    pub(crate) fn param_count(&self) -> usize {
        self.w1.len() + 3 * self.hidden() + self.w2.len() + 1
    }

    /// Trainable parameters in a fixed order: `w1` row-major, `b1`, `gamma`,
    /// `beta`, `w2`, `b2`.
    pub(crate) fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        out.extend(self.w1.iter());
        out.extend(self.b1.iter());
        out.extend(self.gamma.iter());
        out.extend(self.beta.iter());
        out.extend(self.w2.iter());
        out.push(self.b2);
        out
    }

    /// Inverse of [`Mlp::flatten`]; running statistics are left untouched.
    pub(crate) fn set_from_flat(&mut self, v: &[f64]) -> Result<()> {
        if v.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                what: "flat parameters",
                expected: self.param_count(),
                got: v.len(),
            });
        }
        let mut it = v.iter().copied();
        for w in self.w1.iter_mut() {
            *w = it.next().unwrap();
        }
        for b in self.b1.iter_mut() {
            *b = it.next().unwrap();
        }
        for g in self.gamma.iter_mut() {
            *g = it.next().unwrap();
        }
        for b in self.beta.iter_mut() {
            *b = it.next().unwrap();
        }
        for w in self.w2.iter_mut() {
            *w = it.next().unwrap();
        }
        self.b2 = it.next().unwrap();
        Ok(())
    }

    pub(crate) fn flatten_grads(g: &Grads) -> Vec<f64> {
        let mut out = Vec::new();
        out.extend(g.w1.iter());
        out.extend(g.b1.iter());
        out.extend(g.gamma.iter());
        out.extend(g.beta.iter());
        out.extend(g.w2.iter());
        out.push(g.b2);
        out
    }
}
