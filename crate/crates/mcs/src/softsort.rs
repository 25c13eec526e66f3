//! Differentiable soft ranks.
//!
//! `soft_rank(v; epsilon)` is the Euclidean projection of `v / epsilon` onto
//! the permutahedron spanned by `(1, 2, ..., n)` — the convex hull of all
//! permutations of the integer rank vector. As `epsilon` shrinks, the
//! projection snaps to the hard ascending ranks (1 = smallest); growing
//! `epsilon` blends ranks of nearby values together smoothly. That smoothing
//! is what makes rank-based selection quantities trainable by gradient
//! descent.
//!
//! The projection reduces to isotonic regression on the sorted values, solved
//! exactly by the pool-adjacent-violators scheme in `O(n log n)`. Because the
//! result is piecewise linear in `v`, the Jacobian has a closed form: within
//! each pooled block the gradient is centered, between blocks it does not
//! mix. [`SoftRankPlan`] records the sort order and block boundaries so the
//! backward pass can reuse them.

use crate::error::{Error, Result};

/// Configuration for soft-rank smoothing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoftRankConfig {
    /// Regularization strength; larger values smooth harder.
    pub epsilon: f64,
}

impl Default for SoftRankConfig {
    fn default() -> Self {
        SoftRankConfig { epsilon: 0.1 }
    }
}

/// The reusable context from a forward soft-rank pass: the stable descending
/// sort order and the pooled blocks, as index ranges into the sorted order.
#[derive(Debug, Clone)]
pub struct SoftRankPlan {
    order: Vec<usize>,
    /// Half-open `[start, end)` ranges over sorted positions.
    blocks: Vec<(usize, usize)>,
    epsilon: f64,
}

fn validate(values: &[f64], epsilon: f64) -> Result<()> {
    if values.is_empty() {
        return Err(Error::Empty { what: "values" });
    }
    if !values.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite { what: "values" });
    }
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::InvalidArgument {
            what: "epsilon",
            why: format!("must be finite and positive, got {epsilon}"),
        });
    }
    Ok(())
}

/// Ascending soft ranks of `values` with smoothing strength `epsilon`,
/// together with the plan needed for [`SoftRankPlan::vjp`].
pub fn soft_rank_with_plan(values: &[f64], epsilon: f64) -> Result<(Vec<f64>, SoftRankPlan)> {
    validate(values, epsilon)?;
    let n = values.len();

    // Stable descending sort pairs the largest value with the largest target
    // rank n.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]));

    // Pool adjacent violators on t_k = z_k - w_k, where z is the scaled
    // sorted input and w = (n, n-1, ..., 1): the fitted sequence must be
    // non-increasing, so any ascending pair of block averages gets merged.
    let mut sums: Vec<f64> = Vec::with_capacity(n);
    let mut counts: Vec<usize> = Vec::with_capacity(n);
    for (k, &idx) in order.iter().enumerate() {
        let t = values[idx] / epsilon - (n - k) as f64;
        sums.push(t);
        counts.push(1);
        while sums.len() >= 2 {
            let last = sums.len() - 1;
            if sums[last - 1] / counts[last - 1] as f64 >= sums[last] / counts[last] as f64 {
                break;
            }
            let (s, c) = (sums.pop().unwrap(), counts.pop().unwrap());
            *sums.last_mut().unwrap() += s;
            *counts.last_mut().unwrap() += c;
        }
    }

    let mut blocks = Vec::with_capacity(sums.len());
    let mut start = 0;
    for &c in &counts {
        blocks.push((start, start + c));
        start += c;
    }

    // Within a block the projection is z - mean(z) + mean(w); the w-mean of
    // consecutive integers is exact, which keeps singleton blocks at their
    // integer ranks with no rounding residue.
    let mut out = vec![0.0; n];
    for &(a, b) in &blocks {
        let len = (b - a) as f64;
        let mean_z: f64 = order[a..b]
            .iter()
            .map(|&idx| values[idx] / epsilon)
            .sum::<f64>()
            / len;
        let mean_w = ((n - a) as f64 + (n - b + 1) as f64) / 2.0;
        for k in a..b {
            out[order[k]] = values[order[k]] / epsilon - mean_z + mean_w;
        }
    }

    Ok((
        out,
        SoftRankPlan {
            order,
            blocks,
            epsilon,
        },
    ))
}

/// Ascending soft ranks of `values`; see [`soft_rank_with_plan`].
pub fn soft_rank(values: &[f64], epsilon: f64) -> Result<Vec<f64>> {
    soft_rank_with_plan(values, epsilon).map(|(out, _)| out)
}

impl SoftRankPlan {
    /// Vector-Jacobian product of the soft rank that produced this plan:
    /// given the gradient of some scalar loss with respect to the soft ranks,
    /// return its gradient with respect to the input values.
    pub fn vjp(&self, upstream: &[f64]) -> Result<Vec<f64>> {
        let n = self.order.len();
        if upstream.len() != n {
            return Err(Error::DimensionMismatch {
                what: "upstream gradient",
                expected: n,
                got: upstream.len(),
            });
        }
        let mut out = vec![0.0; n];
        for &(a, b) in &self.blocks {
            let len = (b - a) as f64;
            let mean: f64 = self.order[a..b].iter().map(|&idx| upstream[idx]).sum::<f64>() / len;
            for k in a..b {
                let idx = self.order[k];
                out[idx] = (upstream[idx] - mean) / self.epsilon;
            }
        }
        Ok(out)
    }
}

/// One-shot vector-Jacobian product; recomputes the plan internally.
pub fn soft_rank_vjp(values: &[f64], epsilon: f64, upstream: &[f64]) -> Result<Vec<f64>> {
    let (_, plan) = soft_rank_with_plan(values, epsilon)?;
    plan.vjp(upstream)
}
