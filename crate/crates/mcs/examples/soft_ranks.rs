//! Differentiable ranking: soft ranks, their regularization path, and exact
//! gradients through the ranking operation.
//!
//! Hard ranks are piecewise constant, so nothing can backpropagate through
//! them. The soft rank replaces them with an isotonic-regression projection
//! whose strength `epsilon` trades smoothness against fidelity: small
//! `epsilon` recovers hard ranks, large `epsilon` pulls every rank toward the
//! average. The returned plan evaluates exact vector-Jacobian products.
//!
//! ```bash
//! cargo run --example soft_ranks
//! ```

use mcs::softsort::{soft_rank, soft_rank_with_plan};
use mcs::Result;

fn main() -> Result<()> {
    let values = [0.3, -1.2, 2.4, 0.9, 0.31];
    println!("values: {values:?}");
    println!("hard ranks:   [2, 1, 5, 4, 3]");
    for epsilon in [1e-6, 0.01, 0.1, 1.0, 10.0] {
        let ranks = soft_rank(&values, epsilon)?;
        let shown: Vec<String> = ranks.iter().map(|r| format!("{r:.3}")).collect();
        println!("epsilon {epsilon:>6}: [{}]", shown.join(", "));
    }

    // The rank sum is invariant: soft ranks only redistribute 1 + ... + n.
    let ranks = soft_rank(&values, 0.5)?;
    println!("\nrank sum at epsilon 0.5: {} (always n(n+1)/2 = 15)", ranks.iter().sum::<f64>());

    // Gradients: push the last element's rank down, i.e. follow -d r_5 / d v.
    let (ranks, plan) = soft_rank_with_plan(&values, 0.1)?;
    let mut upstream = vec![0.0; values.len()];
    upstream[4] = 1.0;
    let grad = plan.vjp(&upstream)?;
    println!("\nrank of v[4] at epsilon 0.1: {:.3}", ranks[4]);
    println!("d rank[4] / d values = {:?}", round3(&grad));
    println!("(positive in v[4]: growing it raises its own rank; negative mass on the");
    println!(" neighbors it is tied with; exactly zero on values far away in rank)");

    // Check one entry against a finite difference.
    let h = 1e-6;
    let mut bumped = values;
    bumped[0] += h;
    let fd = (soft_rank(&bumped, 0.1)?[4] - ranks[4]) / h;
    println!("\nfinite-difference d rank[4] / d v[0]: {fd:.6} vs analytic {:.6}", grad[0]);
    Ok(())
}

fn round3(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| (x * 1000.0).round() / 1000.0).collect()
}
