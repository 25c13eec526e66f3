//! End-to-end selection on simulated data: generate, fit, calibrate, select,
//! and check the error rate against the withheld truth.
//!
//! The pipeline is the core of the crate: a predictor fit on training data
//! turns each point into a nonconformity score; calibration scores rank the
//! test scores into p-values; a Benjamini-Hochberg pass turns p-values into a
//! selection with false discovery rate control at level `q`.
//!
//! ```bash
//! cargo run --example select_simulated
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mcs::conformal::{fdp_and_power, mcs_select};
use mcs::predict::fit_ridge;
use mcs::score::{DistScore, DistScoreSpec};
use mcs::simgen::{gen_dataset, SimConfig};
use mcs::Result;

fn main() -> Result<()> {
    let config = SimConfig {
        setting: 1,
        task: 1,
        d: 5,
        n_train: 400,
        n_cal: 400,
        m: 100,
        seed: 7,
        ..SimConfig::default()
    };
    let data = gen_dataset(&config)?;
    let region = config.region()?;
    println!(
        "scenario: setting {} / task {} (region: {}), {} train / {} cal / {} test",
        config.setting,
        config.task,
        region.kind_name(),
        data.train.n(),
        data.cal.n(),
        data.test.n()
    );

    let predictor = fit_ridge(data.train.x(), data.train.y(), 0.1)?;
    let score = DistScore {
        region: &region,
        predictor: &predictor,
        spec: DistScoreSpec::default(), // clipped score
    };

    let q = 0.2;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let result = mcs_select(&data.cal, &data.test.unlabeled(), &region, &score, q, &mut rng)?;
    println!(
        "\nq = {q}: selected {} of {} test points (k* = {}, p-value cutoff {:.4})",
        result.selected.len(),
        data.test.n(),
        result.k_star,
        result.threshold
    );

    // The test block keeps its labels, so we can audit the selection.
    let mut truth = Vec::new();
    for j in 0..data.test.n() {
        truth.push(region.contains(data.test.y_row(j))?);
    }
    let (fdp, power) = fdp_and_power(&result.selected, &truth);
    let in_region = truth.iter().filter(|&&t| t).count();
    println!("ground truth: {in_region} test responses are in the region");
    println!("false discovery proportion {fdp:.3} (nominal level {q}), power {power:.3}");
    println!("(the guarantee bounds the *expected* FDP at {q}; any one trial can land");
    println!(" above or below — the benchmark_table example shows the average behavior)");

    println!("\nfirst selections with their p-values:");
    for &j in result.selected.iter().take(8) {
        println!(
            "  row {j:>3}  p = {:.4}  truly in region: {}",
            result.p_values.values()[j],
            truth[j]
        );
    }
    Ok(())
}
