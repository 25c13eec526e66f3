//! Training a nonconformity score instead of hand-picking one.
//!
//! A two-layer network scores each point; training maximizes how many test
//! points a full selection pass would keep, made differentiable by smooth
//! (soft-rank) p-values. Validation replays the *hard* selection pipeline on
//! held-out splits and the best epoch's snapshot wins. The result plugs into
//! the same calibrated selection as any fixed score — the guarantee comes
//! from calibration, not from the network.
//!
//! ```bash
//! cargo run --release --example learned_score
//! ```

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use mcs::conformal::{fdp_and_power, mcs_select};
use mcs::learn::{train_score, LearnedScore, TrainConfig};
use mcs::predict::fit_ridge;
use mcs::score::{DistScore, DistScoreSpec};
use mcs::simgen::{gen_dataset, SimConfig};
use mcs::Result;

fn main() -> Result<()> {
    // Setting 5 pairs a nonlinear signal with heavy-tailed noise, and task 4
    // asks for responses *outside* a ball: a fixed distance-to-boundary score
    // wastes its budget there, while a trained score can learn which
    // covariate profiles make the region reachable.
    let q = 0.3;
    let reps = 20;
    let mut fdps = [Vec::new(), Vec::new()]; // [trained, clipped]
    let mut powers = [Vec::new(), Vec::new()];

    for rep in 0..reps {
        let config = SimConfig {
            setting: 5,
            task: 4,
            d: 10,
            n_train: 300,
            n_cal: 900,
            m: 150,
            seed: 11 + rep,
            ..SimConfig::default()
        };
        let data = gen_dataset(&config)?;
        let region = config.region()?;
        let predictor = fit_ridge(data.train.x(), data.train.y(), 0.1)?;

        // The calibration block is re-split 8:1:1: most of it trains the
        // score, a slice validates epoch snapshots, and the rest stays a
        // calibration set the network has never seen — that untouched part
        // is what keeps the guarantee.
        let n = data.cal.n();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(config.seed));
        let f_train = data.cal.subset(&order[..n * 8 / 10])?;
        let f_val = data.cal.subset(&order[n * 8 / 10..n * 9 / 10])?;
        let cal_rest = data.cal.subset(&order[n * 9 / 10..])?;

        let train_config = TrainConfig {
            q,
            hidden: 32,
            epochs: 60,
            k_partitions: 40,
            seed: config.seed,
            ..TrainConfig::default()
        };
        let trained = train_score(&f_train, &f_val, &region, Some(&predictor), &train_config)?;
        if rep == 0 {
            println!(
                "first trial: {} epochs, kept epoch {} (validation power {:.3})",
                trained.log.len(),
                trained.best_epoch,
                trained.log[trained.best_epoch - 1].mean_val_power
            );
            for r in trained.log.iter().step_by(14) {
                println!(
                    "  epoch {:>3}: loss {:>8.3}, validation power {:.3}",
                    r.epoch, r.loss, r.mean_val_power
                );
            }
        }

        let mut truth = Vec::new();
        for j in 0..data.test.n() {
            truth.push(region.contains(data.test.y_row(j))?);
        }
        let test = data.test.unlabeled();

        let learned = LearnedScore {
            model: &trained.model,
            region: &region,
            predictor: Some(&predictor),
        };
        // Both scores calibrate on the same reduced block with the same
        // tie-break draws, so each trial is a paired comparison.
        let mut rng = ChaCha8Rng::seed_from_u64(999 + rep);
        let sel = mcs_select(&cal_rest, &test, &region, &learned, q, &mut rng)?;
        let (fdp, power) = fdp_and_power(&sel.selected, &truth);
        fdps[0].push(fdp);
        powers[0].push(power);

        let clipped = DistScore {
            region: &region,
            predictor: &predictor,
            spec: DistScoreSpec::default(),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(999 + rep);
        let sel = mcs_select(&cal_rest, &test, &region, &clipped, q, &mut rng)?;
        let (fdp, power) = fdp_and_power(&sel.selected, &truth);
        fdps[1].push(fdp);
        powers[1].push(power);
    }

    let mean_se = |v: &[f64]| {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (v.len() - 1) as f64;
        (mean, (var / v.len() as f64).sqrt())
    };

    println!("\nsetting 5 / task 4, d=10, q = {q}, {reps} paired trials:");
    println!("{:>9}  {:>15}  {:>15}", "score", "FDP", "power");
    for (slot, name) in ["trained", "clipped"].into_iter().enumerate() {
        let (f, f_se) = mean_se(&fdps[slot]);
        let (p, p_se) = mean_se(&powers[slot]);
        println!("{name:>9}  {f:>7.3} ± {f_se:.3}  {p:>7.3} ± {p_se:.3}");
    }
    println!("\nthe FDP columns agree to within sampling noise — training buys no validity");
    println!("and costs none, since calibration never sees the training rows. The power");
    println!("column is the point: the trained score reads covariate structure the fixed");
    println!("distance score cannot.");
    Ok(())
}
