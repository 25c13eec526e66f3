//! Synthetic data-generating processes and selection tasks.
//!
//! Six regression settings pair three conditional-mean shapes (linear,
//! additive-quadratic, and a discontinuous indicator form) with two noise
//! laws (correlated Gaussian, and the same covariance under a heavy-tailed
//! multivariate t with 3 degrees of freedom). Four selection tasks supply
//! target regions — an orthant, a ball, and the complements of each — whose
//! cutoffs and radii are tabulated per response dimension.
//!
//! Covariates are uniform on `(-1, 1)^p` with `p = 10` by default. Response
//! components beyond `p` reuse covariates cyclically, so high-dimensional
//! responses repeat the low-dimensional mean structure.

use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, StandardNormal};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::linalg;
use crate::region::TargetRegion;

/// Default covariate dimension.
pub const DEFAULT_P: usize = 10;

/// Per-dimension orthant cutoffs for task 1 (`d`: 2, 5, 10, 30).
const TASK1_CUTOFF: [(usize, f64); 4] = [(2, 1.0), (5, 0.2), (10, -0.2), (30, -0.6)];
/// Ball radii for task 2, centered at `(2, ..., 2)`.
const TASK2_RADIUS: [(usize, f64); 4] = [(2, 1.5), (5, 2.6), (10, 4.1), (30, 7.5)];
/// Orthant-complement cutoffs for task 3.
const TASK3_CUTOFF: [(usize, f64); 4] = [(2, -0.5), (5, -0.8), (10, -1.1), (30, -1.6)];
/// Ball-complement radii for task 4, centered at `(2, ..., 2)`.
const TASK4_RADIUS: [(usize, f64); 4] = [(2, 3.0), (5, 4.0), (10, 5.5), (30, 9.5)];

/// Configuration of one synthetic data draw.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Regression setting, 1–6.
    pub setting: u8,
    /// Selection task, 1–4.
    pub task: u8,
    /// Response dimension; the task tables cover 2, 5, 10 and 30.
    pub d: usize,
    /// Covariate dimension.
    pub p: usize,
    /// Rows in the predictor-training block.
    pub n_train: usize,
    /// Rows in the calibration block.
    pub n_cal: usize,
    /// Rows in the test block.
    pub m: usize,
    /// Seed for the whole draw.
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            setting: 1,
            task: 1,
            d: 10,
            p: DEFAULT_P,
            n_train: 500,
            n_cal: 500,
            m: 100,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=6).contains(&self.setting) {
            return Err(Error::InvalidArgument {
                what: "setting",
                why: format!("must be 1..=6, got {}", self.setting),
            });
        }
        if !(1..=4).contains(&self.task) {
            return Err(Error::InvalidArgument {
                what: "task",
                why: format!("must be 1..=4, got {}", self.task),
            });
        }
        if self.d < 2 {
            return Err(Error::InvalidArgument {
                what: "response dimension",
                why: format!("must be >= 2, got {}", self.d),
            });
        }
        if self.p == 0 {
            return Err(Error::Empty {
                what: "covariate dimension",
            });
        }
        if self.n_train == 0 || self.n_cal == 0 || self.m == 0 {
            return Err(Error::Empty { what: "block size" });
        }
        Ok(())
    }

    /// The target region of this configuration's task at its dimension.
    pub fn region(&self) -> Result<TargetRegion> {
        task_region(self.task, self.d)
    }
}

/// The three generated blocks of one simulation draw.
#[derive(Debug, Clone, PartialEq)]
pub struct SimData {
    /// For fitting the predictor.
    pub train: LabeledDataset,
    /// For conformal calibration.
    pub cal: LabeledDataset,
    /// Test block; selection methods see only its covariates, evaluation uses
    /// its responses as ground truth.
    pub test: LabeledDataset,
}

/// The conditional mean of a single response vector.
///
/// Component `k` (1-based) reads covariates `k`, `k+1`, `k+2`, wrapping
/// indices past `p` back to the front.
pub fn regression_mean(setting: u8, x: &[f64], d: usize) -> Result<Vec<f64>> {
    if !(1..=6).contains(&setting) {
        return Err(Error::InvalidArgument {
            what: "setting",
            why: format!("must be 1..=6, got {setting}"),
        });
    }
    let p = x.len();
    if p == 0 {
        return Err(Error::Empty {
            what: "covariates",
        });
    }
    let mut out = vec![0.0; d];
    for k in 0..d {
        let x1 = x[k % p];
        let x2 = x[(k + 1) % p];
        let x3 = x[(k + 2) % p];
        out[k] = match setting {
            1 | 4 => x1 - 0.5 * x2 + x3 + 1.5,
            2 | 5 => x1 + x3 * x3 + 0.5,
            _ => {
                let a = if x1 * x2 > 0.0 && x3 > 0.5 { 0.25 + x3 } else { 0.0 };
                let b = if x1 * x2 <= 0.0 && x3 <= 0.5 { x3 - 0.25 } else { 0.0 };
                a + b + 0.75
            }
        };
    }
    Ok(out)
}

/// Uniform covariates on `(-1, 1)^p`, one row per observation.
pub fn gen_covariates<R: Rng + ?Sized>(n: usize, p: usize, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_fn((n, p), |_| rng.random_range(-1.0..1.0))
}

/// Noise rows for a setting: correlated Gaussian with covariance
/// `0.45 I + 0.05 J` for settings 1–3; the corresponding multivariate t with
/// 3 degrees of freedom for settings 4–6.
pub fn gen_noise<R: Rng + ?Sized>(setting: u8, n: usize, d: usize, rng: &mut R) -> Result<Array2<f64>> {
    if !(1..=6).contains(&setting) {
        return Err(Error::InvalidArgument {
            what: "setting",
            why: format!("must be 1..=6, got {setting}"),
        });
    }
    let sigma = Array2::from_shape_fn((d, d), |(i, j)| if i == j { 0.5 } else { 0.05 });
    let l = linalg::cholesky(&sigma).expect("noise covariance is positive definite");
    let mut out = Array2::zeros((n, d));
    let mut g = vec![0.0; d];
    for i in 0..n {
        for gk in g.iter_mut() {
            *gk = rng.sample(StandardNormal);
        }
        for r in 0..d {
            let mut v = 0.0;
            for c in 0..=r {
                v += l[[r, c]] * g[c];
            }
            out[[i, r]] = v;
        }
    }
    if setting >= 4 {
        let nu = 3.0;
        let chi = ChiSquared::new(nu).expect("valid degrees of freedom");
        for i in 0..n {
            let w: f64 = rng.sample(chi);
            let scale = (nu / w).sqrt();
            for c in 0..d {
                out[[i, c]] *= scale;
            }
        }
    }
    Ok(out)
}

fn gen_block<R: Rng + ?Sized>(
    setting: u8,
    n: usize,
    p: usize,
    d: usize,
    rng: &mut R,
) -> Result<LabeledDataset> {
    let x = gen_covariates(n, p, rng);
    let noise = gen_noise(setting, n, d, rng)?;
    let mut y = noise;
    for i in 0..n {
        let mean = regression_mean(setting, x.row(i).to_slice().expect("row-major"), d)?;
        for c in 0..d {
            y[[i, c]] += mean[c];
        }
    }
    LabeledDataset::new(x, y)
}

/// Draw the train/calibration/test blocks of one configuration. The draw is
/// fully determined by `cfg.seed`.
pub fn gen_dataset(cfg: &SimConfig) -> Result<SimData> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let train = gen_block(cfg.setting, cfg.n_train, cfg.p, cfg.d, &mut rng)?;
    let cal = gen_block(cfg.setting, cfg.n_cal, cfg.p, cfg.d, &mut rng)?;
    let test = gen_block(cfg.setting, cfg.m, cfg.p, cfg.d, &mut rng)?;
    Ok(SimData { train, cal, test })
}

/// The tabulated target region for a task at response dimension `d`
/// (`d` must be one of 2, 5, 10, 30).
pub fn task_region(task: u8, d: usize) -> Result<TargetRegion> {
    fn lookup(table: &[(usize, f64); 4], what: &'static str, d: usize) -> Result<f64> {
        table
            .iter()
            .find(|(dim, _)| *dim == d)
            .map(|(_, v)| *v)
            .ok_or_else(|| Error::InvalidArgument {
                what,
                why: format!("no tabulated value for d = {d}; available: 2, 5, 10, 30"),
            })
    }
    match task {
        1 => {
            let c = lookup(&TASK1_CUTOFF, "task 1 dimension", d)?;
            TargetRegion::orthant(vec![c; d])
        }
        2 => {
            let r = lookup(&TASK2_RADIUS, "task 2 dimension", d)?;
            TargetRegion::ball(vec![2.0; d], r)
        }
        3 => {
            let c = lookup(&TASK3_CUTOFF, "task 3 dimension", d)?;
            TargetRegion::orthant_complement(vec![c; d])
        }
        4 => {
            let r = lookup(&TASK4_RADIUS, "task 4 dimension", d)?;
            TargetRegion::ball_complement(vec![2.0; d], r)
        }
        other => Err(Error::InvalidArgument {
            what: "task",
            why: format!("must be 1..=4, got {other}"),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn draws_are_reproducible_and_seed_sensitive() {
        let cfg = SimConfig {
            n_train: 20,
            n_cal: 15,
            m: 10,
            ..Default::default()
        };
        let a = gen_dataset(&cfg).unwrap();
        let b = gen_dataset(&cfg).unwrap();
        assert_eq!(a, b);
        let c = gen_dataset(&SimConfig { seed: 1, ..cfg }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn blocks_have_the_requested_shapes() {
        let cfg = SimConfig {
            setting: 5,
            task: 2,
            d: 5,
            n_train: 7,
            n_cal: 6,
            m: 4,
            ..Default::default()
        };
        let data = gen_dataset(&cfg).unwrap();
        assert_eq!((data.train.n(), data.cal.n(), data.test.n()), (7, 6, 4));
        assert_eq!(data.train.covariate_dim(), 10);
        assert_eq!(data.test.response_dim(), 5);
    }

    #[test]
    fn config_validation_rejects_bad_values() {
        let ok = SimConfig::default();
        assert!(ok.validate().is_ok());
        assert!(SimConfig { setting: 0, ..ok.clone() }.validate().is_err());
        assert!(SimConfig { setting: 7, ..ok.clone() }.validate().is_err());
        assert!(SimConfig { task: 5, ..ok.clone() }.validate().is_err());
        assert!(SimConfig { d: 1, ..ok.clone() }.validate().is_err());
        assert!(SimConfig { m: 0, ..ok.clone() }.validate().is_err());
    }

    #[test]
    fn response_components_wrap_covariates_cyclically() {
        // With p = 10, components k, k+10 and k+20 read the same covariates,
        // so their means are identical.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for setting in 1..=6u8 {
            let x: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mu = regression_mean(setting, &x, 30).unwrap();
            for k in 0..10 {
                assert_eq!(mu[k], mu[k + 10]);
                assert_eq!(mu[k], mu[k + 20]);
            }
        }
    }

    /// Monte Carlo check of hand-integrated response means.
    ///
    /// With x uniform on (-1,1): setting 1 components average 1.5; setting 2
    /// averages 0 + E[x^2] + 0.5 = 1/3 + 1/2; setting 3 averages 0.6875
    /// (0.125 from the upper branch, -0.1875 from the lower, plus 0.75).
    #[test]
    fn response_means_match_hand_integrals() {
        let n = 40_000;
        for (setting, want) in [(1u8, 1.5), (2, 1.0 / 3.0 + 0.5), (3, 0.6875)] {
            let cfg = SimConfig {
                setting,
                d: 2,
                n_train: n,
                n_cal: 1,
                m: 1,
                seed: 100 + setting as u64,
                ..Default::default()
            };
            let data = gen_dataset(&cfg).unwrap();
            let mean = data.train.y().column(0).sum() / n as f64;
            assert!(
                (mean - want).abs() < 0.02,
                "setting {setting}: mean {mean}, want {want}"
            );
        }
    }

    /// The Gaussian noise must reproduce covariance 0.45 I + 0.05 J.
    #[test]
    fn noise_covariance_matches_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 40_000;
        let d = 3;
        let e = gen_noise(1, n, d, &mut rng).unwrap();
        for a in 0..d {
            for b in 0..d {
                let cov = (0..n).map(|i| e[[i, a]] * e[[i, b]]).sum::<f64>() / n as f64;
                let want = if a == b { 0.5 } else { 0.05 };
                assert!(
                    (cov - want).abs() < 0.03,
                    "cov[{a},{b}] = {cov}, want {want}"
                );
            }
        }
    }

    /// Heavy-tailed settings must produce far more large deviations than the
    /// Gaussian ones.
    #[test]
    fn t_noise_has_heavier_tails() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let n = 40_000;
        let gauss = gen_noise(1, n, 2, &mut rng).unwrap();
        let heavy = gen_noise(4, n, 2, &mut rng).unwrap();
        let tail = |e: &Array2<f64>| {
            (0..n).filter(|&i| e[[i, 0]].abs() > 2.0).count() as f64 / n as f64
        };
        let (tg, th) = (tail(&gauss), tail(&heavy));
        assert!(tg < 0.01, "gaussian tail fraction {tg}");
        assert!(th > 0.03, "t tail fraction {th}");
        assert!(th > 3.0 * tg);
    }

    #[test]
    fn task_regions_match_their_tables() {
        assert_eq!(
            task_region(1, 10).unwrap(),
            TargetRegion::orthant(vec![-0.2; 10]).unwrap()
        );
        assert_eq!(
            task_region(2, 2).unwrap(),
            TargetRegion::ball(vec![2.0, 2.0], 1.5).unwrap()
        );
        assert_eq!(
            task_region(3, 30).unwrap(),
            TargetRegion::orthant_complement(vec![-1.6; 30]).unwrap()
        );
        assert_eq!(
            task_region(4, 5).unwrap(),
            TargetRegion::ball_complement(vec![2.0; 5], 4.0).unwrap()
        );
        assert!(task_region(1, 3).is_err());
        assert!(task_region(5, 10).is_err());
    }

    /// Spot check that a representative configuration produces a moderate
    /// in-region fraction (the selection problem is neither trivial nor
    /// hopeless there).
    #[test]
    fn representative_in_region_fraction_is_moderate() {
        let cfg = SimConfig {
            setting: 2,
            task: 2,
            d: 10,
            n_train: 1,
            n_cal: 1,
            m: 8000,
            seed: 7,
            ..Default::default()
        };
        let data = gen_dataset(&cfg).unwrap();
        let region = cfg.region().unwrap();
        let frac = (0..data.test.n())
            .filter(|&i| region.contains(data.test.y_row(i)).unwrap())
            .count() as f64
            / data.test.n() as f64;
        assert!((0.10..=0.40).contains(&frac), "fraction {frac}");
    }
}
