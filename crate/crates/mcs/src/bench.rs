//! Monte Carlo harness: repeated simulated trials, per-method FDR/power
//! summaries with standard errors, and nominal-level sweeps.
//!
//! Seeding is paired: trial `t` of a run with master seed `s` generates its
//! dataset from `s + t`, and every method replays the same dataset with an
//! identical method-randomness stream, so method comparisons share both data
//! and tie-break draws. Methods never see test labels; selections are scored
//! against the withheld labels afterwards.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::baselines::{bi_select, cs_ib, cs_int, cs_is, BiSpec, CsIsSpec};
use crate::conformal::{fdp_and_power, mcs_select};
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::learn::{train_score, LearnedScore, TrainConfig};
use crate::predict::{fit_knn, fit_ridge, Predictor};
use crate::score::{DistScore, DistScoreSpec, ScoreKind};
use crate::simgen::{gen_dataset, SimConfig};

/// Which plug-in predictor a trial fits on its training block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PredictorSpec {
    Ridge { lambda: f64 },
    Knn { k: usize },
}

impl Default for PredictorSpec {
    fn default() -> Self {
        PredictorSpec::Ridge { lambda: 0.1 }
    }
}

impl PredictorSpec {
    pub fn fit(&self, train: &LabeledDataset) -> Result<Box<dyn Predictor>> {
        match *self {
            PredictorSpec::Ridge { lambda } => {
                Ok(Box::new(fit_ridge(train.x(), train.y(), lambda)?))
            }
            PredictorSpec::Knn { k } => Ok(Box::new(fit_knn(train.x(), train.y(), k)?)),
        }
    }
}

impl std::fmt::Display for PredictorSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PredictorSpec::Ridge { lambda } => write!(f, "ridge:{lambda}"),
            PredictorSpec::Knn { k } => write!(f, "knn:{k}"),
        }
    }
}

impl std::str::FromStr for PredictorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |why: String| Error::InvalidArgument {
            what: "predictor",
            why,
        };
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (s, None),
        };
        match kind {
            "ridge" => {
                let lambda = match arg {
                    None => 0.1,
                    Some(a) => a
                        .parse::<f64>()
                        .map_err(|_| bad(format!("bad ridge penalty {a:?}")))?,
                };
                if !(lambda >= 0.0 && lambda.is_finite()) {
                    return Err(bad(format!("ridge penalty must be >= 0, got {lambda}")));
                }
                Ok(PredictorSpec::Ridge { lambda })
            }
            "knn" => {
                let k = match arg {
                    None => 5,
                    Some(a) => a
                        .parse::<usize>()
                        .map_err(|_| bad(format!("bad neighbor count {a:?}")))?,
                };
                if k == 0 {
                    return Err(bad("neighbor count must be at least 1".to_string()));
                }
                Ok(PredictorSpec::Knn { k })
            }
            _ => Err(bad(format!(
                "unknown predictor {s:?}; expected ridge[:lambda] or knn[:k]"
            ))),
        }
    }
}

/// Selection method under benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Multivariate conformal selection, regular distance score.
    McsDistRegular,
    /// Multivariate conformal selection, clipped distance score.
    McsDistClipped,
    /// Multivariate conformal selection with a trained score network.
    McsLearn,
    /// Per-dimension selection at level q, intersected.
    CsInt,
    /// Per-dimension selection at level q/d, intersected.
    CsIb,
    /// Per-dimension selection at a holdout-tuned common level.
    CsIs,
    /// Binary-indicator reduction with a logistic classifier.
    Bi,
    /// Reference upper bound: selects exactly the in-region test points
    /// using the withheld labels.
    Oracle,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::McsDistRegular,
        Method::McsDistClipped,
        Method::McsLearn,
        Method::CsInt,
        Method::CsIb,
        Method::CsIs,
        Method::Bi,
        Method::Oracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::McsDistRegular => "mcs_dist_regular",
            Method::McsDistClipped => "mcs_dist_clipped",
            Method::McsLearn => "mcs_learn",
            Method::CsInt => "cs_int",
            Method::CsIb => "cs_ib",
            Method::CsIs => "cs_is",
            Method::Bi => "bi",
            Method::Oracle => "oracle",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument {
                what: "method",
                why: format!(
                    "unknown method {s:?}; expected one of {}",
                    Method::ALL.map(|m| m.name()).join(", ")
                ),
            })
    }
}

/// Everything one trial needs besides the method and level.
#[derive(Debug, Clone)]
pub struct TrialConfig {
    pub sim: SimConfig,
    pub predictor: PredictorSpec,
    /// Clipping constant for the distance scores.
    pub big_m: f64,
    /// Hyper-parameters for the trained score (its `q` and `seed` are
    /// overridden per trial).
    pub learn: TrainConfig,
    pub cs_is: CsIsSpec,
    pub bi: BiSpec,
}

impl Default for TrialConfig {
    fn default() -> Self {
        TrialConfig {
            sim: SimConfig::default(),
            predictor: PredictorSpec::default(),
            big_m: 1e6,
            learn: TrainConfig::default(),
            cs_is: CsIsSpec::default(),
            bi: BiSpec::default(),
        }
    }
}

/// Outcome of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub method: Method,
    pub fdp: f64,
    pub power: f64,
    pub n_selected: usize,
    /// Seed the trial's dataset was generated from.
    pub seed: u64,
}

/// One row of a benchmark summary table.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: Method,
    pub q: f64,
    pub mean_fdr: f64,
    pub se_fdr: f64,
    pub mean_power: f64,
    pub se_power: f64,
    pub reps: usize,
}

impl SummaryRow {
    pub const CSV_HEADER: &'static str = "method,q,mean_fdr,se_fdr,mean_power,se_power,reps";

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.method, self.q, self.mean_fdr, self.se_fdr, self.mean_power, self.se_power, self.reps
        )
    }
}

/// Run one method on one freshly generated dataset.
///
/// The dataset comes from `trial_seed`; the method's own randomness comes
/// from an independent stream of the same seed, so different methods at the
/// same seed see identical data and identical tie-break draws.
pub fn run_trial(config: &TrialConfig, method: Method, q: f64, trial_seed: u64) -> Result<TrialResult> {
    let sim = SimConfig {
        seed: trial_seed,
        ..config.sim.clone()
    };
    let data = gen_dataset(&sim)?;
    let region = sim.region()?;
    let predictor = config.predictor.fit(&data.train)?;
    let test = data.test.unlabeled();
    let mut truth = Vec::with_capacity(data.test.n());
    for j in 0..data.test.n() {
        truth.push(region.contains(data.test.y_row(j))?);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
    rng.set_stream(1);

    let selected: Vec<usize> = match method {
        Method::McsDistRegular | Method::McsDistClipped => {
            let kind = if method == Method::McsDistRegular {
                ScoreKind::Regular
            } else {
                ScoreKind::Clipped
            };
            let score = DistScore {
                region: &region,
                predictor: predictor.as_ref(),
                spec: DistScoreSpec {
                    kind,
                    big_m: config.big_m,
                    ..DistScoreSpec::default()
                },
            };
            mcs_select(&data.cal, &test, &region, &score, q, &mut rng)?.selected
        }
        Method::McsLearn => {
            // Re-split the calibration block 8:1:1 into score-training,
            // score-validation, and the retained calibration part.
            let n = data.cal.n();
            let n_train = n * 8 / 10;
            let n_val = n / 10;
            if n_train < 2 || n_val < 2 || n_train + n_val >= n {
                return Err(Error::InvalidArgument {
                    what: "calibration block",
                    why: format!("{n} rows are too few for an 8:1:1 training split"),
                });
            }
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            let f_train = data.cal.subset(&order[..n_train])?;
            let f_val = data.cal.subset(&order[n_train..n_train + n_val])?;
            let cal_rest = data.cal.subset(&order[n_train + n_val..])?;
            let learn_config = TrainConfig {
                q,
                seed: trial_seed,
                ..config.learn.clone()
            };
            let trained = train_score(&f_train, &f_val, &region, Some(predictor.as_ref()), &learn_config)?;
            let score = LearnedScore {
                model: &trained.model,
                region: &region,
                predictor: Some(predictor.as_ref()),
            };
            mcs_select(&cal_rest, &test, &region, &score, q, &mut rng)?.selected
        }
        Method::CsInt => cs_int(&data.cal, &test, &region, predictor.as_ref(), q, &mut rng)?,
        Method::CsIb => cs_ib(&data.cal, &test, &region, predictor.as_ref(), q, &mut rng)?,
        Method::CsIs => cs_is(
            &data.cal,
            &test,
            &region,
            predictor.as_ref(),
            q,
            &config.cs_is,
            &mut rng,
        )?,
        Method::Bi => bi_select(&data.cal, &test, &region, q, &config.bi, &mut rng)?,
        Method::Oracle => (0..truth.len()).filter(|&j| truth[j]).collect(),
    };

    let (fdp, power) = fdp_and_power(&selected, &truth);
    Ok(TrialResult {
        method,
        fdp,
        power,
        n_selected: selected.len(),
        seed: trial_seed,
    })
}

/// A full benchmark request.
#[derive(Debug, Clone)]
pub struct BenchmarkSpec {
    pub trial: TrialConfig,
    pub methods: Vec<Method>,
    pub q: f64,
    pub reps: usize,
    pub master_seed: u64,
    /// Worker threads for the trial loop; 0 or 1 runs serially.
    pub jobs: usize,
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        BenchmarkSpec {
            trial: TrialConfig::default(),
            methods: vec![Method::McsDistClipped],
            q: 0.1,
            reps: 200,
            master_seed: 0,
            jobs: 1,
        }
    }
}

/// Sample mean and standard error (sample SD over sqrt(n); 0 for n = 1).
fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Run `reps` paired trials of every method and aggregate.
pub fn run_benchmark(spec: &BenchmarkSpec) -> Result<Vec<SummaryRow>> {
    if spec.methods.is_empty() {
        return Err(Error::Empty {
            what: "benchmark methods",
        });
    }
    if spec.reps == 0 {
        return Err(Error::InvalidArgument {
            what: "repetitions",
            why: "must be at least 1".to_string(),
        });
    }

    let run_all = |t: usize| -> Result<Vec<TrialResult>> {
        let trial_seed = spec.master_seed.wrapping_add(t as u64);
        spec.methods
            .iter()
            .map(|&m| run_trial(&spec.trial, m, spec.q, trial_seed))
            .collect()
    };

    // One entry per trial, each holding one result per method; collected in
    // trial order so aggregation is deterministic regardless of scheduling.
    let per_trial: Vec<Vec<TrialResult>> = if spec.jobs > 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(spec.jobs)
            .build()
            .map_err(|e| Error::InvalidArgument {
                what: "jobs",
                why: e.to_string(),
            })?;
        pool.install(|| (0..spec.reps).into_par_iter().map(run_all).collect::<Result<_>>())?
    } else {
        (0..spec.reps).map(run_all).collect::<Result<_>>()?
    };

    let mut rows = Vec::with_capacity(spec.methods.len());
    for (mi, &method) in spec.methods.iter().enumerate() {
        let fdps: Vec<f64> = per_trial.iter().map(|t| t[mi].fdp).collect();
        let powers: Vec<f64> = per_trial.iter().map(|t| t[mi].power).collect();
        let (mean_fdr, se_fdr) = mean_se(&fdps);
        let (mean_power, se_power) = mean_se(&powers);
        rows.push(SummaryRow {
            method,
            q: spec.q,
            mean_fdr,
            se_fdr,
            mean_power,
            se_power,
            reps: spec.reps,
        });
    }
    Ok(rows)
}

/// Run the benchmark at each nominal level of the grid (same master seed per
/// level, so levels are paired too). Rows are grouped by level in grid order.
pub fn sweep_nominal_levels(spec: &BenchmarkSpec, q_grid: &[f64]) -> Result<Vec<SummaryRow>> {
    if q_grid.is_empty() {
        return Err(Error::Empty {
            what: "nominal-level grid",
        });
    }
    let mut rows = Vec::with_capacity(q_grid.len() * spec.methods.len());
    for &q in q_grid {
        let level_spec = BenchmarkSpec {
            q,
            ..spec.clone()
        };
        rows.extend(run_benchmark(&level_spec)?);
    }
    Ok(rows)
}

/// The default sweep grid: 0.05 to 0.5 in steps of 0.05.
pub fn default_q_grid() -> Vec<f64> {
    (1..=10).map(|i| i as f64 * 0.05).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_trial() -> TrialConfig {
        TrialConfig {
            sim: SimConfig {
                setting: 2,
                task: 1,
                d: 2,
                n_train: 100,
                n_cal: 100,
                m: 40,
                ..SimConfig::default()
            },
            ..TrialConfig::default()
        }
    }

    #[test]
    fn method_and_predictor_parsing() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("svd".parse::<Method>().is_err());
        assert_eq!(
            "ridge:0.5".parse::<PredictorSpec>().unwrap(),
            PredictorSpec::Ridge { lambda: 0.5 }
        );
        assert_eq!(
            "ridge".parse::<PredictorSpec>().unwrap(),
            PredictorSpec::Ridge { lambda: 0.1 }
        );
        assert_eq!("knn:3".parse::<PredictorSpec>().unwrap(), PredictorSpec::Knn { k: 3 });
        assert!("knn:0".parse::<PredictorSpec>().is_err());
        assert!("svm".parse::<PredictorSpec>().is_err());
        assert_eq!(format!("{}", PredictorSpec::Knn { k: 3 }), "knn:3");
    }

    #[test]
    fn near_zero_level_selects_nothing() {
        let r = run_trial(&small_trial(), Method::McsDistClipped, 1e-9, 7).unwrap();
        assert_eq!(r.n_selected, 0);
        assert_eq!(r.fdp, 0.0);
        assert_eq!(r.power, 0.0);
    }

    #[test]
    fn oracle_is_perfect() {
        let r = run_trial(&small_trial(), Method::Oracle, 0.3, 5).unwrap();
        assert_eq!(r.fdp, 0.0);
        assert_eq!(r.power, 1.0);
        assert!(r.n_selected > 0, "oracle found no in-region points");
    }

    #[test]
    fn trials_are_deterministic_and_paired() {
        let cfg = small_trial();
        let a = run_trial(&cfg, Method::McsDistClipped, 0.3, 11).unwrap();
        let b = run_trial(&cfg, Method::McsDistClipped, 0.3, 11).unwrap();
        assert_eq!(a, b);
        let c = run_trial(&cfg, Method::McsDistClipped, 0.3, 12).unwrap();
        assert!(a.seed != c.seed);
        // The oracle run at the same seed sees the same dataset, so its
        // selection count (the number of in-region test points) is stable.
        let o1 = run_trial(&cfg, Method::Oracle, 0.3, 11).unwrap();
        let o2 = run_trial(&cfg, Method::Oracle, 0.3, 11).unwrap();
        assert_eq!(o1.n_selected, o2.n_selected);
    }

    #[test]
    fn mean_se_matches_streaming_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let values: Vec<f64> = (0..257).map(|_| rng.random_range(0.0..1.0)).collect();
        let (mean, se) = mean_se(&values);

        // Streaming (Welford) reference.
        let mut m = 0.0;
        let mut s = 0.0;
        for (i, &v) in values.iter().enumerate() {
            let delta = v - m;
            m += delta / (i + 1) as f64;
            s += delta * (v - m);
        }
        let n = values.len() as f64;
        let ref_se = (s / (n - 1.0) / n).sqrt();
        assert!((mean - m).abs() < 1e-12);
        assert!((se - ref_se).abs() < 1e-12);

        assert_eq!(mean_se(&[0.4]), (0.4, 0.0));
    }

    #[test]
    fn single_rep_summary_equals_the_trial() {
        let spec = BenchmarkSpec {
            trial: small_trial(),
            methods: vec![Method::McsDistClipped, Method::Oracle],
            q: 0.3,
            reps: 1,
            master_seed: 21,
            jobs: 1,
        };
        let rows = run_benchmark(&spec).unwrap();
        let trial = run_trial(&spec.trial, Method::McsDistClipped, 0.3, 21).unwrap();
        assert_eq!(rows[0].mean_fdr, trial.fdp);
        assert_eq!(rows[0].mean_power, trial.power);
        assert_eq!(rows[0].se_fdr, 0.0);
        assert_eq!(rows[1].mean_power, 1.0);
        assert_eq!(rows[0].reps, 1);
    }

    #[test]
    fn benchmark_rows_are_well_formed() {
        let spec = BenchmarkSpec {
            trial: small_trial(),
            methods: vec![Method::McsDistClipped, Method::CsIb, Method::Bi, Method::Oracle],
            q: 0.3,
            reps: 4,
            master_seed: 0,
            jobs: 1,
        };
        let rows = run_benchmark(&spec).unwrap();
        assert_eq!(rows.len(), 4);
        for row in &rows {
            assert!((0.0..=1.0).contains(&row.mean_fdr));
            assert!((0.0..=1.0).contains(&row.mean_power));
            assert!(row.se_fdr >= 0.0 && row.se_power >= 0.0);
            assert_eq!(row.reps, 4);
            assert_eq!(row.q, 0.3);
        }
        // CSV schema.
        assert_eq!(
            SummaryRow::CSV_HEADER.split(',').count(),
            rows[0].to_csv().split(',').count()
        );
    }

    #[test]
    fn parallel_run_matches_serial() {
        let spec = BenchmarkSpec {
            trial: small_trial(),
            methods: vec![Method::McsDistClipped, Method::Oracle],
            q: 0.3,
            reps: 6,
            master_seed: 9,
            jobs: 1,
        };
        let serial = run_benchmark(&spec).unwrap();
        let parallel = run_benchmark(&BenchmarkSpec { jobs: 3, ..spec }).unwrap();
        assert_eq!(serial, parallel);
    }

    #[test]
    fn singleton_grid_reduces_to_run_benchmark() {
        let spec = BenchmarkSpec {
            trial: small_trial(),
            methods: vec![Method::McsDistClipped],
            q: 0.1, // overridden by the grid
            reps: 2,
            master_seed: 4,
            jobs: 1,
        };
        let swept = sweep_nominal_levels(&spec, &[0.3]).unwrap();
        assert!(sweep_nominal_levels(&spec, &[]).is_err());
        let direct = run_benchmark(&BenchmarkSpec { q: 0.3, ..spec }).unwrap();
        assert_eq!(swept, direct);
    }

    #[test]
    fn power_grows_with_the_nominal_level() {
        let spec = BenchmarkSpec {
            trial: small_trial(),
            methods: vec![Method::McsDistClipped],
            q: 0.1,
            reps: 30,
            master_seed: 77,
            jobs: 1,
        };
        let rows = sweep_nominal_levels(&spec, &[0.1, 0.4]).unwrap();
        let slack = 2.0 * (rows[0].se_power + rows[1].se_power);
        assert!(
            rows[1].mean_power >= rows[0].mean_power - slack,
            "power fell from {} to {} (slack {slack})",
            rows[0].mean_power,
            rows[1].mean_power
        );
    }

    #[test]
    fn default_grid_spans_the_declared_range() {
        let grid = default_q_grid();
        assert_eq!(grid.len(), 10);
        assert!((grid[0] - 0.05).abs() < 1e-12);
        assert!((grid[9] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn learned_method_runs_end_to_end() {
        let cfg = TrialConfig {
            sim: SimConfig {
                setting: 2,
                task: 1,
                d: 2,
                n_train: 60,
                n_cal: 60,
                m: 20,
                ..SimConfig::default()
            },
            learn: TrainConfig {
                epochs: 3,
                hidden: 8,
                k_partitions: 5,
                ..TrainConfig::default()
            },
            ..TrialConfig::default()
        };
        let a = run_trial(&cfg, Method::McsLearn, 0.3, 2).unwrap();
        let b = run_trial(&cfg, Method::McsLearn, 0.3, 2).unwrap();
        assert_eq!(a, b);
    }
}
