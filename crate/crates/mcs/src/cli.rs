//! Command-line front end: dataset simulation, selection on CSV data,
//! score-network training, and Monte Carlo benchmarks.
//!
//! Every value can come from three places, in increasing priority: built-in
//! defaults, a plain `key=value` config file (`--config`, `#` comments), and
//! command-line flags. The seed additionally falls back to the `MCS_SEED`
//! environment variable before defaulting to 0. Runs with identical settings
//! produce byte-identical output files.
//!
//! Exit codes: 0 on success, 2 on malformed CSV input (the message names the
//! offending row and column), 3 on any configuration or usage error.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::baselines::{bi_select, cs_ib, cs_int, cs_is, BiSpec, CsIsSpec};
use crate::bench::{
    default_q_grid, run_benchmark, sweep_nominal_levels, BenchmarkSpec, Method, PredictorSpec,
    SummaryRow, TrialConfig,
};
use crate::conformal::mcs_select;
use crate::dataset::{LabeledDataset, UnlabeledDataset};
use crate::error::{Error, Result};
use crate::learn::{train_score, InputFamily, LearnedScore, ScoreModel, TrainConfig, TrainLoss};
use crate::predict::{fit_logistic, load_predictor, Predictor};
use crate::region::TargetRegion;
use crate::score::{DistScore, DistScoreSpec, ProbScore, ScoreKind};
use crate::simgen::{gen_dataset, SimConfig};

/// Parse the process arguments, run the requested command, and return the
/// process exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Usage problems are configuration errors (exit 3); --help and
            // --version are successes.
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Csv { .. } => 2,
                _ => 3,
            }
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "mcs",
    version,
    about = "Multivariate conformal selection: pick test points whose response lands in a target region, with FDR control."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate train/cal/test CSVs (plus region.txt) from a simulation scenario.
    Simulate(SimulateArgs),
    /// Select test rows from CSV data; writes per-row p-values and decisions.
    Select(SelectArgs),
    /// Train a score network on a calibration CSV; writes the model, a
    /// training log, and the retained calibration block.
    TrainScore(TrainScoreArgs),
    /// Compare methods over repeated simulated trials at one nominal level.
    Benchmark(BenchmarkArgs),
    /// Run the benchmark across a grid of nominal levels.
    Sweep(SweepArgs),
}

/// Simulation-scenario flags shared by `simulate`, `benchmark` and `sweep`.
#[derive(Args, Debug, Default)]
struct SimFlags {
    /// Regression setting, 1-6.
    #[arg(long)]
    setting: Option<u8>,
    /// Selection task, 1-4.
    #[arg(long)]
    task: Option<u8>,
    /// Response dimension.
    #[arg(long)]
    d: Option<usize>,
    /// Covariate dimension.
    #[arg(long)]
    p: Option<usize>,
    /// Rows in the predictor-training block.
    #[arg(long)]
    n_train: Option<usize>,
    /// Rows in the calibration block.
    #[arg(long)]
    n_cal: Option<usize>,
    /// Rows in the test block.
    #[arg(long)]
    m: Option<usize>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Config file with key=value lines.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    sim: SimFlags,
    /// Seed for the draw.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory receiving train.csv, cal.csv, test.csv and region.txt.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

/// Flags describing where the plug-in predictor comes from.
#[derive(Args, Debug, Default)]
struct PredictorFlags {
    /// Labeled CSV to fit the predictor on.
    #[arg(long)]
    train: Option<PathBuf>,
    /// Predictor to fit: ridge[:lambda] or knn[:k].
    #[arg(long)]
    predictor: Option<PredictorSpec>,
    /// Saved predictor file (alternative to --train).
    #[arg(long)]
    predictor_model: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SelectArgs {
    /// Config file with key=value lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Labeled calibration CSV (x1..xp,y1..yd).
    #[arg(long)]
    cal: Option<PathBuf>,
    /// Test CSV; y columns, if present, are ignored.
    #[arg(long)]
    test: Option<PathBuf>,
    /// Region spec file.
    #[arg(long)]
    region: Option<PathBuf>,
    /// mcs_dist, mcs_learn, cs_int, cs_ib, cs_is or bi (mcs_dist_regular /
    /// mcs_dist_clipped force the matching score kind).
    #[arg(long)]
    method: Option<String>,
    /// Score kind for mcs_dist: regular, clipped or prob_clipped.
    #[arg(long)]
    score_kind: Option<ScoreKind>,
    /// Clipping constant M.
    #[arg(long)]
    big_m: Option<f64>,
    /// Trained score-model file (for --method mcs_learn).
    #[arg(long)]
    score_model: Option<PathBuf>,
    #[command(flatten)]
    predictor: PredictorFlags,
    /// Nominal FDR level.
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV (test_row_index,p_value,selected).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainScoreArgs {
    /// Config file with key=value lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Labeled calibration CSV; split 8:1:1 into score-training,
    /// score-validation and a retained calibration block.
    #[arg(long)]
    cal: Option<PathBuf>,
    /// Region spec file.
    #[arg(long)]
    region: Option<PathBuf>,
    #[command(flatten)]
    predictor: PredictorFlags,
    /// Score-network input family (covariate_only, prediction_only,
    /// covariate_and_prediction, full_with_y, all_inputs).
    #[arg(long)]
    family: Option<InputFamily>,
    /// Training loss: smooth_selection or p_penalty.
    #[arg(long)]
    loss: Option<TrainLoss>,
    /// Hidden width of the network.
    #[arg(long)]
    hidden: Option<usize>,
    /// Training epochs.
    #[arg(long)]
    epochs: Option<usize>,
    /// Validation partitions per epoch.
    #[arg(long)]
    k_partitions: Option<usize>,
    /// Nominal FDR level used by the validation selections.
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Directory receiving score_model.txt, training_log.csv and cal_rest.csv.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchmarkArgs {
    /// Config file with key=value lines.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    sim: SimFlags,
    /// Predictor to fit per trial: ridge[:lambda] or knn[:k].
    #[arg(long)]
    predictor: Option<PredictorSpec>,
    /// Comma-separated method list.
    #[arg(long)]
    methods: Option<String>,
    /// Nominal FDR level.
    #[arg(long)]
    q: Option<f64>,
    /// Trials per method.
    #[arg(long)]
    reps: Option<usize>,
    /// Master seed; trial t uses seed + t.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (1 = serial).
    #[arg(long)]
    jobs: Option<usize>,
    /// Output CSV path; omitted, the table goes to standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    benchmark: BenchmarkArgs,
    /// Comma-separated nominal levels (default 0.05,0.10,...,0.50).
    #[arg(long)]
    q_grid: Option<String>,
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Select(args) => cmd_select(args),
        Command::TrainScore(args) => cmd_train_score(args),
        Command::Benchmark(args) => cmd_benchmark(args, None),
        Command::Sweep(args) => {
            let grid = args.q_grid.clone();
            cmd_benchmark(args.benchmark, Some(grid))
        }
    }
}

// ---------------------------------------------------------------------------
// Config-file handling

/// The parsed `key=value` config file. Commands remove the keys they
/// understand; anything left over is an error, so typos never pass silently.
#[derive(Debug, Default)]
struct FileConfig {
    map: BTreeMap<String, String>,
}

impl FileConfig {
    fn load(path: Option<&Path>) -> Result<Self> {
        let mut map = BTreeMap::new();
        let Some(path) = path else {
            return Ok(FileConfig { map });
        };
        let text = std::fs::read_to_string(path)?;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some(eq) = line.find('=') else {
                return Err(Error::Config(format!(
                    "config line {}: expected key=value, got {line:?}",
                    idx + 1
                )));
            };
            let key = line[..eq].trim().to_string();
            let value = line[eq + 1..].trim().to_string();
            if map.insert(key.clone(), value).is_some() {
                return Err(Error::Config(format!("duplicate config key {key:?}")));
            }
        }
        Ok(FileConfig { map })
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.map.remove(key)
    }

    fn take_parsed<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.map.remove(key) {
            None => Ok(None),
            Some(v) => v.parse::<T>().map(Some).map_err(|_| {
                Error::Config(format!("bad value for config key {key}: {v:?}"))
            }),
        }
    }

    fn finish(self) -> Result<()> {
        match self.map.into_keys().next() {
            None => Ok(()),
            Some(key) => Err(Error::Config(format!("unknown config key {key:?}"))),
        }
    }
}

/// Flag beats config file beats default.
fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

/// Seed precedence: flag, then config file, then `MCS_SEED`, then 0.
fn seed_value(flag: Option<u64>, file: Option<u64>, env: Option<&str>) -> Result<u64> {
    if let Some(s) = flag.or(file) {
        return Ok(s);
    }
    match env {
        None => Ok(0),
        Some(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad MCS_SEED value {v:?}"))),
    }
}

fn resolve_seed(flag: Option<u64>, file: &mut FileConfig) -> Result<u64> {
    let from_file = file.take_parsed::<u64>("seed")?;
    seed_value(flag, from_file, std::env::var("MCS_SEED").ok().as_deref())
}

fn resolve_q(flag: Option<f64>, file: &mut FileConfig) -> Result<f64> {
    let q = pick(flag, file.take_parsed("q")?, 0.1);
    if !(q.is_finite() && q > 0.0 && q < 1.0) {
        return Err(Error::Config(format!("q must lie in (0, 1), got {q}")));
    }
    Ok(q)
}

fn resolve_sim(flags: &SimFlags, file: &mut FileConfig, seed: u64) -> Result<SimConfig> {
    let dft = SimConfig::default();
    let sim = SimConfig {
        setting: pick(flags.setting, file.take_parsed("setting")?, dft.setting),
        task: pick(flags.task, file.take_parsed("task")?, dft.task),
        d: pick(flags.d, file.take_parsed("d")?, dft.d),
        p: pick(flags.p, file.take_parsed("p")?, dft.p),
        n_train: pick(flags.n_train, file.take_parsed("n_train")?, dft.n_train),
        n_cal: pick(flags.n_cal, file.take_parsed("n_cal")?, dft.n_cal),
        m: pick(flags.m, file.take_parsed("m")?, dft.m),
        seed,
    };
    sim.validate()?;
    Ok(sim)
}

/// Resolve `learn.*` config keys into a training configuration.
fn resolve_learn(
    file: &mut FileConfig,
    q: f64,
    seed: u64,
    flags: Option<&TrainScoreArgs>,
) -> Result<TrainConfig> {
    let dft = TrainConfig::default();
    let flag = |f: fn(&TrainScoreArgs) -> Option<_>| flags.and_then(f);
    let config = TrainConfig {
        q,
        loss: pick(flags.and_then(|a| a.loss), file.take_parsed("learn.loss")?, dft.loss),
        family: pick(
            flags.and_then(|a| a.family),
            file.take_parsed("learn.family")?,
            dft.family,
        ),
        hidden: pick(flag(|a| a.hidden), file.take_parsed("learn.hidden")?, dft.hidden),
        epochs: pick(flag(|a| a.epochs), file.take_parsed("learn.epochs")?, dft.epochs),
        learning_rate: pick(None, file.take_parsed("learn.learning_rate")?, dft.learning_rate),
        momentum: pick(None, file.take_parsed("learn.momentum")?, dft.momentum),
        tau: pick(None, file.take_parsed("learn.tau")?, dft.tau),
        gamma: pick(None, file.take_parsed("learn.gamma")?, dft.gamma),
        epsilon: pick(None, file.take_parsed("learn.epsilon")?, dft.epsilon),
        k_partitions: pick(
            flag(|a| a.k_partitions),
            file.take_parsed("learn.k_partitions")?,
            dft.k_partitions,
        ),
        big_m: pick(None, file.take_parsed("learn.big_m")?, dft.big_m),
        seed,
    };
    config.validate()?;
    Ok(config)
}

fn resolve_cs_is(file: &mut FileConfig) -> Result<CsIsSpec> {
    let dft = CsIsSpec::default();
    let spec = CsIsSpec {
        holdout_fraction: pick(
            None,
            file.take_parsed("baseline.holdout_fraction")?,
            dft.holdout_fraction,
        ),
        grid_size: pick(None, file.take_parsed("baseline.grid_size")?, dft.grid_size),
    };
    spec.validate()?;
    Ok(spec)
}

fn resolve_bi(file: &mut FileConfig) -> Result<BiSpec> {
    let dft = BiSpec::default();
    let spec = BiSpec {
        steps: pick(None, file.take_parsed("baseline.steps")?, dft.steps),
        lr: pick(None, file.take_parsed("baseline.lr")?, dft.lr),
        big_m: pick(None, file.take_parsed("baseline.big_m")?, dft.big_m),
    };
    spec.validate()?;
    Ok(spec)
}

fn resolve_path(
    flag: Option<PathBuf>,
    file: &mut FileConfig,
    key: &str,
) -> Option<PathBuf> {
    flag.or_else(|| file.take(key).map(PathBuf::from))
}

fn require_path(
    flag: Option<PathBuf>,
    file: &mut FileConfig,
    key: &str,
) -> Result<PathBuf> {
    resolve_path(flag, file, key)
        .ok_or_else(|| Error::Config(format!("missing required path: --{key} (config key {key})")))
}

fn resolve_region(flag: Option<PathBuf>, file: &mut FileConfig) -> Result<TargetRegion> {
    let path = require_path(flag, file, "region")?;
    let text = std::fs::read_to_string(&path)?;
    TargetRegion::parse_spec(&text)
}

/// Where a command's predictor comes from. Both paths are always consumed
/// from the config file so that an unused `train=` line is not reported as an
/// unknown key.
struct PredictorSource {
    train: Option<PathBuf>,
    spec: PredictorSpec,
    model: Option<PathBuf>,
}

impl PredictorSource {
    fn resolve(flags: &PredictorFlags, file: &mut FileConfig) -> Result<Self> {
        Ok(PredictorSource {
            train: resolve_path(flags.train.clone(), file, "train"),
            spec: pick(flags.predictor, file.take_parsed("predictor")?, PredictorSpec::default()),
            model: resolve_path(flags.predictor_model.clone(), file, "predictor_model"),
        })
    }

    /// Fit or load the predictor; `None` when the method does not need one.
    fn build(&self, needed: bool) -> Result<Option<Box<dyn Predictor>>> {
        match (&self.train, &self.model) {
            (Some(_), Some(_)) => Err(Error::Config(
                "give either --train or --predictor-model, not both".into(),
            )),
            (Some(train), None) => {
                let data = LabeledDataset::from_csv(train)?;
                Ok(Some(self.spec.fit(&data)?))
            }
            (None, Some(model)) => Ok(Some(load_predictor(model)?)),
            (None, None) if needed => Err(Error::Config(
                "this method needs a predictor; pass --train <labeled csv> or --predictor-model <file>".into(),
            )),
            (None, None) => Ok(None),
        }
    }

    /// The labeled training CSV, required (used by the prob_clipped score,
    /// whose classifier cannot come from a regression-model file).
    fn training_data(&self) -> Result<LabeledDataset> {
        match &self.train {
            Some(train) => LabeledDataset::from_csv(train),
            None => Err(Error::Config(
                "the prob_clipped score needs --train <labeled csv> to fit its classifier".into(),
            )),
        }
    }
}

// ---------------------------------------------------------------------------
// simulate

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let mut file = FileConfig::load(args.config.as_deref())?;
    let seed = resolve_seed(args.seed, &mut file)?;
    let sim = resolve_sim(&args.sim, &mut file, seed)?;
    let out_dir = pick(
        args.out_dir,
        file.take("out_dir").map(PathBuf::from),
        PathBuf::from("."),
    );
    file.finish()?;

    let data = gen_dataset(&sim)?;
    std::fs::create_dir_all(&out_dir)?;
    data.train.to_csv(out_dir.join("train.csv"))?;
    data.cal.to_csv(out_dir.join("cal.csv"))?;
    data.test.to_csv(out_dir.join("test.csv"))?;
    std::fs::write(out_dir.join("region.txt"), sim.region()?.to_spec())?;
    println!(
        "wrote train.csv ({} rows), cal.csv ({}), test.csv ({}), region.txt to {}",
        data.train.n(),
        data.cal.n(),
        data.test.n(),
        out_dir.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// select

/// Selection methods addressable from the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SelectMethod {
    McsDist,
    McsLearn,
    CsInt,
    CsIb,
    CsIs,
    Bi,
}

/// Parse a method name; the `mcs_dist_<kind>` aliases also force the score
/// kind so benchmark rows can be replayed verbatim.
fn parse_select_method(s: &str) -> Result<(SelectMethod, Option<ScoreKind>)> {
    match s.trim() {
        "mcs_dist" => Ok((SelectMethod::McsDist, None)),
        "mcs_dist_regular" => Ok((SelectMethod::McsDist, Some(ScoreKind::Regular))),
        "mcs_dist_clipped" => Ok((SelectMethod::McsDist, Some(ScoreKind::Clipped))),
        "mcs_dist_prob_clipped" => Ok((SelectMethod::McsDist, Some(ScoreKind::ProbClipped))),
        "mcs_learn" => Ok((SelectMethod::McsLearn, None)),
        "cs_int" => Ok((SelectMethod::CsInt, None)),
        "cs_ib" => Ok((SelectMethod::CsIb, None)),
        "cs_is" => Ok((SelectMethod::CsIs, None)),
        "bi" => Ok((SelectMethod::Bi, None)),
        other => Err(Error::Config(format!(
            "unknown method {other:?}; expected mcs_dist[_regular|_clipped|_prob_clipped], \
             mcs_learn, cs_int, cs_ib, cs_is or bi"
        ))),
    }
}

fn cmd_select(args: SelectArgs) -> Result<()> {
    let mut file = FileConfig::load(args.config.as_deref())?;
    let seed = resolve_seed(args.seed, &mut file)?;
    let q = resolve_q(args.q, &mut file)?;
    let region = resolve_region(args.region, &mut file)?;
    let cal_path = require_path(args.cal, &mut file, "cal")?;
    let test_path = require_path(args.test, &mut file, "test")?;
    let out_path = require_path(args.out, &mut file, "out")?;
    let method_name = pick(args.method, file.take("method"), "mcs_dist".to_string());
    let (method, forced_kind) = parse_select_method(&method_name)?;
    let explicit_kind = match args.score_kind {
        Some(k) => Some(k),
        None => file.take_parsed::<ScoreKind>("score.kind")?,
    };
    let kind = match (forced_kind, explicit_kind) {
        (Some(a), Some(b)) if a != b => {
            return Err(Error::Config(format!(
                "method {method_name} fixes the score kind to {a}, but score kind {b} was given"
            )));
        }
        (Some(a), _) => a,
        (None, Some(b)) => b,
        (None, None) => ScoreKind::Clipped,
    };
    let big_m = pick(args.big_m, file.take_parsed("score.big_m")?, 1e6);
    let classifier_steps = pick(None, file.take_parsed("score.steps")?, 500);
    let classifier_lr = pick(None, file.take_parsed("score.lr")?, 0.1);
    let score_model_path = resolve_path(args.score_model, &mut file, "score_model");
    let predictor_source = PredictorSource::resolve(&args.predictor, &mut file)?;
    let cs_is_spec = resolve_cs_is(&mut file)?;
    let bi_spec = resolve_bi(&mut file)?;
    file.finish()?;

    let cal = LabeledDataset::from_csv(&cal_path)?;
    let test = UnlabeledDataset::from_csv(&test_path)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Baselines return bare index sets; the conformal methods also expose
    // p-values and the applied threshold.
    let mut p_values: Option<Vec<f64>> = None;
    let mut k_star: Option<usize> = None;
    let mut threshold: Option<f64> = None;
    let selected: Vec<usize> = match method {
        SelectMethod::McsDist => {
            let result = match kind {
                ScoreKind::ProbClipped => {
                    let train = predictor_source.training_data()?;
                    let mut labels = Vec::with_capacity(train.n());
                    for i in 0..train.n() {
                        labels.push(region.contains(train.y_row(i))?);
                    }
                    let classifier =
                        fit_logistic(train.x(), &labels, classifier_steps, classifier_lr)?;
                    let score = ProbScore {
                        region: &region,
                        classifier: &classifier,
                        big_m,
                    };
                    mcs_select(&cal, &test, &region, &score, q, &mut rng)?
                }
                _ => {
                    let predictor = predictor_source.build(true)?.expect("predictor required");
                    let score = DistScore {
                        region: &region,
                        predictor: predictor.as_ref(),
                        spec: DistScoreSpec {
                            kind,
                            big_m,
                            ..DistScoreSpec::default()
                        },
                    };
                    mcs_select(&cal, &test, &region, &score, q, &mut rng)?
                }
            };
            p_values = Some(result.p_values.values().to_vec());
            k_star = Some(result.k_star);
            threshold = Some(result.threshold);
            result.selected
        }
        SelectMethod::McsLearn => {
            let path = score_model_path.ok_or_else(|| {
                Error::Config("--method mcs_learn needs --score-model <file>".into())
            })?;
            let model = ScoreModel::load(&path)?;
            let predictor = predictor_source.build(model.family().uses_prediction())?;
            let score = LearnedScore {
                model: &model,
                region: &region,
                predictor: predictor.as_deref(),
            };
            let result = mcs_select(&cal, &test, &region, &score, q, &mut rng)?;
            p_values = Some(result.p_values.values().to_vec());
            k_star = Some(result.k_star);
            threshold = Some(result.threshold);
            result.selected
        }
        SelectMethod::CsInt | SelectMethod::CsIb | SelectMethod::CsIs => {
            let predictor = predictor_source.build(true)?.expect("predictor required");
            match method {
                SelectMethod::CsInt => {
                    cs_int(&cal, &test, &region, predictor.as_ref(), q, &mut rng)?
                }
                SelectMethod::CsIb => cs_ib(&cal, &test, &region, predictor.as_ref(), q, &mut rng)?,
                _ => cs_is(
                    &cal,
                    &test,
                    &region,
                    predictor.as_ref(),
                    q,
                    &cs_is_spec,
                    &mut rng,
                )?,
            }
        }
        SelectMethod::Bi => bi_select(&cal, &test, &region, q, &bi_spec, &mut rng)?,
    };

    let mut out = String::from("test_row_index,p_value,selected\n");
    let mut chosen = vec![false; test.n()];
    for &j in &selected {
        chosen[j] = true;
    }
    for j in 0..test.n() {
        let p = p_values.as_ref().map_or(f64::NAN, |p| p[j]);
        out.push_str(&format!("{j},{p},{}\n", u8::from(chosen[j])));
    }
    std::fs::write(&out_path, out)?;

    match (k_star, threshold) {
        (Some(k), Some(t)) => println!("selected={} k_star={k} threshold={t}", selected.len()),
        _ => println!("selected={} k_star=na threshold=na", selected.len()),
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// train-score

fn cmd_train_score(args: TrainScoreArgs) -> Result<()> {
    let mut file = FileConfig::load(args.config.as_deref())?;
    let seed = resolve_seed(args.seed, &mut file)?;
    let q = resolve_q(args.q, &mut file)?;
    let region = resolve_region(args.region.clone(), &mut file)?;
    let cal_path = require_path(args.cal.clone(), &mut file, "cal")?;
    let out_dir = pick(
        args.out_dir.clone(),
        file.take("out_dir").map(PathBuf::from),
        PathBuf::from("."),
    );
    let config = resolve_learn(&mut file, q, seed, Some(&args))?;
    let predictor_source = PredictorSource::resolve(&args.predictor, &mut file)?;
    file.finish()?;

    let cal = LabeledDataset::from_csv(&cal_path)?;
    let n = cal.n();
    let n_train = n * 8 / 10;
    let n_val = n / 10;
    if n_train < 2 || n_val < 2 || n_train + n_val >= n {
        return Err(Error::Config(format!(
            "calibration CSV has {n} rows; too few for an 8:1:1 split"
        )));
    }
    // Stream 3 keeps the split draw clear of the streams the trainer uses
    // for init, partitions and validation.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(3);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let f_train = cal.subset(&order[..n_train])?;
    let f_val = cal.subset(&order[n_train..n_train + n_val])?;
    let cal_rest = cal.subset(&order[n_train + n_val..])?;

    let predictor = predictor_source.build(config.family.uses_prediction())?;
    let trained = train_score(&f_train, &f_val, &region, predictor.as_deref(), &config)?;

    std::fs::create_dir_all(&out_dir)?;
    trained.model.save(&out_dir.join("score_model.txt"))?;
    let mut log = String::from("epoch,loss,mean_val_power\n");
    for r in &trained.log {
        log.push_str(&format!("{},{},{}\n", r.epoch, r.loss, r.mean_val_power));
    }
    std::fs::write(out_dir.join("training_log.csv"), log)?;
    cal_rest.to_csv(out_dir.join("cal_rest.csv"))?;

    println!(
        "trained epochs={} best_epoch={} split={}/{}/{} -> {}",
        trained.log.len(),
        trained.best_epoch,
        n_train,
        n_val,
        n - n_train - n_val,
        out_dir.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// benchmark / sweep

fn parse_methods(s: &str) -> Result<Vec<Method>> {
    s.split(',')
        .map(|t| t.trim().parse::<Method>())
        .collect::<Result<Vec<_>>>()
}

fn parse_q_grid(s: &str) -> Result<Vec<f64>> {
    let grid: Vec<f64> = s
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad nominal level {t:?} in q grid")))
        })
        .collect::<Result<Vec<_>>>()?;
    for &q in &grid {
        if !(q.is_finite() && q > 0.0 && q < 1.0) {
            return Err(Error::Config(format!("q must lie in (0, 1), got {q}")));
        }
    }
    Ok(grid)
}

/// `grid` is `None` for `benchmark`; for `sweep` it holds the optional
/// `--q-grid` flag value.
fn cmd_benchmark(args: BenchmarkArgs, grid: Option<Option<String>>) -> Result<()> {
    let mut file = FileConfig::load(args.config.as_deref())?;
    let seed = resolve_seed(args.seed, &mut file)?;
    let q = resolve_q(args.q, &mut file)?;
    let sim = resolve_sim(&args.sim, &mut file, 0)?;
    let predictor = pick(
        args.predictor,
        file.take_parsed("predictor")?,
        PredictorSpec::default(),
    );
    let methods_text = pick(
        args.methods,
        file.take("methods"),
        "mcs_dist_regular,mcs_dist_clipped,bi,oracle".to_string(),
    );
    let methods = parse_methods(&methods_text)?;
    let reps = pick(args.reps, file.take_parsed("reps")?, 200);
    let jobs = pick(args.jobs, file.take_parsed("jobs")?, 1);
    let big_m = pick(None, file.take_parsed("score.big_m")?, 1e6);
    let learn = resolve_learn(&mut file, q, 0, None)?;
    let cs_is = resolve_cs_is(&mut file)?;
    let bi = resolve_bi(&mut file)?;
    let out = resolve_path(args.out, &mut file, "out");
    let q_grid = match &grid {
        None => None,
        Some(flag) => {
            let text = flag.clone().or_else(|| file.take("q_grid"));
            Some(match text {
                Some(t) => parse_q_grid(&t)?,
                None => default_q_grid(),
            })
        }
    };
    file.finish()?;

    let spec = BenchmarkSpec {
        trial: TrialConfig {
            sim,
            predictor,
            big_m,
            learn,
            cs_is,
            bi,
        },
        methods,
        q,
        reps,
        master_seed: seed,
        jobs,
    };
    let rows = match q_grid {
        None => run_benchmark(&spec)?,
        Some(grid) => sweep_nominal_levels(&spec, &grid)?,
    };
    write_table(&rows, out.as_deref())
}

fn write_table(rows: &[SummaryRow], out: Option<&Path>) -> Result<()> {
    let mut text = String::from(SummaryRow::CSV_HEADER);
    text.push('\n');
    for row in rows {
        text.push_str(&row.to_csv());
        text.push('\n');
    }
    match out {
        Some(path) => {
            std::fs::write(path, text)?;
            Ok(())
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
