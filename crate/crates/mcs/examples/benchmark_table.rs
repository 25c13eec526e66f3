//! Paired benchmark: several selectors on the same stream of simulated
//! trials, summarized as mean FDR and power with standard errors.
//!
//! Each replicate draws one dataset and hands the identical copy to every
//! method, so the comparison is paired and per-trial noise cancels out of the
//! differences. The run is deterministic in the master seed.
//!
//! ```bash
//! cargo run --release --example benchmark_table
//! ```

use mcs::bench::{run_benchmark, BenchmarkSpec, Method, PredictorSpec, SummaryRow, TrialConfig};
use mcs::simgen::SimConfig;
use mcs::Result;

fn main() -> Result<()> {
    let spec = BenchmarkSpec {
        trial: TrialConfig {
            sim: SimConfig {
                setting: 1,
                task: 1,
                d: 10,
                n_train: 300,
                n_cal: 300,
                m: 100,
                ..SimConfig::default()
            },
            predictor: PredictorSpec::Ridge { lambda: 0.1 },
            ..TrialConfig::default()
        },
        methods: vec![
            Method::McsDistRegular,
            Method::McsDistClipped,
            Method::CsInt,
            Method::CsIb,
            Method::Bi,
            Method::Oracle,
        ],
        q: 0.2,
        reps: 200,
        master_seed: 42,
        jobs: 1,
    };
    let rows = run_benchmark(&spec)?;

    println!("{}", SummaryRow::CSV_HEADER);
    for row in &rows {
        println!("{}", row.to_csv());
    }

    println!();
    println!("{} paired replicates at q = {}. Things to look for:", spec.reps, spec.q);
    println!("  - judge mean_fdr against q in units of se_fdr: the calibrated methods and");
    println!("    the valid baselines land within a standard error or two of the level,");
    println!("    while cs_int sits dozens of standard errors above it — that gap is");
    println!("    structural, not noise;");
    println!("  - oracle (true responses revealed) bounds attainable power from above;");
    println!("  - cs_ib's Bonferroni haircut shows up as lost power next to mcs_dist_clipped.");
    Ok(())
}
