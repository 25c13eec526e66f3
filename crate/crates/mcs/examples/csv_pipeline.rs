//! The file-based workflow, driven from the library instead of the shell.
//!
//! Everything the `mcs` binary moves between subcommands travels through two
//! plain-text formats: CSV datasets (`x1..xp` covariate columns, `y1..yd`
//! response columns) and line-oriented `key=value` region specs. This example
//! writes a small study to disk, reads it back, and runs a selection from the
//! files alone — the shape of any pipeline where generation and selection
//! happen in different processes.
//!
//! ```bash
//! cargo run --example csv_pipeline
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mcs::conformal::mcs_select;
use mcs::dataset::{LabeledDataset, UnlabeledDataset};
use mcs::predict::fit_ridge;
use mcs::region::TargetRegion;
use mcs::score::{DistScore, DistScoreSpec};
use mcs::simgen::{gen_dataset, SimConfig};
use mcs::Result;

fn main() -> Result<()> {
    let dir = tempfile::tempdir()?;
    let path = |name: &str| dir.path().join(name);

    // --- producer side: simulate and persist ------------------------------
    let config = SimConfig {
        setting: 1,
        task: 1, // orthant region: every response coordinate above its cutoff
        d: 5,
        n_train: 200,
        n_cal: 200,
        m: 50,
        seed: 21,
        ..SimConfig::default()
    };
    let data = gen_dataset(&config)?;
    let region = config.region()?;

    data.train.to_csv(path("train.csv"))?;
    data.cal.to_csv(path("cal.csv"))?;
    data.test.to_csv(path("test.csv"))?; // labels included; readers may drop them
    std::fs::write(path("region.txt"), region.to_spec())?;

    let spec_text = std::fs::read_to_string(path("region.txt"))?;
    println!("region.txt:\n{}", spec_text.trim_end());

    // --- consumer side: everything below only touches the files -----------
    let train = LabeledDataset::from_csv(path("train.csv"))?;
    let cal = LabeledDataset::from_csv(path("cal.csv"))?;
    // A labeled file read as unlabeled keeps the covariates and ignores the
    // response columns, so the same test.csv serves honest selection here and
    // truth-telling audits elsewhere.
    let test = UnlabeledDataset::from_csv(path("test.csv"))?;
    let region = TargetRegion::parse_spec(&spec_text)?;

    assert_eq!(train, data.train);
    assert_eq!(cal, data.cal);
    println!(
        "\nround trip exact: {} train / {} cal rows match in every byte-decoded value",
        train.n(),
        cal.n()
    );

    let predictor = fit_ridge(train.x(), train.y(), 0.1)?;
    let score = DistScore {
        region: &region,
        predictor: &predictor,
        spec: DistScoreSpec::default(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let sel = mcs_select(&cal, &test, &region, &score, 0.25, &mut rng)?;

    // The same result file the CLI's `select` subcommand writes.
    let mut out = String::from("test_row_index,p_value,selected\n");
    for j in 0..test.n() {
        let picked = u8::from(sel.selected.binary_search(&j).is_ok());
        out.push_str(&format!("{j},{},{picked}\n", sel.p_values.values()[j]));
    }
    std::fs::write(path("selection.csv"), &out)?;

    println!(
        "\nselected {} of {} (k* = {}, threshold = {:.4}); first lines of selection.csv:",
        sel.selected.len(),
        test.n(),
        sel.k_star,
        sel.threshold
    );
    for line in out.lines().take(6) {
        println!("  {line}");
    }
    Ok(())
}
