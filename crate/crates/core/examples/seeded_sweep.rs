//! Driving the experiment harness from code: build a validated config, run
//! it with different worker counts, and check that the scientific fields
//! agree before writing CSV.
//!
//! ```text
//! cargo run --release --example seeded_sweep -- [out.csv]
//! ```

use conjecture_lab::lab::{run_experiment, run_single_trial, write_csv, ExperimentConfig};
use serde_json::{json, Map};

fn main() -> conjecture_lab::Result<()> {
    let mut params = Map::new();
    params.insert("graph".into(), json!("er:16,0.4"));
    let base = ExperimentConfig::new("sync", 42, 24, &params)?;

    let serial = run_experiment(&base.clone().with_jobs(1))?;
    let parallel = run_experiment(&base.clone().with_jobs(4))?;
    let same = serial
        .records
        .iter()
        .zip(&parallel.records)
        .all(|(a, b)| a.scientific() == b.scientific());
    println!("jobs=1 and jobs=4 agree: {same}");

    let again = run_single_trial(&base.spec, 7)?;
    println!(
        "trial 7 regenerated alone: {}",
        again[0].scientific() == serial.records[7].scientific()
    );
    println!("{}", serde_json::to_string_pretty(&serial.summary)?);

    match std::env::args().nth(1) {
        Some(path) => write_csv("sync", &serial.records, std::fs::File::create(path)?)?,
        None => write_csv("sync", &serial.records, std::io::stdout().lock())?,
    }
    Ok(())
}
