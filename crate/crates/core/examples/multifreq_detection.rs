//! Spectral detection of a multi-frequency spike across signal strengths.
//!
//! ```text
//! cargo run --release --example multifreq_detection -- [n] [L] [pairs] [group]
//! ```

use conjecture_lab::multifreq::{detection_experiment, DetectionParams, MfGroup};
use conjecture_lab::rng_stream;

fn main() -> conjecture_lab::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let n: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(400);
    let freqs: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1);
    let pairs: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(40);
    let group: MfGroup = args
        .get(4)
        .map_or(Ok(MfGroup::ContinuousU1), |s| s.parse())?;

    println!("n = {n}, L = {freqs}, group = {group}, {pairs} signal/null pairs");
    println!(
        "{:>7} {:>8} {:>10} {:>8} {:>12}",
        "lambda", "auc", "auc_sum", "power", "mean_top"
    );
    for lambda in [0.0, 0.3, 0.6, 0.9, 1.2, 1.5, 2.0] {
        let params = DetectionParams::new(n, freqs, lambda, group, pairs);
        let r = detection_experiment(&params, &mut rng_stream(7, 0))?;
        let mean_top = r.trials.iter().map(|t| t.signal.max).sum::<f64>() / pairs as f64;
        println!(
            "{:>7.2} {:>8.3} {:>10.3} {:>8.2} {:>12.4}",
            lambda, r.auc_max, r.auc_excess_sum, r.power, mean_top
        );
    }
    Ok(())
}
