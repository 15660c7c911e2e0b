//! Feasibility rate of random ellipsoid fits across `alpha = n / d^2`.
//!
//! ```text
//! cargo run --release --example ellipsoid_scan -- [d] [trials] [alpha,alpha,...]
//! ```

use conjecture_lab::ellipsoid::{transition_scan, SolverParams, Verdict};
use conjecture_lab::rng_stream;

fn main() -> conjecture_lab::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let d: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(16);
    let trials: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(10);
    let grid: Vec<f64> = args
        .get(3)
        .map(|s| s.split(',').filter_map(|t| t.parse().ok()).collect())
        .unwrap_or_else(|| vec![0.1, 0.2, 0.25, 0.3, 0.45, 0.6]);

    let report = transition_scan(
        d,
        &grid,
        trials,
        &mut rng_stream(2024, 0),
        &SolverParams::default(),
        None,
    )?;
    println!("d = {d}, {trials} trials per point");
    println!(
        "{:>6} {:>6} {:>10} {:>10} {:>8}",
        "alpha", "n", "feasible", "mean_iter", "unknown"
    );
    for row in &report.rows {
        let unknown = report
            .trials
            .iter()
            .filter(|t| t.alpha == row.alpha && t.verdict == Verdict::Unknown)
            .count();
        println!(
            "{:>6.3} {:>6} {:>10.2} {:>10.1} {:>8}",
            row.alpha, row.n, row.feasible_rate, row.mean_iterations, unknown
        );
    }
    Ok(())
}
