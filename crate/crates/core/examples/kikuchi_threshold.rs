//! Mean top eigenvalue of the Kikuchi matrix over a signal grid and the first
//! grid point where it pops out of the noise.
//!
//! ```text
//! cargo run --release --example kikuchi_threshold -- [n] [r] [ell] [trials]
//! ```

use conjecture_lab::kikuchi::threshold_scan;
use conjecture_lab::rng_stream;

fn main() -> conjecture_lab::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|s| s.parse().ok()).collect();
    let n = args.first().copied().unwrap_or(24);
    let r = args.get(1).copied().unwrap_or(4);
    let ell = args.get(2).copied().unwrap_or(2);
    let trials = args.get(3).copied().unwrap_or(4);
    let grid = [0.0, 0.01, 0.02, 0.04, 0.06, 0.08, 0.1, 0.15, 0.2, 0.3];

    let rep = threshold_scan(n, r, ell, &grid, trials, 0.05, &mut rng_stream(3, 0))?;
    println!("n = {n}, r = {r}, ell = {ell}, {trials} trials");
    println!("{:>7} {:>12} {:>10} {:>10} {:>5}", "lambda", "mean_lmax", "std", "p", "pop");
    for row in &rep.rows {
        println!(
            "{:>7.2} {:>12.5} {:>10.5} {:>10.2e} {:>5}",
            row.lambda, row.mean_lmax, row.std_lmax, row.p_value, row.pop_flag
        );
    }
    match (rep.lambda_natural, rep.normalized) {
        (Some(l), Some(z)) => println!("pop-out at lambda = {l} (n^(r/4) lambda = {z:.3})"),
        _ => println!("no pop-out on this grid"),
    }
    if rep.unconverged > 0 {
        println!("{} eigenvalue estimates missed their tolerance", rep.unconverged);
    }
    Ok(())
}
