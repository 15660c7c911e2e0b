//! Brackets and exact values for the discrepancy of Sylvester Hadamard
//! matrices, plus a few random sign matrices for scale.
//!
//! ```text
//! cargo run --release --example hadamard_discrepancy -- [max_k]
//! ```

use conjecture_lab::discrepancy::{disc_exact, disc_heuristic, hadamard_disc_report, SignMatrix};
use conjecture_lab::rng_stream;

fn main() -> conjecture_lab::Result<()> {
    let max_k: u32 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(4);

    println!("{:>3} {:>6} {:>8} {:>8} {:>8} {:>12}", "k", "n", "lower", "upper", "exact", "nodes");
    for k in 1..=max_k {
        // Exhaustive search is only attempted while it stays cheap.
        let budget = (k <= 4).then_some(50_000_000);
        let r = hadamard_disc_report(k, budget)?;
        let exact = r.exact.map_or("-".to_string(), |v| v.to_string());
        let nodes = r.nodes_explored.map_or("-".to_string(), |v| v.to_string());
        println!("{:>3} {:>6} {:>8.3} {:>8} {:>8} {:>12}", k, r.n, r.lower, r.upper, exact, nodes);
    }

    println!("\nrandom n x n sign matrices: exact vs heuristic");
    let mut rng = rng_stream(11, 0);
    for n in [6, 8, 10, 12] {
        let a = SignMatrix::random(n, n, &mut rng).to_int();
        let exact = disc_exact(&a, u64::MAX);
        let heur = disc_heuristic(&a, 16, &mut rng);
        println!(
            "n = {n:>2}: exact {} ({} nodes), heuristic {}, exact / sqrt(n) = {:.3}",
            exact.value,
            exact.nodes_explored,
            heur.value,
            exact.value as f64 / (n as f64).sqrt()
        );
    }
    Ok(())
}
