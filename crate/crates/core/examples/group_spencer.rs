//! Signed sums of regular representation matrices: the smallest spectral norm
//! over all sign patterns, for a few small groups.
//!
//! ```text
//! cargo run --release --example group_spencer -- [GROUP ...]
//! ```

use conjecture_lab::discrepancy::{matrix_spencer_min_norm, regular_representation, GroupSpec};

fn main() -> conjecture_lab::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let specs: Vec<String> = if args.is_empty() {
        ["C2", "C3", "C4", "C2xC2", "S3", "C5", "D4", "C2xS3"].iter().map(|s| s.to_string()).collect()
    } else {
        args
    };

    println!("{:>8} {:>6} {:>10} {:>10} {:>8}", "group", "order", "min_norm", "/sqrt(m)", "exact");
    for s in &specs {
        let spec: GroupSpec = s.parse()?;
        let rep = regular_representation(&spec)?;
        let res = matrix_spencer_min_norm(&rep.to_spencer_instance()?, 1 << 24)?;
        println!(
            "{:>8} {:>6} {:>10.4} {:>10.4} {:>8}",
            spec.to_string(),
            spec.order(),
            res.value,
            res.constant,
            res.exact
        );
    }
    Ok(())
}
