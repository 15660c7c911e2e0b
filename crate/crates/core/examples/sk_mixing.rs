//! Exact Glauber mixing times for small SK instances, then simulated chains
//! with grand coupling at a larger size.
//!
//! ```text
//! cargo run --release --example sk_mixing -- [beta]
//! ```

use conjecture_lab::rng_stream;
use conjecture_lab::sk::{condition_report, exact_kernel, run_chain, sk_instance, SpinState, ANARI_RATIO_BAND};

fn main() -> conjecture_lab::Result<()> {
    let beta: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.1);

    println!("beta = {beta}");
    println!("{:>3} {:>10} {:>8} {:>8} {:>8} {:>14}", "n", "gap", "t(0.25)", "t(0.1)", "t(0.01)", "t(0.25)/nlogn");
    for n in [4, 6, 8, 10] {
        let inst = sk_instance(n, beta, vec![0.0; n], &mut rng_stream(1, n as u64))?;
        let rep = exact_kernel(&inst, &[0.25, 0.1, 0.01], 1_000_000)?;
        let t: Vec<String> = rep.t_mix.iter().map(|(_, t)| t.map_or("-".into(), |v| v.to_string())).collect();
        let ratio = rep.t_mix[0].1.map_or(f64::NAN, |t| t as f64 / (n as f64 * (n as f64).ln()));
        println!(
            "{:>3} {:>10.5} {:>8} {:>8} {:>8} {:>14.3}",
            n, rep.spectral_gap.gap, t[0], t[1], t[2], ratio
        );
    }

    let n = 200;
    let steps = (50.0 * n as f64 * (n as f64).ln()) as usize;
    let inst = sk_instance(n, beta, vec![0.0; n], &mut rng_stream(2, 0))?;
    let cond = condition_report(inst.j(), 0.01, ANARI_RATIO_BAND)?;
    println!(
        "\nn = {n}: row sum {:.3}, width {:.3}, dobrushin {}, spectral width {}",
        cond.max_row_abs_sum, cond.width, cond.dobrushin, cond.spectral_width
    );
    for seed in 0..5 {
        let d = run_chain(&inst, &SpinState::all(n, 1), steps, &mut rng_stream(seed, 1), Some(&SpinState::all(n, -1)))?;
        println!(
            "seed {seed}: coalesced at {:?}, tau_E {:.1}, tau_m {:.1}, flip rate {:.3}",
            d.coalescence_step, d.tau_energy, d.tau_magnetization, d.flip_rate
        );
    }
    Ok(())
}
