//! Random-start descent on several coupling graphs, with every endpoint
//! classified by its gradient and quotient Hessian.
//!
//! ```text
//! cargo run --release --example kuramoto_landscape -- [trials]
//! ```

use conjecture_lab::kuramoto::{
    certify_critical, empirical_global_sync, Graph, GraphSpec, PhaseState, SyncParams,
};
use conjecture_lab::rng_stream;

fn main() -> conjecture_lab::Result<()> {
    let trials: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(100);

    let twisted = PhaseState::twisted(5, 1);
    let rep = certify_critical(&Graph::cycle(5), &twisted, 1e-8, 1e-6)?;
    println!(
        "C5 twisted state: energy {:.6}, grad {:.1e}, quotient min eig {:.6}, {}",
        rep.energy,
        rep.grad_inf_norm,
        rep.quotient_min_eig,
        rep.classification.as_str()
    );

    let graphs = ["complete:8", "cycle:5", "cycle:12", "er:30,0.5", "reg:30,4", "signed:20,0.35", "signed:20,0.1"];
    println!(
        "\n{:>16} {:>8} {:>8} {:>8} {:>8} {:>8}",
        "graph", "sync", "nonglob", "saddle", "noconv", "best_E"
    );
    let mut rng = rng_stream(5, 0);
    for g in graphs {
        let spec: GraphSpec = g.parse()?;
        let graph = spec.build(&mut rng)?;
        let r = empirical_global_sync(&graph, trials, &mut rng, &SyncParams::default())?;
        println!(
            "{:>16} {:>8.3} {:>8} {:>8} {:>8} {:>8.4}",
            g, r.fraction_synchronized, r.n_nonglobal, r.n_saddle, r.n_nonconverged, r.best_energy
        );
    }
    Ok(())
}
