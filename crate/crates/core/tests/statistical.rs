//! Seeded statistical checks; each has a fixed seed and a wide margin.

use conjecture_lab::discrepancy::{matrix_spencer_min_norm, regular_representation, GroupSpec};
use conjecture_lab::ellipsoid::{transition_scan, SolverParams};
use conjecture_lab::multifreq::{detection_experiment, gen_instance, pca_stat, DetectionParams, MfGroup};
use conjecture_lab::rng_stream;
use conjecture_lab::stats::binomial_upper_tail;

#[test]
fn ellipsoid_rate_falls_with_alpha() {
    let grid = [0.05, 0.15, 0.35, 0.5];
    let trials = 30;
    let rep = transition_scan(10, &grid, trials, &mut rng_stream(99, 0), &SolverParams::default(), None).unwrap();
    let counts: Vec<u64> = rep
        .rows
        .iter()
        .map(|r| (r.feasible_rate * trials as f64).round() as u64)
        .collect();
    for w in counts.windows(2) {
        assert!(w[1] <= w[0] + 2, "{counts:?}");
    }
    // Far below the transition nearly every instance fits, far above almost none.
    assert!(binomial_upper_tail(counts[0], trials as u64, 0.5) < 1e-4, "{counts:?}");
    assert!(binomial_upper_tail(trials as u64 - counts[3], trials as u64, 0.5) < 1e-4, "{counts:?}");
}

#[test]
fn small_groups_have_small_signed_sums() {
    for s in ["C2", "C3", "C4", "C2xC2", "C5", "S3", "C6", "D4", "C2xC2xC2"] {
        let spec: GroupSpec = s.parse().unwrap();
        let rep = regular_representation(&spec).unwrap();
        let m = spec.order();
        let res = matrix_spencer_min_norm(&rep.to_spencer_instance().unwrap(), u64::MAX).unwrap();
        assert!(res.exact);
        assert!(res.value <= 6.0 * (m as f64).sqrt(), "{s}: {}", res.value);
        // The sum over the whole group has norm at most m, and the best signs
        // cannot exceed the all-plus pattern.
        assert!(res.value <= m as f64 + 1e-9);
    }
}

#[test]
fn auc_grows_with_lambda() {
    let aucs: Vec<f64> = [0.2, 1.0, 1.6, 3.0]
        .iter()
        .map(|&lambda| {
            let p = DetectionParams::new(150, 1, lambda, MfGroup::ContinuousU1, 40);
            detection_experiment(&p, &mut rng_stream(5, 0)).unwrap().auc
        })
        .collect();
    for w in aucs.windows(2) {
        assert!(w[1] >= w[0] - 0.05, "{aucs:?}");
    }
    assert!(aucs[3] > 0.99, "{aucs:?}");
    assert!(aucs[0] < 0.75, "{aucs:?}");
}

/// Above the critical strength the top eigenvalue of a rank-one spike plus
/// GUE noise sits near `lambda + 1/lambda`; below it, at the bulk edge 2.
#[test]
fn top_eigenvalue_follows_the_spike() {
    let n = 1500;
    let lmax = |lambda: f64, null: bool, stream: u64| {
        let inst = gen_instance(n, 1, lambda, MfGroup::ContinuousU1, null, &mut rng_stream(8, stream)).unwrap();
        pca_stat(inst.observation(1)).unwrap()
    };
    let spiked = lmax(2.0, false, 0);
    assert!((spiked - 2.5).abs() < 0.08, "{spiked}");
    let below = lmax(0.5, false, 1);
    assert!((below - 2.0).abs() < 0.08, "{below}");
    let null = lmax(2.0, true, 2);
    assert!((null - 2.0).abs() < 0.08, "{null}");
}
