//! Acceptance suite. Each criterion runs once on a single worker and once on
//! four; the scientific outputs of the two runs must agree exactly.
//!
//! Prints one `PASS`/`FAIL` line per criterion and exits nonzero on failure.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use serde_json::{json, Value};

use conjecture_lab::discrepancy::{
    disc_exact, disc_exhaustive, hadamard_disc_report, matrix_spencer_min_norm, sylvester_hadamard,
    IntMatrix, SignMatrix, SpencerInstance,
};
use conjecture_lab::ellipsoid::{transition_scan, SolverParams};
use conjecture_lab::kikuchi::{assemble_dense, gen_spiked_tensor, threshold_scan, KikuchiOperator};
use conjecture_lab::kuramoto::{
    certify_critical, empirical_global_sync, Classification, Graph, PhaseState, SyncParams,
};
use conjecture_lab::multifreq::{detection_experiment, DetectionParams, MfGroup};
use conjecture_lab::sk::{exact_kernel, sk_instance, ExactKernel, SpinState};
use conjecture_lab::subsets::{all_subsets_colex, binomial, rank_subset_colex};
use conjecture_lab::{rng_stream, RngStream};

const SEED: u64 = 20240611;

struct Outcome {
    pass: bool,
    detail: String,
    /// Everything the criterion computed, for the reproducibility check.
    science: Value,
}

fn outcome(pass: bool, detail: String, science: Value) -> Outcome {
    Outcome {
        pass,
        detail,
        science,
    }
}

fn in_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .expect("thread pool")
        .install(f)
}

// 1 -------------------------------------------------------------------------

fn hadamard() -> Outcome {
    let mut exact = Vec::new();
    let mut ok = true;
    for k in 1..=4u32 {
        let rep = hadamard_disc_report(k, Some(u64::MAX)).expect("report");
        let v = rep.exact.expect("search finished");
        exact.push(v);
        ok &= rep.lower <= v as f64 && v <= rep.upper;
    }
    // Exhaustive oracle for H_3 over all 2^8 colorings, by direct products.
    let h3 = sylvester_hadamard(3).unwrap().to_int();
    let brute = (0u32..256)
        .map(|m| {
            let x: Vec<i8> = (0..8).map(|j| if m >> j & 1 == 1 { 1 } else { -1 }).collect();
            h3.inf_norm_of(&x)
        })
        .min()
        .unwrap();
    let lib_exhaustive = disc_exhaustive(&h3).value;
    ok &= exact[0] == 2 && exact[1] == 2 && exact[3] == 4;
    ok &= exact[2] == brute && lib_exhaustive == brute && brute <= 4;
    outcome(
        ok,
        format!(
            "disc(H_1..H_4) = {:?}, H_3 exhaustive = {brute}",
            exact
        ),
        json!({ "exact": exact, "h3_exhaustive": brute }),
    )
}

// 2 -------------------------------------------------------------------------

fn spencer_sanity() -> Outcome {
    use rayon::prelude::*;
    let rows: Vec<(usize, i64, bool)> = (0..200u64)
        .into_par_iter()
        .map(|i| {
            let n = 1 + (i % 14) as usize;
            let a = SignMatrix::random(n, n, &mut rng_stream(SEED, i)).to_int();
            let cert = disc_exact(&a, u64::MAX);
            assert!(cert.verify(&a));
            (n, cert.value, cert.exact)
        })
        .collect();
    let violations = rows
        .iter()
        .filter(|(n, v, exact)| !exact || *v as f64 > 6.0 * (*n as f64).sqrt())
        .count();
    let worst = rows
        .iter()
        .map(|(n, v, _)| *v as f64 / (*n as f64).sqrt())
        .fold(0.0, f64::max);
    outcome(
        violations == 0,
        format!("200 matrices, n in 1..=14, max disc/sqrt(n) = {worst:.3}"),
        json!(rows),
    )
}

// 3 -------------------------------------------------------------------------

fn commutative_spencer() -> Outcome {
    use rayon::prelude::*;
    let rows: Vec<(f64, i64)> = (0..50u64)
        .into_par_iter()
        .map(|i| {
            let mut r = rng_stream(SEED + 3, i);
            let b: Vec<Vec<f64>> = (0..10)
                .map(|_| (0..10).map(|_| r.sign() as f64).collect())
                .collect();
            let inst = SpencerInstance::from_diagonal_rows(&b).unwrap();
            let ms = matrix_spencer_min_norm(&inst, u64::MAX).unwrap();
            assert!(ms.exact);
            // Column j of the sign matrix is the diagonal of the j-th matrix.
            let mut data = vec![0i64; 100];
            for (j, row) in b.iter().enumerate() {
                for (i, v) in row.iter().enumerate() {
                    data[i * 10 + j] = *v as i64;
                }
            }
            let bt = IntMatrix::new(10, 10, data).unwrap();
            (ms.value, disc_exact(&bt, u64::MAX).value)
        })
        .collect();
    let mismatches = rows.iter().filter(|(a, b)| *a != *b as f64).count();
    outcome(
        mismatches == 0,
        format!("50 instances, {mismatches} mismatches"),
        json!(rows),
    )
}

// 4 -------------------------------------------------------------------------

fn kuramoto() -> Outcome {
    let params = SyncParams::default();
    let c5 = certify_critical(
        &Graph::cycle(5),
        &PhaseState::twisted(5, 1),
        params.tol_grad,
        params.tol_hess,
    )
    .unwrap();
    let c5_ok = c5.classification == Classification::NonglobalLocalMin
        && c5.grad_inf_norm <= 1e-8
        && c5.quotient_min_eig >= 1e-6;
    let k5 = empirical_global_sync(&Graph::complete(5), 200, &mut rng_stream(SEED, 4), &params)
        .unwrap();
    let per: Vec<(f64, &str)> = k5
        .per_trial
        .iter()
        .map(|t| (t.energy, t.classification.as_str()))
        .collect();
    outcome(
        c5_ok && k5.fraction_synchronized == 1.0,
        format!(
            "C_5 twist: grad {:.1e}, quotient min eig {:.4} ({}); K_5 sync fraction {}",
            c5.grad_inf_norm,
            c5.quotient_min_eig,
            c5.classification.as_str(),
            k5.fraction_synchronized
        ),
        json!({
            "c5": [c5.grad_inf_norm, c5.quotient_min_eig, c5.energy],
            "k5": per,
        }),
    )
}

// 5 -------------------------------------------------------------------------

fn ellipsoid() -> Outcome {
    let grid = [0.10, 0.45, 0.60];
    let rep = transition_scan(
        30,
        &grid,
        50,
        &mut rng_stream(SEED, 5),
        &SolverParams::default(),
        None,
    )
    .unwrap();
    let rate: Vec<f64> = rep.rows.iter().map(|r| r.feasible_rate).collect();
    let trials: Vec<(String, usize, f64)> = rep
        .trials
        .iter()
        .map(|t| (t.verdict.as_str().to_string(), t.iterations, t.max_residual))
        .collect();
    outcome(
        rate[0] >= 0.8 && rate[1] <= 0.2 && rate[2] == 0.0,
        format!("d = 30, feasible rates at alpha {grid:?}: {rate:?}"),
        json!({ "rates": rate, "trials": trials }),
    )
}

// 6 -------------------------------------------------------------------------

/// Dense Kikuchi matrix straight from the definition: rows and columns are
/// `ell`-subsets, and `(S, T)` carries the tensor entry of `S xor T` when that
/// has exactly `r` elements.
fn kikuchi_by_definition(t: &conjecture_lab::kikuchi::SpikedTensor, ell: usize) -> DMatrix<f64> {
    let (n, r) = (t.n(), t.r());
    let subsets = all_subsets_colex(n, ell);
    let dim = subsets.len();
    let mut m = DMatrix::zeros(dim, dim);
    for (a, s) in subsets.iter().enumerate() {
        for (b, u) in subsets.iter().enumerate() {
            let diff: Vec<usize> = (0..n)
                .filter(|i| s.contains(i) != u.contains(i))
                .collect();
            if diff.len() == r {
                m[(a, b)] = t.entry(rank_subset_colex(&diff, n).unwrap() as usize);
            }
        }
    }
    m
}

fn kikuchi_configs() -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    for n in 2..=16usize {
        for r in (2..=n).step_by(2) {
            for ell in r / 2..=n {
                if binomial(n as u64, ell as u64) <= 512 {
                    out.push((n, r, ell));
                }
            }
        }
    }
    out
}

fn kikuchi() -> Outcome {
    use rayon::prelude::*;
    let configs = kikuchi_configs();
    let checks: Vec<(f64, f64, bool)> = configs
        .par_iter()
        .enumerate()
        .map(|(i, &(n, r, ell))| {
            let mut rng = rng_stream(SEED + 6, i as u64);
            let t = gen_spiked_tensor(n, r, 0.7, None, &mut rng).unwrap();
            let op = KikuchiOperator::new(&t, ell).unwrap();
            let reference = kikuchi_by_definition(&t, ell);
            let dense = assemble_dense(&op).unwrap();
            let assembly_err = (dense.as_matrix() - &reference).amax();
            let x: Vec<f64> = (0..op.dim()).map(|_| rng.normal()).collect();
            let mut y = vec![0.0; op.dim()];
            op.matvec(&x, &mut y).unwrap();
            let yr = &reference * nalgebra::DVector::from_column_slice(&x);
            let matvec_err = y.iter().zip(yr.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let expected = binomial(ell as u64, r as u64 / 2)
                * binomial((n - ell) as u64, r as u64 / 2);
            let mut degrees_ok = op.row_degree() == expected;
            for s in all_subsets_colex(n, ell) {
                let mut count = 0u64;
                op.for_each_neighbor(&s, |_, _| count += 1);
                degrees_ok &= count == expected;
            }
            (assembly_err, matvec_err, degrees_ok)
        })
        .collect();
    let worst_matvec = checks.iter().map(|c| c.1.max(c.0)).fold(0.0, f64::max);
    let degrees_ok = checks.iter().all(|c| c.2);

    // Threshold scan against dense eigensolves of the same noise draws.
    let (n, r, ell, trials, eps) = (60, 2, 1, 6, 0.05);
    let grid: Vec<f64> = (0..=30).map(|k| k as f64 * 0.01).collect();
    let scan = threshold_scan(n, r, ell, &grid, trials, eps, &mut rng_stream(SEED, 60)).unwrap();
    let base = rng_stream(SEED, 60).derive_seed();
    let dense_lmax: Vec<Vec<f64>> = (0..trials)
        .map(|t| {
            let z = gen_spiked_tensor(n, r, 0.0, None, &mut RngStream::new(base, t as u64)).unwrap();
            grid.iter()
                .map(|&lambda| {
                    let m = kikuchi_by_definition(&z.with_lambda(lambda), ell);
                    m.symmetric_eigenvalues().max()
                })
                .collect()
        })
        .collect();
    let means: Vec<f64> = (0..grid.len())
        .map(|k| dense_lmax.iter().map(|row| row[k]).sum::<f64>() / trials as f64)
        .collect();
    let dense_natural = (1..grid.len())
        .find(|&k| means[k] > (1.0 + eps) * means[0])
        .map(|k| grid[k]);
    let lanczos_err = scan
        .lmax
        .iter()
        .zip(&dense_lmax)
        .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max);
    let bracket = match (scan.lambda_natural, dense_natural) {
        (Some(a), Some(b)) => a <= 2.0 * b && b <= 2.0 * a,
        _ => false,
    };
    outcome(
        worst_matvec <= 1e-10 && degrees_ok && bracket,
        format!(
            "{} configurations, max |matvec - dense| = {worst_matvec:.1e}, degrees {}; \
             pop-out {:?} vs dense {:?} (max eigenvalue gap {lanczos_err:.1e})",
            configs.len(),
            if degrees_ok { "match" } else { "MISMATCH" },
            scan.lambda_natural,
            dense_natural
        ),
        json!({
            "checks": checks,
            "lmax": scan.lmax,
            "lambda_natural": scan.lambda_natural,
            "dense_natural": dense_natural,
        }),
    )
}

// 7 -------------------------------------------------------------------------

/// Largest deviation of the kernel from its defining properties, using the
/// dense matrix and a Gibbs measure computed here from the log-weights.
fn kernel_errors(k: &ExactKernel, inst: &conjecture_lab::sk::SkInstance) -> (f64, f64, f64) {
    let n = inst.n();
    let p = k.dense();
    let logw: Vec<f64> = (0..1u64 << n)
        .map(|m| inst.log_weight(&SpinState::from_mask(m, n)))
        .collect();
    let top = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = logw.iter().map(|l| (l - top).exp()).sum();
    let mu: Vec<f64> = logw.iter().map(|l| (l - top).exp() / z).collect();
    let states = mu.len();
    let mut row = 0.0f64;
    let mut db = 0.0f64;
    let mut st = 0.0f64;
    for i in 0..states {
        row = row.max((p.row(i).sum() - 1.0).abs());
        let mut col = 0.0;
        for j in 0..states {
            db = db.max((mu[i] * p[(i, j)] - mu[j] * p[(j, i)]).abs());
            col += mu[j] * p[(j, i)];
        }
        st = st.max((col - mu[i]).abs());
    }
    (row, db, st)
}

fn sk() -> Outcome {
    let mut worst = (0.0f64, 0.0f64, 0.0f64);
    let mut errors = Vec::new();
    for (i, (beta, h)) in [(0.05, 0.0), (0.05, 0.3), (0.2, 0.0), (0.2, 0.3)]
        .into_iter()
        .enumerate()
    {
        let inst = sk_instance(8, beta, vec![h; 8], &mut rng_stream(SEED + 7, i as u64)).unwrap();
        let k = ExactKernel::new(&inst).unwrap();
        let own = (k.row_sum_error(), k.detailed_balance_error(), k.stationarity_error());
        let ours = kernel_errors(&k, &inst);
        worst.0 = worst.0.max(own.0).max(ours.0);
        worst.1 = worst.1.max(own.1).max(ours.1);
        worst.2 = worst.2.max(own.2).max(ours.2);
        errors.push([own.0, own.1, own.2, ours.0, ours.1, ours.2]);
    }
    let exact_ok = worst.0 <= 1e-14 && worst.1 <= 1e-12 && worst.2 <= 1e-12;

    let ratios: Vec<Option<f64>> = [6usize, 8, 10]
        .iter()
        .map(|&n| {
            let inst = sk_instance(n, 0.1, vec![0.0; n], &mut rng_stream(SEED + 70, n as u64)).unwrap();
            let rep = exact_kernel(&inst, &[0.25], 100_000).unwrap();
            rep.t_mix[0]
                .1
                .map(|t| t as f64 / (n as f64 * (n as f64).ln()))
        })
        .collect();
    let found: Vec<f64> = ratios.iter().flatten().copied().collect();
    let spread = found.iter().cloned().fold(0.0, f64::max)
        / found.iter().cloned().fold(f64::INFINITY, f64::min);
    let mixing_ok = found.len() == 3 && spread <= 3.0;
    outcome(
        exact_ok && mixing_ok,
        format!(
            "n = 8: row sums {:.1e}, detailed balance {:.1e}, stationarity {:.1e}; \
             beta = 0.1 t_mix/(n ln n) = {ratios:.3?} (spread {spread:.2})",
            worst.0, worst.1, worst.2
        ),
        json!({ "errors": errors, "ratios": ratios }),
    )
}

// 8 -------------------------------------------------------------------------

fn multifreq() -> Outcome {
    let run = |lambda: f64, stream: u64| {
        let p = DetectionParams::new(800, 1, lambda, MfGroup::ContinuousU1, 100);
        detection_experiment(&p, &mut rng_stream(SEED, stream)).unwrap()
    };
    let strong = run(2.0, 8);
    let weak = run(0.3, 80);
    let stats = |r: &conjecture_lab::multifreq::DetectionReport| -> Vec<(f64, f64)> {
        r.trials.iter().map(|t| (t.signal.max, t.null.max)).collect()
    };
    outcome(
        strong.auc >= 0.95 && (0.35..=0.65).contains(&weak.auc),
        format!(
            "n = 800, 100 pairs: AUC {:.3} at lambda = 2, {:.3} at lambda = 0.3",
            strong.auc, weak.auc
        ),
        json!({ "strong": stats(&strong), "weak": stats(&weak) }),
    )
}

// ---------------------------------------------------------------------------

type Criterion = (&'static str, fn() -> Outcome, Duration);

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("hadamard discrepancies", hadamard, Duration::from_secs(60)),
        ("spencer sanity", spencer_sanity, Duration::from_secs(300)),
        ("commutative matrix spencer", commutative_spencer, Duration::from_secs(120)),
        ("kuramoto certification", kuramoto, Duration::from_secs(120)),
        ("ellipsoid transition bracket", ellipsoid, Duration::from_secs(1800)),
        ("kikuchi oracle equivalence", kikuchi, Duration::from_secs(600)),
        ("sk exactness", sk, Duration::from_secs(600)),
        ("multi-frequency detection", multifreq, Duration::from_secs(900)),
    ];
    let mut failed = 0;
    let mut reproducible = Vec::new();
    for (i, (name, f, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let first = in_pool(1, f);
        let elapsed = start.elapsed();
        let second = in_pool(4, f);
        let same = first.science == second.science;
        reproducible.push((i + 1, same));
        let pass = first.pass && elapsed <= *budget;
        failed += (!pass) as usize;
        println!(
            "{} criterion {}: {name}: {} [{:.1}s of {}s]",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            first.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    let bad: Vec<usize> = reproducible.iter().filter(|r| !r.1).map(|r| r.0).collect();
    let pass = bad.is_empty();
    failed += (!pass) as usize;
    println!(
        "{} criterion 9: reproducibility: jobs = 1 and jobs = 4 {}",
        if pass { "PASS" } else { "FAIL" },
        if pass {
            "identical for criteria 1-8".to_string()
        } else {
            format!("differ for criteria {bad:?}")
        }
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
