//! Multi-frequency spiked observations over `U(1)` or the `L`-th roots of
//! unity: `Y_l = (lambda / n) x^(l) x^(l)* + W_l / sqrt(n)` for `l = 1..L`,
//! with `x^(l)` the entrywise power and `W_l` Hermitian noise with
//! `E|W_ij|^2 = 1`, so the noise bulk ends at 2 and a single frequency
//! separates above `lambda = 1`.

use std::fmt;
use std::str::FromStr;

use nalgebra::Complex;
use nalgebra::{DMatrix, DVector, DVectorView};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::lanczos::{lambda_extremes_lanczos, LanczosOptions};
use crate::linalg::{sample_goe, sample_gue_unit, HermitianMatrix};
use crate::rng::{rng_stream, RngStream};
use crate::stats::{auc, quantile};

/// Start-vector seed for the top-eigenvalue solves.
const LANCZOS_SEED: u64 = 0x4d46_5251;
/// Null quantile used for the power estimate.
pub const FALSE_POSITIVE_LEVEL: f64 = 0.05;

/// The group `x` is drawn from; for roots of unity the order equals `L`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MfGroup {
    RootsOfUnity,
    ContinuousU1,
}

impl fmt::Display for MfGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MfGroup::RootsOfUnity => "zL",
            MfGroup::ContinuousU1 => "u1",
        })
    }
}

impl FromStr for MfGroup {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "zl" | "z" | "roots" | "roots_of_unity" => Ok(MfGroup::RootsOfUnity),
            "u1" | "u(1)" | "continuous_u1" => Ok(MfGroup::ContinuousU1),
            other => Err(LabError::Parse(format!(
                "unknown group `{other}` (expected zL or u1)"
            ))),
        }
    }
}

#[derive(Clone, Debug)]
enum Phases {
    /// `x_i = exp(2 pi i k_i / L)`.
    Discrete {
        k: Vec<u64>,
        order: u64,
    },
    Continuous(Vec<f64>),
}

/// `exp(2 pi i a / m)`, exact at multiples of a quarter turn.
fn root_of_unity(a: u64, m: u64) -> Complex<f64> {
    let a = a % m;
    if a == 0 {
        Complex::new(1.0, 0.0)
    } else if 2 * a == m {
        Complex::new(-1.0, 0.0)
    } else if 4 * a == m {
        Complex::new(0.0, 1.0)
    } else if 4 * a == 3 * m {
        Complex::new(0.0, -1.0)
    } else {
        Complex::from_polar(1.0, std::f64::consts::TAU * a as f64 / m as f64)
    }
}

impl Phases {
    fn power(&self, l: u64) -> Vec<Complex<f64>> {
        match self {
            Phases::Discrete { k, order } => k
                .iter()
                .map(|&ki| root_of_unity(ki * (l % order), *order))
                .collect(),
            Phases::Continuous(phi) => phi
                .iter()
                .map(|&p| Complex::from_polar(1.0, l as f64 * p))
                .collect(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct MfInstance {
    n: usize,
    l: usize,
    group: MfGroup,
    lambda: f64,
    phases: Option<Phases>,
    observations: Vec<HermitianMatrix>,
}

impl MfInstance {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn frequencies(&self) -> usize {
        self.l
    }

    pub fn group(&self) -> MfGroup {
        self.group
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn is_null(&self) -> bool {
        self.phases.is_none()
    }

    /// `Y_l` for `l = 1..=L`.
    pub fn observation(&self, l: usize) -> &HermitianMatrix {
        &self.observations[l - 1]
    }

    pub fn observations(&self) -> &[HermitianMatrix] {
        &self.observations
    }

    /// The entrywise power `x^(l)`; `None` under the null.
    pub fn signal_power(&self, l: u64) -> Option<Vec<Complex<f64>>> {
        self.phases.as_ref().map(|p| p.power(l))
    }

    /// Frequencies whose `x^(l)` is deterministic: `l ≡ 0 mod L` for roots
    /// of unity, none for `U(1)`.
    pub fn is_degenerate(&self, l: usize) -> bool {
        is_degenerate(self.group, self.l, l)
    }
}

pub fn is_degenerate(group: MfGroup, big_l: usize, l: usize) -> bool {
    group == MfGroup::RootsOfUnity && l % big_l == 0
}

/// Draws `x` (always, so signal and null consume the stream identically),
/// then the noise for each frequency in order. The null omits the spike.
pub fn gen_instance(
    n: usize,
    big_l: usize,
    lambda: f64,
    group: MfGroup,
    null: bool,
    rng: &mut RngStream,
) -> Result<MfInstance> {
    if n == 0 || big_l == 0 {
        return Err(LabError::InvalidArgument("n and L must be >= 1".into()));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(LabError::InvalidArgument(format!(
            "lambda must be >= 0, got {lambda}"
        )));
    }
    let phases = match group {
        MfGroup::RootsOfUnity => Phases::Discrete {
            k: (0..n).map(|_| rng.index(big_l) as u64).collect(),
            order: big_l as u64,
        },
        MfGroup::ContinuousU1 => Phases::Continuous(
            (0..n)
                .map(|_| rng.uniform() * std::f64::consts::TAU)
                .collect(),
        ),
    };
    let real = group == MfGroup::RootsOfUnity && big_l <= 2;
    let scale = 1.0 / (n as f64).sqrt();
    let mut observations = Vec::with_capacity(big_l);
    for l in 1..=big_l {
        let noise: DMatrix<Complex<f64>> = if real {
            // sample_goe already carries the 1/sqrt(n) scaling.
            sample_goe(n, rng)?
                .as_matrix()
                .map(|v| Complex::new(v, 0.0))
        } else {
            sample_gue_unit(n, rng)?.as_matrix() * Complex::new(scale, 0.0)
        };
        let mut y = noise;
        if !null {
            let xl = phases.power(l as u64);
            let c = lambda / n as f64;
            for j in 0..n {
                for i in 0..n {
                    y[(i, j)] += xl[i] * xl[j].conj() * c;
                }
            }
            for i in 0..n {
                y[(i, i)].im = 0.0;
            }
        }
        observations.push(HermitianMatrix::from_upper_fn(n, |i, j| y[(i, j)]));
    }
    Ok(MfInstance {
        n,
        l: big_l,
        group,
        lambda,
        phases: (!null).then_some(phases),
        observations,
    })
}

/// `lambda_max(Y)` by Lanczos: on `Y` itself when real, otherwise on the
/// `2n` real embedding (each eigenvalue doubled, extremes unchanged).
pub fn pca_stat(y: &HermitianMatrix) -> Result<f64> {
    let n = y.n();
    if n == 0 {
        return Err(LabError::InvalidArgument("empty matrix".into()));
    }
    let opts = LanczosOptions::default();
    let mut rng = rng_stream(LANCZOS_SEED, 0);
    let ex = if y.is_real() {
        let a = y.real_part().into_matrix();
        lambda_extremes_lanczos(
            |x: &[f64], out: &mut [f64]| {
                let v = &a * DVector::from_column_slice(x);
                out.copy_from_slice(v.as_slice());
            },
            n,
            &opts,
            &mut rng,
        )?
    } else {
        let re = y.as_matrix().map(|z| z.re);
        let im = y.as_matrix().map(|z| z.im);
        lambda_extremes_lanczos(
            |x: &[f64], out: &mut [f64]| {
                let u = DVectorView::from_slice(&x[..n], n);
                let v = DVectorView::from_slice(&x[n..], n);
                let mut a = &re * u;
                a.gemv(-1.0, &im, &v, 1.0);
                let mut b = &im * u;
                b.gemv(1.0, &re, &v, 1.0);
                out[..n].copy_from_slice(a.as_slice());
                out[n..].copy_from_slice(b.as_slice());
            },
            2 * n,
            &opts,
            &mut rng,
        )?
    };
    Ok(ex.max)
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CombinedStat {
    /// `lambda_max(Y_l)` for every `l = 1..=L`.
    pub per_frequency: Vec<f64>,
    /// Max over included frequencies; 0 when none is included.
    pub max: f64,
    /// `sum (lambda_max - 2)_+` over included frequencies.
    pub excess_sum: f64,
}

/// Both combined statistics. Degenerate frequencies are skipped unless
/// `include_degenerate`.
pub fn combined_stat(inst: &MfInstance, include_degenerate: bool) -> Result<CombinedStat> {
    let per_frequency = inst
        .observations
        .iter()
        .map(pca_stat)
        .collect::<Result<Vec<_>>>()?;
    let used: Vec<f64> = per_frequency
        .iter()
        .enumerate()
        .filter(|(i, _)| include_degenerate || !inst.is_degenerate(i + 1))
        .map(|(_, &v)| v)
        .collect();
    Ok(CombinedStat {
        max: if used.is_empty() {
            0.0
        } else {
            used.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        },
        excess_sum: used.iter().map(|v| (v - 2.0).max(0.0)).sum(),
        per_frequency,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatVariant {
    Max,
    ExcessSum,
}

impl StatVariant {
    pub fn pick(self, s: &CombinedStat) -> f64 {
        match self {
            StatVariant::Max => s.max,
            StatVariant::ExcessSum => s.excess_sum,
        }
    }
}

impl FromStr for StatVariant {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(StatVariant::Max),
            "excess-sum" | "excess_sum" | "sum" => Ok(StatVariant::ExcessSum),
            other => Err(LabError::Parse(format!("unknown statistic `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DetectionParams {
    pub n: usize,
    pub frequencies: usize,
    pub lambda: f64,
    pub group: MfGroup,
    pub trials: usize,
    pub include_degenerate: bool,
    pub variant: StatVariant,
}

impl DetectionParams {
    pub fn new(n: usize, frequencies: usize, lambda: f64, group: MfGroup, trials: usize) -> Self {
        Self {
            n,
            frequencies,
            lambda,
            group,
            trials,
            include_degenerate: false,
            variant: StatVariant::Max,
        }
    }
}

/// One signal/null pair, generated on streams `2t` and `2t + 1`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DetectionTrial {
    pub trial: usize,
    pub signal_stream: u64,
    pub null_stream: u64,
    pub signal: CombinedStat,
    pub null: CombinedStat,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DetectionReport {
    pub params: DetectionParams,
    pub base_seed: u64,
    pub degenerate_frequencies: Vec<usize>,
    /// AUC of the chosen variant.
    pub auc: f64,
    pub auc_max: f64,
    pub auc_excess_sum: f64,
    /// Empirical `1 - FALSE_POSITIVE_LEVEL` quantile of the null statistic.
    pub threshold: f64,
    /// Fraction of signal statistics strictly above `threshold`.
    pub power: f64,
    pub trials: Vec<DetectionTrial>,
}

/// Runs one paired trial from `(base_seed, t)`.
pub fn detection_trial(
    params: &DetectionParams,
    base_seed: u64,
    t: usize,
) -> Result<DetectionTrial> {
    let (ss, ns) = (2 * t as u64, 2 * t as u64 + 1);
    let sig = gen_instance(
        params.n,
        params.frequencies,
        params.lambda,
        params.group,
        false,
        &mut RngStream::new(base_seed, ss),
    )?;
    let signal = combined_stat(&sig, params.include_degenerate)?;
    drop(sig);
    let nul = gen_instance(
        params.n,
        params.frequencies,
        params.lambda,
        params.group,
        true,
        &mut RngStream::new(base_seed, ns),
    )?;
    let null = combined_stat(&nul, params.include_degenerate)?;
    Ok(DetectionTrial {
        trial: t,
        signal_stream: ss,
        null_stream: ns,
        signal,
        null,
    })
}

/// Summaries from finished trials (in trial order).
pub fn summarize_detection(
    params: &DetectionParams,
    base_seed: u64,
    trials: Vec<DetectionTrial>,
) -> DetectionReport {
    let col = |v: StatVariant, signal: bool| -> Vec<f64> {
        trials
            .iter()
            .map(|t| v.pick(if signal { &t.signal } else { &t.null }))
            .collect()
    };
    let auc_max = auc(&col(StatVariant::Max, true), &col(StatVariant::Max, false));
    let auc_excess_sum = auc(
        &col(StatVariant::ExcessSum, true),
        &col(StatVariant::ExcessSum, false),
    );
    let sig = col(params.variant, true);
    let nul = col(params.variant, false);
    let threshold = if nul.is_empty() {
        f64::NAN
    } else {
        quantile(&nul, 1.0 - FALSE_POSITIVE_LEVEL)
    };
    let power = if sig.is_empty() {
        f64::NAN
    } else {
        sig.iter().filter(|&&s| s > threshold).count() as f64 / sig.len() as f64
    };
    DetectionReport {
        params: params.clone(),
        base_seed,
        degenerate_frequencies: (1..=params.frequencies)
            .filter(|&l| is_degenerate(params.group, params.frequencies, l))
            .collect(),
        auc: match params.variant {
            StatVariant::Max => auc_max,
            StatVariant::ExcessSum => auc_excess_sum,
        },
        auc_max,
        auc_excess_sum,
        threshold,
        power,
        trials,
    }
}

pub fn validate_detection(params: &DetectionParams) -> Result<()> {
    if params.trials < 2 {
        return Err(LabError::InvalidArgument(
            "detection needs at least 2 trials".into(),
        ));
    }
    if params.n == 0 || params.frequencies == 0 {
        return Err(LabError::InvalidArgument("n and L must be >= 1".into()));
    }
    if !(params.lambda >= 0.0 && params.lambda.is_finite()) {
        return Err(LabError::InvalidArgument(format!(
            "lambda must be >= 0, got {}",
            params.lambda
        )));
    }
    let informative = (1..=params.frequencies)
        .any(|l| params.include_degenerate || !is_degenerate(params.group, params.frequencies, l));
    if !informative {
        return Err(LabError::InvalidArgument(
            "every frequency is degenerate; include them explicitly or use more frequencies".into(),
        ));
    }
    Ok(())
}

/// Paired signal/null trials in parallel. The base seed is drawn once from
/// `rng`; trial `t` uses streams `2t` (signal) and `2t + 1` (null).
pub fn detection_experiment(
    params: &DetectionParams,
    rng: &mut RngStream,
) -> Result<DetectionReport> {
    validate_detection(params)?;
    let base = rng.derive_seed();
    let trials = (0..params.trials)
        .into_par_iter()
        .map(|t| detection_trial(params, base, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize_detection(params, base, trials))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roots_exact() {
        assert_eq!(root_of_unity(1, 2), Complex::new(-1.0, 0.0));
        assert_eq!(root_of_unity(3, 4), Complex::new(0.0, -1.0));
        assert_eq!(root_of_unity(6, 3), Complex::new(1.0, 0.0));
        assert!(
            (root_of_unity(1, 3) - Complex::from_polar(1.0, std::f64::consts::TAU / 3.0)).norm()
                < 1e-15
        );
    }

    #[test]
    fn z2_is_real_spiked() {
        let inst = gen_instance(
            30,
            2,
            1.5,
            MfGroup::RootsOfUnity,
            false,
            &mut rng_stream(1, 0),
        )
        .unwrap();
        let x = inst.signal_power(1).unwrap();
        assert!(x.iter().all(|z| z.im == 0.0 && z.re.abs() == 1.0));
        assert!(inst.observation(1).is_real());
        assert!(inst.is_degenerate(2) && !inst.is_degenerate(1));
        assert!(inst
            .signal_power(2)
            .unwrap()
            .iter()
            .all(|&z| z == Complex::new(1.0, 0.0)));
    }

    #[test]
    fn hermitian_and_unit_modulus() {
        for group in [MfGroup::RootsOfUnity, MfGroup::ContinuousU1] {
            let inst = gen_instance(25, 5, 2.0, group, false, &mut rng_stream(2, 0)).unwrap();
            for l in 1..=5 {
                assert!(inst.observation(l).is_hermitian());
                let x = inst.signal_power(l as u64).unwrap();
                assert!(x.iter().all(|z| (z.norm() - 1.0).abs() <= 1e-12));
            }
        }
    }

    #[test]
    fn frequency_periodicity() {
        let inst = gen_instance(
            40,
            7,
            1.0,
            MfGroup::RootsOfUnity,
            false,
            &mut rng_stream(3, 0),
        )
        .unwrap();
        for l in 0..20u64 {
            assert_eq!(inst.signal_power(l), inst.signal_power(l + 7));
        }
    }

    #[test]
    fn null_and_zero_lambda_match() {
        let a = gen_instance(
            20,
            3,
            0.0,
            MfGroup::ContinuousU1,
            false,
            &mut rng_stream(4, 0),
        )
        .unwrap();
        let b = gen_instance(
            20,
            3,
            0.0,
            MfGroup::ContinuousU1,
            true,
            &mut rng_stream(4, 0),
        )
        .unwrap();
        for l in 1..=3 {
            let d = (a.observation(l).as_matrix() - b.observation(l).as_matrix()).norm();
            assert!(d < 1e-15);
        }
        assert!(b.is_null() && b.signal_power(1).is_none());
    }

    #[test]
    fn rank_one_and_zero() {
        let n = 12;
        let x: Vec<Complex<f64>> = (0..n)
            .map(|i| Complex::from_polar(1.0, i as f64 * 0.7))
            .collect();
        let lambda = 1.7;
        let y = HermitianMatrix::from_upper_fn(n, |i, j| x[i] * x[j].conj() * (lambda / n as f64));
        assert!((pca_stat(&y).unwrap() - lambda).abs() < 1e-10);
        assert_eq!(pca_stat(&HermitianMatrix::zeros(n)).unwrap(), 0.0);
    }

    #[test]
    fn pca_matches_dense() {
        let inst = gen_instance(
            40,
            1,
            1.2,
            MfGroup::ContinuousU1,
            false,
            &mut rng_stream(5, 0),
        )
        .unwrap();
        let y = inst.observation(1);
        let dense = crate::linalg::eigsym_dense(y, false).unwrap().max();
        assert!((pca_stat(y).unwrap() - dense).abs() < 1e-9);
    }

    #[test]
    fn combined_variants() {
        let inst = gen_instance(
            30,
            3,
            3.0,
            MfGroup::RootsOfUnity,
            false,
            &mut rng_stream(6, 0),
        )
        .unwrap();
        let with = combined_stat(&inst, true).unwrap();
        let without = combined_stat(&inst, false).unwrap();
        assert_eq!(with.per_frequency, without.per_frequency);
        let m = with.per_frequency[..2]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(without.max, m);
        let one = gen_instance(
            30,
            1,
            3.0,
            MfGroup::ContinuousU1,
            false,
            &mut rng_stream(6, 1),
        )
        .unwrap();
        let c = combined_stat(&one, false).unwrap();
        assert_eq!(c.max, pca_stat(one.observation(1)).unwrap());
    }

    #[test]
    fn experiment_rejects_all_degenerate() {
        let p = DetectionParams::new(10, 1, 1.0, MfGroup::RootsOfUnity, 4);
        assert!(detection_experiment(&p, &mut rng_stream(0, 0)).is_err());
        let mut p = DetectionParams::new(10, 1, 1.0, MfGroup::ContinuousU1, 1);
        assert!(detection_experiment(&p, &mut rng_stream(0, 0)).is_err());
        p.trials = 4;
        let r = detection_experiment(&p, &mut rng_stream(0, 0)).unwrap();
        assert!((0.0..=1.0).contains(&r.auc) && (0.0..=1.0).contains(&r.power));
        assert_eq!(r.trials.len(), 4);
    }

    #[test]
    fn strong_signal_separates() {
        let p = DetectionParams::new(200, 1, 4.0, MfGroup::ContinuousU1, 10);
        let r = detection_experiment(&p, &mut rng_stream(7, 0)).unwrap();
        assert_eq!(r.auc, 1.0);
        assert_eq!(r.power, 1.0);
    }
}
