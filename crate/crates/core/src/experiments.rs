//! Rate sweeps for plug-in rules and the two-point inconsistency demo.
//!
//! A sweep never materializes training samples: sample size enters only
//! through the estimator noise scale `c0 N^(-gamma/2)`. Every `(N, replicate)`
//! task gets its own seed derived from the master seed, so results do not
//! depend on scheduling.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{derive_seed, map_indexed, stream_rng};
use crate::labels::ProbVector;
use crate::risk::{excess_risk, fn_sum, PlugIn};
use crate::rules::RuleSpec;
use crate::stats::fit_line;
use crate::synth::{
    choose_phi_inv, perturb_into, Distribution, DistributionSpec, EstimatorSpec, MonteCarloSpec,
};

fn default_replicates() -> usize {
    200
}

fn default_samples() -> usize {
    100_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dist: DistributionSpec,
    pub estimator: EstimatorSpec,
    pub rule: RuleSpec,
    /// Training sample sizes, strictly increasing.
    pub n_grid: Vec<u64>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    /// Monte Carlo draws of `X` per replicate.
    #[serde(default = "default_samples")]
    pub samples: usize,
    pub master_seed: u64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<Distribution> {
        let dist = Distribution::new(self.dist.clone())?;
        self.rule.validate(dist.labels())?;
        self.estimator.validate()?;
        check_n_grid(&self.n_grid)?;
        if self.replicates == 0 {
            return Err(Error::param("replicates", "must be >= 1"));
        }
        MonteCarloSpec::new(self.samples, 0).validate()?;
        Ok(dist)
    }
}

fn check_n_grid(n_grid: &[u64]) -> Result<()> {
    if n_grid.is_empty() || n_grid[0] == 0 {
        return Err(Error::param(
            "n_grid",
            "needs at least one positive sample size",
        ));
    }
    if n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::param("n_grid", "must be strictly increasing"));
    }
    Ok(())
}

/// One replicate at one sample size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateResult {
    pub n: u64,
    pub replicate: usize,
    pub excess_signed: f64,
    pub excess_abs: f64,
    pub oracle_risk: f64,
}

/// Plug-in excess risk for every `(N, replicate)`, in that order.
pub fn run_rate_sweep(cfg: &ExperimentConfig) -> Result<Vec<RateResult>> {
    let dist = cfg.validate()?;
    let reps = cfg.replicates;
    let tasks = cfg.n_grid.len() * reps;
    map_indexed(tasks, |t| {
        let n = cfg.n_grid[t / reps];
        let replicate = t % reps;
        let mc = MonteCarloSpec::new(
            cfg.samples,
            derive_seed(cfg.master_seed, &[n, replicate as u64]),
        );
        let cls = PlugIn {
            rule: cfg.rule,
            estimator: cfg.estimator,
            n,
        };
        let e = excess_risk(&cls, &cfg.rule, &dist, &mc)?;
        Ok(RateResult {
            n,
            replicate,
            excess_signed: e.signed,
            excess_abs: e.absolute,
            oracle_risk: e.oracle_risk,
        })
    })
    .into_iter()
    .collect()
}

/// Replicate averages at one sample size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub n: u64,
    pub replicates: usize,
    pub mean_signed: f64,
    pub mean_abs: f64,
    pub std_error_abs: f64,
}

pub fn summarize(results: &[RateResult]) -> Vec<RatePoint> {
    let mut by_n: BTreeMap<u64, Vec<&RateResult>> = BTreeMap::new();
    for r in results {
        by_n.entry(r.n).or_default().push(r);
    }
    by_n.into_iter()
        .map(|(n, rs)| {
            let m = rs.len() as f64;
            let mean_signed = rs.iter().map(|r| r.excess_signed).sum::<f64>() / m;
            let mean_abs = rs.iter().map(|r| r.excess_abs).sum::<f64>() / m;
            let var = if rs.len() > 1 {
                rs.iter()
                    .map(|r| (r.excess_abs - mean_abs).powi(2))
                    .sum::<f64>()
                    / (m - 1.0)
            } else {
                0.0
            };
            RatePoint {
                n,
                replicates: rs.len(),
                mean_signed,
                mean_abs,
                std_error_abs: (var / m).sqrt(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub points: usize,
}

/// Least-squares slope of `log(mean |excess|)` against `log N`, over sample
/// sizes whose mean is positive.
pub fn fit_rate_slope(results: &[RateResult]) -> Result<RateFit> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = summarize(results)
        .iter()
        .filter(|p| p.mean_abs > 0.0)
        .map(|p| ((p.n as f64).ln(), p.mean_abs.ln()))
        .unzip();
    if xs.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            found: xs.len(),
        });
    }
    let fit = fit_line(&xs, &ys)?;
    Ok(RateFit {
        slope: fit.slope,
        intercept: fit.intercept,
        stderr: fit.slope_stderr,
        points: fit.points,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundConfig {
    pub n_grid: Vec<u64>,
    pub replicates: usize,
    pub labels: usize,
    pub estimator: EstimatorSpec,
    pub seed: u64,
    /// Target for the Pinsker bound on the total variation between the two
    /// `N`-sample laws.
    pub tv_target: f64,
    /// Number of random decision profiles for the algebraic floor check.
    pub profiles: usize,
}

impl LowerBoundConfig {
    pub fn new(n_grid: Vec<u64>, replicates: usize, labels: usize, seed: u64) -> Self {
        Self {
            n_grid,
            replicates,
            labels,
            estimator: EstimatorSpec::gaussian(1.0, 0.5),
            seed,
            tv_target: 0.5,
            profiles: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundRow {
    pub n: u64,
    pub phi_inv: f64,
    /// `E_D |R(f_hat) - R(f*)|` under the `rho = +1` law.
    pub excess_plus: f64,
    pub excess_minus: f64,
    /// `L * max(excess_plus, excess_minus)`.
    pub max_scaled: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FloorCheck {
    pub profiles: usize,
    /// Smallest `E_{+1} + E_{-1} - 1/(8L)` seen.
    pub min_margin: f64,
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundReport {
    pub rows: Vec<LowerBoundRow>,
    pub floor: FloorCheck,
}

/// Closed-form absolute excess risks `(E_{+1}, E_{-1})` of a classifier that
/// drops label 1 on a set of measure `a` and label 2 on a set of measure `b`.
pub fn profile_excess(a: f64, b: f64, phi_inv: f64, labels: usize) -> (f64, f64) {
    let l = labels as f64;
    // oracle drops label 2 everywhere under +1 and nowhere under -1
    let plus = (0.75 * a + (0.25 - phi_inv) * (b - 1.0)).abs() / l;
    let minus = (0.75 * a + (0.25 + phi_inv) * b).abs() / l;
    (plus, minus)
}

/// Runs the budget-1 plug-in rule on both members of the two-point family at
/// every `N`, with the separation chosen so the `N`-sample laws stay close.
///
/// `eta` is constant in `x`, so each replicate's estimate is a single noisy
/// vector and its risk is exact; the replicate average estimates `E_D`.
pub fn run_inconsistency_demo(cfg: &LowerBoundConfig) -> Result<LowerBoundReport> {
    check_n_grid(&cfg.n_grid)?;
    cfg.estimator.validate()?;
    if cfg.labels < 2 {
        return Err(Error::param("labels", "need L >= 2"));
    }
    if cfg.replicates == 0 {
        return Err(Error::param("replicates", "must be >= 1"));
    }
    let rule = RuleSpec::BetaBudget { beta: 1.0 };
    let labels = cfg.labels;
    let per_task = map_indexed(cfg.n_grid.len() * 2, |t| -> Result<(f64, f64)> {
        let n = cfg.n_grid[t / 2];
        let rho: i8 = if t % 2 == 0 { 1 } else { -1 };
        let phi_inv = choose_phi_inv(n, cfg.tv_target)?;
        let dist = Distribution::new(DistributionSpec::LowerboundPm {
            rho,
            phi_inv,
            labels,
        })?;
        let eta = dist.eta(0.5)?;
        let oracle = rule.apply(&eta)?;
        let oracle_fn = fn_sum(oracle.as_slice(), eta.as_slice());
        let scale = cfg.estimator.noise_scale(n);
        let mut rng = stream_rng(derive_seed(cfg.seed, &[n, t as u64 % 2]), 0);
        let mut estimate = ProbVector::zeros(labels)?;
        let mut order = Vec::with_capacity(labels);
        let mut pred = vec![false; labels];
        let mut total = 0.0;
        for _ in 0..cfg.replicates {
            perturb_into(eta.as_slice(), scale, &mut rng, estimate.values_mut());
            rule.apply_into(estimate.as_slice(), &mut order, &mut pred);
            total += (fn_sum(&pred, eta.as_slice()) - oracle_fn).abs() / labels as f64;
        }
        Ok((phi_inv, total / cfg.replicates as f64))
    });
    let per_task = per_task.into_iter().collect::<Result<Vec<_>>>()?;
    let rows = cfg
        .n_grid
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let (phi_inv, excess_plus) = per_task[2 * i];
            let (_, excess_minus) = per_task[2 * i + 1];
            LowerBoundRow {
                n,
                phi_inv,
                excess_plus,
                excess_minus,
                max_scaled: labels as f64 * excess_plus.max(excess_minus),
            }
        })
        .collect();

    let mut rng = stream_rng(derive_seed(cfg.seed, &[u64::MAX]), 0);
    let floor = 1.0 / (8.0 * labels as f64);
    let mut min_margin = f64::INFINITY;
    let mut violations = 0;
    for _ in 0..cfg.profiles {
        let (a, b): (f64, f64) = (rng.random(), rng.random());
        // phi_inv uniform on (0, 1/8]
        let phi_inv = 0.125 * (1.0 - rng.random::<f64>());
        let (plus, minus) = profile_excess(a, b, phi_inv, labels);
        let margin = plus + minus - floor;
        min_margin = min_margin.min(margin);
        if margin < -1e-12 {
            violations += 1;
        }
    }
    Ok(LowerBoundReport {
        rows,
        floor: FloorCheck {
            profiles: cfg.profiles,
            min_margin,
            violations,
        },
    })
}
