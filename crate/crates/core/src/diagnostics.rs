//! Empirical checks of the margin and sparsity conditions and of two
//! pointwise properties of plug-in rules: set embedding and partial order
//! preservation.
//!
//! Tail probabilities are estimated on a user grid of `delta` values and
//! fitted as `C delta^alpha` by least squares in log-log space, using only
//! grid points whose estimate is at least [`USABLE_COUNT`]`/samples`.
//! "Almost surely" statements are checked on every sampled point.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::map_blocks;
use crate::labels::{rank_into, ProbVector};
use crate::risk::{fp_sum, scan_blocks};
use crate::rules::RuleSpec;
use crate::stats::fit_line;
use crate::synth::{perturb_into, Distribution, EstimatorSpec, MonteCarloSpec};

/// Minimum hit count for a grid point to enter the tail fit.
pub const USABLE_COUNT: u64 = 10;

/// Smallest fitted exponent accepted as evidence of a polynomial tail.
pub const MIN_TAIL_EXPONENT: f64 = 0.1;

/// Pointwise comparisons are exact up to this rounding slack.
pub const EXACT_TOLERANCE: f64 = 1e-12;

/// `h(d) = 2^-d`, the off-diagonal decay used for the global margin check.
pub fn global_margin_weight(d: usize) -> f64 {
    0.5f64.powi(d as i32)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerFit {
    pub exponent: f64,
    pub constant: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Estimated tail `P(quantity <= delta, event)` over a delta grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailFitReport {
    pub delta_grid: Vec<f64>,
    pub empirical_probs: Vec<f64>,
    /// `None` when fewer than two grid points are usable.
    pub fit: Option<PowerFit>,
    pub degenerate: bool,
}

impl TailFitReport {
    fn from_counts(delta_grid: &[f64], counts: &[u64], samples: u64) -> Self {
        let n = samples as f64;
        let probs: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
        let (xs, ys): (Vec<f64>, Vec<f64>) = delta_grid
            .iter()
            .zip(counts)
            .filter(|(_, &c)| c >= USABLE_COUNT)
            .map(|(d, &c)| (d.ln(), (c as f64 / n).ln()))
            .unzip();
        let fit = fit_line(&xs, &ys).ok().map(|f| PowerFit {
            exponent: f.slope,
            constant: f.intercept.exp(),
            r_squared: f.r_squared,
            points: f.points,
        });
        Self {
            delta_grid: delta_grid.to_vec(),
            empirical_probs: probs,
            degenerate: fit.is_none(),
            fit,
        }
    }

    /// True when the tail is empty at the smallest grid value.
    pub fn vanishes_near_zero(&self) -> bool {
        self.empirical_probs.first().is_some_and(|&p| p == 0.0)
    }

    /// Consistent with `P <= C delta^alpha` for some `C` and `alpha > 0`.
    pub fn supports_polynomial_tail(&self) -> bool {
        self.vanishes_near_zero() || self.fit.is_some_and(|f| f.exponent >= MIN_TAIL_EXPONENT)
    }

    pub fn exponent(&self) -> Option<f64> {
        self.fit.map(|f| f.exponent)
    }
}

fn check_grid(delta_grid: &[f64]) -> Result<()> {
    if delta_grid.is_empty() {
        return Err(Error::param("delta_grid", "grid is empty"));
    }
    if delta_grid.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
        return Err(Error::param("delta_grid", "grid values must be positive"));
    }
    if delta_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::param(
            "delta_grid",
            "grid must be strictly increasing",
        ));
    }
    Ok(())
}

/// Adds one to every grid slot with `delta >= value`.
#[inline]
fn count_tail(delta_grid: &[f64], value: f64, counts: &mut [u64]) {
    let first = delta_grid.partition_point(|&d| d < value);
    for c in &mut counts[first..] {
        *c += 1;
    }
}

fn sum_counts(blocks: Vec<Vec<u64>>, len: usize) -> Vec<u64> {
    let mut total = vec![0u64; len];
    for b in blocks {
        for (t, c) in total.iter_mut().zip(b) {
            *t += c;
        }
    }
    total
}

/// Uniform draws of `x` with `eta(x)` sorted descending into `sorted`;
/// returns per-block results in block order.
fn sorted_eta_blocks<T, F>(
    dist: &Distribution,
    mc: &MonteCarloSpec,
    init: impl Fn() -> T + Sync + Send,
    f: F,
) -> Vec<T>
where
    T: Send,
    F: Fn(&[f64], &mut T) + Sync + Send,
{
    use rand::Rng;
    let labels = dist.labels();
    map_blocks(mc.samples, |block, range| {
        let mut rng = crate::exec::stream_rng(mc.seed, block);
        let mut eta = ProbVector::zeros(labels).expect("labels >= 1");
        let mut sorted = vec![0.0; labels];
        let mut state = init();
        for _ in range {
            let x: f64 = rng.random();
            dist.eta_into(x, &mut eta);
            sorted.copy_from_slice(eta.as_slice());
            sorted.sort_unstable_by(|a, b| b.total_cmp(a));
            f(&sorted, &mut state);
        }
        state
    })
}

/// Number of labels admitted by the budget along a descending sorted vector.
fn sorted_threshold(sorted: &[f64], beta: f64) -> usize {
    let mut spent = 0.0;
    for (m, p) in sorted.iter().enumerate() {
        spent += 1.0 - p;
        if spent > beta {
            return m;
        }
    }
    sorted.len()
}

/// Tail of the top-`k` gap, `P(0 < eta^{s_k} - eta^{s_{k+1}} <= delta)`.
pub fn check_topk_margin(
    dist: &Distribution,
    k: usize,
    delta_grid: &[f64],
    mc: &MonteCarloSpec,
) -> Result<TailFitReport> {
    mc.validate()?;
    check_grid(delta_grid)?;
    if k == 0 || k >= dist.labels() {
        return Err(Error::param(
            "k",
            format!("need 1 <= k < L = {}", dist.labels()),
        ));
    }
    let g = delta_grid.len();
    let blocks = sorted_eta_blocks(
        dist,
        mc,
        || vec![0u64; g],
        |sorted, counts| {
            let gap = sorted[k - 1] - sorted[k];
            if gap > 0.0 {
                count_tail(delta_grid, gap, counts);
            }
        },
    );
    let counts = sum_counts(blocks, g);
    Ok(TailFitReport::from_counts(
        delta_grid,
        &counts,
        mc.samples as u64,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalMarginEntry {
    pub k: usize,
    pub tail: TailFitReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalMarginReport {
    /// Tail of `eta^{s_k} - eta^{s_{k+1}}` on `{K(X) = k}`, for each `k` in
    /// `1..L` that carries mass.
    pub per_k: Vec<LocalMarginEntry>,
    /// Empirical `P(K(X) = k)` for `k = 0..=L`.
    pub k_mass: Vec<f64>,
    /// Smallest exponent over non-degenerate fits.
    pub alpha1: Option<f64>,
    pub holds: bool,
}

/// Tail of the gap after the budget threshold, split by the threshold value.
///
/// Points with `K(X) = 0` or `K(X) = L` have no gap to estimate and are
/// excluded.
pub fn check_local_margin(
    dist: &Distribution,
    beta: f64,
    delta_grid: &[f64],
    mc: &MonteCarloSpec,
) -> Result<LocalMarginReport> {
    mc.validate()?;
    check_grid(delta_grid)?;
    RuleSpec::BetaBudget { beta }.validate(dist.labels())?;
    let labels = dist.labels();
    let g = delta_grid.len();
    // layout: [k_mass (L+1)] ++ [counts (L+1) x g]
    let width = labels + 1 + (labels + 1) * g;
    let blocks = sorted_eta_blocks(
        dist,
        mc,
        || vec![0u64; width],
        |sorted, counts| {
            let k = sorted_threshold(sorted, beta);
            counts[k] += 1;
            if k >= 1 && k < labels {
                let gap = sorted[k - 1] - sorted[k];
                let row = labels + 1 + k * g;
                count_tail(delta_grid, gap, &mut counts[row..row + g]);
            }
        },
    );
    let counts = sum_counts(blocks, width);
    let n = mc.samples as u64;
    let k_mass = counts[..=labels]
        .iter()
        .map(|&c| c as f64 / n as f64)
        .collect();
    let per_k: Vec<LocalMarginEntry> = (1..labels)
        .filter(|&k| counts[k] > 0)
        .map(|k| {
            let row = labels + 1 + k * g;
            LocalMarginEntry {
                k,
                tail: TailFitReport::from_counts(delta_grid, &counts[row..row + g], n),
            }
        })
        .collect();
    let alpha1 = per_k
        .iter()
        .filter_map(|e| e.tail.exponent())
        .reduce(f64::min);
    let holds = per_k.iter().all(|e| e.tail.supports_polynomial_tail());
    Ok(LocalMarginReport {
        per_k,
        k_mass,
        alpha1,
        holds,
    })
}

/// Empirical essential supremum of `sum_l eta^l(X)`.
pub fn check_sparsity(dist: &Distribution, mc: &MonteCarloSpec) -> Result<f64> {
    mc.validate()?;
    let blocks = sorted_eta_blocks(
        dist,
        mc,
        || 0.0f64,
        |sorted, best| {
            *best = best.max(sorted.iter().sum());
        },
    );
    Ok(blocks.into_iter().fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalMarginEntry {
    pub k: usize,
    pub l: usize,
    pub tail: TailFitReport,
    /// Exponents `a` with `P <= (beta delta)^a h(|k - l|)` on every grid
    /// point, as `(lower, upper)`; `None` when no `a > 0` works.
    pub admissible: Option<(f64, f64)>,
    /// Grid values where the bound fails at the overall fitted exponent.
    pub violations_at_fit: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalMarginReport {
    pub entries: Vec<GlobalMarginEntry>,
    /// Smallest exponent over non-degenerate fits.
    pub alpha2: Option<f64>,
    /// Intersection of the per-entry admissible ranges.
    pub admissible: Option<(f64, f64)>,
    /// `sum_k P(|sum_{j<=k}(1 - eta^{s_j}) - beta| <= 1, K(X) = k)` over `k >= beta`.
    pub mass_identity: f64,
    pub violations: usize,
    pub holds: bool,
}

/// Range of exponents `a > 0` satisfying `P <= (beta delta)^a h` on the grid.
fn admissible_range(beta: f64, delta_grid: &[f64], probs: &[f64], h: f64) -> Option<(f64, f64)> {
    let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
    for (&d, &p) in delta_grid.iter().zip(probs) {
        if p == 0.0 {
            continue;
        }
        let base = beta * d;
        let ratio = (p / h).ln();
        if base < 1.0 {
            // (beta d)^a decreases in a
            hi = hi.min(ratio / base.ln());
        } else if base == 1.0 {
            if p > h {
                return None;
            }
        } else {
            lo = lo.max(ratio / base.ln());
        }
    }
    (hi > lo && hi > 0.0).then_some((lo, hi))
}

/// Concentration of partial false-positive sums around `beta` on each
/// threshold event, against `beta^a delta^a h(|k - l|)`.
pub fn check_global_margin(
    dist: &Distribution,
    beta: f64,
    delta_grid: &[f64],
    mc: &MonteCarloSpec,
) -> Result<GlobalMarginReport> {
    mc.validate()?;
    check_grid(delta_grid)?;
    if !(beta.is_finite() && beta >= 1.0) {
        return Err(Error::param("beta", format!("{beta} must be >= 1")));
    }
    let labels = dist.labels();
    let g = delta_grid.len();
    let slot = |k: usize, l: usize| 1 + (k * (labels + 1) + l) * g;
    let width = 1 + (labels + 1) * (labels + 1) * g;
    let blocks = sorted_eta_blocks(
        dist,
        mc,
        || vec![0u64; width],
        |sorted, counts| {
            let k = sorted_threshold(sorted, beta);
            if (k as f64) < beta {
                return;
            }
            // suffix sums of (1 - eta) ending at position k
            let mut partial = 0.0;
            for l in 1..=k {
                partial += 1.0 - sorted[k - l];
                let q = (partial - beta).abs() / l as f64;
                let s = slot(k, l);
                count_tail(delta_grid, q, &mut counts[s..s + g]);
            }
            if (partial - beta).abs() <= 1.0 {
                counts[0] += 1;
            }
        },
    );
    let counts = sum_counts(blocks, width);
    let n = mc.samples as u64;
    let first_k = beta.ceil() as usize;
    let mut entries = Vec::new();
    for k in first_k..=labels {
        for l in 1..=k {
            let s = slot(k, l);
            if counts[s..s + g].iter().all(|&c| c == 0) {
                continue;
            }
            let tail = TailFitReport::from_counts(delta_grid, &counts[s..s + g], n);
            let h = global_margin_weight(k.abs_diff(l));
            let admissible = admissible_range(beta, delta_grid, &tail.empirical_probs, h);
            entries.push(GlobalMarginEntry {
                k,
                l,
                tail,
                admissible,
                violations_at_fit: Vec::new(),
            });
        }
    }
    let alpha2 = entries
        .iter()
        .filter_map(|e| e.tail.exponent())
        .reduce(f64::min);
    let mut violations = 0;
    if let Some(a) = alpha2 {
        for e in &mut entries {
            let h = global_margin_weight(e.k.abs_diff(e.l));
            e.violations_at_fit = e
                .tail
                .delta_grid
                .iter()
                .zip(&e.tail.empirical_probs)
                .filter(|(&d, &p)| p > (beta * d).powf(a) * h)
                .map(|(&d, _)| d)
                .collect();
            violations += e.violations_at_fit.len();
        }
    }
    let admissible = entries
        .iter()
        .try_fold((0.0f64, f64::INFINITY), |(lo, hi), e| {
            let (a, b) = e.admissible?;
            let (lo, hi) = (lo.max(a), hi.min(b));
            (hi > lo).then_some((lo, hi))
        });
    Ok(GlobalMarginReport {
        entries,
        alpha2,
        admissible,
        mass_identity: counts[0] as f64 / n as f64,
        violations,
        holds: admissible.is_some(),
    })
}

/// A sampled point where the plug-in set embedding failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingWitness {
    pub x: f64,
    pub eta: Vec<f64>,
    pub estimate: Vec<f64>,
    pub fp_sum: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingReport {
    pub samples: usize,
    pub violations: u64,
    /// Largest `fp_sum - (beta + sum |eta - eta_hat|)`; never positive when the embedding holds.
    pub max_slack: f64,
    pub max_fp_sum: f64,
    pub max_label_error: f64,
    pub witness: Option<EmbeddingWitness>,
}

#[derive(Debug, Clone)]
struct EmbeddingBlock {
    violations: u64,
    max_slack: f64,
    max_fp_sum: f64,
    max_label_error: f64,
    witness: Option<EmbeddingWitness>,
}

/// Checks that the budget plug-in rule's true false-positive sum stays within
/// `beta + sum_l |eta^l - eta_hat^l|` at every sampled point.
pub fn check_embedding(
    dist: &Distribution,
    est: &EstimatorSpec,
    beta: f64,
    n: u64,
    mc: &MonteCarloSpec,
) -> Result<EmbeddingReport> {
    mc.validate()?;
    est.validate()?;
    let rule = RuleSpec::BetaBudget { beta };
    rule.validate(dist.labels())?;
    if n == 0 {
        return Err(Error::param("n", "sample size must be >= 1"));
    }
    let scale = est.noise_scale(n);
    let init = || EmbeddingBlock {
        violations: 0,
        max_slack: f64::NEG_INFINITY,
        max_fp_sum: 0.0,
        max_label_error: 0.0,
        witness: None,
    };
    let blocks = scan_blocks(dist, mc, init, |x, st, acc| {
        let eta = st.eta.as_slice();
        perturb_into(eta, scale, &mut st.rng, st.scratch.estimate.values_mut());
        let estimate = st.scratch.estimate.as_slice();
        rule.apply_into(estimate, &mut st.scratch.order, st.pred.as_mut_slice());
        let fp = fp_sum(st.pred.as_slice(), eta);
        let mut total_err = 0.0;
        let mut max_err: f64 = 0.0;
        for (a, b) in eta.iter().zip(estimate) {
            let e = (a - b).abs();
            total_err += e;
            max_err = max_err.max(e);
        }
        let bound = beta + total_err;
        acc.max_slack = acc.max_slack.max(fp - bound);
        acc.max_fp_sum = acc.max_fp_sum.max(fp);
        acc.max_label_error = acc.max_label_error.max(max_err);
        if fp > bound + EXACT_TOLERANCE {
            acc.violations += 1;
            if acc.witness.is_none() {
                acc.witness = Some(EmbeddingWitness {
                    x,
                    eta: eta.to_vec(),
                    estimate: estimate.to_vec(),
                    fp_sum: fp,
                    bound,
                });
            }
        }
    });
    let mut report = EmbeddingReport {
        samples: mc.samples,
        violations: 0,
        max_slack: f64::NEG_INFINITY,
        max_fp_sum: 0.0,
        max_label_error: 0.0,
        witness: None,
    };
    for b in blocks {
        report.violations += b.violations;
        report.max_slack = report.max_slack.max(b.max_slack);
        report.max_fp_sum = report.max_fp_sum.max(b.max_fp_sum);
        report.max_label_error = report.max_label_error.max(b.max_label_error);
        if report.witness.is_none() {
            report.witness = b.witness;
        }
    }
    Ok(report)
}

/// A sampled point where accurate estimation failed to recover the top set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialOrderWitness {
    pub x: f64,
    pub k: usize,
    pub eta: Vec<f64>,
    pub estimate: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialOrderReport {
    pub samples: usize,
    /// `(x, k)` pairs where `2 max_l |eta^l - eta_hat^l|` is below the `k`-th gap.
    pub qualifying_events: u64,
    pub violations: u64,
    pub witness: Option<PartialOrderWitness>,
}

#[derive(Debug, Clone, Default)]
struct OrderBlock {
    qualifying: u64,
    violations: u64,
    witness: Option<PartialOrderWitness>,
    balance: Vec<i8>,
    est_order: Vec<usize>,
}

/// Checks that whenever the estimation error is below half the `k`-th gap,
/// the estimated and true top-`k` label sets coincide.
pub fn check_partial_order(
    dist: &Distribution,
    est: &EstimatorSpec,
    n: u64,
    mc: &MonteCarloSpec,
) -> Result<PartialOrderReport> {
    mc.validate()?;
    est.validate()?;
    if n == 0 {
        return Err(Error::param("n", "sample size must be >= 1"));
    }
    let scale = est.noise_scale(n);
    let labels = dist.labels();
    let init = || OrderBlock {
        balance: vec![0; labels],
        ..OrderBlock::default()
    };
    let blocks = scan_blocks(dist, mc, init, |x, st, acc| {
        let eta = st.eta.as_slice();
        perturb_into(eta, scale, &mut st.rng, st.scratch.estimate.values_mut());
        let estimate = st.scratch.estimate.as_slice();
        let max_err = eta
            .iter()
            .zip(estimate)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        rank_into(eta, &mut st.scratch.order);
        rank_into(estimate, &mut acc.est_order);
        // balance[l] = [l in true top set] - [l in estimated top set]
        acc.balance.fill(0);
        let mut mismatched = 0usize;
        for k in 1..labels {
            for (label, step) in [(st.scratch.order[k - 1], 1), (acc.est_order[k - 1], -1)] {
                let before = acc.balance[label] != 0;
                acc.balance[label] += step;
                match (before, acc.balance[label] != 0) {
                    (false, true) => mismatched += 1,
                    (true, false) => mismatched -= 1,
                    _ => {}
                }
            }
            let gap = eta[st.scratch.order[k - 1]] - eta[st.scratch.order[k]];
            if 2.0 * max_err < gap {
                acc.qualifying += 1;
                if mismatched != 0 {
                    acc.violations += 1;
                    if acc.witness.is_none() {
                        acc.witness = Some(PartialOrderWitness {
                            x,
                            k,
                            eta: eta.to_vec(),
                            estimate: estimate.to_vec(),
                        });
                    }
                }
            }
        }
    });
    let mut report = PartialOrderReport {
        samples: mc.samples,
        qualifying_events: 0,
        violations: 0,
        witness: None,
    };
    for b in blocks {
        report.qualifying_events += b.qualifying;
        report.violations += b.violations;
        if report.witness.is_none() {
            report.witness = b.witness;
        }
    }
    Ok(report)
}
