//! Conditional and population false-negative risk.
//!
//! Conditional sums are *not* normalized: `conditional_fn_sum` is the expected
//! number of missed relevant labels at one `x`. Population risks divide by
//! `L`, so they are average per-label probabilities in `[0, 1]`.
//!
//! Population risks are computed as `E_X` of the conditional sums
//! (Rao-Blackwellized over `Y`). Piecewise-constant distributions are
//! integrated exactly when the classifier is a deterministic function of
//! `eta(x)`; everything else goes through seeded Monte Carlo.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_blocks, stream_rng, StreamRng};
use crate::labels::{rank_into, LabelVector, ProbVector};
use crate::rules::RuleSpec;
use crate::stats::MeanAccumulator;
use crate::synth::{perturb_into, Distribution, EstimatorSpec, MonteCarloSpec};

fn check_shape(f: &LabelVector, eta: &ProbVector) -> Result<()> {
    if f.len() != eta.len() {
        return Err(Error::Shape {
            expected: eta.len(),
            found: f.len(),
        });
    }
    Ok(())
}

#[inline]
pub(crate) fn fn_sum(f: &[bool], eta: &[f64]) -> f64 {
    f.iter()
        .zip(eta)
        .filter(|(&b, _)| !b)
        .map(|(_, &p)| p)
        .sum()
}

#[inline]
pub(crate) fn fp_sum(f: &[bool], eta: &[f64]) -> f64 {
    f.iter()
        .zip(eta)
        .filter(|(&b, _)| b)
        .map(|(_, &p)| 1.0 - p)
        .sum()
}

/// Expected number of relevant labels that `f` misses at a point with
/// regression vector `eta`: `sum_{l: f^l = 0} eta^l`.
pub fn conditional_fn_sum(f: &LabelVector, eta: &ProbVector) -> Result<f64> {
    check_shape(f, eta)?;
    Ok(fn_sum(f.as_slice(), eta.as_slice()))
}

/// Expected number of false positives: `sum_{l: f^l = 1} (1 - eta^l)`.
pub fn conditional_fp_sum(f: &LabelVector, eta: &ProbVector) -> Result<f64> {
    check_shape(f, eta)?;
    Ok(fp_sum(f.as_slice(), eta.as_slice()))
}

/// Reusable buffers handed to [`Classifier::predict`].
#[derive(Debug, Clone)]
pub struct Scratch {
    pub estimate: ProbVector,
    pub order: Vec<usize>,
}

impl Scratch {
    pub fn new(labels: usize) -> Result<Self> {
        Ok(Self {
            estimate: ProbVector::zeros(labels)?,
            order: Vec::with_capacity(labels),
        })
    }
}

/// A (possibly randomized) classifier evaluated pointwise.
pub trait Classifier: Sync {
    /// Checks that the classifier can run on `labels` labels.
    fn validate(&self, labels: usize) -> Result<()> {
        let _ = labels;
        Ok(())
    }

    /// Writes the prediction at `x` into `out`. `eta` is the true regression
    /// vector at `x`; randomized classifiers draw from `rng`.
    fn predict(
        &self,
        x: f64,
        eta: &ProbVector,
        rng: &mut StreamRng,
        scratch: &mut Scratch,
        out: &mut LabelVector,
    );

    /// True when the prediction is a deterministic function of `eta(x)`.
    fn is_eta_measurable(&self) -> bool {
        false
    }
}

/// The constrained optimum: the rule applied to the true regression vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Oracle(pub RuleSpec);

impl Classifier for Oracle {
    fn validate(&self, labels: usize) -> Result<()> {
        self.0.validate(labels)
    }

    fn predict(
        &self,
        _x: f64,
        eta: &ProbVector,
        _rng: &mut StreamRng,
        scratch: &mut Scratch,
        out: &mut LabelVector,
    ) {
        self.0
            .apply_into(eta.as_slice(), &mut scratch.order, out.as_mut_slice());
    }

    fn is_eta_measurable(&self) -> bool {
        true
    }
}

/// The rule applied to a noisy estimate drawn from the estimator model at
/// sample size `n`, independently at every evaluation point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlugIn {
    pub rule: RuleSpec,
    pub estimator: EstimatorSpec,
    pub n: u64,
}

impl Classifier for PlugIn {
    fn validate(&self, labels: usize) -> Result<()> {
        self.rule.validate(labels)?;
        self.estimator.validate()?;
        if self.n == 0 {
            return Err(Error::param("n", "sample size must be >= 1"));
        }
        Ok(())
    }

    fn predict(
        &self,
        _x: f64,
        eta: &ProbVector,
        rng: &mut StreamRng,
        scratch: &mut Scratch,
        out: &mut LabelVector,
    ) {
        let scale = self.estimator.noise_scale(self.n);
        perturb_into(eta.as_slice(), scale, rng, scratch.estimate.values_mut());
        self.rule.apply_into(
            scratch.estimate.as_slice(),
            &mut scratch.order,
            out.as_mut_slice(),
        );
    }

    fn is_eta_measurable(&self) -> bool {
        self.estimator.c0 == 0.0
    }
}

/// Predicts the same vector everywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct Constant(pub LabelVector);

impl Classifier for Constant {
    fn validate(&self, labels: usize) -> Result<()> {
        if self.0.len() != labels {
            return Err(Error::Shape {
                expected: labels,
                found: self.0.len(),
            });
        }
        Ok(())
    }

    fn predict(
        &self,
        _x: f64,
        _eta: &ProbVector,
        _rng: &mut StreamRng,
        _scratch: &mut Scratch,
        out: &mut LabelVector,
    ) {
        out.as_mut_slice().copy_from_slice(self.0.as_slice());
    }

    fn is_eta_measurable(&self) -> bool {
        true
    }
}

/// A population risk value with its Monte Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskEstimate {
    pub value: f64,
    pub std_error: f64,
    /// True when computed by exact quadrature (standard error is then 0).
    pub exact: bool,
    pub samples: usize,
}

impl RiskEstimate {
    fn exact(value: f64) -> Self {
        Self {
            value,
            std_error: 0.0,
            exact: true,
            samples: 0,
        }
    }

    fn from_acc(acc: &MeanAccumulator) -> Self {
        Self {
            value: acc.mean(),
            std_error: acc.std_error(),
            exact: false,
            samples: acc.count() as usize,
        }
    }
}

/// Signed and absolute excess risk of a classifier over its constrained oracle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcessRisk {
    /// `R(f) - R(f*)`; negative when `f` leaves the constraint set and wins.
    pub signed: f64,
    pub absolute: f64,
    /// Standard error of `signed` (paired over common samples).
    pub std_error: f64,
    pub rule_risk: f64,
    pub oracle_risk: f64,
    pub exact: bool,
}

/// Per-block state for the Monte Carlo loops.
pub(crate) struct BlockState {
    pub rng: StreamRng,
    pub eta: ProbVector,
    pub scratch: Scratch,
    pub pred: LabelVector,
    pub reference: LabelVector,
}

/// Runs `f(x, state, acc)` on `mc.samples` uniform draws of `X`, one
/// accumulator per block; `state.eta` holds `eta(x)` when `f` runs.
pub(crate) fn scan_blocks<T, I, F>(
    dist: &Distribution,
    mc: &MonteCarloSpec,
    init: I,
    f: F,
) -> Vec<T>
where
    T: Send,
    I: Fn() -> T + Sync + Send,
    F: Fn(f64, &mut BlockState, &mut T) + Sync + Send,
{
    let labels = dist.labels();
    map_blocks(mc.samples, |block, range| {
        let mut st = BlockState {
            rng: stream_rng(mc.seed, block),
            eta: ProbVector::zeros(labels).expect("labels >= 1"),
            scratch: Scratch::new(labels).expect("labels >= 1"),
            pred: LabelVector::zeros(labels),
            reference: LabelVector::zeros(labels),
        };
        let mut acc = init();
        for _ in range {
            let x: f64 = st.rng.random();
            dist.eta_into(x, &mut st.eta);
            f(x, &mut st, &mut acc);
        }
        acc
    })
}

/// Componentwise means of `f(x, state)` over the Monte Carlo draws.
pub(crate) fn monte_carlo<const M: usize, F>(
    dist: &Distribution,
    mc: &MonteCarloSpec,
    f: F,
) -> [MeanAccumulator; M]
where
    F: Fn(f64, &mut BlockState) -> [f64; M] + Sync + Send,
{
    let per_block = scan_blocks(
        dist,
        mc,
        || [MeanAccumulator::default(); M],
        |x, st, acc| {
            for (a, v) in acc.iter_mut().zip(f(x, st)) {
                a.push(v);
            }
        },
    );
    let mut total = [MeanAccumulator::default(); M];
    for acc in &per_block {
        for (t, a) in total.iter_mut().zip(acc) {
            t.merge(a);
        }
    }
    total
}

/// Exact integral over the constant-`eta` cells of a deterministic rule.
fn quadrature(dist: &Distribution, cls: &dyn Classifier) -> Option<f64> {
    if !cls.is_eta_measurable() {
        return None;
    }
    let cells = dist.cells()?;
    let labels = dist.labels();
    let mut eta = ProbVector::zeros(labels).ok()?;
    let mut scratch = Scratch::new(labels).ok()?;
    let mut pred = LabelVector::zeros(labels);
    let mut rng = stream_rng(0, 0);
    let total = cells
        .iter()
        .map(|&(w, x)| {
            dist.eta_into(x, &mut eta);
            cls.predict(x, &eta, &mut rng, &mut scratch, &mut pred);
            w * fn_sum(pred.as_slice(), eta.as_slice())
        })
        .sum::<f64>();
    Some(total / labels as f64)
}

/// Population false-negative risk `R(f) = (1/L) sum_l P(f^l(X) = 0, Y^l = 1)`.
pub fn population_fn_risk(
    cls: &dyn Classifier,
    dist: &Distribution,
    mc: &MonteCarloSpec,
) -> Result<RiskEstimate> {
    mc.validate()?;
    cls.validate(dist.labels())?;
    if let Some(value) = quadrature(dist, cls) {
        return Ok(RiskEstimate::exact(value));
    }
    monte_carlo_fn_risk(cls, dist, mc)
}

/// Monte Carlo estimate of the population risk even where quadrature applies.
pub fn monte_carlo_fn_risk(
    cls: &dyn Classifier,
    dist: &Distribution,
    mc: &MonteCarloSpec,
) -> Result<RiskEstimate> {
    mc.validate()?;
    cls.validate(dist.labels())?;
    let inv_l = 1.0 / dist.labels() as f64;
    let [acc] = monte_carlo(dist, mc, |x, st| {
        cls.predict(x, &st.eta, &mut st.rng, &mut st.scratch, &mut st.pred);
        [fn_sum(st.pred.as_slice(), st.eta.as_slice()) * inv_l]
    });
    Ok(RiskEstimate::from_acc(&acc))
}

/// Cross-check path that samples `Y` explicitly and counts missed labels.
pub fn sampled_fn_risk(
    cls: &dyn Classifier,
    dist: &Distribution,
    mc: &MonteCarloSpec,
) -> Result<RiskEstimate> {
    mc.validate()?;
    cls.validate(dist.labels())?;
    let inv_l = 1.0 / dist.labels() as f64;
    let [acc] = monte_carlo(dist, mc, |x, st| {
        cls.predict(x, &st.eta, &mut st.rng, &mut st.scratch, &mut st.pred);
        let mut missed = 0usize;
        for (l, &p) in st.eta.as_slice().iter().enumerate() {
            let y = st.rng.random::<f64>() < p;
            if y && !st.pred.get(l) {
                missed += 1;
            }
        }
        [missed as f64 * inv_l]
    });
    Ok(RiskEstimate::from_acc(&acc))
}

/// Excess risk of `cls` over the oracle of `oracle_rule`, evaluated on
/// common samples so the difference has low variance.
pub fn excess_risk(
    cls: &dyn Classifier,
    oracle_rule: &RuleSpec,
    dist: &Distribution,
    mc: &MonteCarloSpec,
) -> Result<ExcessRisk> {
    mc.validate()?;
    cls.validate(dist.labels())?;
    let oracle = Oracle(*oracle_rule);
    oracle.validate(dist.labels())?;
    if let (Some(rule_risk), Some(oracle_risk)) = (quadrature(dist, cls), quadrature(dist, &oracle))
    {
        let signed = rule_risk - oracle_risk;
        return Ok(ExcessRisk {
            signed,
            absolute: signed.abs(),
            std_error: 0.0,
            rule_risk,
            oracle_risk,
            exact: true,
        });
    }
    let inv_l = 1.0 / dist.labels() as f64;
    let [rule, reference, diff] = monte_carlo(dist, mc, |x, st| {
        cls.predict(x, &st.eta, &mut st.rng, &mut st.scratch, &mut st.pred);
        oracle_rule.apply_into(
            st.eta.as_slice(),
            &mut st.scratch.order,
            st.reference.as_mut_slice(),
        );
        let a = fn_sum(st.pred.as_slice(), st.eta.as_slice()) * inv_l;
        let b = fn_sum(st.reference.as_slice(), st.eta.as_slice()) * inv_l;
        [a, b, a - b]
    });
    let oracle_risk = quadrature(dist, &oracle).unwrap_or(reference.mean());
    Ok(ExcessRisk {
        signed: diff.mean(),
        absolute: diff.mean().abs(),
        std_error: diff.std_error(),
        rule_risk: rule.mean(),
        oracle_risk,
        exact: false,
    })
}

/// Monte Carlo estimate of the pairwise upper bound on the excess risk of a
/// `k`-sparse classifier:
/// `(1/L) E sum_{l <= k < j} (eta^{s_l} - eta^{s_j}) 1{f^{s_l} = 0, f^{s_j} = 1}`
/// where `s` is the true descending ranking.
///
/// The bound dominates the signed excess pointwise when every prediction has
/// exactly `k` labels; any other prediction size is reported as an error.
pub fn pairwise_excess_bound(
    cls: &dyn Classifier,
    dist: &Distribution,
    mc: &MonteCarloSpec,
    k: usize,
) -> Result<RiskEstimate> {
    mc.validate()?;
    cls.validate(dist.labels())?;
    let labels = dist.labels();
    if k > labels {
        return Err(Error::param("k", format!("k = {k} exceeds L = {labels}")));
    }
    let inv_l = 1.0 / labels as f64;
    let [bound, off_size] = monte_carlo(dist, mc, |x, st| {
        cls.predict(x, &st.eta, &mut st.rng, &mut st.scratch, &mut st.pred);
        let eta = st.eta.as_slice();
        let pred = st.pred.as_slice();
        rank_into(eta, &mut st.scratch.order);
        let order = &st.scratch.order;
        let mut total = 0.0;
        for &top in &order[..k] {
            if pred[top] {
                continue;
            }
            for &low in &order[k..] {
                if pred[low] {
                    total += eta[top] - eta[low];
                }
            }
        }
        let wrong_size = pred.iter().filter(|&&b| b).count() != k;
        [total * inv_l, f64::from(u8::from(wrong_size))]
    });
    if off_size.mean() > 0.0 {
        return Err(Error::param(
            "classifier",
            format!("predictions are not exactly {k}-sparse"),
        ));
    }
    Ok(RiskEstimate::from_acc(&bound))
}
