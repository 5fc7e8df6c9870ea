//! The constrained classifier families and their exhaustive reference oracle.
//!
//! Each rule maps a probability vector to a prediction. Fed the true
//! regression vector it is the constrained optimum; fed an estimate it is
//! the corresponding plug-in rule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{descending, rank_into, LabelVector, ProbVector};

/// Which constraint set the classifier must live in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RuleSpec {
    /// At most `k` labels per instance.
    TopK { k: usize },
    /// Conditional expected false positives at most `beta` per instance.
    BetaBudget { beta: f64 },
    /// Both constraints at once.
    Mixed { beta: f64, k: usize },
    /// No constraint; the optimum predicts every label.
    Full,
}

impl RuleSpec {
    /// Checks the parameters against a label count.
    pub fn validate(&self, labels: usize) -> Result<()> {
        match *self {
            RuleSpec::TopK { k } => check_k(k, labels),
            RuleSpec::BetaBudget { beta } => check_beta(beta),
            RuleSpec::Mixed { beta, k } => {
                check_beta(beta)?;
                check_k(k, labels)
            }
            RuleSpec::Full => Ok(()),
        }
    }

    pub fn apply(&self, v: &ProbVector) -> Result<LabelVector> {
        self.validate(v.len())?;
        let mut out = LabelVector::zeros(v.len());
        let mut order = Vec::with_capacity(v.len());
        self.apply_into(v.as_slice(), &mut order, out.as_mut_slice());
        Ok(out)
    }

    /// Allocation-free application; parameters must already be validated.
    pub(crate) fn apply_into(&self, v: &[f64], order: &mut Vec<usize>, out: &mut [bool]) {
        let labels = v.len();
        let selected = match *self {
            RuleSpec::Full => labels,
            RuleSpec::TopK { k } => {
                select_top_into(v, k, order);
                k
            }
            RuleSpec::BetaBudget { beta } => {
                rank_into(v, order);
                budget_prefix(v, order, beta)
            }
            RuleSpec::Mixed { beta, k } => {
                rank_into(v, order);
                budget_prefix(v, order, beta).min(k)
            }
        };
        if selected == labels {
            out.fill(true);
            return;
        }
        out.fill(false);
        for &l in &order[..selected] {
            out[l] = true;
        }
    }

    /// Whether `f` satisfies this rule's pointwise constraint at `eta`.
    pub fn is_feasible(&self, f: &LabelVector, eta: &ProbVector) -> Result<bool> {
        let fp = crate::risk::conditional_fp_sum(f, eta)?;
        Ok(match *self {
            RuleSpec::TopK { k } => f.sparsity() <= k,
            RuleSpec::BetaBudget { beta } => fp <= beta,
            RuleSpec::Mixed { beta, k } => f.sparsity() <= k && fp <= beta,
            RuleSpec::Full => true,
        })
    }
}

fn check_k(k: usize, labels: usize) -> Result<()> {
    if k > labels {
        return Err(Error::param("k", format!("k = {k} exceeds L = {labels}")));
    }
    Ok(())
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(Error::param(
            "beta",
            format!("{beta} is not a finite value >= 0"),
        ));
    }
    Ok(())
}

/// Leaves the `k` highest-ranked labels (ranking order, index tie-break) in
/// `order[..k]`, in no particular order.
fn select_top_into(v: &[f64], k: usize, order: &mut Vec<usize>) {
    order.clear();
    order.extend(0..v.len());
    if k > 0 && k < v.len() {
        order.select_nth_unstable_by(k - 1, |&a, &b| descending(v, a, b));
    }
}

/// Largest prefix of `order` whose cumulative `1 - v` mass stays within `beta`.
fn budget_prefix(v: &[f64], order: &[usize], beta: f64) -> usize {
    let mut spent = 0.0;
    for (m, &l) in order.iter().enumerate() {
        spent += 1.0 - v[l];
        if spent > beta {
            return m;
        }
    }
    order.len()
}

/// Predicts the `k` most probable labels.
pub fn top_k_classify(v: &ProbVector, k: usize) -> Result<LabelVector> {
    RuleSpec::TopK { k }.apply(v)
}

/// Number of labels the false-positive budget `beta` admits at `v`: the
/// largest `m` such that the `m` most probable labels carry at most `beta`
/// expected false positives, or 0 when even the first label exceeds it.
pub fn beta_threshold(v: &ProbVector, beta: f64) -> Result<usize> {
    check_beta(beta)?;
    let mut order = Vec::with_capacity(v.len());
    rank_into(v.as_slice(), &mut order);
    Ok(budget_prefix(v.as_slice(), &order, beta))
}

pub fn beta_classify(v: &ProbVector, beta: f64) -> Result<LabelVector> {
    RuleSpec::BetaBudget { beta }.apply(v)
}

/// Top-`min(K(x), k)` rule for the intersection of both constraint sets.
pub fn mixed_classify(v: &ProbVector, beta: f64, k: usize) -> Result<LabelVector> {
    RuleSpec::Mixed { beta, k }.apply(v)
}

/// Largest label count accepted by [`brute_force_oracle`].
pub const MAX_BRUTE_FORCE_LABELS: usize = 20;

/// A minimizer found by exhaustive search and its conditional false-negative sum.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub labels: LabelVector,
    pub fn_sum: f64,
}

/// Exhaustive table of every binary vector at one probability vector.
///
/// Building the table once and solving many rules against it keeps sweeps
/// over `(k, beta)` grids cheap.
#[derive(Debug, Clone)]
pub struct BruteForceTable {
    labels: usize,
    // indexed by the lexicographic rank of the vector (label 0 most significant)
    fn_sums: Vec<f64>,
    fp_sums: Vec<f64>,
    counts: Vec<u8>,
}

impl BruteForceTable {
    pub fn new(v: &ProbVector) -> Result<Self> {
        let labels = v.len();
        if labels > MAX_BRUTE_FORCE_LABELS {
            return Err(Error::Capacity {
                labels,
                max: MAX_BRUTE_FORCE_LABELS,
            });
        }
        let size = 1usize << labels;
        let mut fn_sums = Vec::with_capacity(size);
        let mut fp_sums = Vec::with_capacity(size);
        let mut counts = Vec::with_capacity(size);
        for code in 0..size {
            let (mut missed, mut false_pos, mut count) = (0.0, 0.0, 0u8);
            for (l, &p) in v.as_slice().iter().enumerate() {
                if bit(code, l, labels) {
                    false_pos += 1.0 - p;
                    count += 1;
                } else {
                    missed += p;
                }
            }
            fn_sums.push(missed);
            fp_sums.push(false_pos);
            counts.push(count);
        }
        Ok(Self {
            labels,
            fn_sums,
            fp_sums,
            counts,
        })
    }

    /// Lexicographically smallest feasible minimizer of the missed mass.
    pub fn solve(&self, rule: &RuleSpec) -> Result<OracleSolution> {
        rule.validate(self.labels)?;
        let feasible = |code: usize| -> bool {
            let count = usize::from(self.counts[code]);
            match *rule {
                RuleSpec::TopK { k } => count <= k,
                RuleSpec::BetaBudget { beta } => self.fp_sums[code] <= beta,
                RuleSpec::Mixed { beta, k } => count <= k && self.fp_sums[code] <= beta,
                RuleSpec::Full => true,
            }
        };
        // code 0 (all zeros) is always feasible
        let mut best = 0;
        for code in 1..self.fn_sums.len() {
            if self.fn_sums[code] < self.fn_sums[best] && feasible(code) {
                best = code;
            }
        }
        let bits = (0..self.labels)
            .map(|l| bit(best, l, self.labels))
            .collect();
        Ok(OracleSolution {
            labels: LabelVector::from_bools(bits),
            fn_sum: self.fn_sums[best],
        })
    }
}

#[inline]
fn bit(code: usize, label: usize, labels: usize) -> bool {
    (code >> (labels - 1 - label)) & 1 == 1
}

/// Minimizes the conditional false-negative sum over all `2^L` vectors that
/// satisfy the rule's pointwise constraint.
pub fn brute_force_oracle(v: &ProbVector, rule: &RuleSpec) -> Result<OracleSolution> {
    BruteForceTable::new(v)?.solve(rule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::risk::{conditional_fn_sum, conditional_fp_sum};

    fn pv(v: &[f64]) -> ProbVector {
        ProbVector::from_slice(v).unwrap()
    }

    fn bits(f: &LabelVector) -> Vec<u8> {
        f.to_bits()
    }

    #[test]
    fn top_k_examples() {
        let v = pv(&[0.2, 0.9, 0.5]);
        assert_eq!(bits(&top_k_classify(&v, 2).unwrap()), [0, 1, 1]);
        assert_eq!(bits(&top_k_classify(&v, 0).unwrap()), [0, 0, 0]);
        assert_eq!(bits(&top_k_classify(&v, 3).unwrap()), [1, 1, 1]);
        assert!(matches!(
            top_k_classify(&v, 4),
            Err(Error::Parameter { name: "k", .. })
        ));
    }

    #[test]
    fn top_k_tie_break_prefers_small_index() {
        let v = pv(&[0.5, 0.5, 0.5, 0.5]);
        assert_eq!(bits(&top_k_classify(&v, 2).unwrap()), [1, 1, 0, 0]);
    }

    #[test]
    fn beta_threshold_examples() {
        assert_eq!(beta_threshold(&pv(&[0.9, 0.8, 0.3]), 1.0).unwrap(), 3);
        // K = 1 under the +1 member of the two-point construction, phi^-1 = 1/16
        assert_eq!(
            beta_threshold(&pv(&[0.75, 0.1875, 0.0, 0.0]), 1.0).unwrap(),
            1
        );
        assert_eq!(beta_threshold(&pv(&[0.75, 0.3125]), 1.0).unwrap(), 2);
        assert_eq!(
            beta_threshold(&pv(&[0.75, 0.3125, 0.0, 0.0]), 1.0).unwrap(),
            2
        );
        assert_eq!(beta_threshold(&pv(&[0.5, 0.5]), 0.4).unwrap(), 0);
        assert!(beta_threshold(&pv(&[0.5]), -0.1).is_err());
        assert!(beta_threshold(&pv(&[0.5]), f64::NAN).is_err());
    }

    #[test]
    fn beta_classify_examples() {
        assert_eq!(
            bits(&beta_classify(&pv(&[0.9, 0.8, 0.3]), 1.0).unwrap()),
            [1, 1, 1]
        );
        assert_eq!(
            bits(&beta_classify(&pv(&[0.75, 0.1875, 0.0, 0.0]), 1.0).unwrap()),
            [1, 0, 0, 0]
        );
        assert_eq!(bits(&beta_classify(&pv(&[0.5, 0.5]), 0.4).unwrap()), [0, 0]);
    }

    #[test]
    fn mixed_classify_examples() {
        let v = pv(&[0.9, 0.8, 0.3]);
        assert_eq!(bits(&mixed_classify(&v, 1.0, 2).unwrap()), [1, 1, 0]);
        assert_eq!(bits(&mixed_classify(&v, 1.0, 3).unwrap()), [1, 1, 1]);
        assert_eq!(bits(&mixed_classify(&v, 0.05, 2).unwrap()), [0, 0, 0]);
        assert!(mixed_classify(&v, 1.0, 4).is_err());
    }

    #[test]
    fn full_rule_predicts_everything() {
        let f = RuleSpec::Full.apply(&pv(&[0.0, 0.3])).unwrap();
        assert_eq!(bits(&f), [1, 1]);
    }

    // Expected values below come from enumerating all 8 vectors by hand:
    // v = (0.9, 0.8, 0.3), budget 1: (1,1,1) has FP 0.1+0.2+0.7 = 1.0 <= 1, FN 0.
    // v = (0.2, 0.9, 0.5), at most one label: best single label is 2, FN 0.2+0.5.
    #[test]
    fn brute_force_examples() {
        let s =
            brute_force_oracle(&pv(&[0.9, 0.8, 0.3]), &RuleSpec::BetaBudget { beta: 1.0 }).unwrap();
        assert_eq!(bits(&s.labels), [1, 1, 1]);
        assert_eq!(s.fn_sum, 0.0);

        let s = brute_force_oracle(&pv(&[0.2, 0.9, 0.5]), &RuleSpec::TopK { k: 1 }).unwrap();
        assert_eq!(bits(&s.labels), [0, 1, 0]);
        assert!((s.fn_sum - 0.7).abs() < 1e-15);

        let s = brute_force_oracle(&pv(&[0.5, 0.5]), &RuleSpec::TopK { k: 0 }).unwrap();
        assert_eq!(bits(&s.labels), [0, 0]);
        assert_eq!(s.fn_sum, 1.0);
    }

    #[test]
    fn brute_force_returns_lexicographically_smallest_minimizer() {
        // labels 0 and 1 are interchangeable; (0,1) < (1,0)
        let s = brute_force_oracle(&pv(&[0.5, 0.5]), &RuleSpec::TopK { k: 1 }).unwrap();
        assert_eq!(bits(&s.labels), [0, 1]);
    }

    #[test]
    fn brute_force_rejects_large_label_sets() {
        let v = ProbVector::new(vec![0.5; 21]).unwrap();
        assert_eq!(
            brute_force_oracle(&v, &RuleSpec::Full).unwrap_err(),
            Error::Capacity {
                labels: 21,
                max: 20
            }
        );
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn prob_vec(max_len: usize) -> impl Strategy<Value = ProbVector> {
            prop::collection::vec(
                prop_oneof![4 => 0.0..=1.0f64, 1 => Just(0.0), 1 => Just(1.0), 1 => Just(0.5)],
                1..=max_len,
            )
            .prop_map(|v| ProbVector::new(v).unwrap())
        }

        proptest! {
            #[test]
            fn top_k_matches_brute_force(v in prob_vec(10)) {
                let table = BruteForceTable::new(&v).unwrap();
                for k in 0..=v.len() {
                    let f = top_k_classify(&v, k).unwrap();
                    prop_assert_eq!(f.sparsity(), k);
                    let want = table.solve(&RuleSpec::TopK { k }).unwrap().fn_sum;
                    prop_assert!((conditional_fn_sum(&f, &v).unwrap() - want).abs() <= 1e-12);
                }
            }

            #[test]
            fn beta_matches_brute_force(v in prob_vec(10), quarter in 0usize..48) {
                let beta = quarter as f64 * 0.25;
                let table = BruteForceTable::new(&v).unwrap();
                let f = beta_classify(&v, beta).unwrap();
                let want = table.solve(&RuleSpec::BetaBudget { beta }).unwrap().fn_sum;
                prop_assert!((conditional_fn_sum(&f, &v).unwrap() - want).abs() <= 1e-12);
            }

            #[test]
            fn mixed_matches_brute_force(v in prob_vec(10), quarter in 0usize..48, k in 0usize..=10) {
                let beta = quarter as f64 * 0.25;
                let k = k.min(v.len());
                let table = BruteForceTable::new(&v).unwrap();
                let f = mixed_classify(&v, beta, k).unwrap();
                let want = table.solve(&RuleSpec::Mixed { beta, k }).unwrap().fn_sum;
                prop_assert!((conditional_fn_sum(&f, &v).unwrap() - want).abs() <= 1e-12);
                let rule = RuleSpec::Mixed { beta, k };
                prop_assert!(rule.is_feasible(&f, &v).unwrap());
            }

            #[test]
            fn threshold_monotone_in_beta(v in prob_vec(12), a in 0.0..12.0f64, b in 0.0..12.0f64) {
                let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                prop_assert!(beta_threshold(&v, lo).unwrap() <= beta_threshold(&v, hi).unwrap());
            }

            #[test]
            fn top_k_nested(v in prob_vec(12)) {
                for k in 0..v.len() {
                    let small = top_k_classify(&v, k).unwrap();
                    let large = top_k_classify(&v, k + 1).unwrap();
                    prop_assert!(large.dominates(&small));
                }
            }

            #[test]
            fn beta_classify_is_feasible(v in prob_vec(16), beta in 0.0..16.0f64) {
                let f = beta_classify(&v, beta).unwrap();
                prop_assert!(conditional_fp_sum(&f, &v).unwrap() <= beta);
                let k = beta_threshold(&v, beta).unwrap();
                prop_assert_eq!(f, top_k_classify(&v, k).unwrap());
            }
        }
    }
}
