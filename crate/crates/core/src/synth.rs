//! Synthetic joint laws of `(X, Y)` with closed-form regression vectors.
//!
//! `X` is uniform on `[0, 1]` for every family and, given `X = x`, the labels
//! are independent Bernoulli draws with success probabilities `eta(x)`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_blocks, stream_rng, StreamRng};
use crate::labels::{LabelVector, ProbVector};
use crate::rules::beta_threshold;

/// One constant-`eta` cell of a staircase distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaircaseCell {
    /// Probability mass of the cell; cells tile `[0, 1]` left to right.
    pub weight: f64,
    /// Number of leading labels set to `eta_high`; the budget admits exactly these.
    pub k: usize,
    pub eta_high: f64,
    pub eta_low: f64,
}

/// Catalog of distribution families, serialized with a `family` tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DistributionSpec {
    /// Two labels, `eta = (1/2 + x/2, 1/2 - x/2)`.
    TwoLabelLinear,
    /// The first `k` labels sit at `1/2 + g/2`, the rest at `1/2 - g/2`, with
    /// `g = x^(1/alpha)`, so the top-`k` gap has tail `P(g <= d) = d^alpha`.
    TopkPolyMargin { alpha: f64, labels: usize, k: usize },
    /// Piecewise-constant `eta` whose budget threshold equals `k_j` on cell `j`.
    BetaStaircase {
        labels: usize,
        beta: f64,
        cells: Vec<StaircaseCell>,
    },
    /// Two-point construction: `eta = (3/4, 1/4 - rho * phi_inv, 0, ..., 0)`.
    LowerboundPm {
        rho: i8,
        phi_inv: f64,
        labels: usize,
    },
}

/// Estimator noise families.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    #[default]
    GaussianClipped,
}

/// Estimator model: `eta_hat = clip(eta + c0 * N^(-gamma/2) * Z)` per label.
///
/// This realizes the exponential concentration bound with `C1 = 2` and
/// `C2 = 1 / (2 c0^2)`. `c0 = 0` is the noiseless estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSpec {
    pub gamma: f64,
    pub c0: f64,
    #[serde(default)]
    pub noise_kind: NoiseKind,
}

impl EstimatorSpec {
    pub fn gaussian(gamma: f64, c0: f64) -> Self {
        Self {
            gamma,
            c0,
            noise_kind: NoiseKind::GaussianClipped,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::param("gamma", format!("{} must be > 0", self.gamma)));
        }
        if !(self.c0.is_finite() && self.c0 >= 0.0) {
            return Err(Error::param("c0", format!("{} must be >= 0", self.c0)));
        }
        Ok(())
    }

    /// Per-label noise standard deviation at sample size `n`.
    pub fn noise_scale(&self, n: u64) -> f64 {
        self.c0 * (n as f64).powf(-self.gamma / 2.0)
    }

    /// `C1 exp(-C2 N^gamma delta^2)` for this noise model.
    pub fn tail_bound(&self, n: u64, delta: f64) -> f64 {
        if self.c0 == 0.0 {
            return if delta > 0.0 { 0.0 } else { 2.0 };
        }
        2.0 * (-(n as f64).powf(self.gamma) * delta * delta / (2.0 * self.c0 * self.c0)).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonteCarloSpec {
    pub samples: usize,
    pub seed: u64,
}

impl MonteCarloSpec {
    pub fn new(samples: usize, seed: u64) -> Self {
        Self { samples, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::param(
                "samples",
                "Monte Carlo sample count must be >= 1",
            ));
        }
        Ok(())
    }
}

/// A validated [`DistributionSpec`] with precomputed cell boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    spec: DistributionSpec,
    labels: usize,
    // right edges of the staircase cells
    edges: Vec<f64>,
    sparsity: f64,
}

impl Distribution {
    pub fn new(spec: DistributionSpec) -> Result<Self> {
        let mut edges = Vec::new();
        let (labels, sparsity) = match &spec {
            DistributionSpec::TwoLabelLinear => (2, 1.0),
            &DistributionSpec::TopkPolyMargin { alpha, labels, k } => {
                if !(alpha.is_finite() && alpha > 0.0) {
                    return Err(Error::Distribution(format!("alpha = {alpha} must be > 0")));
                }
                if labels < 2 || k == 0 || k >= labels {
                    return Err(Error::Distribution(format!(
                        "topk_poly_margin needs 1 <= k < L, got k = {k}, L = {labels}"
                    )));
                }
                // sum = L/2 + (2k - L) g / 2, maximized at g = 0 or g = 1
                let at_one = k as f64;
                (labels, (labels as f64 / 2.0).max(at_one))
            }
            DistributionSpec::BetaStaircase {
                labels,
                beta,
                cells,
            } => {
                let s = validate_staircase(*labels, *beta, cells)?;
                let mut acc = 0.0;
                for c in cells {
                    acc += c.weight;
                    edges.push(acc);
                }
                (*labels, s)
            }
            &DistributionSpec::LowerboundPm {
                rho,
                phi_inv,
                labels,
            } => {
                if rho != 1 && rho != -1 {
                    return Err(Error::Distribution(format!("rho = {rho} must be +1 or -1")));
                }
                if !(phi_inv > 0.0 && phi_inv <= 0.125) {
                    return Err(Error::Distribution(format!(
                        "phi_inv = {phi_inv} must lie in (0, 1/8]"
                    )));
                }
                if labels < 2 {
                    return Err(Error::Distribution("lowerbound_pm needs L >= 2".into()));
                }
                (labels, 1.0 - f64::from(rho) * phi_inv)
            }
        };
        Ok(Self {
            spec,
            labels,
            edges,
            sparsity,
        })
    }

    pub fn spec(&self) -> &DistributionSpec {
        &self.spec
    }

    pub fn labels(&self) -> usize {
        self.labels
    }

    /// Almost-sure upper bound on `sum_l eta^l(X)`, computed in closed form.
    pub fn sparsity_bound(&self) -> f64 {
        self.sparsity
    }

    /// Closed-form regression vector at `x`.
    pub fn eta(&self, x: f64) -> Result<ProbVector> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Domain(x));
        }
        let mut out = ProbVector::zeros(self.labels)?;
        self.eta_into(x, &mut out);
        Ok(out)
    }

    pub(crate) fn eta_into(&self, x: f64, out: &mut ProbVector) {
        let v = out.values_mut();
        match self.spec {
            DistributionSpec::TwoLabelLinear => {
                v[0] = 0.5 + 0.5 * x;
                v[1] = 0.5 - 0.5 * x;
            }
            DistributionSpec::TopkPolyMargin { alpha, k, .. } => {
                let g = x.powf(1.0 / alpha);
                let (hi, lo) = (0.5 + 0.5 * g, 0.5 - 0.5 * g);
                v[..k].fill(hi);
                v[k..].fill(lo);
            }
            DistributionSpec::BetaStaircase { ref cells, .. } => {
                let c = &cells[self.cell_index(x)];
                v[..c.k].fill(c.eta_high);
                v[c.k..].fill(c.eta_low);
            }
            DistributionSpec::LowerboundPm { rho, phi_inv, .. } => {
                v.fill(0.0);
                v[0] = 0.75;
                v[1] = 0.25 - f64::from(rho) * phi_inv;
            }
        }
    }

    fn cell_index(&self, x: f64) -> usize {
        self.edges
            .iter()
            .position(|&e| x < e)
            .unwrap_or(self.edges.len() - 1)
    }

    /// `(weight, representative x)` per constant-`eta` cell, when `eta` is
    /// piecewise constant.
    pub fn cells(&self) -> Option<Vec<(f64, f64)>> {
        match &self.spec {
            DistributionSpec::BetaStaircase { cells, .. } => {
                let mut left = 0.0;
                Some(
                    cells
                        .iter()
                        .zip(&self.edges)
                        .map(|(c, &right)| {
                            let mid = 0.5 * (left + right.min(1.0));
                            left = right;
                            (c.weight, mid)
                        })
                        .collect(),
                )
            }
            DistributionSpec::LowerboundPm { .. } => Some(vec![(1.0, 0.5)]),
            _ => None,
        }
    }

    /// Exact `E[eta^l(X)]` per label.
    pub fn mean_eta(&self) -> Vec<f64> {
        match &self.spec {
            DistributionSpec::TwoLabelLinear => vec![0.75, 0.25],
            &DistributionSpec::TopkPolyMargin { alpha, labels, k } => {
                // E[X^(1/alpha)] = alpha / (alpha + 1)
                let eg = alpha / (alpha + 1.0);
                let mut m = vec![0.5 - 0.5 * eg; labels];
                m[..k].fill(0.5 + 0.5 * eg);
                m
            }
            _ => {
                let cells = self.cells().expect("piecewise-constant family");
                let mut m = vec![0.0; self.labels];
                let mut buf = ProbVector::zeros(self.labels).expect("labels >= 1");
                for (w, x) in cells {
                    self.eta_into(x, &mut buf);
                    for (acc, p) in m.iter_mut().zip(buf.as_slice()) {
                        *acc += w * p;
                    }
                }
                m
            }
        }
    }
}

fn validate_staircase(labels: usize, beta: f64, cells: &[StaircaseCell]) -> Result<f64> {
    let bad = |msg: String| Err(Error::Distribution(msg));
    if labels == 0 {
        return bad("beta_staircase needs L >= 1".into());
    }
    if !(beta.is_finite() && beta >= 0.0) {
        return bad(format!("beta = {beta} must be >= 0"));
    }
    if cells.is_empty() {
        return bad("beta_staircase needs at least one cell".into());
    }
    let total: f64 = cells.iter().map(|c| c.weight).sum();
    if (total - 1.0).abs() > 1e-9 {
        return bad(format!("cell weights sum to {total}, not 1"));
    }
    let mut s: f64 = 0.0;
    for (j, c) in cells.iter().enumerate() {
        if c.weight.is_nan() || c.weight <= 0.0 {
            return bad(format!("cell {j}: weight {} must be > 0", c.weight));
        }
        if c.k > labels {
            return bad(format!("cell {j}: k = {} exceeds L = {labels}", c.k));
        }
        for p in [c.eta_high, c.eta_low] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("cell {j}: {p} is not a probability"));
            }
        }
        if c.k > 0 && c.k < labels && c.eta_high <= c.eta_low {
            return bad(format!("cell {j}: eta_high must exceed eta_low"));
        }
        let kf = c.k as f64;
        let spent = kf * (1.0 - c.eta_high);
        if c.k > 0 && spent > beta {
            return bad(format!("cell {j}: k (1 - eta_high) = {spent} exceeds beta"));
        }
        if c.k < labels && spent + (1.0 - c.eta_low) <= beta {
            return bad(format!(
                "cell {j}: budget admits more than k = {} labels",
                c.k
            ));
        }
        let mut eta = vec![c.eta_low; labels];
        eta[..c.k].fill(c.eta_high);
        let eta = ProbVector::new(eta)?;
        let threshold = beta_threshold(&eta, beta)?;
        if threshold != c.k {
            return bad(format!(
                "cell {j}: budget threshold is {threshold}, expected {}",
                c.k
            ));
        }
        s = s.max(eta.sum());
    }
    Ok(s)
}

/// Closed-form regression vector; see [`Distribution::eta`].
pub fn eval_eta(dist: &Distribution, x: f64) -> Result<ProbVector> {
    dist.eta(x)
}

/// Draws `mc.samples` i.i.d. pairs `(X, Y)`; reproducible from `mc.seed`.
pub fn sample_xy(dist: &Distribution, mc: &MonteCarloSpec) -> Result<Vec<(f64, LabelVector)>> {
    mc.validate()?;
    let chunks = map_blocks(mc.samples, |block, range| {
        let mut rng = stream_rng(mc.seed, block);
        let mut eta = ProbVector::zeros(dist.labels()).expect("labels >= 1");
        range
            .map(|_| {
                let x: f64 = rng.random();
                dist.eta_into(x, &mut eta);
                let y = eta
                    .as_slice()
                    .iter()
                    .map(|&p| rng.random::<f64>() < p)
                    .collect();
                (x, LabelVector::from_bools(y))
            })
            .collect::<Vec<_>>()
    });
    Ok(chunks.into_iter().flatten().collect())
}

/// Adds clipped Gaussian noise of standard deviation `scale` to each entry.
pub(crate) fn perturb_into(eta: &[f64], scale: f64, rng: &mut StreamRng, out: &mut [f64]) {
    if scale == 0.0 {
        out.copy_from_slice(eta);
        return;
    }
    for (o, &p) in out.iter_mut().zip(eta) {
        let z: f64 = rng.sample(StandardNormal);
        *o = (p + scale * z).clamp(0.0, 1.0);
    }
}

/// One draw of the estimated regression vector at `x` for sample size `n`.
pub fn noisy_eta(
    dist: &Distribution,
    est: &EstimatorSpec,
    n: u64,
    x: f64,
    rng: &mut StreamRng,
) -> Result<ProbVector> {
    est.validate()?;
    if n == 0 {
        return Err(Error::param("n", "sample size must be >= 1"));
    }
    let eta = dist.eta(x)?;
    let mut out = ProbVector::zeros(eta.len())?;
    perturb_into(eta.as_slice(), est.noise_scale(n), rng, out.values_mut());
    Ok(out)
}

/// `KL(Bernoulli(p) || Bernoulli(q))` in nats, `+inf` when `p` is not
/// absolutely continuous with respect to `q`.
pub fn kl_bernoulli(p: f64, q: f64) -> Result<f64> {
    for (name, v) in [("p", p), ("q", q)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::param(name, format!("{v} is not a probability")));
        }
    }
    fn term(a: f64, b: f64) -> f64 {
        if a == 0.0 {
            0.0
        } else if b == 0.0 {
            f64::INFINITY
        } else {
            a * (a / b).ln()
        }
    }
    Ok(term(p, q) + term(1.0 - p, 1.0 - q))
}

/// Pinsker bound on `TV(P_{+1}^N, P_{-1}^N)` for the two-point construction.
pub fn pinsker_tv_bound(n: u64, phi_inv: f64) -> f64 {
    let kl = kl_bernoulli(0.25 - phi_inv, 0.25 + phi_inv).unwrap_or(f64::INFINITY);
    (n as f64 * kl / 2.0).sqrt()
}

/// Largest separation `phi_inv <= 1/8` whose Pinsker bound over `n` samples
/// stays within `tv_target`, located by bisection.
pub fn choose_phi_inv(n: u64, tv_target: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::param("n", "sample size must be >= 1"));
    }
    if !(tv_target > 0.0 && tv_target < 1.0) {
        return Err(Error::param(
            "tv_target",
            format!("{tv_target} must lie in (0, 1)"),
        ));
    }
    const CAP: f64 = 0.125;
    if pinsker_tv_bound(n, CAP) <= tv_target {
        return Ok(CAP);
    }
    let (mut lo, mut hi) = (0.0_f64, CAP);
    // bisect to the resolution of f64 (well below 1e-12)
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pinsker_tv_bound(n, mid) <= tv_target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn staircase() -> DistributionSpec {
        DistributionSpec::BetaStaircase {
            labels: 6,
            beta: 1.0,
            cells: vec![
                StaircaseCell {
                    weight: 0.4,
                    k: 2,
                    eta_high: 0.51,
                    eta_low: 0.2,
                },
                StaircaseCell {
                    weight: 0.3,
                    k: 3,
                    eta_high: 0.68,
                    eta_low: 0.3,
                },
                StaircaseCell {
                    weight: 0.3,
                    k: 4,
                    eta_high: 0.765,
                    eta_low: 0.1,
                },
            ],
        }
    }

    fn lowerbound(rho: i8, labels: usize) -> Distribution {
        Distribution::new(DistributionSpec::LowerboundPm {
            rho,
            phi_inv: 1.0 / 16.0,
            labels,
        })
        .unwrap()
    }

    #[test]
    fn eta_examples() {
        let d = Distribution::new(DistributionSpec::TwoLabelLinear).unwrap();
        assert_eq!(d.eta(0.0).unwrap().as_slice(), &[0.5, 0.5]);
        assert_eq!(
            lowerbound(1, 4).eta(0.3).unwrap().as_slice(),
            &[0.75, 0.1875, 0.0, 0.0]
        );
        let d = Distribution::new(DistributionSpec::TopkPolyMargin {
            alpha: 2.0,
            labels: 2,
            k: 1,
        })
        .unwrap();
        let e = d.eta(0.25).unwrap();
        assert!((e.as_slice()[0] - e.as_slice()[1] - 0.5).abs() < 1e-15);
        assert_eq!(d.eta(1.5), Err(Error::Domain(1.5)));
        assert!(d.eta(-0.1).is_err());
    }

    #[test]
    fn staircase_cells_and_thresholds() {
        let d = Distribution::new(staircase()).unwrap();
        let cells = d.cells().unwrap();
        assert_eq!(cells.len(), 3);
        for ((_, x), k) in cells.iter().zip([2, 3, 4]) {
            assert_eq!(beta_threshold(&d.eta(*x).unwrap(), 1.0).unwrap(), k);
        }
        // x on every part of the cell, including the right end of [0, 1]
        for (x, k) in [
            (0.0, 2),
            (0.399, 2),
            (0.4, 3),
            (0.69, 3),
            (0.7, 4),
            (1.0, 4),
        ] {
            assert_eq!(
                beta_threshold(&d.eta(x).unwrap(), 1.0).unwrap(),
                k,
                "x = {x}"
            );
        }
        let want = (4.0 * 0.765 + 2.0 * 0.1_f64)
            .max(3.0 * 0.68 + 0.9)
            .max(1.02 + 0.8);
        assert!((d.sparsity_bound() - want).abs() < 1e-12);
    }

    #[test]
    fn staircase_validation_rejects_bad_cells() {
        let mk = |cells| DistributionSpec::BetaStaircase {
            labels: 3,
            beta: 1.0,
            cells,
        };
        let c = |weight, k, eta_high, eta_low| StaircaseCell {
            weight,
            k,
            eta_high,
            eta_low,
        };
        // weights do not sum to one
        assert!(Distribution::new(mk(vec![c(0.5, 1, 0.9, 0.1)])).is_err());
        // budget admits a second label
        assert!(Distribution::new(mk(vec![c(1.0, 1, 0.9, 0.5)])).is_err());
        // k (1 - high) over budget
        assert!(Distribution::new(mk(vec![c(1.0, 3, 0.6, 0.1)])).is_err());
        // high below low
        assert!(Distribution::new(mk(vec![c(1.0, 1, 0.01, 0.02)])).is_err());
        assert!(Distribution::new(mk(vec![c(1.0, 1, 0.9, 0.05)])).is_ok());
    }

    #[test]
    fn lowerbound_validation() {
        let mk = |rho, phi_inv, labels| {
            Distribution::new(DistributionSpec::LowerboundPm {
                rho,
                phi_inv,
                labels,
            })
        };
        assert!(mk(0, 0.1, 3).is_err());
        assert!(mk(1, 0.2, 3).is_err());
        assert!(mk(1, 0.0, 3).is_err());
        assert!(mk(1, 0.1, 1).is_err());
        assert!(mk(-1, 0.125, 2).is_ok());
    }

    #[test]
    fn json_round_trip() {
        let spec = staircase();
        let text = serde_json::to_string(&spec).unwrap();
        assert!(text.contains("\"family\":\"beta_staircase\""));
        let back: DistributionSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
        let lb: DistributionSpec = serde_json::from_str(
            r#"{"family":"lowerbound_pm","rho":-1,"phi_inv":0.0625,"labels":4}"#,
        )
        .unwrap();
        assert!(Distribution::new(lb).is_ok());
    }

    #[test]
    fn sampling_is_reproducible_and_respects_zero_labels() {
        let d = lowerbound(1, 5);
        let mc = MonteCarloSpec::new(5000, 11);
        let a = sample_xy(&d, &mc).unwrap();
        let b = sample_xy(&d, &mc).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|(_, y)| y.as_slice()[2..].iter().all(|&b| !b)));
        assert!(sample_xy(&d, &MonteCarloSpec::new(0, 1)).is_err());
    }

    #[test]
    fn empirical_label_means_match_closed_form() {
        for spec in [
            DistributionSpec::TwoLabelLinear,
            DistributionSpec::TopkPolyMargin {
                alpha: 0.5,
                labels: 3,
                k: 1,
            },
            staircase(),
        ] {
            let d = Distribution::new(spec).unwrap();
            let n = 100_000;
            let draws = sample_xy(&d, &MonteCarloSpec::new(n, 3)).unwrap();
            for (l, &m) in d.mean_eta().iter().enumerate() {
                let hits = draws.iter().filter(|(_, y)| y.get(l)).count() as f64;
                let p = hits / n as f64;
                let se = (m * (1.0 - m) / n as f64).sqrt();
                assert!((p - m).abs() <= 4.0 * se, "label {l}: {p} vs {m}");
            }
        }
    }

    #[test]
    fn noiseless_estimator_is_exact_and_noisy_is_clipped() {
        let d = Distribution::new(DistributionSpec::TopkPolyMargin {
            alpha: 1.0,
            labels: 4,
            k: 2,
        })
        .unwrap();
        let mut rng = stream_rng(5, 0);
        let est = EstimatorSpec::gaussian(1.0, 0.0);
        assert_eq!(
            noisy_eta(&d, &est, 10, 0.3, &mut rng).unwrap(),
            d.eta(0.3).unwrap()
        );
        let est = EstimatorSpec::gaussian(1.0, 3.0);
        for _ in 0..1000 {
            let e = noisy_eta(&d, &est, 1, 0.9, &mut rng).unwrap();
            assert!(e.as_slice().iter().all(|p| (0.0..=1.0).contains(p)));
        }
        assert!(noisy_eta(&d, &est, 0, 0.5, &mut rng).is_err());
        assert!(EstimatorSpec::gaussian(0.0, 1.0).validate().is_err());
        assert!(EstimatorSpec::gaussian(1.0, -1.0).validate().is_err());
    }

    #[test]
    fn noise_tail_at_two_scales() {
        let d = Distribution::new(DistributionSpec::TwoLabelLinear).unwrap();
        let est = EstimatorSpec::gaussian(1.0, 0.5);
        let n = 256;
        let delta = 2.0 * est.noise_scale(n);
        let mut rng = stream_rng(9, 0);
        let draws = 100_000;
        let mut exceed = 0;
        for _ in 0..draws {
            let e = noisy_eta(&d, &est, n, 0.5, &mut rng).unwrap();
            if (e.as_slice()[0] - 0.75).abs() >= delta {
                exceed += 1;
            }
        }
        let freq = exceed as f64 / draws as f64;
        assert!(freq <= 2.0 * (-2.0f64).exp(), "{freq}");
        assert!((est.tail_bound(n, delta) - 2.0 * (-2.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn kl_examples() {
        assert_eq!(kl_bernoulli(0.3, 0.3).unwrap(), 0.0);
        // 0.1875 ln(0.1875/0.3125) + 0.8125 ln(0.8125/0.6875), evaluated separately
        let want = 0.1875 * (0.6_f64).ln() + 0.8125 * (13.0_f64 / 11.0).ln();
        assert!((kl_bernoulli(0.1875, 0.3125).unwrap() - want).abs() < 1e-15);
        assert!((want - 0.039_951_639_332_699).abs() < 1e-12);
        assert_eq!(kl_bernoulli(0.3, 0.0).unwrap(), f64::INFINITY);
        assert_eq!(kl_bernoulli(0.0, 0.0).unwrap(), 0.0);
        assert!(kl_bernoulli(1.2, 0.5).is_err());
    }

    #[test]
    fn phi_inv_bisection_contract() {
        let phi = choose_phi_inv(1, 0.5).unwrap();
        assert!(phi <= 0.125);
        assert!(pinsker_tv_bound(1, phi) <= 0.5);
        let mut prev = f64::INFINITY;
        for e in 0..20 {
            let n = 1u64 << e;
            let phi = choose_phi_inv(n, 0.5).unwrap();
            let bound = pinsker_tv_bound(n, phi);
            assert!(bound <= 0.5);
            assert!(phi == 0.125 || (0.5 - bound) < 1e-9, "n = {n}: {bound}");
            assert!(phi <= prev);
            prev = phi;
        }
        assert!(choose_phi_inv(0, 0.5).is_err());
        assert!(choose_phi_inv(4, 1.0).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn kl_is_nonnegative(p in 0.0..=1.0f64, q in 0.001..0.999f64) {
                prop_assert!(kl_bernoulli(p, q).unwrap() >= -1e-15);
            }
        }
    }
}
