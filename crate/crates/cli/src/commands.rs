use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufReader, Read, Write};
use std::path::Path;

use clap::ValueEnum;
use rand::Rng;
use serde::Serialize;
use serde_json::json;

use mlplug::diagnostics::{
    check_embedding, check_global_margin, check_local_margin, check_partial_order, check_sparsity,
    check_topk_margin, EmbeddingReport, GlobalMarginReport, LocalMarginReport, PartialOrderReport,
    TailFitReport,
};
use mlplug::exec::{derive_seed, stream_rng};
use mlplug::experiments::{
    fit_rate_slope, run_inconsistency_demo, run_rate_sweep, summarize, ExperimentConfig,
    LowerBoundConfig, RateFit, RatePoint,
};
use mlplug::{
    conditional_fn_sum, excess_risk, pairwise_excess_bound, population_fn_risk, BruteForceTable,
    Classifier, Distribution, DistributionSpec, Error, EstimatorSpec, ExcessRisk, MonteCarloSpec,
    Oracle, PlugIn, ProbVector, RiskEstimate, RuleSpec,
};

use crate::error::{CliError, CliResult};
use crate::output::{num, read_json, sink, write_csv, write_json};
use crate::{
    AssumptionsArgs, ClassifierKind, EstimatorArgs, LowerboundArgs, OracleCheckArgs, PredictArgs,
    RatesArgs, RiskArgs, RuleArgs, RuleKind,
};

/// Attributes a library error to the flag named by its parameter, falling
/// back to `flag`.
fn blame(flag: &'static str) -> impl Fn(Error) -> CliError {
    move |e| match &e {
        Error::Parameter { name, .. } => {
            CliError::invalid(format!("--{}", name.replace('_', "-")), &e)
        }
        _ => CliError::invalid(flag, &e),
    }
}

impl RuleArgs {
    fn spec(&self) -> CliResult<RuleSpec> {
        let rule = self.rule.to_possible_value().expect("no skipped variants");
        let missing =
            |flag| CliError::invalid(flag, format!("required by --rule {}", rule.get_name()));
        let need_k = || self.k.ok_or_else(|| missing("--k"));
        let need_beta = || self.beta.ok_or_else(|| missing("--beta"));
        Ok(match self.rule {
            RuleKind::TopK => RuleSpec::TopK { k: need_k()? },
            RuleKind::Beta => RuleSpec::BetaBudget { beta: need_beta()? },
            RuleKind::Mixed => RuleSpec::Mixed {
                beta: need_beta()?,
                k: need_k()?,
            },
            RuleKind::Full => RuleSpec::Full,
        })
    }
}

impl EstimatorArgs {
    fn spec(&self) -> CliResult<EstimatorSpec> {
        let est = EstimatorSpec::gaussian(self.gamma, self.c0);
        est.validate().map_err(blame("--c0"))?;
        Ok(est)
    }
}

fn load_dist(path: &Path) -> CliResult<Distribution> {
    let spec: DistributionSpec = read_json("--dist", path)?;
    Distribution::new(spec)
        .map_err(|e| CliError::invalid("--dist", format!("{}: {e}", path.display())))
}

fn mc_spec(samples: usize, seed: u64) -> CliResult<MonteCarloSpec> {
    let mc = MonteCarloSpec::new(samples, seed);
    mc.validate().map_err(blame("--samples"))?;
    Ok(mc)
}

pub fn predict(args: PredictArgs) -> CliResult<()> {
    let rule = args.rule.spec()?;
    let (flag, input): (&str, Box<dyn Read>) = match &args.input {
        Some(p) if p != Path::new("-") => (
            "--input",
            Box::new(
                File::open(p)
                    .map_err(|e| CliError::invalid("--input", format!("{}: {e}", p.display())))?,
            ),
        ),
        _ => ("stdin", Box::new(io::stdin().lock())),
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(input));
    let (mut out, out_path) = sink(args.output.as_deref())?;
    let out_err =
        |e: io::Error| CliError::io(out_path.as_deref().unwrap_or(Path::new("<stdout>")), e);
    for (line, record) in reader.records().enumerate() {
        let line = line + 1;
        let record = record.map_err(|e| CliError::invalid(flag, format!("line {line}: {e}")))?;
        let values = record
            .iter()
            .map(|field| field.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::invalid(flag, format!("line {line}: {e}")))?;
        let eta = ProbVector::new(values)
            .map_err(|e| CliError::invalid(flag, format!("line {line}: {e}")))?;
        rule.validate(eta.len()).map_err(blame("--rule"))?;
        let labels = rule.apply(&eta).map_err(blame("--rule"))?;
        writeln!(out, "{labels}").map_err(out_err)?;
    }
    out.flush().map_err(out_err)
}

/// Random probability vector; one draw in three is quantized to quarters so
/// ties and exact 0/1 entries are common.
fn random_prob_vector(rng: &mut impl Rng, labels: usize) -> ProbVector {
    let quantized = rng.random_range(0..3) == 0;
    let values = (0..labels)
        .map(|_| {
            if quantized {
                f64::from(rng.random_range(0..=4u8)) / 4.0
            } else {
                rng.random::<f64>()
            }
        })
        .collect();
    ProbVector::new(values).expect("values lie in [0, 1]")
}

fn all_rules(labels: usize) -> Vec<RuleSpec> {
    let mut rules: Vec<RuleSpec> = (0..=labels).map(|k| RuleSpec::TopK { k }).collect();
    for i in 1..=4 * labels {
        let beta = i as f64 * 0.25;
        rules.push(RuleSpec::BetaBudget { beta });
        rules.extend((0..=labels).map(|k| RuleSpec::Mixed { beta, k }));
    }
    rules.push(RuleSpec::Full);
    rules
}

pub fn oracle_check(args: OracleCheckArgs) -> CliResult<()> {
    if args.labels == 0 {
        return Err(CliError::invalid("--L", "must be >= 1"));
    }
    let rules = all_rules(args.labels);
    let mut rng = stream_rng(args.seed, 0);
    let mut instances = 0u64;
    for trial in 0..args.trials {
        let eta = random_prob_vector(&mut rng, args.labels);
        let table = BruteForceTable::new(&eta).map_err(|e| CliError::invalid("--L", e))?;
        for rule in &rules {
            let closed = rule.apply(&eta).map_err(blame("--L"))?;
            let best = table.solve(rule).map_err(blame("--L"))?;
            let got = conditional_fn_sum(&closed, &eta).map_err(blame("--L"))?;
            let feasible = rule.is_feasible(&closed, &eta).map_err(blame("--L"))?;
            instances += 1;
            if !feasible || (got - best.fn_sum).abs() > 1e-12 {
                return Err(CliError::Violation {
                    summary: format!("oracle-check: closed form is not optimal at trial {trial}"),
                    witness: json!({
                        "trial": trial,
                        "eta": eta.as_slice(),
                        "rule": rule,
                        "closed_form": closed.to_string(),
                        "closed_form_fn_sum": got,
                        "feasible": feasible,
                        "brute_force": best.labels.to_string(),
                        "brute_force_fn_sum": best.fn_sum,
                    }),
                });
            }
        }
    }
    println!(
        "oracle-check: L={} trials={} rule_instances={instances} violations=0",
        args.labels, args.trials
    );
    Ok(())
}

#[derive(Serialize)]
struct RiskReport {
    classifier: &'static str,
    rule: RuleSpec,
    labels: usize,
    samples: usize,
    seed: u64,
    risk: RiskEstimate,
    #[serde(skip_serializing_if = "Option::is_none")]
    excess: Option<ExcessRisk>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pairwise_bound: Option<RiskEstimate>,
}

pub fn risk(args: RiskArgs) -> CliResult<()> {
    let dist = load_dist(&args.dist)?;
    let rule = args.rule.spec()?;
    rule.validate(dist.labels()).map_err(blame("--rule"))?;
    let mc = mc_spec(args.samples, args.seed)?;
    let oracle = Oracle(rule);
    let plug_in;
    let (name, cls): (&str, &dyn Classifier) = match args.classifier {
        ClassifierKind::Oracle => ("oracle", &oracle),
        ClassifierKind::PlugIn => {
            if args.n == 0 {
                return Err(CliError::invalid("--n", "must be >= 1"));
            }
            plug_in = PlugIn {
                rule,
                estimator: args.estimator.spec()?,
                n: args.n,
            };
            ("plug_in", &plug_in)
        }
    };
    let risk = population_fn_risk(cls, &dist, &mc).map_err(blame("--dist"))?;
    let excess = match args.classifier {
        ClassifierKind::Oracle => None,
        ClassifierKind::PlugIn => {
            Some(excess_risk(cls, &rule, &dist, &mc).map_err(blame("--dist"))?)
        }
    };
    let pairwise_bound = args
        .pairwise_k
        .map(|k| {
            pairwise_excess_bound(cls, &dist, &mc, k)
                .map_err(|e| CliError::invalid("--pairwise-k", e))
        })
        .transpose()?;
    write_json(
        args.output.as_deref(),
        &RiskReport {
            classifier: name,
            rule,
            labels: dist.labels(),
            samples: mc.samples,
            seed: mc.seed,
            risk,
            excess,
            pairwise_bound,
        },
    )
}

#[derive(Serialize)]
struct TopKSection {
    k: usize,
    holds: bool,
    tail: TailFitReport,
}

#[derive(Serialize)]
struct SparsitySection {
    empirical_sup: f64,
    declared: f64,
    holds: bool,
}

#[derive(Serialize)]
struct AssumptionsReport {
    distribution: DistributionSpec,
    labels: usize,
    beta: f64,
    samples: usize,
    seed: u64,
    status: BTreeMap<&'static str, &'static str>,
    top_k_margin: Option<TopKSection>,
    local_margin: LocalMarginReport,
    sparsity: SparsitySection,
    global_margin: Option<GlobalMarginReport>,
    embedding: EmbeddingReport,
    partial_order: PartialOrderReport,
}

fn verdict(holds: bool) -> &'static str {
    if holds {
        "holds"
    } else {
        "fails"
    }
}

fn default_delta_grid() -> Vec<f64> {
    (0..=30)
        .map(|i| 10f64.powf(-3.0 + f64::from(i) / 10.0))
        .collect()
}

pub fn assumptions(args: AssumptionsArgs) -> CliResult<()> {
    let dist = load_dist(&args.dist)?;
    let grid = args.delta_grid.clone().unwrap_or_else(default_delta_grid);
    let est = args.estimator.spec()?;
    let seed = |part: u64| derive_seed(args.seed, &[part]);
    let mc = |part| mc_spec(args.samples, seed(part));
    let mut status = BTreeMap::new();

    let top_k_margin = match args.k {
        Some(k) => {
            let tail = check_topk_margin(&dist, k, &grid, &mc(0)?).map_err(blame("--k"))?;
            let holds = tail.supports_polynomial_tail();
            status.insert("top_k_margin", verdict(holds));
            Some(TopKSection { k, holds, tail })
        }
        None => {
            status.insert("top_k_margin", "skipped");
            None
        }
    };
    let local_margin =
        check_local_margin(&dist, args.beta, &grid, &mc(1)?).map_err(blame("--beta"))?;
    status.insert("local_margin", verdict(local_margin.holds));

    let empirical_sup = check_sparsity(&dist, &mc(2)?).map_err(blame("--dist"))?;
    let declared = args.sparsity_bound.unwrap_or_else(|| dist.sparsity_bound());
    let sparsity = SparsitySection {
        empirical_sup,
        declared,
        holds: empirical_sup <= declared + 1e-12,
    };
    status.insert("sparsity", verdict(sparsity.holds));

    let global_margin = if args.beta >= 1.0 {
        let report =
            check_global_margin(&dist, args.beta, &grid, &mc(3)?).map_err(blame("--beta"))?;
        status.insert("global_margin", verdict(report.holds));
        Some(report)
    } else {
        status.insert("global_margin", "skipped");
        None
    };

    let embedding =
        check_embedding(&dist, &est, args.beta, args.n, &mc(4)?).map_err(blame("--beta"))?;
    status.insert("embedding", verdict(embedding.violations == 0));
    let partial_order = check_partial_order(&dist, &est, args.n, &mc(5)?).map_err(blame("--n"))?;
    status.insert("partial_order", verdict(partial_order.violations == 0));

    let report = AssumptionsReport {
        distribution: dist.spec().clone(),
        labels: dist.labels(),
        beta: args.beta,
        samples: args.samples,
        seed: args.seed,
        status,
        top_k_margin,
        local_margin,
        sparsity,
        global_margin,
        embedding,
        partial_order,
    };
    write_json(args.output.as_deref(), &report)?;
    if report.embedding.violations > 0 || report.partial_order.violations > 0 {
        return Err(CliError::Violation {
            summary: format!(
                "assumptions: {} embedding and {} ordering violations",
                report.embedding.violations, report.partial_order.violations
            ),
            witness: json!({
                "embedding": report.embedding.witness,
                "partial_order": report.partial_order.witness,
            }),
        });
    }
    Ok(())
}

#[derive(Serialize)]
struct RatesSummary {
    config: ExperimentConfig,
    points: Vec<RatePoint>,
    fit: Option<RateFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fit_error: Option<String>,
}

pub fn rates(args: RatesArgs) -> CliResult<()> {
    let mut cfg: ExperimentConfig = read_json("--config", &args.config)?;
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if let Some(r) = args.replicates {
        cfg.replicates = r;
    }
    if let Some(s) = args.samples {
        cfg.samples = s;
    }
    let results = run_rate_sweep(&cfg)
        .map_err(|e| CliError::invalid("--config", format!("{}: {e}", args.config.display())))?;
    write_csv(
        args.output.as_deref(),
        &[
            "n",
            "replicate",
            "excess_signed",
            "excess_abs",
            "oracle_risk",
        ],
        results.iter().map(|r| {
            [
                r.n.to_string(),
                r.replicate.to_string(),
                num(r.excess_signed),
                num(r.excess_abs),
                num(r.oracle_risk),
            ]
        }),
    )?;
    if let Some(path) = &args.summary {
        let (fit, fit_error) = match fit_rate_slope(&results) {
            Ok(f) => (Some(f), None),
            Err(e) => (None, Some(e.to_string())),
        };
        let summary = RatesSummary {
            points: summarize(&results),
            config: cfg,
            fit,
            fit_error,
        };
        write_json(Some(path), &summary)?;
    }
    Ok(())
}

pub fn lowerbound(args: LowerboundArgs) -> CliResult<()> {
    let n_grid = args
        .n_grid
        .clone()
        .unwrap_or_else(|| (7..=13).map(|e| 1u64 << e).collect());
    let cfg = LowerBoundConfig {
        n_grid,
        replicates: args.replicates,
        labels: args.labels,
        estimator: args.estimator.spec()?,
        seed: args.seed,
        tv_target: args.tv_target,
        profiles: args.profiles,
    };
    let report = run_inconsistency_demo(&cfg).map_err(blame("--n-grid"))?;
    write_csv(
        args.output.as_deref(),
        &["n", "phi_inv", "excess_plus", "excess_minus", "max_scaled"],
        report.rows.iter().map(|r| {
            [
                r.n.to_string(),
                num(r.phi_inv),
                num(r.excess_plus),
                num(r.excess_minus),
                num(r.max_scaled),
            ]
        }),
    )?;
    if let Some(path) = &args.summary {
        let min_scaled = report
            .rows
            .iter()
            .map(|r| r.max_scaled)
            .fold(f64::INFINITY, f64::min);
        write_json(
            Some(path),
            &json!({
                "labels": cfg.labels,
                "replicates": cfg.replicates,
                "seed": cfg.seed,
                "floor": report.floor,
                "min_max_scaled": min_scaled,
            }),
        )?;
    }
    if report.floor.violations > 0 {
        return Err(CliError::Violation {
            summary: format!(
                "lowerbound: {} decision profiles fall below the floor",
                report.floor.violations
            ),
            witness: json!(report.floor),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_flags_are_required() {
        let args = RuleArgs {
            rule: RuleKind::Mixed,
            k: Some(2),
            beta: None,
        };
        let err = args.spec().unwrap_err();
        assert!(err.to_string().starts_with("--beta"), "{err}");
        let args = RuleArgs {
            rule: RuleKind::TopK,
            k: Some(1),
            beta: None,
        };
        assert_eq!(args.spec().unwrap(), RuleSpec::TopK { k: 1 });
    }

    #[test]
    fn library_errors_name_flags() {
        let e = blame("--x")(Error::Parameter {
            name: "n_grid",
            reason: "empty".into(),
        });
        assert!(e.to_string().starts_with("--n-grid"));
        assert!(blame("--x")(Error::EmptyVector)
            .to_string()
            .starts_with("--x"));
    }

    #[test]
    fn default_grid_spans_three_decades() {
        let g = default_delta_grid();
        assert_eq!(g.len(), 31);
        assert!((g[0] - 1e-3).abs() < 1e-15 && (g[30] - 1.0).abs() < 1e-12);
    }
}
