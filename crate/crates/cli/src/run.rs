//! Executes an [`ExperimentConfig`] and persists the run directory.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use polymer_ldp_core::numeric::log_grid;
use polymer_ldp_core::rare::{
    block_goodness_frequency, cone_conditioned_lower_bound, default_depth, exact_law, exact_tail_pairs,
    family_shortfall_frequency, naive_mc_lower_tail, upper_tail_rate_probe,
};
use polymer_ldp_core::rate::{
    optimized_chernoff_log_bound, predicted_rate_curve, sandwich_check, sandwich_grid, solve_level,
};
use polymer_ldp_core::{
    classify_regime, enumerate_walks, free_energy_estimate, last_passage, log_partition, rate_functional,
    ClassifyOptions, PathFamily, RateProfile, SampledField, TailModel, TailSpec,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Experiment, ExperimentConfig, FunctionalGrid, GammaCase, LambdaSource, Method, SandwichGrid};
use crate::record::{finite, model_label, DoublingFact, FunctionalPoint, MgfPoint, Query, Record};
use crate::report;
use crate::CliError;

pub const RESULTS_FILE: &str = "results.jsonl";
pub const TIMINGS_FILE: &str = "timings.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.toml";
pub const SUMMARY_TEXT_FILE: &str = "summary.txt";
pub const SUMMARY_CSV_FILE: &str = "summary.csv";
pub const PLOT_FILE: &str = "plot.csv";

const ORACLE_REL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub label: String,
    pub runtime_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConstants {
    pub label: String,
    pub spec: TailSpec,
    pub q: f64,
    pub eta0: f64,
    pub atom: f64,
    pub mean: f64,
    pub c0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaUsed {
    pub model: String,
    pub value: f64,
    pub stderr: f64,
    pub source: LambdaSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub code_version: String,
    pub experiment: String,
    pub seed: u64,
    pub models: Vec<ModelConstants>,
    pub lambda_hat: Vec<LambdaUsed>,
    pub records: usize,
    pub checks_passed: usize,
    pub checks_failed: usize,
    /// Every file of the run directory, the manifest excluded.
    pub files: Vec<String>,
}

pub struct RunOutput {
    pub records: Vec<Record>,
    pub timings: Vec<Timing>,
    pub lambdas: Vec<LambdaUsed>,
}

impl RunOutput {
    pub fn failed_checks(&self) -> Vec<&Record> {
        self.records.iter().filter(|r| matches!(r, Record::Check { passed: false, .. })).collect()
    }

    pub fn checks(&self) -> impl Iterator<Item = (&str, bool, &str)> {
        self.records.iter().filter_map(|r| match r {
            Record::Check { name, passed, detail } => Some((name.as_str(), *passed, detail.as_str())),
            _ => None,
        })
    }
}

pub struct RunReport {
    pub dir: PathBuf,
    pub manifest: RunManifest,
    pub output: RunOutput,
}

impl RunReport {
    pub fn all_passed(&self) -> bool {
        self.manifest.checks_failed == 0
    }
}

struct Ctx<'a> {
    config: &'a ExperimentConfig,
    side_dir: Option<&'a Path>,
    records: Vec<Record>,
    timings: Vec<Timing>,
    lambdas: Vec<LambdaUsed>,
}

impl Ctx<'_> {
    fn timed<T>(&mut self, label: impl Into<String>, f: impl FnOnce(&mut Self) -> Result<T, CliError>) -> Result<T, CliError> {
        let start = Instant::now();
        let out = f(self)?;
        self.timings.push(Timing { label: label.into(), runtime_ms: start.elapsed().as_secs_f64() * 1e3 });
        Ok(out)
    }

    fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.records.push(Record::check(name, passed, detail));
    }
}

fn models(config: &ExperimentConfig) -> Result<Vec<TailModel>, CliError> {
    config.models.iter().map(|s| TailModel::new(s.clone()).map_err(CliError::from)).collect()
}

/// Runs the experiment in memory. Side files (path dumps) go under `side_dir`.
pub fn execute(config: &ExperimentConfig, side_dir: Option<&Path>) -> Result<RunOutput, CliError> {
    let mut ctx = Ctx { config, side_dir, records: Vec::new(), timings: Vec::new(), lambdas: Vec::new() };
    let models = models(config)?;
    match &config.experiment {
        Experiment::Simulate { horizons, replicas, oracle } => simulate(&mut ctx, &models, horizons, *replicas, *oracle)?,
        Experiment::Gamma { cases } => {
            for case in cases {
                ctx.timed(format!("gamma d={} T={}", case.dim, case.horizon), |c| gamma(c, case))?;
            }
        }
        Experiment::Rate { functional, sandwich, eta_for, classify } => {
            for model in &models {
                let label = model_label(model.spec());
                if let Some(grid) = functional {
                    ctx.timed(format!("functional {label}"), |c| functional_table(c, model, grid))?;
                }
                if let Some(grid) = sandwich {
                    ctx.timed(format!("sandwich {label}"), |c| sandwich_run(c, model, grid))?;
                }
                for &t in eta_for {
                    level(&mut ctx, model, t)?;
                }
                if *classify {
                    ctx.timed(format!("classify {label}"), |c| verdict(c, model, None, 0.5, &[]))?;
                }
            }
        }
        Experiment::Classify { expect, delta, curve_horizons } => {
            for (i, model) in models.iter().enumerate() {
                let expected = expect.get(i).cloned();
                ctx.timed(format!("classify {}", model_label(model.spec())), |c| {
                    verdict(c, model, expected, *delta, curve_horizons)
                })?;
            }
        }
        Experiment::Mgf { max_multiple, points } => {
            for model in &models {
                ctx.timed(format!("mgf {}", model_label(model.spec())), |c| mgf(c, model, *max_multiple, *points))?;
            }
        }
        Experiment::RareEvent { horizon, eps, methods, n, lambda, check_exact } => {
            for model in &models {
                ctx.timed(format!("rare-event {}", model_label(model.spec())), |c| {
                    rare_event(c, model, *horizon, *eps, methods, *n, lambda, *check_exact)
                })?;
            }
        }
        Experiment::Asymmetry { horizons, eps, lambda } => {
            for model in &models {
                ctx.timed(format!("asymmetry {}", model_label(model.spec())), |c| asymmetry(c, model, horizons, *eps, lambda))?;
            }
        }
        Experiment::UpperTail { horizons, eps, n, lambda } => {
            for model in &models {
                ctx.timed(format!("upper-tail {}", model_label(model.spec())), |c| {
                    upper_tail(c, model, horizons, *eps, *n, lambda)
                })?;
            }
        }
        Experiment::Chernoff { horizons, depths, eps, r, n } => {
            for model in &models {
                ctx.timed(format!("chernoff {}", model_label(model.spec())), |c| {
                    chernoff(c, model, horizons, depths, eps, *r, *n)
                })?;
            }
        }
        Experiment::BlockGoodness { length, widths, eps, n, lambda } => {
            for model in &models {
                ctx.timed(format!("block-goodness {}", model_label(model.spec())), |c| {
                    block_goodness(c, model, *length, widths, *eps, *n, lambda)
                })?;
            }
        }
    }
    Ok(RunOutput { records: ctx.records, timings: ctx.timings, lambdas: ctx.lambdas })
}

fn simulate(ctx: &mut Ctx, models: &[TailModel], horizons: &[usize], replicas: usize, oracle: bool) -> Result<(), CliError> {
    if replicas < 2 {
        return Err(CliError::Config("`replicas` must be at least 2".into()));
    }
    let seed = ctx.config.derived_seed("simulate");
    for model in models {
        let label = model_label(model.spec());
        let mut worst: f64 = 0.0;
        for &t in horizons {
            let rows = ctx.timed(format!("simulate {label} T={t}"), |_| {
                (0..replicas as u64)
                    .into_par_iter()
                    .map(|r| {
                        let env = SampledField::new(model.distribution().clone(), model.dim(), seed, r);
                        let z = log_partition(&env, t)?;
                        let zeta = last_passage(&env, t)?;
                        let err = if oracle {
                            let (bz, bzeta) = enumerate_walks(&env, t)?;
                            rel_err(z, bz).max(rel_err(zeta, bzeta))
                        } else {
                            0.0
                        };
                        Ok((z, zeta, err))
                    })
                    .collect::<polymer_ldp_core::Result<Vec<_>>>()
                    .map_err(CliError::from)
            })?;
            let log_z: Vec<f64> = rows.iter().map(|r| r.0).collect();
            let zeta: Vec<f64> = rows.iter().map(|r| r.1).collect();
            let max_err = rows.iter().map(|r| r.2).fold(0.0, f64::max);
            worst = worst.max(max_err);
            let per_step: Vec<f64> = log_z.iter().map(|z| z / t as f64).collect();
            let (mean, stderr) = mean_stderr(&per_step);
            ctx.records.push(Record::Simulate {
                model: model.spec().clone(),
                horizon: t,
                log_z,
                zeta,
                free_energy: mean,
                stderr,
                oracle_max_rel_err: oracle.then_some(max_err),
            });
        }
        if oracle {
            ctx.check(
                format!("oracle {label}"),
                worst <= ORACLE_REL_TOL,
                format!("max relative deviation {worst:.3e} over {} fields per horizon", replicas),
            );
        }
    }
    Ok(())
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

fn gamma(ctx: &mut Ctx, case: &GammaCase) -> Result<(), CliError> {
    let family = PathFamily::build(case.dim, case.horizon)?;
    let mut checked = 0u64;
    let mut violations = 0usize;
    let mut first = None;
    if case.verify {
        for t_prime in 1..=case.horizon {
            let report = family.verify_counting_bounds(t_prime)?;
            checked += report.checked as u64;
            violations += report.violations.len();
            if first.is_none() {
                first = report.violations.first().map(|v| format!("{v:?}"));
            }
        }
        ctx.check(
            format!("counting bounds d={} t'<={}", case.dim, case.horizon),
            violations == 0,
            first.unwrap_or_else(|| format!("{checked} integer comparisons")),
        );
    }
    let mut facts = Vec::new();
    if let Some(k_max) = case.facts_up_to {
        let d = case.dim as u32;
        let mut ok = true;
        for k in 0..=k_max {
            let expected_checkpoint = case.dim * ((1usize << k) - 1);
            let checkpoint = family.checkpoints().get(k as usize).copied();
            let expected_size = 1u64 << (d * k);
            let fact = match checkpoint {
                Some(c) if c <= family.horizon() => DoublingFact {
                    k,
                    checkpoint: c,
                    expected_checkpoint,
                    frontier_size: family.frontier(c).len(),
                    expected_size,
                },
                _ => DoublingFact { k, checkpoint: usize::MAX, expected_checkpoint, frontier_size: 0, expected_size },
            };
            ok &= fact.checkpoint == fact.expected_checkpoint && fact.frontier_size as u64 == fact.expected_size;
            facts.push(fact);
        }
        ctx.check(
            format!("doubling facts d={} k<={k_max}", case.dim),
            ok,
            format!("checkpoints {:?}", family.checkpoints()),
        );
    }
    if let Some(path) = &case.dump_paths {
        let target = match ctx.side_dir {
            Some(dir) => dir.join(path),
            None => PathBuf::from(path),
        };
        let file = fs::File::create(&target).map_err(|e| CliError::Io(target.display().to_string(), e))?;
        family.dump_paths(std::io::BufWriter::new(file))?;
    }
    ctx.records.push(Record::Gamma {
        dim: case.dim,
        horizon: case.horizon,
        checked,
        violations,
        checkpoints: family.checkpoints().to_vec(),
        facts,
    });
    Ok(())
}

/// `F(z)` for `G(x) = s x^α`: `z^{1/d} s^{-1/d} ∫ x^{-α/d}` between `(1/s)^{1/α}` and `(z/s)^{1/α}`.
pub fn power_closed_form(model: &TailModel, z: f64) -> Option<f64> {
    let TailSpec::Power { alpha, .. } = model.spec() else { return None };
    let d = model.dim() as f64;
    let s = model.g_eval(1.0).ok()?;
    let lo = (1.0 / s).powf(1.0 / alpha);
    let hi = (z / s).powf(1.0 / alpha);
    let e = 1.0 - alpha / d;
    let integral = if e.abs() < 1e-15 { (hi / lo).ln() } else { (hi.powf(e) - lo.powf(e)) / e };
    Some(z.powf(1.0 / d) * s.powf(-1.0 / d) * integral)
}

fn functional_table(ctx: &mut Ctx, model: &TailModel, grid: &FunctionalGrid) -> Result<(), CliError> {
    let label = model_label(model.spec());
    let zs = log_grid(grid.z_min, grid.z_max, grid.per_decade);
    let points = zs
        .par_iter()
        .map(|&z| Ok(FunctionalPoint { z, value: rate_functional(model, z)?, closed_form: power_closed_form(model, z) }))
        .collect::<polymer_ldp_core::Result<Vec<_>>>()?;
    let max_rel_err = points
        .iter()
        .filter_map(|p| p.closed_form.map(|c| (p.value - c).abs() / c.abs()))
        .reduce(f64::max);
    if let Some(err) = max_rel_err {
        ctx.check(
            format!("closed-form functional {label}"),
            err <= grid.rel_tol,
            format!("max relative error {err:.3e} on z in [{}, {}]", grid.z_min, grid.z_max),
        );
    }
    ctx.records.push(Record::Functional { model: model.spec().clone(), points, max_rel_err });
    Ok(())
}

fn sandwich_run(ctx: &mut Ctx, model: &TailModel, grid: &SandwichGrid) -> Result<(), CliError> {
    let label = model_label(model.spec());
    let profile = RateProfile::new(model, grid.eta_max)?;
    let mut pts = sandwich_grid(model.dim(), grid.eta_max);
    pts.extend(grid.points.iter().copied());
    let checks = pts
        .par_iter()
        .map(|&(eta, m)| sandwich_check(model, eta, m, profile.c0))
        .collect::<polymer_ldp_core::Result<Vec<_>>>()?;
    let min_lower = checks.iter().map(|c| c.lower_slack).fold(f64::INFINITY, f64::min);
    let min_upper = checks.iter().map(|c| c.upper_slack).fold(f64::INFINITY, f64::min);
    let failures: Vec<_> = checks.iter().filter(|c| !(c.lower_ok && c.upper_ok)).copied().collect();
    ctx.check(
        format!("sandwich {label}"),
        failures.is_empty(),
        format!("{} points, C0 = {:.6}, min lower slack {min_lower:.3e}, min upper slack {min_upper:.3e}", checks.len(), profile.c0),
    );
    ctx.records.push(Record::Sandwich {
        model: model.spec().clone(),
        c0: profile.c0,
        c0_analytic: profile.c0_analytic,
        sup_gap: profile.sup_gap,
        points: checks.len(),
        min_lower_slack: min_lower,
        min_upper_slack: min_upper,
        failures,
    });
    Ok(())
}

fn level(ctx: &mut Ctx, model: &TailModel, horizon: f64) -> Result<(), CliError> {
    let eta = solve_level(model, horizon, 1.0)?;
    let residual = (rate_functional(model, eta)? - horizon) / horizon;
    ctx.check(
        format!("level {} T={horizon}", model_label(model.spec())),
        residual.abs() <= 1e-8,
        format!("eta = {eta}, relative residual {residual:.3e}"),
    );
    ctx.records.push(Record::Level { model: model.spec().clone(), horizon, c: 1.0, eta, residual });
    Ok(())
}

fn verdict(ctx: &mut Ctx, model: &TailModel, expected: Option<String>, delta: f64, horizons: &[f64]) -> Result<(), CliError> {
    let opts = ClassifyOptions { delta, ..ClassifyOptions::default() };
    let v = classify_regime(model, &opts)?;
    let curve = predicted_rate_curve(&v, model, horizons)?;
    if let Some(label) = &expected {
        ctx.check(
            format!("classify {}", model_label(model.spec())),
            &v.label == label,
            format!("{:?} {} (expected {label})", v.regime, v.label),
        );
    }
    ctx.records.push(Record::Verdict { model: model.spec().clone(), verdict: Box::new(v), expected, curve });
    Ok(())
}

fn mgf(ctx: &mut Ctx, model: &TailModel, max_multiple: f64, points: usize) -> Result<(), CliError> {
    let eta0 = model.eta0();
    let grid: Vec<f64> = (0..=points)
        .map(|k| {
            let eta = eta0 * (1.0 + (max_multiple - 1.0) * k as f64 / points.max(1) as f64);
            if k == 0 {
                eta0 * (1.0 + 1e-12)
            } else {
                eta
            }
        })
        .collect();
    let checks = grid.iter().map(|&e| model.mgf_upper_bound_check(e)).collect::<polymer_ldp_core::Result<Vec<_>>>()?;
    let all_hold = checks.iter().all(|c| c.holds);
    let worst = checks.iter().map(|c| c.log_mgf - c.log_bound).fold(f64::NEG_INFINITY, f64::max);
    ctx.check(
        format!("moment bound {}", model_label(model.spec())),
        all_hold,
        format!("eta0 = {eta0}, max log(mgf/bound) = {worst:.4}"),
    );
    ctx.records.push(Record::Mgf {
        model: model.spec().clone(),
        eta0,
        points: checks.iter().map(|c| MgfPoint { eta_prime: c.eta_prime, log_mgf: c.log_mgf, log_bound: c.log_bound }).collect(),
        all_hold,
    });
    Ok(())
}

fn resolve_lambda(ctx: &mut Ctx, model: &TailModel, source: &LambdaSource) -> Result<(f64, f64), CliError> {
    let (value, stderr) = match source {
        LambdaSource::Fixed { value } => (*value, 0.0),
        LambdaSource::Estimate { horizon, replicas } => {
            let seed = ctx.config.derived_seed("lambda");
            let est = free_energy_estimate(model.distribution(), model.dim(), *horizon, *replicas, seed)?;
            (est.lambda_hat, est.stderr)
        }
        LambdaSource::ExactMean { horizon } => {
            let law = exact_law(model.distribution(), model.dim(), *horizon)?;
            (law.mean() / *horizon as f64, 0.0)
        }
    };
    ctx.lambdas.push(LambdaUsed { model: model_label(model.spec()), value, stderr, source: source.clone() });
    Ok((value, stderr))
}

#[allow(clippy::too_many_arguments)]
fn rare_event(
    ctx: &mut Ctx,
    model: &TailModel,
    horizon: usize,
    eps: f64,
    methods: &[Method],
    n: usize,
    lambda: &LambdaSource,
    check_exact: bool,
) -> Result<(), CliError> {
    let label = model_label(model.spec());
    let (lambda_hat, lambda_stderr) = resolve_lambda(ctx, model, lambda)?;
    let slope = lambda_hat - eps;
    let exact = if check_exact || methods.contains(&Method::Exact) {
        Some(exact_law(model.distribution(), model.dim(), horizon)?.lower(slope * horizon as f64))
    } else {
        None
    };
    for method in methods {
        let seed = ctx.config.derived_seed(method.name());
        let mut query = Query { horizon, eps, slope, method: method.name().into(), n, seed, m: None, eta: None };
        let start = Instant::now();
        let record = match method {
            Method::Exact => {
                query.n = 0;
                Record::RareEvent {
                    model: model.spec().clone(),
                    query,
                    lambda_hat,
                    lambda_stderr,
                    p_hat: exact,
                    log_bound: None,
                    ci: None,
                    stderr: Some(0.0),
                    exact,
                }
            }
            Method::Mc => {
                let est = naive_mc_lower_tail(model.distribution(), model.dim(), horizon, slope, n, seed)?;
                if let (true, Some(p)) = (check_exact, exact) {
                    let sigma = (p * (1.0 - p) / n as f64).sqrt();
                    ctx.check(
                        format!("mc vs exact {label} T={horizon}"),
                        (est.p_hat - p).abs() <= 3.0 * sigma,
                        format!("p_hat = {}, exact = {p}, sigma = {sigma:.3e}", est.p_hat),
                    );
                }
                Record::RareEvent {
                    model: model.spec().clone(),
                    query,
                    lambda_hat,
                    lambda_stderr,
                    p_hat: Some(est.p_hat),
                    log_bound: None,
                    ci: Some(est.ci),
                    stderr: Some(est.stderr),
                    exact,
                }
            }
            Method::Cone { m, eta } => {
                let depth = m.unwrap_or_else(|| default_depth(*eta, model.dim(), horizon));
                query.m = Some(depth);
                query.eta = Some(*eta);
                let b = cone_conditioned_lower_bound(model, horizon, slope, depth, *eta, n, seed)?;
                if let (true, Some(p)) = (check_exact, exact) {
                    let bound = b.log_bound.exp();
                    ctx.check(
                        format!("cone bound vs exact {label} T={horizon} M={depth}"),
                        bound <= p + 3.0 * b.stderr(),
                        format!("bound = {bound}, exact = {p}, sigma = {:.3e}", b.stderr()),
                    );
                }
                Record::RareEvent {
                    model: model.spec().clone(),
                    query,
                    lambda_hat,
                    lambda_stderr,
                    p_hat: None,
                    log_bound: finite(b.log_bound),
                    ci: match (finite(b.log_bound_ci.0), finite(b.log_bound_ci.1)) {
                        (Some(lo), Some(hi)) => Some((lo, hi)),
                        _ => None,
                    },
                    stderr: Some(b.stderr()),
                    exact,
                }
            }
        };
        ctx.timings.push(Timing { label: format!("{label} {}", method.name()), runtime_ms: start.elapsed().as_secs_f64() * 1e3 });
        ctx.records.push(record);
    }
    Ok(())
}

fn asymmetry(ctx: &mut Ctx, model: &TailModel, horizons: &[usize], eps: f64, lambda: &LambdaSource) -> Result<(), CliError> {
    let (lambda_hat, _) = resolve_lambda(ctx, model, lambda)?;
    let pairs = exact_tail_pairs(model.distribution(), model.dim(), horizons, lambda_hat, eps)?;
    let lower: Vec<f64> = pairs.iter().map(|p| p.lower_rate_per_step()).collect();
    let upper: Vec<f64> = pairs.iter().map(|p| p.upper_rate_per_step()).collect();
    let increasing = lower.iter().all(|r| r.is_finite()) && lower.windows(2).all(|w| w[1] > w[0]);
    let (lo, hi) = upper.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
    let label = model_label(model.spec());
    ctx.check(format!("lower rate per step increasing {label}"), increasing, format!("{lower:?}"));
    ctx.check(
        format!("upper rate per step within factor 2 {label}"),
        hi.is_finite() && lo > 0.0 && hi < 2.0 * lo,
        format!("{upper:?}"),
    );
    for p in pairs {
        ctx.records.push(Record::TailPair {
            model: model.spec().clone(),
            horizon: p.horizon,
            lambda_hat,
            eps,
            lower: p.lower,
            upper: p.upper,
        });
    }
    Ok(())
}

fn upper_tail(ctx: &mut Ctx, model: &TailModel, horizons: &[usize], eps: f64, n: usize, lambda: &LambdaSource) -> Result<(), CliError> {
    let (lambda_hat, _) = resolve_lambda(ctx, model, lambda)?;
    let seed = ctx.config.derived_seed("upper-tail");
    let fit = upper_tail_rate_probe(model.distribution(), model.dim(), horizons, lambda_hat, eps, n, seed)?;
    let linear = &fit.curves[0];
    ctx.check(
        format!("upper tail linear {}", model_label(model.spec())),
        linear.consistent && linear.ratios.len() == horizons.len(),
        format!("ratio spread {:.3} over {} usable horizons", linear.spread, linear.ratios.len()),
    );
    for &t in horizons {
        let p = fit.points.iter().find(|p| p.horizon == t as f64);
        let (p_hat, ci) = match p {
            Some(p) => ((-p.neg_log_p).exp(), ((-p.ci.1).exp(), (-p.ci.0).exp())),
            None => (0.0, (0.0, 0.0)),
        };
        ctx.records.push(Record::UpperTail { model: model.spec().clone(), horizon: t, lambda_hat, eps, p_hat, ci });
    }
    Ok(())
}

fn chernoff(
    ctx: &mut Ctx,
    model: &TailModel,
    horizons: &[usize],
    depths: &[usize],
    eps: &[f64],
    r: f64,
    n: usize,
) -> Result<(), CliError> {
    let depth_max = depths.iter().copied().max().unwrap_or(1);
    let family = PathFamily::build(model.dim(), depth_max)?;
    let seed = ctx.config.derived_seed("chernoff");
    let mut all = true;
    let mut cases = 0;
    for &t in horizons {
        for &m in depths {
            for &e in eps {
                let (tilt, bound) = optimized_chernoff_log_bound(model, t, m, e, r)?;
                let freq = family_shortfall_frequency(model.distribution(), &family, t, m, e, r, n, seed)?;
                all &= bound.probability() >= freq.p_hat - 3.0 * freq.stderr;
                cases += 1;
                ctx.records.push(Record::Chernoff {
                    model: model.spec().clone(),
                    horizon: t,
                    m,
                    eps: e,
                    r,
                    tilt,
                    log_bound: finite(bound.log_bound),
                    bound: bound.probability(),
                    frequency: freq.p_hat,
                    stderr: freq.stderr,
                });
            }
        }
    }
    ctx.check(
        format!("chernoff dominates frequency {}", model_label(model.spec())),
        all,
        format!("{cases} (T, M, eps) cases, n = {n}"),
    );
    Ok(())
}

fn block_goodness(
    ctx: &mut Ctx,
    model: &TailModel,
    length: usize,
    widths: &[i64],
    eps: f64,
    n: usize,
    lambda: &LambdaSource,
) -> Result<(), CliError> {
    let (lambda_hat, _) = resolve_lambda(ctx, model, lambda)?;
    let seed = ctx.config.derived_seed("block-goodness");
    let mut prev = 0.0;
    let mut monotone = true;
    for &w in widths {
        let f = block_goodness_frequency(model.distribution(), model.dim(), length, w, eps, lambda_hat, n, seed)?;
        monotone &= f.p_hat >= prev;
        prev = f.p_hat;
        ctx.records.push(Record::BlockGoodness {
            model: model.spec().clone(),
            length,
            width: w,
            eps,
            lambda_hat,
            frequency: f.p_hat,
            ci: f.ci,
        });
    }
    ctx.check(format!("goodness monotone in width {}", model_label(model.spec())), monotone, format!("widths {widths:?}"));
    Ok(())
}

fn model_constants(spec: &TailSpec) -> Result<ModelConstants, CliError> {
    let model = TailModel::new(spec.clone())?;
    let d = model.derived();
    let c0 = model.tail_fn().map(|_| RateProfile::new(&model, 1e6).map(|p| p.c0)).transpose()?;
    Ok(ModelConstants { label: model_label(spec), spec: spec.clone(), q: d.q, eta0: d.eta0, atom: d.atom, mean: d.mean, c0 })
}

fn write_file(dir: &Path, name: &str, content: &[u8]) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, content).map_err(|e| CliError::Io(path.display().to_string(), e))
}

fn jsonl<T: Serialize>(items: &[T]) -> Vec<u8> {
    let mut out = Vec::new();
    for item in items {
        serde_json::to_writer(&mut out, item).expect("records serialize");
        out.push(b'\n');
    }
    out
}

/// Runs `config` and writes `out_root/<config hash>/`.
pub fn run(config: &ExperimentConfig, out_root: &Path) -> Result<RunReport, CliError> {
    let hash = config.hash();
    let dir = out_root.join(&hash);
    fs::create_dir_all(&dir).map_err(|e| CliError::Io(dir.display().to_string(), e))?;
    let output = execute(config, Some(&dir))?;

    let mut files = vec![CONFIG_FILE.to_string(), RESULTS_FILE.to_string()];
    write_file(&dir, CONFIG_FILE, config.to_toml().as_bytes())?;
    write_file(&dir, RESULTS_FILE, &jsonl(&output.records))?;
    let rows = report::summary_rows(&output.records);
    write_file(&dir, SUMMARY_TEXT_FILE, report::render_text(&rows).as_bytes())?;
    write_file(&dir, SUMMARY_CSV_FILE, report::render_csv(&rows)?.as_bytes())?;
    write_file(&dir, PLOT_FILE, report::render_plot(&report::plot_rows(&output.records))?.as_bytes())?;
    write_file(&dir, TIMINGS_FILE, &jsonl(&output.timings))?;
    files.extend([SUMMARY_TEXT_FILE, SUMMARY_CSV_FILE, PLOT_FILE, TIMINGS_FILE].map(String::from));
    if let Experiment::Gamma { cases } = &config.experiment {
        files.extend(cases.iter().filter_map(|c| c.dump_paths.clone()).filter(|p| !Path::new(p).is_absolute()));
    }

    let (passed, failed) = output.checks().fold((0, 0), |(p, f), (_, ok, _)| if ok { (p + 1, f) } else { (p, f + 1) });
    let manifest = RunManifest {
        config_hash: hash,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        experiment: experiment_name(&config.experiment).to_string(),
        seed: config.seed,
        models: config.models.iter().map(model_constants).collect::<Result<_, _>>()?,
        lambda_hat: output.lambdas.clone(),
        records: output.records.len(),
        checks_passed: passed,
        checks_failed: failed,
        files,
    };
    let mut text = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    text.write_all(b"\n").expect("in-memory write");
    write_file(&dir, MANIFEST_FILE, &text)?;
    Ok(RunReport { dir, manifest, output })
}

pub fn experiment_name(e: &Experiment) -> &'static str {
    match e {
        Experiment::Simulate { .. } => "simulate",
        Experiment::Gamma { .. } => "gamma",
        Experiment::Rate { .. } => "rate",
        Experiment::Classify { .. } => "classify",
        Experiment::Mgf { .. } => "mgf",
        Experiment::RareEvent { .. } => "rare-event",
        Experiment::Asymmetry { .. } => "asymmetry",
        Experiment::UpperTail { .. } => "upper-tail",
        Experiment::Chernoff { .. } => "chernoff",
        Experiment::BlockGoodness { .. } => "block-goodness",
    }
}
