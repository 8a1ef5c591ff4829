//! Acceptance suite: one test per criterion, each driven by a checked-in config.
//!
//! Every test prints a single `PASS`/`FAIL` line on stderr before asserting.
#![allow(clippy::explicit_write)]

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use polymer_ldp::record::Record;
use polymer_ldp::run::{RunReport, TIMINGS_FILE};
use polymer_ldp::{run, ExperimentConfig};
use polymer_ldp_core::numeric::log_grid;
use polymer_ldp_core::rate::sandwich_check;
use polymer_ldp_core::{
    rate_functional, Distribution, Environment, PathFamily, RateProfile, SampledField, TailModel, TailSpec,
};

fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn all_configs() -> Vec<PathBuf> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(config_path(""))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .collect();
    paths.sort();
    paths
}

fn run_config(name: &str, out: &Path) -> (ExperimentConfig, RunReport, Duration) {
    let config = ExperimentConfig::load(&config_path(name)).unwrap();
    let start = Instant::now();
    let report = run(&config, out).unwrap();
    (config, report, start.elapsed())
}

fn failed_checks(report: &RunReport) -> Vec<String> {
    report.output.checks().filter(|c| !c.1).map(|(n, _, d)| format!("{n}: {d}")).collect()
}

/// Prints the criterion line, then fails the test if the criterion failed.
fn verdict(id: u32, title: &str, elapsed: Duration, failures: &[String]) {
    let status = if failures.is_empty() { "PASS" } else { "FAIL" };
    let detail = if failures.is_empty() { String::new() } else { format!(" -- {}", failures.join("; ")) };
    writeln!(std::io::stderr(), "AC{id:02} {status} {title} [{:.2} s]{detail}", elapsed.as_secs_f64()).unwrap();
    assert!(failures.is_empty(), "AC{id} failed: {failures:?}");
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

fn lse(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `(ln Z(T), ζ(T))` by listing all `2^T` walks of a one-dimensional field.
fn walk_oracle(env: &impl Environment, horizon: usize) -> (f64, f64) {
    let mut energies = Vec::with_capacity(1 << horizon);
    for steps in 0u32..1 << horizon {
        let mut x = 0i32;
        let mut h = 0.0;
        for t in 0..horizon {
            h += env.value(t, &[x]).unwrap();
            x += if steps >> t & 1 == 1 { 1 } else { -1 };
        }
        energies.push(h);
    }
    let zeta = energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lse(&energies) - horizon as f64 * 2f64.ln(), zeta)
}

/// Law of `ln Z(T)` for a symmetric `±1` field in `d = 1`, as `(ln Z, probability)` atoms.
fn two_point_law(horizon: usize) -> Vec<(f64, f64)> {
    // Sites of layer t are x = -t, -t+2, ..., t, indexed from offset t(t+1)/2.
    let sites = horizon * (horizon + 1) / 2;
    let walks: Vec<Vec<usize>> = (0u32..1 << (horizon - 1))
        .map(|steps| {
            let mut k = 0usize;
            let mut idx = Vec::with_capacity(horizon);
            for t in 0..horizon {
                idx.push(t * (t + 1) / 2 + k);
                if steps >> t & 1 == 1 {
                    k += 1;
                }
            }
            idx
        })
        .collect();
    let weight = 0.5f64.powi(sites as i32);
    // The last step never collects field, so every energy appears twice among the 2^T walks.
    let norm = (horizon as f64 - 1.0) * 2f64.ln();
    let mut energies = vec![0.0; walks.len()];
    (0u64..1 << sites)
        .map(|bits| {
            for (e, w) in energies.iter_mut().zip(&walks) {
                *e = w.iter().map(|&s| if bits >> s & 1 == 1 { -1.0 } else { 1.0 }).sum();
            }
            (lse(&energies) - norm, weight)
        })
        .collect()
}

fn tie(level: f64) -> f64 {
    1e-12 * level.abs().max(1.0)
}

fn lower(law: &[(f64, f64)], level: f64) -> f64 {
    law.iter().filter(|a| a.0 <= level + tie(level)).map(|a| a.1).sum()
}

fn upper(law: &[(f64, f64)], level: f64) -> f64 {
    law.iter().filter(|a| a.0 >= level - tie(level)).map(|a| a.1).sum()
}

fn mean(law: &[(f64, f64)]) -> f64 {
    law.iter().map(|a| a.0 * a.1).sum()
}

#[test]
fn ac01_transfer_matrix_matches_walk_enumeration() {
    let out = tempfile::tempdir().unwrap();
    let (config, report, elapsed) = run_config("ac01_transfer_oracle.toml", out.path());
    let start = Instant::now();
    let mut failures = failed_checks(&report);
    let seed = config.derived_seed("simulate");
    let mut kinds = std::collections::BTreeMap::new();
    for record in &report.output.records {
        let Record::Simulate { model, horizon, log_z, zeta, .. } = record else { continue };
        *kinds.entry(model.kind_name()).or_insert(0usize) += log_z.len();
        let built = TailModel::new(model.clone()).unwrap();
        for (r, (z, m)) in log_z.iter().zip(zeta).enumerate() {
            let env = SampledField::new(built.distribution().clone(), 1, seed, r as u64);
            let (oz, om) = walk_oracle(&env, *horizon);
            if rel(*z, oz) > 1e-10 || rel(*m, om) > 1e-10 {
                failures.push(format!("{} T={horizon} replica {r}: ({z}, {m}) vs ({oz}, {om})", model.kind_name()));
            }
        }
    }
    if kinds.len() != 5 || kinds.values().any(|&n| n < 100 * 8) {
        failures.push(format!("coverage {kinds:?}"));
    }
    let total = elapsed + start.elapsed();
    if total > Duration::from_secs(30) {
        failures.push(format!("runtime {total:?}"));
    }
    verdict(1, "transfer matrix vs walk enumeration, d=1, T<=8", total, &failures);
}

/// Visit counts `n_{t'}(t, x)` from the listed paths, checked against the three bounds.
fn counting_oracle(family: &PathFamily, t_prime: usize) -> Vec<String> {
    let d = family.dim() as u32;
    let mut bad = Vec::new();
    let ends = family.frontier(t_prime).len();
    let paths: Vec<_> = (0..ends).map(|k| family.path_to(t_prime, k)).collect();
    let tp = t_prime as u128;
    for t in 0..=t_prime {
        let size = family.frontier(t).len() as u128;
        if size * (2 * d as u128).pow(d) < (t as u128 + d as u128).pow(d) {
            bad.push(format!("|S_{t}| too small"));
        }
        let mut counts = std::collections::HashMap::new();
        for p in &paths {
            *counts.entry(p[t].clone()).or_insert(0u128) += 1;
        }
        for n in counts.values() {
            let lhs = n * (1 + t as u128).pow(d);
            if lhs > (4 + 4 * d as u128).pow(d) * tp.pow(d) || lhs > (4 * d as u128).pow(2 * d) * ends as u128 {
                bad.push(format!("t'={t_prime} t={t} n={n}"));
            }
        }
    }
    bad
}

#[test]
fn ac02_counting_bounds_hold_exactly() {
    let out = tempfile::tempdir().unwrap();
    let (_, report, elapsed) = run_config("ac02_counting_bounds.toml", out.path());
    let start = Instant::now();
    let mut failures = failed_checks(&report);
    let cases: Vec<(usize, usize)> = report
        .output
        .records
        .iter()
        .filter_map(|r| match r {
            Record::Gamma { dim, horizon, violations, .. } => {
                if *violations != 0 {
                    failures.push(format!("d={dim}: {violations} violations"));
                }
                Some((*dim, *horizon))
            }
            _ => None,
        })
        .collect();
    if cases != [(1, 128), (2, 32)] {
        failures.push(format!("cases {cases:?}"));
    }
    for (d, m) in cases {
        let family = PathFamily::build(d, m).unwrap();
        for t_prime in 1..=m {
            failures.extend(counting_oracle(&family, t_prime));
        }
    }
    let total = elapsed + start.elapsed();
    if total > Duration::from_secs(10) {
        failures.push(format!("runtime {total:?}"));
    }
    verdict(2, "visit-count bounds, d=1 t'<=128 and d=2 t'<=32", total, &failures);
}

#[test]
fn ac03_doubling_construction_facts() {
    let out = tempfile::tempdir().unwrap();
    let (_, report, elapsed) = run_config("ac03_doubling_facts.toml", out.path());
    let mut failures = failed_checks(&report);
    for (d, k_max) in [(1usize, 7u32), (2, 4)] {
        let sigma = |k: u32| d * ((1usize << k) - 1);
        let family = PathFamily::build(d, sigma(k_max)).unwrap();
        for k in 0..=k_max {
            let got = family.checkpoints().get(k as usize).copied();
            if got != Some(sigma(k)) {
                failures.push(format!("d={d} k={k}: checkpoint {got:?}"));
            } else if family.frontier(sigma(k)).len() != 1 << (d as u32 * k) {
                failures.push(format!("d={d} k={k}: |S| = {}", family.frontier(sigma(k)).len()));
            }
        }
    }
    verdict(3, "checkpoints d(2^k-1) and cube sizes 2^{dk}", elapsed, &failures);
}

fn power(alpha: f64, dim: usize) -> TailModel {
    TailModel::new(TailSpec::Power { alpha, x_bar: 1.0, dim }).unwrap()
}

#[test]
fn ac04_sum_integral_sandwich() {
    let out = tempfile::tempdir().unwrap();
    let (_, report, elapsed) = run_config("ac04_sandwich.toml", out.path());
    let start = Instant::now();
    let mut failures = failed_checks(&report);
    let mut seen = 0;
    for r in &report.output.records {
        if let Record::Sandwich { min_lower_slack, min_upper_slack, model, .. } = r {
            seen += 1;
            if *min_lower_slack < -1e-9 || *min_upper_slack < -1e-9 {
                failures.push(format!("{model:?}: slacks {min_lower_slack}, {min_upper_slack}"));
            }
        }
    }
    if seen != 6 {
        failures.push(format!("{seen} sandwich records"));
    }
    // Closed forms: G = x gives sum η H_M, integral η ln M, no gap;
    // G = x² gives sum Σ √(η/(1+t)), integral √η (√M - 1), gap √(M/η) - 1/√η.
    let lin = power(1.0, 1);
    let quad = power(2.0, 1);
    let c_lin = RateProfile::new(&lin, 1e6).unwrap().c0;
    let c_quad = RateProfile::new(&quad, 1e6).unwrap().c0;
    for eta in [1.0, 10.0, 1e3, 1e6] {
        for m in [1usize, 2, 7, 1000] {
            if m as f64 > eta {
                continue;
            }
            let mf = m as f64;
            let c = sandwich_check(&lin, eta, m, c_lin).unwrap();
            let harmonic: f64 = (1..=m).map(|k| 1.0 / k as f64).sum();
            if rel(c.sum, eta * harmonic) > 1e-12 || rel(c.integral, eta * mf.ln()) > 1e-9 || c.gap.abs() > 1e-12 {
                failures.push(format!("G=x at ({eta}, {m}): {c:?}"));
            }
            let c = sandwich_check(&quad, eta, m, c_quad).unwrap();
            let sum: f64 = (1..=m).map(|k| (eta / k as f64).sqrt()).sum();
            let gap = (mf / eta).sqrt() - 1.0 / eta.sqrt();
            if rel(c.sum, sum) > 1e-12 || rel(c.integral, eta.sqrt() * (mf.sqrt() - 1.0)) > 1e-9 || rel(c.gap, gap) > 1e-12
            {
                failures.push(format!("G=x^2 at ({eta}, {m}): {c:?}"));
            }
            if !(c.lower_ok && c.upper_ok) {
                failures.push(format!("G=x^2 sandwich at ({eta}, {m})"));
            }
        }
    }
    let total = elapsed + start.elapsed();
    if total > Duration::from_secs(60) {
        failures.push(format!("runtime {total:?}"));
    }
    verdict(4, "sum/integral sandwich for x^{1/2}, x, x^2 in d=1,2 up to 1e6", total, &failures);
}

#[test]
fn ac05_closed_form_functionals() {
    let out = tempfile::tempdir().unwrap();
    let (_, report, elapsed) = run_config("ac05_closed_form.toml", out.path());
    let start = Instant::now();
    let mut failures = failed_checks(&report);
    let lin = power(1.0, 1);
    let quad = power(2.0, 1);
    for z in log_grid(2.0, 1e6, 25) {
        let a = rate_functional(&lin, z).unwrap();
        if (a - z * z.ln()).abs() > 1e-8 * z * z.ln() {
            failures.push(format!("G=x at z={z}: {a}"));
        }
        let b = rate_functional(&quad, z).unwrap();
        let want = z - z.sqrt();
        if (b - want).abs() > 1e-8 * want {
            failures.push(format!("G=x^2 at z={z}: {b}"));
        }
    }
    verdict(5, "F(z) = z ln z and z - sqrt z on [2, 1e6]", elapsed + start.elapsed(), &failures);
}

#[test]
fn ac06_moment_bound_above_eta0() {
    let out = tempfile::tempdir().unwrap();
    let (config, report, elapsed) = run_config("ac06_moment_bound.toml", out.path());
    let mut failures = failed_checks(&report);
    let mut kinds = Vec::new();
    for r in &report.output.records {
        let Record::Mgf { model, eta0, points, all_hold } = r else { continue };
        kinds.push(model.kind_name());
        let top = points.last().map(|p| p.eta_prime).unwrap_or(0.0);
        if !*all_hold || points.first().is_none_or(|p| p.eta_prime <= *eta0) || rel(top, 10.0 * eta0) > 1e-12 {
            failures.push(format!("{} grid ({eta0}, {top})", model.kind_name()));
        }
        if let Distribution::TwoPoint { a, b, p } = TailModel::new(model.clone()).unwrap().distribution().clone() {
            for pt in points {
                let e = pt.eta_prime;
                let mgf = (p * (e * a).exp() + (1.0 - p) * (-e * b).exp()).ln();
                if rel(pt.log_mgf, mgf) > 1e-12 || mgf > 2.0 * e * a {
                    failures.push(format!("two-point at {e}: {} vs {mgf}", pt.log_mgf));
                }
            }
        }
    }
    if kinds.len() != config.models.len() || kinds.len() != 5 {
        failures.push(format!("kinds {kinds:?}"));
    }
    verdict(6, "exponential moment bound on [eta0, 10 eta0], all model kinds", elapsed, &failures);
}

#[test]
fn ac07_regime_classifier() {
    let out = tempfile::tempdir().unwrap();
    let (_, report, elapsed) = run_config("ac07_classifier.toml", out.path());
    let mut failures = failed_checks(&report);
    let labels: Vec<String> = report
        .output
        .records
        .iter()
        .filter_map(|r| match r {
            Record::Verdict { verdict, .. } => Some(verdict.label.clone()),
            _ => None,
        })
        .collect();
    let want = ["T^2/ln T", "T^2", "T^1.25", "T^1.5", "T^2", "o(T·G(T))"];
    if labels != want {
        failures.push(format!("labels {labels:?}"));
    }
    verdict(7, "regime labels for the six reference models", elapsed, &failures);
}

type Estimate = (String, Option<f64>, Option<f64>, f64, f64);

/// `(method, p_hat, log_bound, stderr, λ̂)` per rare-event record.
fn rare_records(report: &RunReport) -> Vec<Estimate> {
    report
        .output
        .records
        .iter()
        .filter_map(|r| match r {
            Record::RareEvent { query, p_hat, log_bound, stderr, lambda_hat, .. } => {
                Some((query.method.clone(), *p_hat, *log_bound, stderr.unwrap_or(0.0), *lambda_hat))
            }
            _ => None,
        })
        .collect()
}

#[test]
fn ac08_rare_event_estimators_agree_with_enumeration() {
    let out = tempfile::tempdir().unwrap();
    let (_, report, elapsed) = run_config("ac08_rare_event_oracle.toml", out.path());
    let start = Instant::now();
    let mut failures = failed_checks(&report);
    let lambda = mean(&two_point_law(6)) / 6.0;
    let law = two_point_law(5);
    let rows = rare_records(&report);
    let lambda_used = rows.first().map(|r| r.4).unwrap_or(f64::NAN);
    if rel(lambda_used, lambda) > 1e-12 {
        failures.push(format!("lambda {lambda_used} vs {lambda}"));
    }
    let exact = lower(&law, (lambda - 0.5) * 5.0);
    let n = 100_000.0;
    let sigma = (exact * (1.0 - exact) / n).sqrt();
    for (method, p_hat, log_bound, stderr, _) in &rows {
        match method.as_str() {
            "exact" if rel(p_hat.unwrap_or(-1.0), exact) > 1e-12 => failures.push(format!("exact {p_hat:?} vs {exact}")),
            "mc" if (p_hat.unwrap_or(-1.0) - exact).abs() > 3.0 * sigma => failures.push(format!("mc {p_hat:?} vs {exact}")),
            "cone" if log_bound.is_none_or(|l| l.exp() > exact + 3.0 * stderr) => {
                failures.push(format!("cone {log_bound:?} vs {exact}"))
            }
            _ => {}
        }
    }
    if rows.len() != 3 {
        failures.push(format!("{} estimates", rows.len()));
    }
    let total = elapsed + start.elapsed();
    if total > Duration::from_secs(60) {
        failures.push(format!("runtime {total:?}"));
    }
    verdict(8, "naive MC and cone bound against exact enumeration, T=5", total, &failures);
}

#[test]
fn ac09_lower_upper_asymmetry() {
    let out = tempfile::tempdir().unwrap();
    let (_, report, elapsed) = run_config("ac09_asymmetry.toml", out.path());
    let start = Instant::now();
    let mut failures = failed_checks(&report);
    let lambda = mean(&two_point_law(6)) / 6.0;
    let eps = 0.5;
    let mut lower_rates = Vec::new();
    let mut upper_rates = Vec::new();
    let pairs: Vec<(usize, f64, f64)> = report
        .output
        .records
        .iter()
        .filter_map(|r| match r {
            Record::TailPair { horizon, lower, upper, .. } => Some((*horizon, *lower, *upper)),
            _ => None,
        })
        .collect();
    for &(t, lo, hi) in &pairs {
        let law = two_point_law(t);
        let tf = t as f64;
        let (want_lo, want_hi) = (lower(&law, (lambda - eps) * tf), upper(&law, (lambda + eps) * tf));
        if rel(lo, want_lo) > 1e-12 || rel(hi, want_hi) > 1e-12 {
            failures.push(format!("T={t}: ({lo}, {hi}) vs ({want_lo}, {want_hi})"));
        }
        lower_rates.push(-want_lo.ln() / tf);
        upper_rates.push(-want_hi.ln() / tf);
    }
    if pairs.iter().map(|p| p.0).collect::<Vec<_>>() != [3, 4, 5, 6] {
        failures.push(format!("horizons {pairs:?}"));
    }
    if !lower_rates.windows(2).all(|w| w[1] > w[0]) {
        failures.push(format!("lower rates {lower_rates:?}"));
    }
    let (lo, hi) = upper_rates.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
    if !(lo > 0.0 && hi < 2.0 * lo) {
        failures.push(format!("upper rates {upper_rates:?}"));
    }
    verdict(9, "lower rate per step increasing, upper within factor 2", elapsed + start.elapsed(), &failures);
}

#[test]
fn ac10_chernoff_bound_dominates_frequency() {
    let out = tempfile::tempdir().unwrap();
    let (_, report, elapsed) = run_config("ac10_chernoff.toml", out.path());
    let mut failures = failed_checks(&report);
    let mut cases = 0;
    for r in &report.output.records {
        let Record::Chernoff { model, horizon, m, eps, r, tilt, log_bound, bound, frequency, stderr } = r else { continue };
        cases += 1;
        if *horizon > 10 || *m > 4 {
            failures.push(format!("out of range T={horizon} M={m}"));
        }
        if *bound < frequency - 3.0 * stderr {
            failures.push(format!("{} T={horizon} M={m} eps={eps}: {bound} < {frequency}", model.kind_name()));
        }
        // Two-point thresholds are the atom: 2M ln 2 + tilt M a - (1-r) ε T tilt / 64 in d = 1.
        if let TailSpec::TwoPoint { a, .. } = model {
            let mf = *m as f64;
            let want = 2.0 * mf * 2f64.ln() + tilt * mf * a - (1.0 - r) * eps * *horizon as f64 * tilt / 64.0;
            if log_bound.is_none_or(|l| rel(l, want) > 1e-12) {
                failures.push(format!("two-point log bound {log_bound:?} vs {want}"));
            }
        }
    }
    if cases != 96 {
        failures.push(format!("{cases} cases"));
    }
    verdict(10, "analytic bound >= MC frequency - 3 sigma, d=1, T<=10, M<=4", elapsed, &failures);
}

#[test]
fn ac11_suite_reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let mut failures = Vec::new();
    let configs = all_configs();
    for path in &configs {
        let config = ExperimentConfig::load(path).unwrap();
        let ra = run(&config, a.path()).unwrap();
        let rb = run(&config, b.path()).unwrap();
        for file in ra.manifest.files.iter().chain(std::iter::once(&"manifest.json".to_string())) {
            if file == TIMINGS_FILE {
                continue;
            }
            if std::fs::read(ra.dir.join(file)).unwrap() != std::fs::read(rb.dir.join(file)).unwrap() {
                failures.push(format!("{}: {file}", path.display()));
            }
        }
    }
    if configs.len() != 11 {
        failures.push(format!("{} configs", configs.len()));
    }
    verdict(11, "two runs of the full config suite are byte-identical", start.elapsed(), &failures);
}
