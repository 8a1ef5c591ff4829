//! Lower- and upper-tail probabilities of `Z(T)`: exact enumeration for tiny
//! two-point fields, naive Monte Carlo, the cone-conditioned lower bound, the
//! shortfall frequency of the doubling family and rate fits.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ConditionedField, Environment, SampledField};
use crate::gamma::PathFamily;
use crate::lattice::{cone_layer, Point};
use crate::numeric::log_sum_exp;
use crate::polymer::{is_epsilon_good, log_partition, path_energy, PathWeightMatrix};
use crate::polymer::{Mode, Region};
use crate::tail::{Distribution, TailModel};

/// Largest cone the exact enumerator accepts.
pub const MAX_EXACT_SITES: usize = 24;

const WILSON_Z: f64 = 1.96;

/// Absolute slack used when comparing `ln Z(T)` against `aT`.
pub fn tie_tolerance(level: f64) -> f64 {
    1e-12 * level.abs().max(1.0)
}

/// Binomial proportion with a Wilson score interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub hits: u64,
    pub n: u64,
    pub p_hat: f64,
    pub stderr: f64,
    pub ci: (f64, f64),
}

impl Proportion {
    pub fn new(hits: u64, n: u64) -> Self {
        let nf = n as f64;
        let p = hits as f64 / nf;
        let z2 = WILSON_Z * WILSON_Z;
        let denom = 1.0 + z2 / nf;
        let center = (p + z2 / (2.0 * nf)) / denom;
        let half = WILSON_Z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
        Proportion {
            hits,
            n,
            p_hat: p,
            stderr: (p * (1.0 - p) / nf).sqrt(),
            ci: ((center - half).max(0.0), (center + half).min(1.0)),
        }
    }
}

fn count_hits(n: usize, hit: impl Fn(u64) -> Result<bool> + Sync) -> Result<Proportion> {
    let hits = (0..n as u64)
        .into_par_iter()
        .map(|r| hit(r).map(u64::from))
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(Proportion::new(hits, n as u64))
}

/// Exact law of `ln Z(T)` under a two-point field, as `(ln Z, ln prob)` pairs
/// sorted by `ln Z`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactLaw {
    pub horizon: usize,
    pub sites: usize,
    pub atoms: Vec<(f64, f64)>,
}

impl ExactLaw {
    /// `Q(ln Z(T) <= level)`.
    pub fn lower(&self, level: f64) -> f64 {
        let cut = level + tie_tolerance(level);
        self.atoms.iter().take_while(|(z, _)| *z <= cut).map(|(_, lp)| lp.exp()).sum()
    }

    /// `Q(ln Z(T) >= level)`.
    pub fn upper(&self, level: f64) -> f64 {
        let cut = level - tie_tolerance(level);
        self.atoms.iter().rev().take_while(|(z, _)| *z >= cut).map(|(_, lp)| lp.exp()).sum()
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|(z, lp)| z * lp.exp()).sum()
    }
}

/// Field given by one bit per cone site: set bits carry `low`, clear bits `high`.
struct BitField {
    dim: usize,
    layers: Vec<Vec<Point>>,
    offsets: Vec<usize>,
    bits: u64,
    low: f64,
    high: f64,
}

impl Environment for BitField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, t: usize, x: &[i32]) -> Result<f64> {
        let layer = self.layers.get(t).ok_or_else(|| Error::MissingSite { t, x: x.to_vec() })?;
        let k = layer.binary_search_by(|p| p.as_slice().cmp(x)).map_err(|_| Error::MissingSite { t, x: x.to_vec() })?;
        Ok(if self.bits >> (self.offsets[t] + k) & 1 == 1 { self.low } else { self.high })
    }
}

/// Enumerates every configuration of a two-point field on the cone below `T`.
///
/// The transfer matrix runs once per configuration of the first `T - 1`
/// layers; the last layer closes as `ln Z = LSE_x(slice(x) + V(T-1, x))`.
pub fn exact_law(dist: &Distribution, dim: usize, horizon: usize) -> Result<ExactLaw> {
    let (a, b, p) = match dist {
        Distribution::TwoPoint { a, b, p } => (*a, *b, *p),
        _ => return Err(Error::Unsupported("exact enumeration needs a two-point law".into())),
    };
    if horizon == 0 {
        return Err(Error::Domain("horizon must be positive".into()));
    }
    let layers: Vec<Vec<Point>> = (0..horizon).map(|t| cone_layer(dim, t)).collect();
    let sites: usize = layers.iter().map(Vec::len).sum();
    if sites > MAX_EXACT_SITES {
        return Err(Error::SizeGuard { what: "cone sites", size: sites as u128, limit: MAX_EXACT_SITES as u128 });
    }
    let last = layers.last().unwrap().len();
    let head_sites = sites - last;
    let mut offsets = Vec::with_capacity(horizon);
    let mut acc = 0;
    for l in &layers {
        offsets.push(acc);
        acc += l.len();
    }
    let (ln_p, ln_q) = (p.ln(), (1.0 - p).ln());
    let head_layers = layers[..horizon - 1].to_vec();
    let mut atoms: Vec<(f64, f64)> = (0..1u64 << head_sites)
        .into_par_iter()
        .map(|head| {
            let env = BitField { dim, layers: head_layers.clone(), offsets: offsets.clone(), bits: head, low: -a, high: b };
            let mut m = PathWeightMatrix::new(Mode::LogSum, Region::Cone, dim, 0);
            m.run(&env, horizon - 1)?;
            let slice = m.slice().to_vec();
            let head_low = head.count_ones() as usize;
            let mut out = Vec::with_capacity(1 << last);
            let mut terms = vec![0.0; last];
            for tail in 0..1u64 << last {
                for (i, term) in terms.iter_mut().enumerate() {
                    *term = slice[i] + if tail >> i & 1 == 1 { -a } else { b };
                }
                let low = head_low + tail.count_ones() as usize;
                out.push((log_sum_exp(&terms), low as f64 * ln_p + (sites - low) as f64 * ln_q));
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    atoms.sort_by(|x, y| x.0.total_cmp(&y.0));
    Ok(ExactLaw { horizon, sites, atoms })
}

/// `Q(ln Z(T) <= aT)` by exhaustive enumeration.
pub fn exact_lower_tail(dist: &Distribution, dim: usize, horizon: usize, slope: f64) -> Result<f64> {
    Ok(exact_law(dist, dim, horizon)?.lower(slope * horizon as f64))
}

/// Fraction of `n` fields with `ln Z(T) <= aT`.
pub fn naive_mc_lower_tail(
    dist: &Distribution,
    dim: usize,
    horizon: usize,
    slope: f64,
    n: usize,
    seed: u64,
) -> Result<Proportion> {
    mc_tail(dist, dim, horizon, slope, n, seed, true)
}

/// Fraction of `n` fields with `ln Z(T) >= aT`.
pub fn naive_mc_upper_tail(
    dist: &Distribution,
    dim: usize,
    horizon: usize,
    slope: f64,
    n: usize,
    seed: u64,
) -> Result<Proportion> {
    mc_tail(dist, dim, horizon, slope, n, seed, false)
}

fn mc_tail(dist: &Distribution, dim: usize, horizon: usize, slope: f64, n: usize, seed: u64, lower: bool) -> Result<Proportion> {
    if n < 100 {
        return Err(Error::Precondition(format!("need at least 100 samples, got {n}")));
    }
    let level = slope * horizon as f64;
    let tol = tie_tolerance(level);
    count_hits(n, |r| {
        let z = log_partition(&SampledField::new(dist.clone(), dim, seed, r), horizon)?;
        Ok(if lower { z <= level + tol } else { z >= level - tol })
    })
}

/// Forcing event on the first `M` cone layers: `-V(t, x) >= θ_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeEvent {
    pub m: usize,
    pub eta: f64,
    pub thresholds: Vec<f64>,
    pub layer_sizes: Vec<usize>,
    /// `Σ_t |L_t| ln Q(-V >= θ_t)`.
    pub log_prob: f64,
}

impl ConeEvent {
    /// `θ_t = G^{inv}(η / (1+t)^d)` for `t < M`.
    pub fn new(model: &TailModel, m: usize, eta: f64) -> Result<Self> {
        if !(eta > 0.0) {
            return Err(Error::Domain(format!("eta must be positive, got {eta}")));
        }
        let d = model.dim();
        let thresholds = (0..m)
            .map(|t| model.threshold_inverse(eta / (1.0 + t as f64).powi(d as i32)))
            .collect::<Result<Vec<_>>>()?;
        let layer_sizes: Vec<usize> = (0..m).map(|t| cone_layer(d, t).len()).collect();
        let mut log_prob = 0.0;
        for (t, (&theta, &size)) in thresholds.iter().zip(&layer_sizes).enumerate() {
            let lp = model.distribution().log_tail_ge(theta);
            if lp == f64::NEG_INFINITY {
                return Err(Error::Domain(format!("threshold {theta} at t={t} lies beyond the support of -V")));
            }
            log_prob += size as f64 * lp;
        }
        Ok(ConeEvent { m, eta, thresholds, layer_sizes, log_prob })
    }
}

/// `ln Q(A) + ln P̂(ln Z(T) <= aT | A)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeBound {
    pub event: ConeEvent,
    pub conditional: Proportion,
    pub log_bound: f64,
    pub log_bound_ci: (f64, f64),
}

impl ConeBound {
    /// Standard error of `Q(A) P̂`.
    pub fn stderr(&self) -> f64 {
        self.event.log_prob.exp() * self.conditional.stderr
    }
}

pub fn cone_conditioned_lower_bound(
    model: &TailModel,
    horizon: usize,
    slope: f64,
    m: usize,
    eta: f64,
    n: usize,
    seed: u64,
) -> Result<ConeBound> {
    if m >= horizon {
        return Err(Error::Precondition(format!("need M < T, got M={m}, T={horizon}")));
    }
    if n < 100 {
        return Err(Error::Precondition(format!("need at least 100 samples, got {n}")));
    }
    let event = ConeEvent::new(model, m, eta)?;
    let level = slope * horizon as f64;
    let tol = tie_tolerance(level);
    let conditional = count_hits(n, |r| {
        let base = SampledField::new(model.distribution().clone(), model.dim(), seed, r);
        let env = ConditionedField::new(base, event.thresholds.clone());
        Ok(log_partition(&env, horizon)? <= level + tol)
    })?;
    let log_bound = event.log_prob + conditional.p_hat.ln();
    let log_bound_ci = (event.log_prob + conditional.ci.0.ln(), event.log_prob + conditional.ci.1.ln());
    Ok(ConeBound { event, conditional, log_bound, log_bound_ci })
}

/// Default forcing depth: `min(⌊η^{1/d}⌋, T - 1)`, at least one layer.
pub fn default_depth(eta: f64, dim: usize, horizon: usize) -> usize {
    let m = (eta.powf(1.0 / dim as f64) * (1.0 + 1e-12)).floor() as usize;
    m.clamp(1, horizon.saturating_sub(1).max(1))
}

/// Frequency over `n` fields that fewer than `r |S_M|` family paths keep
/// `H(M) >= -εT`.
pub fn family_shortfall_frequency(
    dist: &Distribution,
    family: &PathFamily,
    horizon: usize,
    m: usize,
    eps: f64,
    r: f64,
    n: usize,
    seed: u64,
) -> Result<Proportion> {
    if m > family.horizon() {
        return Err(Error::Precondition(format!("family built to {} < M = {m}", family.horizon())));
    }
    let paths: Vec<Vec<Point>> = (0..family.frontier(m).len()).map(|k| family.path_to(m, k)).collect();
    let need = r * paths.len() as f64;
    let floor = -eps * horizon as f64;
    let dim = family.dim();
    count_hits(n, |rep| {
        let env = SampledField::new(dist.clone(), dim, seed, rep);
        let mut open = 0usize;
        for p in &paths {
            if path_energy(&env, p, 0, m)? >= floor {
                open += 1;
            }
        }
        Ok((open as f64) < need)
    })
}

/// Frequency over `n` fields that the block `[0, L]` around the origin with
/// corridor radius `W` is ε-good.
pub fn block_goodness_frequency(
    dist: &Distribution,
    dim: usize,
    length: usize,
    width: i64,
    eps: f64,
    lambda_hat: f64,
    n: usize,
    seed: u64,
) -> Result<Proportion> {
    if length % 2 == 1 {
        return Err(Error::Precondition(format!("block length must be even, got {length}")));
    }
    if n < 100 {
        return Err(Error::Precondition(format!("need at least 100 samples, got {n}")));
    }
    let center = vec![0; dim];
    count_hits(n, |r| {
        let env = SampledField::new(dist.clone(), dim, seed, r);
        is_epsilon_good(&env, 0, length, width, &center, lambda_hat, eps)
    })
}

/// One `(T, -ln P̂)` observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub horizon: f64,
    pub neg_log_p: f64,
    /// `-ln` of the probability interval, as `(low, high)`.
    pub ci: (f64, f64),
}

impl RatePoint {
    pub fn from_proportion(horizon: f64, p: &Proportion) -> Self {
        RatePoint { horizon, neg_log_p: -p.p_hat.ln(), ci: (-p.ci.1.ln(), -p.ci.0.ln()) }
    }

    pub fn exact(horizon: f64, p: f64) -> Self {
        RatePoint { horizon, neg_log_p: -p.ln(), ci: (-p.ln(), -p.ln()) }
    }

    fn usable(&self) -> bool {
        self.neg_log_p.is_finite() && self.neg_log_p > 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveFit {
    pub name: String,
    pub ratios: Vec<(f64, f64)>,
    /// `max / min` of the ratio series.
    pub spread: f64,
    pub consistent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub points: Vec<RatePoint>,
    /// Least-squares slope of `ln(-ln P̂)` against `ln T`.
    pub log_log_slope: Option<f64>,
    pub curves: Vec<CurveFit>,
}

/// Spread at or below which a curve counts as consistent with the data.
pub const CONSISTENT_SPREAD: f64 = 4.0;

/// Compares observed rates with candidate curves given as `(name, r(T))`.
pub fn fit_rate(points: &[RatePoint], curves: &[(String, Vec<(f64, f64)>)]) -> RateFit {
    let usable: Vec<RatePoint> = points.iter().copied().filter(RatePoint::usable).collect();
    let log_log_slope = (usable.len() >= 2).then(|| {
        let xs: Vec<f64> = usable.iter().map(|p| p.horizon.ln()).collect();
        let ys: Vec<f64> = usable.iter().map(|p| p.neg_log_p.ln()).collect();
        let n = xs.len() as f64;
        let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        sxy / sxx
    });
    let curves = curves
        .iter()
        .map(|(name, values)| {
            let ratios: Vec<(f64, f64)> = usable
                .iter()
                .filter_map(|p| {
                    values
                        .iter()
                        .find(|(t, _)| (t - p.horizon).abs() <= 1e-9 * p.horizon.abs().max(1.0))
                        .map(|&(_, r)| (p.horizon, p.neg_log_p / r))
                })
                .collect();
            let (lo, hi) = ratios.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, v)| (lo.min(v), hi.max(v)));
            let spread = if ratios.is_empty() || lo <= 0.0 { f64::INFINITY } else { hi / lo };
            CurveFit { name: name.clone(), ratios, spread, consistent: spread <= CONSISTENT_SPREAD }
        })
        .collect();
    RateFit { points: usable, log_log_slope, curves }
}

/// Per-horizon exact lower and upper tail probabilities around `λ̂ ∓ ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailPair {
    pub horizon: usize,
    pub lower: f64,
    pub upper: f64,
}

impl TailPair {
    pub fn lower_rate_per_step(&self) -> f64 {
        -self.lower.ln() / self.horizon as f64
    }

    pub fn upper_rate_per_step(&self) -> f64 {
        -self.upper.ln() / self.horizon as f64
    }
}

pub fn exact_tail_pairs(dist: &Distribution, dim: usize, horizons: &[usize], lambda_hat: f64, eps: f64) -> Result<Vec<TailPair>> {
    horizons
        .iter()
        .map(|&t| {
            let law = exact_law(dist, dim, t)?;
            let tf = t as f64;
            Ok(TailPair { horizon: t, lower: law.lower((lambda_hat - eps) * tf), upper: law.upper((lambda_hat + eps) * tf) })
        })
        .collect()
}

/// `-ln Q(ln Z(T) >= (λ̂ + ε) T) / T` by Monte Carlo over a grid of horizons.
pub fn upper_tail_rate_probe(
    dist: &Distribution,
    dim: usize,
    horizons: &[usize],
    lambda_hat: f64,
    eps: f64,
    n: usize,
    seed: u64,
) -> Result<RateFit> {
    let points = horizons
        .iter()
        .map(|&t| {
            let p = naive_mc_upper_tail(dist, dim, t, lambda_hat + eps, n, seed)?;
            Ok(RatePoint::from_proportion(t as f64, &p))
        })
        .collect::<Result<Vec<_>>>()?;
    let linear = vec![("T".to_string(), horizons.iter().map(|&t| (t as f64, t as f64)).collect())];
    Ok(fit_rate(&points, &linear))
}
