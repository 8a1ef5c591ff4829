//! Rate functionals of the negative tail, the sum/integral sandwich, regime
//! probes and the classifier that maps a tail model to a predicted growth law
//! of the lower-tail rate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{integrate_with_breaks, log_grid, median};
use crate::tail::{Monotonicity, TailModel};

const QUAD_REL_TOL: f64 = 1e-13;

/// `∫_a^b G^{-1/d}(x) dx`, integrated in `u = ln x` on unit-width panels.
fn inverse_root_integral(model: &TailModel, a: f64, b: f64) -> Result<f64> {
    if b <= a {
        return Ok(0.0);
    }
    let g = model.tail_fn().ok_or(Error::NoTailFunction { kind: model.kind_name() })?;
    let d = model.dim() as f64;
    let (la, lb) = (a.ln(), b.ln());
    let panels = ((lb - la).ceil() as usize).clamp(1, 4096);
    let breaks: Vec<f64> = (0..=panels).map(|i| la + (lb - la) * i as f64 / panels as f64).collect();
    let integral = integrate_with_breaks(|u| u.exp() * g.eval(u.exp()).powf(-1.0 / d), &breaks, 0.0, QUAD_REL_TOL)?;
    Ok(integral.value)
}

/// `F(z) = z^{1/d} ∫_{G^{inv}(1)}^{G^{inv}(z)} G^{-1/d}(x) dx` for `z >= 1`.
pub fn rate_functional(model: &TailModel, z: f64) -> Result<f64> {
    if !(z >= 1.0) {
        return Err(Error::Domain(format!("the rate functional is defined for z >= 1, got {z}")));
    }
    let lo = model.g_inverse(1.0)?;
    let hi = model.g_inverse(z)?;
    Ok(z.powf(1.0 / model.dim() as f64) * inverse_root_integral(model, lo, hi)?)
}

/// `x G(x)^{-1/d}`, i.e. `f(x)^{-1/d}`.
pub fn f_inverse_root(model: &TailModel, x: f64) -> Result<f64> {
    Ok(x * model.g_eval(x)?.powf(-1.0 / model.dim() as f64))
}

/// `Σ_{t<M} G^{inv}(η / (1+t)^d)`; the two-point law uses its atom magnitude.
pub fn threshold_sum(model: &TailModel, eta: f64, m: usize) -> Result<f64> {
    if !(eta > 0.0) || m == 0 {
        return Err(Error::Domain(format!("need eta > 0 and M >= 1, got eta={eta}, M={m}")));
    }
    let d = model.dim() as i32;
    (0..m).map(|t| model.threshold_inverse(eta / (1.0 + t as f64).powi(d))).sum()
}

/// `η^{1/d} ∫_{G^{inv}(η/M^d)}^{G^{inv}(η)} G^{-1/d}(x) dx`.
pub fn threshold_integral(model: &TailModel, eta: f64, m: usize) -> Result<f64> {
    let d = model.dim() as i32;
    let lo = model.g_inverse(eta / (m as f64).powi(d))?;
    let hi = model.g_inverse(eta)?;
    Ok(eta.powf(1.0 / d as f64) * inverse_root_integral(model, lo, hi)?)
}

/// `f^{-1/d}(G^{inv}(η/M^d)) - f^{-1/d}(G^{inv}(η))`.
pub fn boundary_gap(model: &TailModel, eta: f64, m: usize) -> Result<f64> {
    Ok(outer_boundary(model, eta, m)? - outer_boundary(model, eta, 1)?)
}

/// `f^{-1/d}(G^{inv}(η/M^d))`, evaluated as `G^{inv}(z) z^{-1/d}` with `z = η/M^d`.
fn outer_boundary(model: &TailModel, eta: f64, m: usize) -> Result<f64> {
    let d = model.dim() as i32;
    let z = eta / (m as f64).powi(d);
    Ok(model.g_inverse(z)? * z.powf(-1.0 / d as f64))
}

fn check_sandwich_domain(model: &TailModel, eta: f64, m: usize) -> Result<()> {
    let md = (m as f64).powi(model.dim() as i32);
    if m == 0 || !(md <= eta) {
        return Err(Error::Precondition(format!("the sandwich needs 1 <= M^d <= eta, got M={m}, eta={eta}")));
    }
    Ok(())
}

/// Both sides of the sum/integral comparison at one `(η, M)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandwichCheck {
    pub eta: f64,
    pub m: usize,
    pub sum: f64,
    pub integral: f64,
    pub gap: f64,
    /// `sum - (integral + η^{1/d} gap)`.
    pub lower_slack: f64,
    /// `integral + C₀ η^{1/d} - sum`.
    pub upper_slack: f64,
    pub c0: f64,
    pub lower_ok: bool,
    pub upper_ok: bool,
}

/// Evaluates `F_η^M + η^{1/d} Δ <= I_η^M <= F_η^M + C₀ η^{1/d}`.
pub fn sandwich_check(model: &TailModel, eta: f64, m: usize, c0: f64) -> Result<SandwichCheck> {
    check_sandwich_domain(model, eta, m)?;
    let root = eta.powf(1.0 / model.dim() as f64);
    let sum = threshold_sum(model, eta, m)?;
    let integral = threshold_integral(model, eta, m)?;
    let gap = boundary_gap(model, eta, m)?;
    let lower_slack = sum - (integral + root * gap);
    let upper_slack = integral + c0 * root - sum;
    Ok(SandwichCheck {
        eta,
        m,
        sum,
        integral,
        gap,
        lower_slack,
        upper_slack,
        c0,
        lower_ok: lower_slack >= -1e-9,
        upper_ok: upper_slack >= -1e-9,
    })
}

/// The `(η, M)` grid used to fix `C₀`: `η` log-spaced in `[1, eta_max]`, `M`
/// running over powers of two and the largest admissible value.
pub fn sandwich_grid(dim: usize, eta_max: f64) -> Vec<(f64, usize)> {
    let mut out = Vec::new();
    for eta in log_grid(1.0, eta_max, 4) {
        let top = (eta.powf(1.0 / dim as f64) * (1.0 + 1e-12)).floor() as usize;
        let mut ms: Vec<usize> = std::iter::successors(Some(1usize), |m| Some(m * 2)).take_while(|&m| m <= top).collect();
        ms.push(top.max(1));
        ms.sort_unstable();
        ms.dedup();
        for m in ms {
            if (m as f64).powi(dim as i32) <= eta {
                out.push((eta, m));
            }
        }
    }
    out
}

/// Per-model constants of the sandwich and a tabulated rate functional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateProfile {
    pub dim: usize,
    pub monotonicity: Monotonicity,
    /// `(z, F(z))` on a log grid.
    pub table: Vec<(f64, f64)>,
    /// `1.1 · sup f^{-1/d}(G^{inv}(η/M^d))` over the grid.
    pub c0: f64,
    /// `G^{inv}(1)`, a grid-free constant when `f` is non-decreasing.
    pub c0_analytic: Option<f64>,
    /// `sup Δ` over the grid.
    pub sup_gap: f64,
    pub eta_max: f64,
}

impl RateProfile {
    pub fn new(model: &TailModel, eta_max: f64) -> Result<Self> {
        let mut sup_outer = f64::NEG_INFINITY;
        let mut sup_gap = f64::NEG_INFINITY;
        for (eta, m) in sandwich_grid(model.dim(), eta_max) {
            sup_outer = sup_outer.max(outer_boundary(model, eta, m)?);
            sup_gap = sup_gap.max(boundary_gap(model, eta, m)?);
        }
        let table = log_grid(1.0, eta_max, 4)
            .into_iter()
            .map(|z| rate_functional(model, z).map(|v| (z, v)))
            .collect::<Result<Vec<_>>>()?;
        let monotonicity = model.f_monotonicity();
        let c0_analytic = if monotonicity.is_non_decreasing() { Some(model.g_inverse(1.0)?) } else { None };
        Ok(RateProfile { dim: model.dim(), monotonicity, table, c0: 1.1 * sup_outer, c0_analytic, sup_gap, eta_max })
    }
}

/// Tabulated `F(G(y))/y`, in both printed forms, with a divergence verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthProbe {
    pub points: Vec<(f64, f64)>,
    /// `f(y)^{1/d} ∫_{G^{inv}(1)}^{y} G^{-1/d}`, aligned with `points`.
    pub alternate: Vec<f64>,
    pub max_form_gap: f64,
    /// Maximum over the top decade; `None` when flagged divergent.
    pub estimate: Option<f64>,
    pub diverges: bool,
}

/// Probes `limsup F(G(y))/y` on an increasing grid.
///
/// Divergence is flagged when the last two decades grow by more than a factor
/// two, or when the value keeps increasing over the last three decades with
/// per-decade increments that shrink slower than a factor `0.75`.
pub fn growth_probe(model: &TailModel, ys: &[f64]) -> Result<GrowthProbe> {
    if !model.f_monotonicity().is_non_increasing() {
        return Err(Error::Unsupported("the growth probe applies to non-increasing f".into()));
    }
    let d = model.dim() as f64;
    let start = model.g_inverse(1.0)?;
    let mut points = Vec::new();
    let mut alternate = Vec::new();
    let mut max_form_gap: f64 = 0.0;
    for &y in ys.iter().filter(|&&y| y > start) {
        let v = rate_functional(model, model.g_eval(y)?)? / y;
        let w = model.f_eval(y)?.powf(1.0 / d) * inverse_root_integral(model, start, y)?;
        max_form_gap = max_form_gap.max((v - w).abs() / v.abs().max(1e-300));
        points.push((y, v));
        alternate.push(w);
    }
    if points.len() < 2 {
        return Err(Error::Domain("growth probe grid has fewer than two usable points".into()));
    }
    let y_top = points.last().unwrap().0;
    let at_decade = |k: f64| -> Option<f64> {
        let target = y_top / 10f64.powf(k);
        points.iter().find(|(y, _)| (y / target - 1.0).abs() < 1e-9).map(|&(_, v)| v)
    };
    let decades: Vec<f64> = (0..4).rev().filter_map(|k| at_decade(k as f64)).collect();
    let mut diverges = false;
    if let (Some(a), Some(b)) = (at_decade(2.0), at_decade(0.0)) {
        diverges |= b > 2.0 * a;
    }
    if decades.len() == 4 {
        let inc: Vec<f64> = decades.windows(2).map(|w| w[1] - w[0]).collect();
        diverges |= inc.iter().all(|&s| s > 0.0) && inc[1] >= 0.75 * inc[0] && inc[2] >= 0.75 * inc[1];
    }
    let top_decade = y_top / 10.0;
    let estimate = (!diverges).then(|| {
        points.iter().filter(|(y, _)| *y >= top_decade * (1.0 - 1e-12)).map(|p| p.1).fold(f64::NEG_INFINITY, f64::max)
    });
    Ok(GrowthProbe { points, alternate, max_form_gap, estimate, diverges })
}

/// Central-difference estimates of `-x f'(x)/f(x)` on a log grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogSlopeProbe {
    pub points: Vec<(f64, f64)>,
    /// Median over the last decade of the grid.
    pub estimate: f64,
    /// Median over the first decade.
    pub early: f64,
}

impl LogSlopeProbe {
    /// Zero limit: negligible now, or decaying along the grid.
    pub fn vanishes(&self) -> bool {
        self.estimate < 1e-6 || self.estimate < 0.9 * self.early
    }
}

pub fn log_slope_probe(model: &TailModel, xs: &[f64]) -> Result<LogSlopeProbe> {
    if !model.f_monotonicity().is_non_increasing() {
        return Err(Error::Unsupported("the log-slope probe applies to non-increasing f".into()));
    }
    if xs.len() < 2 {
        return Err(Error::Domain("log-slope probe needs at least two grid points".into()));
    }
    let h: f64 = 1e-4;
    let points = xs
        .iter()
        .map(|&x| {
            let up = model.f_eval(x * h.exp())?.ln();
            let down = model.f_eval(x * (-h).exp())?.ln();
            Ok((x, -(up - down) / (2.0 * h)))
        })
        .collect::<Result<Vec<_>>>()?;
    let last = xs[xs.len() - 1];
    let first = xs[0];
    let tail: Vec<f64> = points.iter().filter(|(x, _)| *x >= last / 10.0 * (1.0 - 1e-12)).map(|p| p.1).collect();
    let head: Vec<f64> = points.iter().filter(|(x, _)| *x <= first * 10.0 * (1.0 + 1e-12)).map(|p| p.1).collect();
    Ok(LogSlopeProbe { estimate: median(&tail), early: median(&head), points })
}

/// `η` with `F(η) = c T` to relative accuracy `1e-8`.
pub fn solve_level(model: &TailModel, horizon: f64, c: f64) -> Result<f64> {
    if !(horizon > 0.0 && c > 0.0) {
        return Err(Error::Domain(format!("need T > 0 and c > 0, got T={horizon}, c={c}")));
    }
    let target = c * horizon;
    let mut hi = 2.0;
    while rate_functional(model, hi)? < target {
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::Bracket(format!("no level reaches F = {target}")));
        }
    }
    let mut lo = 1.0;
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if rate_functional(model, mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let (f_lo, f_hi) = (rate_functional(model, lo)?, rate_functional(model, hi)?);
    let (eta, value) = if (f_lo - target).abs() <= (f_hi - target).abs() { (lo, f_lo) } else { (hi, f_hi) };
    if (value - target).abs() > 1e-8 * target {
        return Err(Error::Bracket(format!("level residual {} exceeds tolerance", (value - target).abs())));
    }
    Ok(eta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// Rate of order `T G(T)`.
    ComparableToTail,
    /// Rate at most of order `T G(δT)`, and `o(T G(T))`.
    TransitionalSmall,
    /// Rate of order `T^{1+d}`.
    FastMaximal,
    /// Rate of order `T η(T)` with `F(η(T)) ~ T`.
    SubMaximal,
    /// Rate of order `T^{1+d} / ln^d T`.
    BoundedF,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeVerdict {
    pub regime: Regime,
    pub label: String,
    pub basis: String,
    pub dim: usize,
    pub monotonicity: Monotonicity,
    pub growth: Option<GrowthProbe>,
    pub log_slope: Option<LogSlopeProbe>,
    pub integral_converges: Option<bool>,
    pub f_bounded: Option<bool>,
    /// Whether the log-slope probe, where it applies, points the same way as the growth probe.
    pub probes_agree: bool,
    pub delta: f64,
}

/// Options of [`classify_regime`].
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifyOptions {
    /// Scale in the transitional upper bound `T G(δT)`.
    pub delta: f64,
    pub probe_grid: Vec<f64>,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions { delta: 0.5, probe_grid: log_grid(10.0, 1e12, 4) }
    }
}

fn far_log_slope(model: &TailModel, x: f64) -> Result<f64> {
    let h: f64 = 1e-3;
    Ok((model.g_eval(x * h.exp())?.ln() - model.g_eval(x * (-h).exp())?.ln()) / (2.0 * h))
}

fn format_exponent(e: f64) -> String {
    let rounded = (e * 1e6).round() / 1e6;
    if rounded.fract() == 0.0 {
        format!("{}", rounded as i64)
    } else {
        format!("{rounded}")
    }
}

fn power_label(e: f64) -> String {
    format!("T^{}", format_exponent(e))
}

fn tail_label(model: &TailModel) -> String {
    match model.spec() {
        crate::tail::TailSpec::Power { alpha, .. } => power_label(1.0 + alpha),
        crate::tail::TailSpec::Linear { .. } => power_label(2.0),
        _ => "T·G(T)".to_string(),
    }
}

/// Chooses the growth law of the lower-tail rate for `model`.
pub fn classify_regime(model: &TailModel, opts: &ClassifyOptions) -> Result<RegimeVerdict> {
    let dim = model.dim();
    let d = dim as f64;
    let monotonicity = model.f_monotonicity();
    let mut verdict = RegimeVerdict {
        regime: Regime::FastMaximal,
        label: power_label(1.0 + d),
        basis: String::new(),
        dim,
        monotonicity,
        growth: None,
        log_slope: None,
        integral_converges: None,
        f_bounded: None,
        probes_agree: true,
        delta: opts.delta,
    };
    match monotonicity {
        Monotonicity::Undefined => {
            verdict.basis = "field bounded below: no negative tail, maximal rate".into();
            verdict.integral_converges = Some(true);
        }
        Monotonicity::NonMonotone => {
            return Err(Error::Unsupported("classification needs a monotone f".into()));
        }
        Monotonicity::NonDecreasing | Monotonicity::Constant => {
            let x_far = *opts.probe_grid.last().unwrap_or(&1e12);
            let slope = far_log_slope(model, x_far)?;
            let converges = slope > d * (1.0 + 1e-6);
            let bounded = slope - d < 1e-6;
            verdict.integral_converges = Some(converges);
            verdict.f_bounded = Some(bounded);
            if converges {
                verdict.basis = "f non-decreasing and ∫ G^{-1/d} finite: rate of order T^{1+d}".into();
            } else if bounded {
                verdict.regime = Regime::BoundedF;
                verdict.label = if dim == 1 {
                    format!("T^{}/ln T", format_exponent(1.0 + d))
                } else {
                    format!("T^{}/ln^{dim} T", format_exponent(1.0 + d))
                };
                verdict.basis = "f non-decreasing and bounded: rate of order T^{1+d}/ln^d T".into();
            } else {
                verdict.regime = Regime::SubMaximal;
                verdict.label = "T·η(T)".into();
                verdict.basis = "f non-decreasing, unbounded, ∫ G^{-1/d} infinite: rate T·η(T) with F(η(T)) ~ T".into();
            }
        }
        Monotonicity::NonIncreasing => {
            let growth = growth_probe(model, &opts.probe_grid)?;
            let log_slope = log_slope_probe(model, &opts.probe_grid).ok();
            if let Some(p) = &log_slope {
                verdict.probes_agree = p.vanishes() == growth.diverges;
            }
            if growth.diverges {
                verdict.regime = Regime::TransitionalSmall;
                verdict.label = "o(T·G(T))".into();
                verdict.basis = format!(
                    "f non-increasing, F(G(y))/y unbounded: rate at most of order T·G({}·T)",
                    opts.delta
                );
            } else {
                verdict.regime = Regime::ComparableToTail;
                verdict.label = tail_label(model);
                verdict.basis = "f non-increasing, F(G(y))/y bounded: rate of order T·G(T)".into();
            }
            verdict.growth = Some(growth);
            verdict.log_slope = log_slope;
        }
    }
    Ok(verdict)
}

/// Predicted rate up to constants, one value per horizon.
pub fn predicted_rate_curve(verdict: &RegimeVerdict, model: &TailModel, horizons: &[f64]) -> Result<Vec<(f64, f64)>> {
    let d = verdict.dim as f64;
    horizons
        .iter()
        .map(|&t| {
            let value = match verdict.regime {
                Regime::ComparableToTail => t * model.g_eval(t)?,
                Regime::TransitionalSmall => t * model.g_eval(verdict.delta * t)?,
                Regime::FastMaximal => t.powf(1.0 + d),
                Regime::BoundedF => t.powf(1.0 + d) / t.ln().powf(d),
                Regime::SubMaximal => t * solve_level(model, t, 1.0)?,
            };
            Ok((t, value))
        })
        .collect()
}

/// Terms of the exponent bounding the probability that too few family paths
/// keep energy above `-εT`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChernoffBound {
    pub counting_term: f64,
    pub moment_term: f64,
    pub deviation_term: f64,
    pub log_bound: f64,
}

impl ChernoffBound {
    /// The bound as a probability, capped at one.
    pub fn probability(&self) -> f64 {
        self.log_bound.min(0.0).exp()
    }
}

/// `2^d M^d ln 2 + η̃ I_{η̃}^M - (1-r) ε T η̃ / K` with `K = 4 (4d)^{2d}`.
pub fn chernoff_log_bound(
    model: &TailModel,
    horizon: usize,
    m: usize,
    tilt: f64,
    eps: f64,
    r: f64,
) -> Result<ChernoffBound> {
    let d = model.dim() as i32;
    let md = (m as f64).powi(d);
    if m == 0 {
        return Err(Error::Precondition("M must be at least 1".into()));
    }
    if !(tilt >= 2.0 * model.eta0() * md) {
        return Err(Error::Precondition(format!(
            "tilt {tilt} is below 2 eta0 M^d = {}",
            2.0 * model.eta0() * md
        )));
    }
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::Precondition(format!("r must lie in (0, 1), got {r}")));
    }
    if !(eps > 0.0) {
        return Err(Error::Precondition(format!("eps must be positive, got {eps}")));
    }
    let k = 4.0 * (4.0 * d as f64).powi(2 * d);
    let counting_term = 2f64.powi(d) * md * std::f64::consts::LN_2;
    let moment_term = tilt * threshold_sum(model, tilt, m)?;
    let deviation_term = (1.0 - r) * eps * horizon as f64 * tilt / k;
    Ok(ChernoffBound { counting_term, moment_term, deviation_term, log_bound: counting_term + moment_term - deviation_term })
}

/// Smallest bound over tilts `2 η₀ M^d · 10^{k/10}`, `k = 0..=100`.
pub fn optimized_chernoff_log_bound(
    model: &TailModel,
    horizon: usize,
    m: usize,
    eps: f64,
    r: f64,
) -> Result<(f64, ChernoffBound)> {
    let base = 2.0 * model.eta0() * (m as f64).powi(model.dim() as i32);
    let mut best: Option<(f64, ChernoffBound)> = None;
    for k in 0..=100 {
        let tilt = base * 10f64.powf(k as f64 / 10.0);
        let b = chernoff_log_bound(model, horizon, m, tilt, eps, r)?;
        if best.is_none_or(|(_, cur)| b.log_bound < cur.log_bound) {
            best = Some((tilt, b));
        }
    }
    Ok(best.expect("non-empty tilt grid"))
}
