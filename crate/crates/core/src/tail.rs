//! Negative-tail families `G`, the mean-zero field laws built on them, and the
//! exponential-moment bound used by the tilting estimates.
//!
//! A tail model fixes `Q(-V > x) = exp(-x G(x))` exactly for `x >= x̄`. The
//! constructed law puts all of its negative mass on that tail beyond `x̄` and
//! balances the mean with a single positive atom, so the field is
//! non-degenerate, centred, and has exponential moments of both signs.

use rand::distributions::Open01;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::numeric::{bisect_increasing, integrate_with_breaks, invert_increasing, log1m_exp, log_sum_exp};

const INVERSE_REL_TOL: f64 = 1e-13;

/// Serializable description of a field law, as it appears in model files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TailSpec {
    /// `G(x) = x^alpha`.
    Power { alpha: f64, x_bar: f64, dim: usize },
    /// `G(x) = slope * x`.
    Linear { slope: f64, x_bar: f64, dim: usize },
    /// `G(x) = x^d exp(-(ln x)^beta)` for `x >= e`, continued as `x^d / e` below.
    LogCorrected { beta: f64, x_bar: f64, dim: usize },
    /// `V = -a` with probability `p`, otherwise the balancing positive value.
    TwoPoint { a: f64, p: f64, dim: usize },
    /// Tabulated `(x, G(x))` knots, interpolated linearly in log-log scale.
    Custom { points: Vec<(f64, f64)>, x_bar: f64, dim: usize },
}

impl TailSpec {
    pub fn dim(&self) -> usize {
        match self {
            TailSpec::Power { dim, .. }
            | TailSpec::Linear { dim, .. }
            | TailSpec::LogCorrected { dim, .. }
            | TailSpec::TwoPoint { dim, .. }
            | TailSpec::Custom { dim, .. } => *dim,
        }
    }

    pub fn with_dim(&self, d: usize) -> TailSpec {
        let mut spec = self.clone();
        match &mut spec {
            TailSpec::Power { dim, .. }
            | TailSpec::Linear { dim, .. }
            | TailSpec::LogCorrected { dim, .. }
            | TailSpec::TwoPoint { dim, .. }
            | TailSpec::Custom { dim, .. } => *dim = d,
        }
        spec
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            TailSpec::Power { .. } => "power",
            TailSpec::Linear { .. } => "linear",
            TailSpec::LogCorrected { .. } => "log-corrected",
            TailSpec::TwoPoint { .. } => "two-point",
            TailSpec::Custom { .. } => "custom",
        }
    }

    /// Short content hash of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("tail spec serializes");
        let digest = Sha256::digest(&json);
        hex::encode(&digest[..8])
    }
}

/// Monotonicity of `f(x) = G(x) / x^d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Monotonicity {
    NonIncreasing,
    NonDecreasing,
    Constant,
    NonMonotone,
    /// No tail function (bounded-below field).
    Undefined,
}

impl Monotonicity {
    pub fn is_non_increasing(self) -> bool {
        matches!(self, Monotonicity::NonIncreasing | Monotonicity::Constant)
    }

    pub fn is_non_decreasing(self) -> bool {
        matches!(self, Monotonicity::NonDecreasing | Monotonicity::Constant)
    }
}

/// A continuous, strictly increasing `G: (0, ∞) → (0, ∞)` with `G(0+) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub enum TailFn {
    Power { scale: f64, alpha: f64 },
    LogCorrected { beta: f64, dim: usize },
    Table { ln_x: Vec<f64>, ln_g: Vec<f64>, slopes: Vec<f64> },
}

impl TailFn {
    pub fn eval(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match self {
            TailFn::Power { scale, alpha } => scale * x.powf(*alpha),
            TailFn::LogCorrected { beta, dim } => {
                let base = x.powi(*dim as i32);
                if x <= std::f64::consts::E {
                    base / std::f64::consts::E
                } else {
                    base * (-x.ln().powf(*beta)).exp()
                }
            }
            TailFn::Table { ln_x, ln_g, slopes } => {
                let lx = x.ln();
                let n = ln_x.len();
                // segment k spans knots k..k+1; slopes[0] and slopes[n] extend the ends
                let k = ln_x.partition_point(|&v| v <= lx);
                let (anchor, slope) = if k == 0 {
                    (0, slopes[0])
                } else if k >= n {
                    (n - 1, slopes[n])
                } else {
                    (k - 1, slopes[k])
                };
                (ln_g[anchor] + slope * (lx - ln_x[anchor])).exp()
            }
        }
    }

    /// `G^{inv}(z)`, with `G^{inv}(0) = 0`.
    pub fn inverse(&self, z: f64) -> f64 {
        if z <= 0.0 {
            return 0.0;
        }
        match self {
            TailFn::Power { scale, alpha } => (z / scale).powf(1.0 / alpha),
            TailFn::LogCorrected { dim, .. } => {
                let e = std::f64::consts::E;
                let knee = self.eval(e);
                if z <= knee {
                    (z * e).powf(1.0 / *dim as f64)
                } else {
                    let hi = (z * e).powf(1.0 / *dim as f64).max(e);
                    invert_increasing(|x| self.eval(x), z, hi, INVERSE_REL_TOL)
                        .unwrap_or(f64::INFINITY)
                }
            }
            TailFn::Table { .. } => {
                invert_increasing(|x| self.eval(x), z, 1.0, INVERSE_REL_TOL).unwrap_or(f64::INFINITY)
            }
        }
    }

    /// Solves `x G(x) = y` for `x > 0`.
    pub fn inverse_xg(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        match self {
            TailFn::Power { scale, alpha } => (y / scale).powf(1.0 / (1.0 + alpha)),
            _ => invert_increasing(|x| x * self.eval(x), y, 1.0, INVERSE_REL_TOL).unwrap_or(f64::INFINITY),
        }
    }
}

/// Mean-zero law with an exact tail beyond `x̄` and one balancing positive atom.
#[derive(Debug, Clone, PartialEq)]
pub struct TailLaw {
    pub g: TailFn,
    pub x_bar: f64,
    /// `ln S` with `S = Q(-V > x̄) = exp(-x̄ G(x̄))`.
    pub log_s: f64,
    /// Location `v₀ > 0` of the positive atom.
    pub atom: f64,
    /// `E[-V; V < 0]`.
    pub negative_mean: f64,
}

/// A realizable IID site law.
#[derive(Debug, Clone, PartialEq)]
pub enum Distribution {
    Tail(TailLaw),
    /// `V = -a` w.p. `p`, `V = b` w.p. `1 - p`, with `p a = (1 - p) b`.
    TwoPoint { a: f64, b: f64, p: f64 },
    /// Degenerate field, only meaningful for tests and sanity runs.
    Constant(f64),
}

impl Distribution {
    pub fn two_point(a: f64, p: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) || !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidModel(format!("two-point needs a > 0 and p in (0,1), got a={a}, p={p}")));
        }
        Ok(Distribution::TwoPoint { a, b: p * a / (1.0 - p), p })
    }

    pub fn constant(value: f64) -> Self {
        Distribution::Constant(value)
    }

    /// `ln Q(-V > x)`.
    pub fn log_tail_gt(&self, x: f64) -> f64 {
        match self {
            Distribution::Tail(law) => {
                if x < -law.atom {
                    0.0
                } else if x < law.x_bar {
                    law.log_s
                } else {
                    -x * law.g.eval(x)
                }
            }
            Distribution::TwoPoint { a, b, p } => {
                if x < -b {
                    0.0
                } else if x < *a {
                    p.ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Distribution::Constant(c) => {
                if -c > x {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    /// `ln Q(-V >= x)`.
    pub fn log_tail_ge(&self, x: f64) -> f64 {
        match self {
            Distribution::Tail(law) => {
                if x <= -law.atom {
                    0.0
                } else if x <= law.x_bar {
                    law.log_s
                } else {
                    -x * law.g.eval(x)
                }
            }
            Distribution::TwoPoint { a, b, p } => {
                if x <= -b {
                    0.0
                } else if x <= *a {
                    p.ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Distribution::Constant(c) => {
                if -c >= x {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    /// Quantile at `u = exp(log_u)`; small `u` maps to very negative values.
    pub fn quantile_log(&self, log_u: f64) -> f64 {
        match self {
            Distribution::Tail(law) => {
                if log_u < law.log_s {
                    -law.g.inverse_xg(-log_u)
                } else {
                    law.atom
                }
            }
            Distribution::TwoPoint { a, b, p } => {
                if log_u < p.ln() {
                    -a
                } else {
                    *b
                }
            }
            Distribution::Constant(c) => *c,
        }
    }

    pub fn quantile(&self, u: f64) -> f64 {
        self.quantile_log(u.ln())
    }

    /// Draw from the law of `V` conditioned on `{-V >= theta}`, driven by `u`.
    pub fn conditional_quantile(&self, u: f64, theta: f64) -> Result<f64> {
        let log_p = self.log_tail_ge(theta);
        if log_p == f64::NEG_INFINITY {
            return Err(Error::Domain(format!("threshold {theta} lies beyond the support of -V")));
        }
        Ok(self.quantile_log(u.ln() + log_p))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.sample(Open01);
        self.quantile(u)
    }

    pub fn mean(&self) -> f64 {
        match self {
            Distribution::Tail(law) => -law.log_s.exp_m1() * law.atom - law.negative_mean,
            Distribution::TwoPoint { a, b, p } => -p * a + (1.0 - p) * b,
            Distribution::Constant(c) => *c,
        }
    }

    /// `ln Q(exp(-eta V))`, computed by quadrature over the explicit law.
    pub fn log_mgf_negative(&self, eta: f64) -> Result<f64> {
        match self {
            Distribution::TwoPoint { a, b, p } => Ok(log_sum_exp(&[p.ln() + eta * a, (1.0 - p).ln() - eta * b])),
            Distribution::Constant(c) => Ok(-eta * c),
            Distribution::Tail(law) => law.log_mgf_negative(eta),
        }
    }
}

impl TailLaw {
    fn build(g: TailFn, x_bar: f64) -> Result<Self> {
        let g_bar = g.eval(x_bar);
        let log_s = -x_bar * g_bar;
        if !(log_s < 0.0) || !log_s.is_finite() {
            return Err(Error::InvalidModel(format!("x̄ G(x̄) must be positive and finite, got {}", -log_s)));
        }
        // ∫_{x̄}^∞ exp(-x G(x)) dx, scaled by 1/S.
        let phi = |x: f64| -x * g.eval(x) - log_s;
        let mut far = x_bar * 2.0;
        while phi(far) > -80.0 {
            far *= 2.0;
            if !far.is_finite() {
                return Err(Error::InvalidModel("tail mass does not decay".into()));
            }
        }
        let breaks: Vec<f64> = (0..=32).map(|i| x_bar + (far - x_bar) * i as f64 / 32.0).collect();
        let scaled = integrate_with_breaks(|x| phi(x).exp(), &breaks, 0.0, 1e-12)?;
        let s = log_s.exp();
        let negative_mean = s * (x_bar + scaled.value);
        let atom = negative_mean / -log_s.exp_m1();
        Ok(TailLaw { g, x_bar, log_s, atom, negative_mean })
    }

    fn log_mgf_negative(&self, eta: f64) -> Result<f64> {
        if !(eta > 0.0) {
            return Err(Error::Domain(format!("eta must be positive, got {eta}")));
        }
        let log_atom_mass = log1m_exp(self.log_s);
        let atom_term = log_atom_mass - eta * self.atom;
        let boundary_term = eta * self.x_bar + self.log_s;

        // eta ∫_{x̄}^∞ exp(eta x - x G(x)) dx, evaluated relative to its peak.
        let psi = |x: f64| x * (eta - self.g.eval(x));
        let past_peak = self.x_bar.max(self.g.inverse(2.0 * eta));
        let n_scan = 512;
        let mut psi_max = f64::NEG_INFINITY;
        let mut x_peak = self.x_bar;
        for i in 0..=n_scan {
            let x = self.x_bar + (past_peak - self.x_bar) * i as f64 / n_scan as f64;
            let v = psi(x);
            if v > psi_max {
                psi_max = v;
                x_peak = x;
            }
        }
        let step = (past_peak - self.x_bar) / n_scan as f64;
        let (lo, hi) = ((x_peak - step).max(self.x_bar), (x_peak + step).min(past_peak));
        x_peak = golden_max(&psi, lo, hi);
        psi_max = psi_max.max(psi(x_peak));
        // beyond `past_peak`, psi(x) <= -eta x
        let far = past_peak.max((80.0 - psi_max) / eta) * 1.01 + 1.0 / eta;
        let mut breaks: Vec<f64> = (0..=64).map(|i| self.x_bar + (far - self.x_bar) * i as f64 / 64.0).collect();
        breaks.push(x_peak);
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        // psi carries absolute rounding of order eps * eta * x
        let rel_tol = (64.0 * f64::EPSILON * eta * far).max(1e-11);
        let scaled = integrate_with_breaks(|x| (psi(x) - psi_max).exp(), &breaks, 0.0, rel_tol)?;
        let integral_term = eta.ln() + psi_max + scaled.value.ln();
        Ok(log_sum_exp(&[atom_term, boundary_term, integral_term]))
    }
}

/// Outcome of comparing the numerical exponential moment with `exp(2η′ G^{inv}(2η′))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MgfCheck {
    pub eta_prime: f64,
    pub log_bound: f64,
    pub log_mgf: f64,
    pub holds: bool,
}

impl MgfCheck {
    pub fn bound(&self) -> f64 {
        self.log_bound.exp()
    }

    pub fn numeric_mgf(&self) -> f64 {
        self.log_mgf.exp()
    }
}

/// Constants derived at construction, recorded in run manifests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    pub q: f64,
    pub eta0: f64,
    pub atom: f64,
    pub mean: f64,
}

/// A fully constructed tail model: `G`, the field law and derived constants.
#[derive(Debug, Clone, PartialEq)]
pub struct TailModel {
    spec: TailSpec,
    dim: usize,
    g: Option<TailFn>,
    dist: Distribution,
    q: f64,
    eta0: f64,
}

impl TailModel {
    pub fn new(spec: TailSpec) -> Result<Self> {
        let dim = spec.dim();
        if dim == 0 {
            return Err(Error::InvalidModel("dimension must be at least 1".into()));
        }
        let (g, dist) = match &spec {
            TailSpec::TwoPoint { a, p, .. } => (None, Distribution::two_point(*a, *p)?),
            other => {
                let (g, x_bar) = build_tail_fn(other, dim)?;
                let law = TailLaw::build(g.clone(), x_bar)?;
                (Some(g), Distribution::Tail(law))
            }
        };
        let mut model = TailModel { spec, dim, g, dist, q: 1.0, eta0: f64::NAN };
        model.q = model.compute_q();
        model.eta0 = model.search_eta0()?;
        Ok(model)
    }

    pub fn spec(&self) -> &TailSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn distribution(&self) -> &Distribution {
        &self.dist
    }

    pub fn tail_fn(&self) -> Option<&TailFn> {
        self.g.as_ref()
    }

    pub fn kind_name(&self) -> &'static str {
        self.spec.kind_name()
    }

    pub fn x_bar(&self) -> Option<f64> {
        match &self.dist {
            Distribution::Tail(law) => Some(law.x_bar),
            _ => None,
        }
    }

    /// Cover constant with `Q(-V >= t) >= q exp(-t G(t))` for all `t >= 0`.
    pub fn q(&self) -> f64 {
        self.q
    }

    /// Threshold above which the exponential-moment bound holds numerically.
    pub fn eta0(&self) -> f64 {
        self.eta0
    }

    pub fn derived(&self) -> DerivedConstants {
        let atom = match &self.dist {
            Distribution::Tail(law) => law.atom,
            Distribution::TwoPoint { b, .. } => *b,
            Distribution::Constant(c) => *c,
        };
        DerivedConstants { q: self.q, eta0: self.eta0, atom, mean: self.dist.mean() }
    }

    fn require_g(&self) -> Result<&TailFn> {
        self.g.as_ref().ok_or(Error::NoTailFunction { kind: self.kind_name() })
    }

    pub fn g_eval(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(Error::Domain(format!("G is evaluated at positive x, got {x}")));
        }
        Ok(self.require_g()?.eval(x))
    }

    pub fn g_inverse(&self, z: f64) -> Result<f64> {
        if !(z >= 0.0) {
            return Err(Error::Domain(format!("G^inv is evaluated at z >= 0, got {z}")));
        }
        Ok(self.require_g()?.inverse(z))
    }

    /// `f(x) = G(x) / x^d`.
    pub fn f_eval(&self, x: f64) -> Result<f64> {
        Ok(self.g_eval(x)? / x.powi(self.dim as i32))
    }

    /// `Q(-V > x)` for `x >= 0`.
    pub fn tail_prob(&self, x: f64) -> Result<f64> {
        if !(x >= 0.0) {
            return Err(Error::Domain(format!("tail probability is defined for x >= 0, got {x}")));
        }
        Ok(self.dist.log_tail_gt(x).exp())
    }

    /// Inverse used for thresholds `-V >= θ`: `G^{inv}` for tail kinds and the
    /// negative atom magnitude for the two-point law (every `θ ∈ (0, a]` selects
    /// the same event there).
    pub fn threshold_inverse(&self, z: f64) -> Result<f64> {
        match (&self.g, &self.dist) {
            (Some(g), _) => Ok(g.inverse(z)),
            (None, Distribution::TwoPoint { a, .. }) => Ok(*a),
            _ => Err(Error::NoTailFunction { kind: self.kind_name() }),
        }
    }

    pub fn f_monotonicity(&self) -> Monotonicity {
        match &self.spec {
            TailSpec::Power { alpha, dim, .. } => power_monotonicity(*alpha, *dim),
            TailSpec::Linear { dim, .. } => power_monotonicity(1.0, *dim),
            TailSpec::LogCorrected { beta, .. } => {
                if *beta == 0.0 {
                    Monotonicity::Constant
                } else {
                    Monotonicity::NonIncreasing
                }
            }
            TailSpec::TwoPoint { .. } => Monotonicity::Undefined,
            TailSpec::Custom { .. } => match &self.g {
                Some(TailFn::Table { slopes, .. }) => {
                    let d = self.dim as f64;
                    let tol = 1e-12;
                    let up = slopes.iter().all(|s| s - d >= -tol);
                    let down = slopes.iter().all(|s| s - d <= tol);
                    match (up, down) {
                        (true, true) => Monotonicity::Constant,
                        (true, false) => Monotonicity::NonDecreasing,
                        (false, true) => Monotonicity::NonIncreasing,
                        (false, false) => Monotonicity::NonMonotone,
                    }
                }
                _ => Monotonicity::NonMonotone,
            },
        }
    }

    /// Checks `Q(e^{-η′V}) <= exp(2η′ G^{inv}(2η′))` for `η′ > η₀`.
    pub fn mgf_upper_bound_check(&self, eta_prime: f64) -> Result<MgfCheck> {
        if !(eta_prime > self.eta0) {
            return Err(Error::Precondition(format!(
                "the moment bound is asserted only above eta0 = {}, got {eta_prime}",
                self.eta0
            )));
        }
        self.mgf_check_unchecked(eta_prime)
    }

    fn mgf_check_unchecked(&self, eta_prime: f64) -> Result<MgfCheck> {
        let log_bound = 2.0 * eta_prime * self.threshold_inverse(2.0 * eta_prime)?;
        let log_mgf = self.dist.log_mgf_negative(eta_prime)?;
        Ok(MgfCheck { eta_prime, log_bound, log_mgf, holds: log_mgf <= log_bound })
    }

    fn compute_q(&self) -> f64 {
        match (&self.dist, &self.g) {
            (Distribution::Tail(law), Some(g)) => {
                let n = 10_000;
                let top = law.x_bar * (1.0 + 1e-6);
                (0..=n)
                    .map(|i| {
                        let t = top * i as f64 / n as f64;
                        (self.dist.log_tail_ge(t) + t * g.eval(t)).exp()
                    })
                    .fold(1.0, f64::min)
            }
            (Distribution::TwoPoint { p, .. }, _) => *p,
            _ => 1.0,
        }
    }

    fn search_eta0(&self) -> Result<f64> {
        // 20 points per decade over [1e-3, 1e4]
        let grid: Vec<f64> = (-60..=80).map(|k| 10f64.powf(k as f64 / 20.0)).collect();
        let mut first_ok = None;
        for (i, &eta) in grid.iter().enumerate().rev() {
            if self.mgf_check_unchecked(eta)?.holds {
                first_ok = Some(i);
            } else {
                break;
            }
        }
        match first_ok {
            Some(i) => Ok(2.0 * grid[i]),
            None => Err(Error::InvalidModel("moment bound fails on the whole search grid".into())),
        }
    }
}

fn power_monotonicity(alpha: f64, dim: usize) -> Monotonicity {
    let d = dim as f64;
    if alpha < d {
        Monotonicity::NonIncreasing
    } else if alpha > d {
        Monotonicity::NonDecreasing
    } else {
        Monotonicity::Constant
    }
}

fn check_x_bar(x_bar: f64, min: f64) -> Result<()> {
    if !(x_bar.is_finite() && x_bar > 0.0 && x_bar >= min) {
        return Err(Error::InvalidModel(format!("x_bar must be finite and >= {min}, got {x_bar}")));
    }
    Ok(())
}

fn build_tail_fn(spec: &TailSpec, dim: usize) -> Result<(TailFn, f64)> {
    match spec {
        TailSpec::Power { alpha, x_bar, .. } => {
            if !(alpha.is_finite() && *alpha > 0.0) {
                return Err(Error::InvalidModel(format!("power exponent must be positive, got {alpha}")));
            }
            check_x_bar(*x_bar, 0.0)?;
            Ok((TailFn::Power { scale: 1.0, alpha: *alpha }, *x_bar))
        }
        TailSpec::Linear { slope, x_bar, .. } => {
            if !(slope.is_finite() && *slope > 0.0) {
                return Err(Error::InvalidModel(format!("slope must be positive, got {slope}")));
            }
            check_x_bar(*x_bar, 0.0)?;
            Ok((TailFn::Power { scale: *slope, alpha: 1.0 }, *x_bar))
        }
        TailSpec::LogCorrected { beta, x_bar, .. } => {
            if !(0.0..1.0).contains(beta) {
                return Err(Error::InvalidModel(format!("beta must lie in [0, 1), got {beta}")));
            }
            // strictly increasing from e onwards for every beta in [0, 1)
            check_x_bar(*x_bar, std::f64::consts::E)?;
            Ok((TailFn::LogCorrected { beta: *beta, dim }, *x_bar))
        }
        TailSpec::Custom { points, x_bar, .. } => {
            if points.len() < 2 {
                return Err(Error::InvalidModel("custom G needs at least two knots".into()));
            }
            let mut ln_x = Vec::with_capacity(points.len());
            let mut ln_g = Vec::with_capacity(points.len());
            for &(x, g) in points {
                if !(x > 0.0 && g > 0.0 && x.is_finite() && g.is_finite()) {
                    return Err(Error::InvalidModel(format!("custom knot ({x}, {g}) must be positive")));
                }
                ln_x.push(x.ln());
                ln_g.push(g.ln());
            }
            let mut slopes = vec![0.0; points.len() + 1];
            for k in 1..points.len() {
                let dx = ln_x[k] - ln_x[k - 1];
                let dg = ln_g[k] - ln_g[k - 1];
                if !(dx > 0.0 && dg > 0.0) {
                    return Err(Error::InvalidModel("custom knots must be strictly increasing in x and G".into()));
                }
                slopes[k] = dg / dx;
            }
            slopes[0] = slopes[1];
            slopes[points.len()] = slopes[points.len() - 1];
            check_x_bar(*x_bar, 0.0)?;
            Ok((TailFn::Table { ln_x, ln_g, slopes }, *x_bar))
        }
        TailSpec::TwoPoint { .. } => unreachable!("two-point has no tail function"),
    }
}

fn golden_max<F: Fn(f64) -> f64>(f: &F, mut lo: f64, mut hi: f64) -> f64 {
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut a = hi - ratio * (hi - lo);
    let mut b = lo + ratio * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..200 {
        if hi - lo <= 1e-15 * hi.abs().max(1.0) {
            break;
        }
        if fa < fb {
            lo = a;
            a = b;
            fa = fb;
            b = lo + ratio * (hi - lo);
            fb = f(b);
        } else {
            hi = b;
            b = a;
            fb = fa;
            a = hi - ratio * (hi - lo);
            fa = f(a);
        }
    }
    0.5 * (lo + hi)
}

/// Finds `x` with `G(x) = z` by plain bisection on an explicit bracket.
pub fn bracketed_inverse(g: &TailFn, z: f64, lo: f64, hi: f64) -> f64 {
    bisect_increasing(|x| g.eval(x), z, lo, hi, 1e-15)
}
