//! Transfer-matrix evaluation of `ln Z(T)`, the last-passage value `ζ(T)`,
//! corridor-restricted and block-pinned partition functions.
//!
//! Slices live in log space. Only the current layer is held in memory; the
//! next layer is generated from the admissible neighbours of the current one.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Environment, SampledField};
use crate::lattice::{is_neighbor, l1_distance, l1_norm, neighbors, Point};
use crate::numeric::log_sum_exp;
use crate::tail::Distribution;

const PARALLEL_LAYER: usize = 4096;

/// Which semiring the slice recursion uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    /// `(log-sum-exp, +)` with the `1/(2d)` step weight: `ln Z`.
    LogSum,
    /// `(max, +)` without step weights: `ζ`.
    MaxPlus,
}

/// Spatial constraint on the walk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Region {
    /// Unconstrained walk from the origin.
    Cone,
    /// `|γ(s)|₁ <= width` for all `s`.
    Corridor(i64),
    /// `|γ(s) - center|₁ <= radius`, started from `center`.
    Box { center: Point, radius: i64 },
}

impl Region {
    fn admits(&self, y: &[i32]) -> bool {
        match self {
            Region::Cone => true,
            Region::Corridor(w) => l1_norm(y) <= *w,
            Region::Box { center, radius } => l1_distance(y, center) <= *radius,
        }
    }

    fn start(&self, dim: usize) -> Point {
        match self {
            Region::Box { center, .. } => center.clone(),
            _ => vec![0; dim],
        }
    }
}

/// One slice of the transfer recursion: the log-weights of all walks of the
/// current length, indexed by their endpoint.
#[derive(Debug, Clone)]
pub struct PathWeightMatrix {
    mode: Mode,
    region: Region,
    time_offset: usize,
    step: usize,
    sites: Vec<Point>,
    slice: Vec<f64>,
}

impl PathWeightMatrix {
    /// Starts at relative time `0`, reading field rows from `time_offset` on.
    pub fn new(mode: Mode, region: Region, dim: usize, time_offset: usize) -> Self {
        let start = region.start(dim);
        PathWeightMatrix { mode, region, time_offset, step: 0, sites: vec![start], slice: vec![0.0] }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn sites(&self) -> &[Point] {
        &self.sites
    }

    pub fn slice(&self) -> &[f64] {
        &self.slice
    }

    /// Log-weight of walks currently ending at `x` (`-∞` if none).
    pub fn value_at(&self, x: &[i32]) -> f64 {
        match self.sites.binary_search_by(|s| s.as_slice().cmp(x)) {
            Ok(k) => self.slice[k],
            Err(_) => f64::NEG_INFINITY,
        }
    }

    /// Aggregate over endpoints: `ln Σ` for `LogSum`, `max` for `MaxPlus`.
    pub fn total(&self) -> f64 {
        match self.mode {
            Mode::LogSum => log_sum_exp(&self.slice),
            Mode::MaxPlus => self.slice.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// Extends every walk by one step, collecting `V(time_offset + step, ·)`.
    pub fn advance<E: Environment + ?Sized>(&mut self, env: &E) -> Result<()> {
        let t = self.time_offset + self.step;
        let weighted: Vec<f64> = if self.sites.len() >= PARALLEL_LAYER {
            self.sites
                .par_iter()
                .zip(self.slice.par_iter())
                .map(|(x, &u)| env.value(t, x).map(|v| u + v))
                .collect::<Result<_>>()?
        } else {
            self.sites
                .iter()
                .zip(&self.slice)
                .map(|(x, &u)| env.value(t, x).map(|v| u + v))
                .collect::<Result<_>>()?
        };

        let mut next: Vec<Point> = self
            .sites
            .iter()
            .flat_map(|x| neighbors(x).collect::<Vec<_>>())
            .filter(|y| self.region.admits(y))
            .collect();
        next.sort_unstable();
        next.dedup();

        let index: HashMap<&[i32], usize> = self.sites.iter().enumerate().map(|(k, x)| (x.as_slice(), k)).collect();
        let step_weight = match self.mode {
            Mode::LogSum => -((2 * self.sites[0].len()) as f64).ln(),
            Mode::MaxPlus => 0.0,
        };
        let mode = self.mode;
        let combine = |y: &Point| -> f64 {
            let vals: Vec<f64> = neighbors(y).filter_map(|x| index.get(x.as_slice()).map(|&k| weighted[k])).collect();
            let agg = match mode {
                Mode::LogSum => log_sum_exp(&vals),
                Mode::MaxPlus => vals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            };
            step_weight + agg
        };
        let slice: Vec<f64> = if next.len() >= PARALLEL_LAYER {
            next.par_iter().map(combine).collect()
        } else {
            next.iter().map(combine).collect()
        };
        self.sites = next;
        self.slice = slice;
        self.step += 1;
        Ok(())
    }

    pub fn run<E: Environment + ?Sized>(&mut self, env: &E, steps: usize) -> Result<()> {
        for _ in 0..steps {
            self.advance(env)?;
        }
        Ok(())
    }
}

fn run_total<E: Environment + ?Sized>(env: &E, mode: Mode, region: Region, horizon: usize) -> Result<f64> {
    let mut m = PathWeightMatrix::new(mode, region, env.dim(), 0);
    m.run(env, horizon)?;
    Ok(m.total())
}

/// `ln Z(T)` with `H(T) = Σ_{t<T} V(t, γ(t))`.
pub fn log_partition<E: Environment + ?Sized>(env: &E, horizon: usize) -> Result<f64> {
    run_total(env, Mode::LogSum, Region::Cone, horizon)
}

/// `ζ(T) = max_γ H_γ(T)`.
pub fn last_passage<E: Environment + ?Sized>(env: &E, horizon: usize) -> Result<f64> {
    run_total(env, Mode::MaxPlus, Region::Cone, horizon)
}

/// `ln Z(T)` restricted to walks with `|γ(s)|₁ <= width` for all `s <= T`.
pub fn restricted_log_partition<E: Environment + ?Sized>(env: &E, horizon: usize, width: i64) -> Result<f64> {
    if width < 1 {
        return Err(Error::Domain(format!("corridor half-width must be at least 1, got {width}")));
    }
    run_total(env, Mode::LogSum, Region::Corridor(width), horizon)
}

/// Log-weight of walks started and ended at `center` over `[t1, t2]` that stay
/// within `|γ - center|₁ <= radius`. Infeasible pinnings give `-∞`.
pub fn block_log_partition<E: Environment + ?Sized>(
    env: &E,
    t1: usize,
    t2: usize,
    radius: i64,
    center: &[i32],
) -> Result<f64> {
    if t2 < t1 {
        return Err(Error::Domain(format!("block needs t1 <= t2, got [{t1}, {t2}]")));
    }
    if radius < 0 {
        return Err(Error::Domain(format!("block radius must be non-negative, got {radius}")));
    }
    if center.len() != env.dim() {
        return Err(Error::Domain("block center has the wrong dimension".into()));
    }
    let n = t2 - t1;
    if n == 0 {
        return Ok(0.0);
    }
    if n % 2 == 1 || radius == 0 {
        return Ok(f64::NEG_INFINITY);
    }
    let region = Region::Box { center: center.to_vec(), radius };
    let mut m = PathWeightMatrix::new(Mode::LogSum, region, env.dim(), t1);
    m.run(env, n)?;
    Ok(m.value_at(center))
}

/// Whether the block's pinned partition function reaches `(λ̂ - ε)(t2 - t1)`.
pub fn is_epsilon_good<E: Environment + ?Sized>(
    env: &E,
    t1: usize,
    t2: usize,
    radius: i64,
    center: &[i32],
    lambda_hat: f64,
    eps: f64,
) -> Result<bool> {
    let value = block_log_partition(env, t1, t2, radius, center)?;
    Ok(value >= (lambda_hat - eps) * (t2 - t1) as f64)
}

/// `H_γ(t1, t2) = Σ_{t=t1}^{t2-1} V(t, γ(t - t1))` for a walk given by its
/// positions `γ(0), ..., γ(t2 - t1)`.
pub fn path_energy<E: Environment + ?Sized>(env: &E, path: &[Point], t1: usize, t2: usize) -> Result<f64> {
    if t2 < t1 || path.len() != t2 - t1 + 1 {
        return Err(Error::Domain(format!(
            "path of {} points does not span [{t1}, {t2}]",
            path.len()
        )));
    }
    if let Some(w) = path.windows(2).find(|w| !is_neighbor(&w[0], &w[1])) {
        return Err(Error::Domain(format!("{:?} -> {:?} is not a nearest-neighbour step", w[0], w[1])));
    }
    (t1..t2).map(|t| env.value(t, &path[t - t1])).sum()
}

/// Largest walk count [`enumerate_walks`] accepts.
pub const MAX_ENUMERATED_WALKS: u128 = 1 << 22;

/// `(ln Z(T), ζ(T))` by summing over every nearest-neighbour walk from the origin.
pub fn enumerate_walks<E: Environment + ?Sized>(env: &E, horizon: usize) -> Result<(f64, f64)> {
    let dim = env.dim();
    let count = ((2 * dim) as u128).checked_pow(horizon as u32).unwrap_or(u128::MAX);
    if count > MAX_ENUMERATED_WALKS {
        return Err(Error::SizeGuard { what: "walks", size: count, limit: MAX_ENUMERATED_WALKS });
    }
    let mut energies = Vec::with_capacity(count as usize);
    let mut path = vec![vec![0; dim]];
    collect_energies(env, horizon, &mut path, 0.0, &mut energies)?;
    let zeta = energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_z = log_sum_exp(&energies) - horizon as f64 * ((2 * dim) as f64).ln();
    Ok((log_z, zeta))
}

fn collect_energies<E: Environment + ?Sized>(
    env: &E,
    horizon: usize,
    path: &mut Vec<Point>,
    energy: f64,
    out: &mut Vec<f64>,
) -> Result<()> {
    let t = path.len() - 1;
    if t == horizon {
        out.push(energy);
        return Ok(());
    }
    let here = path[t].clone();
    let next = energy + env.value(t, &here)?;
    for y in neighbors(&here) {
        path.push(y);
        collect_energies(env, horizon, path, next, out)?;
        path.pop();
    }
    Ok(())
}

/// Replica mean and standard error of `ln Z(T) / T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreeEnergyEstimate {
    pub lambda_hat: f64,
    pub stderr: f64,
    pub samples: Vec<f64>,
}

/// Estimates the free energy from `replicas` independent sampled fields.
pub fn free_energy_estimate(
    dist: &Distribution,
    dim: usize,
    horizon: usize,
    replicas: usize,
    seed: u64,
) -> Result<FreeEnergyEstimate> {
    if replicas < 2 {
        return Err(Error::Precondition(format!("need at least 2 replicas, got {replicas}")));
    }
    if horizon == 0 {
        return Err(Error::Domain("horizon must be positive".into()));
    }
    let samples: Vec<f64> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let env = SampledField::new(dist.clone(), dim, seed, r);
            log_partition(&env, horizon).map(|v| v / horizon as f64)
        })
        .collect::<Result<_>>()?;
    let (lambda_hat, stderr) = mean_and_stderr(&samples);
    Ok(FreeEnergyEstimate { lambda_hat, stderr, samples })
}

pub(crate) fn mean_and_stderr(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
