//! The hyperplane-doubling path family and its exact visit-count bounds.
//!
//! Starting from `S_0 = {0}`, each step either splits every point of the
//! active hyperplane `{x_c = l}` into `x ± e_c` or pushes the point one unit
//! away from that hyperplane. Over one sweep through all coordinates every
//! side length of the current cube doubles.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{is_neighbor, Point};

/// Upper bound on the number of paths materialized by [`PathFamily::paths`].
pub const MAX_LISTED_PATHS: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathFamily {
    dim: usize,
    horizon: usize,
    frontiers: Vec<Vec<Point>>,
    parents: Vec<Vec<u32>>,
    coords: Vec<usize>,
    levels: Vec<i32>,
    cycle_starts: Vec<usize>,
}

impl PathFamily {
    pub fn build(dim: usize, horizon: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Domain("dimension must be at least 1".into()));
        }
        let mut frontiers = vec![vec![vec![0i32; dim]]];
        let mut parents = vec![Vec::new()];
        let mut coords = Vec::with_capacity(horizon);
        let mut levels = Vec::with_capacity(horizon);
        let mut cycle_starts = vec![0];
        let mut c = 0usize;
        let mut l = 0i32;
        for t in 0..horizon {
            coords.push(c);
            levels.push(l);
            let current = &frontiers[t];
            let mut children: Vec<(Point, u32)> = Vec::with_capacity(current.len() * 2);
            for (k, x) in current.iter().enumerate() {
                let shifts: &[i32] = match x[c].cmp(&l) {
                    std::cmp::Ordering::Equal => &[-1, 1],
                    std::cmp::Ordering::Less => &[-1],
                    std::cmp::Ordering::Greater => &[1],
                };
                for &s in shifts {
                    let mut y = x.clone();
                    y[c] += s;
                    children.push((y, k as u32));
                }
            }
            children.sort();
            assert!(
                children.windows(2).all(|w| w[0].0 != w[1].0),
                "two points of S_{t} share a successor"
            );
            let mut literal: Vec<Point> = current
                .iter()
                .flat_map(|x| {
                    [-1, 1].into_iter().map(move |s| {
                        let mut y = x.clone();
                        y[c] += s;
                        y
                    })
                })
                .collect();
            literal.sort();
            literal.dedup();
            assert!(
                literal.len() == children.len() && literal.iter().zip(&children).all(|(a, b)| *a == b.0),
                "successor union differs from the ±e_c image at t = {t}"
            );

            let (next, links): (Vec<Point>, Vec<u32>) = children.into_iter().unzip();
            let top = next.iter().map(|y| y[c]).max().expect("non-empty frontier");
            if l + 3 <= top {
                l += 3;
            } else {
                c = (c + 1) % dim;
                l = next.iter().map(|y| y[c]).min().expect("non-empty frontier");
                if c == 0 {
                    cycle_starts.push(t + 1);
                }
            }
            frontiers.push(next);
            parents.push(links);
        }
        Ok(PathFamily { dim, horizon, frontiers, parents, coords, levels, cycle_starts })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// `S_t`, in lexicographic order.
    pub fn frontier(&self, t: usize) -> &[Point] {
        &self.frontiers[t]
    }

    /// Index into `S_{t-1}` of the parent of `S_t[k]`.
    pub fn parent(&self, t: usize, k: usize) -> usize {
        self.parents[t][k] as usize
    }

    /// Active coordinate (0-based) and level used for the step `t → t + 1`.
    pub fn step_rule(&self, t: usize) -> (usize, i32) {
        (self.coords[t], self.levels[t])
    }

    /// Times `σ_0 < σ_1 < ...` at which a sweep through all coordinates begins.
    pub fn checkpoints(&self) -> &[usize] {
        &self.cycle_starts
    }

    /// `n_{t'}(t, x)` for every `x ∈ S_t` (aligned with `frontier(t)`) and every `t <= t'`.
    pub fn visit_count_layers(&self, t_prime: usize) -> Result<Vec<Vec<u64>>> {
        if t_prime > self.horizon {
            return Err(Error::Domain(format!("t' = {t_prime} exceeds the horizon {}", self.horizon)));
        }
        let mut layers = vec![Vec::new(); t_prime + 1];
        layers[t_prime] = vec![1u64; self.frontiers[t_prime].len()];
        for s in (1..=t_prime).rev() {
            let mut below = vec![0u64; self.frontiers[s - 1].len()];
            for (k, &n) in layers[s].iter().enumerate() {
                below[self.parents[s][k] as usize] += n;
            }
            layers[s - 1] = below;
        }
        Ok(layers)
    }

    pub fn visit_counts(&self, t: usize, t_prime: usize) -> Result<VisitCountTable> {
        if t > t_prime {
            return Err(Error::Domain(format!("visit counts need t <= t', got t = {t}, t' = {t_prime}")));
        }
        let counts = self.visit_count_layers(t_prime)?.swap_remove(t);
        Ok(VisitCountTable { t, t_prime, sites: self.frontiers[t].clone(), counts })
    }

    /// The family path ending at `S_t[k]`, as positions `γ(0), ..., γ(t)`.
    pub fn path_to(&self, t: usize, k: usize) -> Vec<Point> {
        let mut path = vec![Point::new(); t + 1];
        let mut idx = k;
        for s in (0..=t).rev() {
            path[s] = self.frontiers[s][idx].clone();
            if s > 0 {
                idx = self.parents[s][idx] as usize;
            }
        }
        path
    }

    /// All paths of `Γ̃_M`, ordered like `S_M`.
    pub fn paths(&self) -> Result<Vec<Vec<Point>>> {
        let n = self.frontiers[self.horizon].len();
        if n > MAX_LISTED_PATHS {
            return Err(Error::SizeGuard { what: "family paths", size: n as u128, limit: MAX_LISTED_PATHS as u128 });
        }
        Ok((0..n).map(|k| self.path_to(self.horizon, k)).collect())
    }

    /// Writes one path per line: points separated by commas, coordinates by spaces.
    pub fn dump_paths<W: Write>(&self, mut out: W) -> Result<()> {
        for path in self.paths()? {
            let line = path
                .iter()
                .map(|x| x.iter().map(i32::to_string).collect::<Vec<_>>().join(" "))
                .collect::<Vec<_>>()
                .join(",");
            writeln!(out, "{line}").map_err(|e| Error::Unsupported(format!("write failed: {e}")))?;
        }
        Ok(())
    }

    /// Checks the three visit-count bounds for this `t'` with exact integer arithmetic.
    pub fn verify_counting_bounds(&self, t_prime: usize) -> Result<CountingReport> {
        if t_prime == 0 {
            return Err(Error::Precondition("the visit-count bounds are stated for t' >= 1".into()));
        }
        let d = self.dim as u32;
        let overflow = || Error::SizeGuard { what: "bound arithmetic", size: u128::MAX, limit: u128::MAX };
        let pow = |base: u128, e: u32| base.checked_pow(e).ok_or_else(overflow);
        let mul = |a: u128, b: u128| a.checked_mul(b).ok_or_else(overflow);

        let layers = self.visit_count_layers(t_prime)?;
        let size_t_prime = self.frontiers[t_prime].len() as u128;
        let bound_i = mul(pow(4 + 4 * d as u128, d)?, pow(t_prime as u128, d)?)?;
        let bound_iii = mul(pow(4 * d as u128, 2 * d)?, size_t_prime)?;
        let mut report = CountingReport { t_prime, checked: 0, violations: Vec::new() };
        for (t, counts) in layers.iter().enumerate() {
            let size_t = self.frontiers[t].len() as u128;
            let lhs_ii = mul(size_t, pow(2 * d as u128, d)?)?;
            let rhs_ii = pow(t as u128 + d as u128, d)?;
            report.checked += 1;
            if lhs_ii < rhs_ii {
                report.violations.push(Violation { bound: 2, t, x: None, lhs: lhs_ii, rhs: rhs_ii });
            }
            let scale = pow(1 + t as u128, d)?;
            for (k, &n) in counts.iter().enumerate() {
                let lhs = mul(n as u128, scale)?;
                report.checked += 2;
                if lhs > bound_i {
                    report.violations.push(Violation { bound: 1, t, x: Some(self.frontiers[t][k].clone()), lhs, rhs: bound_i });
                }
                if lhs > bound_iii {
                    report.violations.push(Violation { bound: 3, t, x: Some(self.frontiers[t][k].clone()), lhs, rhs: bound_iii });
                }
            }
        }
        Ok(report)
    }
}

/// `n_{t'}(t, x)` for one `(t, t')`, aligned with `S_t`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VisitCountTable {
    pub t: usize,
    pub t_prime: usize,
    pub sites: Vec<Point>,
    pub counts: Vec<u64>,
}

impl VisitCountTable {
    pub fn get(&self, x: &[i32]) -> u64 {
        self.sites.binary_search_by(|s| s.as_slice().cmp(x)).map(|k| self.counts[k]).unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// One failed integer comparison. Bound `1`: `n (1+t)^d <= (4+4d)^d t'^d`;
/// bound `2`: `|S_t| (2d)^d >= (t+d)^d`; bound `3`: `n (1+t)^d <= (4d)^{2d} |S_{t'}|`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub bound: u8,
    pub t: usize,
    pub x: Option<Point>,
    pub lhs: u128,
    pub rhs: u128,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CountingReport {
    pub t_prime: usize,
    pub checked: usize,
    pub violations: Vec<Violation>,
}

impl CountingReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks that every stored parent link is a nearest-neighbour step.
pub fn links_are_nearest_neighbour(family: &PathFamily) -> bool {
    (1..=family.horizon()).all(|t| {
        family
            .frontier(t)
            .iter()
            .enumerate()
            .all(|(k, y)| is_neighbor(&family.frontier(t - 1)[family.parent(t, k)], y))
    })
}
