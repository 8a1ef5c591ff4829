//! Space-time lattice geometry: cone layers, corridors and pinned boxes.

use std::collections::HashMap;

/// A lattice point of `Z^d`.
pub type Point = Vec<i32>;

pub fn l1_norm(x: &[i32]) -> i64 {
    x.iter().map(|&v| (v as i64).abs()).sum()
}

pub fn l1_distance(x: &[i32], y: &[i32]) -> i64 {
    x.iter().zip(y).map(|(&a, &b)| (a as i64 - b as i64).abs()).sum()
}

pub fn is_neighbor(x: &[i32], y: &[i32]) -> bool {
    x.len() == y.len() && l1_distance(x, y) == 1
}

/// The `2d` nearest neighbours of `x`, in the fixed order `x - e_0, x + e_0, x - e_1, ...`.
pub fn neighbors(x: &[i32]) -> impl Iterator<Item = Point> + '_ {
    (0..x.len()).flat_map(move |i| {
        [-1, 1].into_iter().map(move |s| {
            let mut y = x.to_vec();
            y[i] += s;
            y
        })
    })
}

/// `L_t = {x : |x|₁ <= t, |x|₁ ≡ t mod 2}` in lexicographic order.
pub fn cone_layer(dim: usize, t: usize) -> Vec<Point> {
    let mut out = Vec::new();
    let mut x = vec![0i32; dim];
    fill_layer(&mut x, 0, t as i64, t as i64, &mut out);
    out
}

fn fill_layer(x: &mut Point, i: usize, budget: i64, t: i64, out: &mut Vec<Point>) {
    if i == x.len() {
        if (t - budget) % 2 == t % 2 {
            out.push(x.clone());
        }
        return;
    }
    for v in -budget..=budget {
        x[i] = v as i32;
        fill_layer(x, i + 1, budget - v.abs(), t, out);
    }
    x[i] = 0;
}

pub fn in_cone(t: usize, x: &[i32]) -> bool {
    let n = l1_norm(x);
    n <= t as i64 && (t as i64 - n) % 2 == 0
}

/// Layered reachability graph of a nearest-neighbour walk.
///
/// Layer `0` holds the start point; layer `s + 1` holds every admissible
/// neighbour of layer `s`. Each site stores the indices of its admissible
/// predecessors, in `neighbors` order.
#[derive(Debug, Clone)]
pub struct LayerGraph {
    dim: usize,
    layers: Vec<Vec<Point>>,
    index: Vec<HashMap<Point, usize>>,
    pred_offsets: Vec<Vec<u32>>,
    preds: Vec<Vec<u32>>,
}

impl LayerGraph {
    /// Builds `steps + 1` layers from `start`, keeping sites with `admit(s, y)`.
    pub fn build<F>(start: &[i32], steps: usize, admit: F) -> Self
    where
        F: Fn(usize, &[i32]) -> bool,
    {
        let dim = start.len();
        let mut layers = vec![vec![start.to_vec()]];
        let mut index = vec![HashMap::from([(start.to_vec(), 0usize)])];
        let mut pred_offsets = vec![vec![0u32, 0u32]];
        let mut preds = vec![Vec::new()];
        for s in 0..steps {
            let prev = &layers[s];
            let prev_index = &index[s];
            let mut next: Vec<Point> = prev
                .iter()
                .flat_map(|x| neighbors(x).collect::<Vec<_>>())
                .filter(|y| admit(s + 1, y))
                .collect();
            next.sort_unstable();
            next.dedup();
            let mut offsets = Vec::with_capacity(next.len() + 1);
            let mut list = Vec::new();
            offsets.push(0u32);
            for y in &next {
                for x in neighbors(y) {
                    if let Some(&k) = prev_index.get(&x) {
                        list.push(k as u32);
                    }
                }
                offsets.push(list.len() as u32);
            }
            let map = next.iter().enumerate().map(|(k, y)| (y.clone(), k)).collect();
            layers.push(next);
            index.push(map);
            pred_offsets.push(offsets);
            preds.push(list);
        }
        LayerGraph { dim, layers, index, pred_offsets, preds }
    }

    /// The forward cone `L_0, ..., L_steps` from the origin.
    pub fn cone(dim: usize, steps: usize) -> Self {
        Self::build(&vec![0; dim], steps, |_, _| true)
    }

    /// The cone clipped to the corridor `|x|₁ <= width`.
    pub fn corridor(dim: usize, steps: usize, width: i64) -> Self {
        Self::build(&vec![0; dim], steps, |_, y| l1_norm(y) <= width)
    }

    /// Walks from `center` confined to `|y - center|₁ <= radius`.
    pub fn pinned_box(center: &[i32], steps: usize, radius: i64) -> Self {
        Self::build(center, steps, |_, y| l1_distance(y, center) <= radius)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn steps(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn layer(&self, s: usize) -> &[Point] {
        &self.layers[s]
    }

    pub fn position(&self, s: usize, x: &[i32]) -> Option<usize> {
        self.index[s].get(x).copied()
    }

    /// Predecessor indices (into layer `s - 1`) of site `k` of layer `s`.
    pub fn predecessors(&self, s: usize, k: usize) -> &[u32] {
        let off = &self.pred_offsets[s];
        &self.preds[s][off[k] as usize..off[k + 1] as usize]
    }

    pub fn total_sites(&self) -> usize {
        self.layers.iter().map(Vec::len).sum()
    }
}
