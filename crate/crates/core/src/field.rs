//! Random environments `V(t, x)`: lazily sampled, conditioned, constant and
//! tabulated fields, plus the text dump format.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::lattice::{cone_layer, in_cone, Point};
use crate::rng::SiteStreams;
use crate::tail::Distribution;

/// Read access to a space-time field.
pub trait Environment: Sync {
    fn dim(&self) -> usize;
    fn value(&self, t: usize, x: &[i32]) -> Result<f64>;
}

impl<E: Environment + ?Sized> Environment for &E {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn value(&self, t: usize, x: &[i32]) -> Result<f64> {
        (**self).value(t, x)
    }
}

/// IID field drawn site by site from counter-addressed uniforms.
///
/// Nothing is stored; `value(t, x)` always regenerates the same number.
#[derive(Debug, Clone)]
pub struct SampledField {
    dist: Distribution,
    streams: SiteStreams,
    dim: usize,
}

impl SampledField {
    pub fn new(dist: Distribution, dim: usize, seed: u64, replica: u64) -> Self {
        SampledField { dist, streams: SiteStreams::new(seed, replica), dim }
    }

    pub fn distribution(&self) -> &Distribution {
        &self.dist
    }

    pub fn uniform(&self, t: usize, x: &[i32]) -> f64 {
        self.streams.uniform(t, x)
    }
}

impl Environment for SampledField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, t: usize, x: &[i32]) -> Result<f64> {
        Ok(self.dist.quantile(self.streams.uniform(t, x)))
    }
}

/// A sampled field conditioned on `-V(t, x) >= thresholds[t]` for every cone
/// site with `t < thresholds.len()`.
///
/// The same uniforms drive both the conditioned and the free sites, so the
/// unconditioned part coincides with the underlying `SampledField`.
#[derive(Debug, Clone)]
pub struct ConditionedField {
    base: SampledField,
    thresholds: Vec<f64>,
}

impl ConditionedField {
    pub fn new(base: SampledField, thresholds: Vec<f64>) -> Self {
        ConditionedField { base, thresholds }
    }
}

impl Environment for ConditionedField {
    fn dim(&self) -> usize {
        self.base.dim
    }

    fn value(&self, t: usize, x: &[i32]) -> Result<f64> {
        let u = self.base.uniform(t, x);
        match self.thresholds.get(t) {
            Some(&theta) if in_cone(t, x) => self.base.dist.conditional_quantile(u, theta),
            _ => Ok(self.base.dist.quantile(u)),
        }
    }
}

/// `V ≡ value`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantField {
    pub dim: usize,
    pub value: f64,
}

impl Environment for ConstantField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, _t: usize, _x: &[i32]) -> Result<f64> {
        Ok(self.value)
    }
}

/// Provenance written into field dumps.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FieldHeader {
    pub seed: u64,
    pub replica: u64,
    pub model_hash: String,
}

/// An explicitly stored field on the cone `L_0, ..., L_{horizon-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldTable {
    dim: usize,
    horizon: usize,
    pub header: FieldHeader,
    layers: Vec<Vec<f64>>,
    index: Vec<HashMap<Point, usize>>,
}

const DUMP_MAGIC: &str = "# polymer-ldp field v1";

impl FieldTable {
    /// Values for `L_t` are given in `cone_layer` order.
    pub fn from_layers(dim: usize, layers: Vec<Vec<f64>>) -> Result<Self> {
        let horizon = layers.len();
        let mut index = Vec::with_capacity(horizon);
        for (t, values) in layers.iter().enumerate() {
            let sites = cone_layer(dim, t);
            if sites.len() != values.len() {
                return Err(Error::Domain(format!(
                    "layer {t} needs {} values, got {}",
                    sites.len(),
                    values.len()
                )));
            }
            index.push(sites.into_iter().enumerate().map(|(k, x)| (x, k)).collect());
        }
        Ok(FieldTable { dim, horizon, header: FieldHeader::default(), layers, index })
    }

    /// Materializes `env` on the cone up to (excluding) time `horizon`.
    pub fn from_env<E: Environment>(env: &E, horizon: usize) -> Result<Self> {
        let dim = env.dim();
        let layers = (0..horizon)
            .map(|t| cone_layer(dim, t).iter().map(|x| env.value(t, x)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Self::from_layers(dim, layers)
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn layer(&self, t: usize) -> &[f64] {
        &self.layers[t]
    }

    pub fn dump<W: Write>(&self, mut out: W) -> Result<()> {
        let io = |e: std::io::Error| Error::Unsupported(format!("write failed: {e}"));
        writeln!(out, "{DUMP_MAGIC}").map_err(io)?;
        writeln!(
            out,
            "# seed={} replica={} model_hash={} dim={} horizon={}",
            self.header.seed, self.header.replica, self.header.model_hash, self.dim, self.horizon
        )
        .map_err(io)?;
        writeln!(out, "t,x_index,value").map_err(io)?;
        for (t, values) in self.layers.iter().enumerate() {
            for (k, v) in values.iter().enumerate() {
                writeln!(out, "{t},{k},{v}").map_err(io)?;
            }
        }
        Ok(())
    }

    pub fn load<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines().enumerate();
        let mut next_line = || -> Result<Option<(usize, String)>> {
            match lines.next() {
                None => Ok(None),
                Some((n, Ok(s))) => Ok(Some((n + 1, s))),
                Some((n, Err(e))) => Err(Error::Parse { line: n + 1, msg: e.to_string() }),
            }
        };
        let bad = |line: usize, msg: &str| Error::Parse { line, msg: msg.to_string() };
        match next_line()? {
            Some((_, s)) if s.trim() == DUMP_MAGIC => {}
            Some((n, _)) => return Err(bad(n, "missing field dump header")),
            None => return Err(bad(1, "empty input")),
        }
        let (n, meta) = next_line()?.ok_or_else(|| bad(2, "missing metadata line"))?;
        let mut header = FieldHeader::default();
        let (mut dim, mut horizon) = (None, None);
        for kv in meta.trim_start_matches('#').split_whitespace() {
            let (k, v) = kv.split_once('=').ok_or_else(|| bad(n, "malformed metadata"))?;
            let num = || v.parse::<u64>().map_err(|_| bad(n, "malformed number"));
            match k {
                "seed" => header.seed = num()?,
                "replica" => header.replica = num()?,
                "model_hash" => header.model_hash = v.to_string(),
                "dim" => dim = Some(num()? as usize),
                "horizon" => horizon = Some(num()? as usize),
                _ => return Err(bad(n, "unknown metadata key")),
            }
        }
        let (dim, horizon) = match (dim, horizon) {
            (Some(d), Some(h)) if d >= 1 => (d, h),
            _ => return Err(bad(n, "dim and horizon are required")),
        };
        match next_line()? {
            Some((_, s)) if s.trim() == "t,x_index,value" => {}
            Some((n, _)) => return Err(bad(n, "missing column header")),
            None => return Err(bad(n + 1, "missing column header")),
        }
        let mut layers: Vec<Vec<Option<f64>>> = (0..horizon).map(|t| vec![None; cone_layer(dim, t).len()]).collect();
        while let Some((n, line)) = next_line()? {
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let mut field = |what: &str| parts.next().map(str::trim).ok_or_else(|| bad(n, what));
            let t: usize = field("missing t")?.parse().map_err(|_| bad(n, "bad t"))?;
            let k: usize = field("missing x_index")?.parse().map_err(|_| bad(n, "bad x_index"))?;
            let v: f64 = field("missing value")?.parse().map_err(|_| bad(n, "bad value"))?;
            let slot = layers
                .get_mut(t)
                .and_then(|l| l.get_mut(k))
                .ok_or_else(|| bad(n, "site outside the cone"))?;
            if slot.replace(v).is_some() {
                return Err(bad(n, "duplicate site"));
            }
        }
        let layers = layers
            .into_iter()
            .enumerate()
            .map(|(t, l)| {
                l.into_iter()
                    .collect::<Option<Vec<_>>>()
                    .ok_or_else(|| Error::Parse { line: 0, msg: format!("layer {t} is incomplete") })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut table = Self::from_layers(dim, layers)?;
        table.header = header;
        Ok(table)
    }
}

impl Environment for FieldTable {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, t: usize, x: &[i32]) -> Result<f64> {
        self.index
            .get(t)
            .and_then(|m| m.get(x))
            .map(|&k| self.layers[t][k])
            .ok_or_else(|| Error::MissingSite { t, x: x.to_vec() })
    }
}
