//! Directed polymers in heavy-tailed random environments: tail models, exact
//! partition-function evaluation, the doubling path family, rate functionals
//! and rare-event estimators.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod error;
pub mod field;
pub mod gamma;
pub mod lattice;
pub mod numeric;
pub mod polymer;
pub mod rare;
pub mod rate;
pub mod rng;
pub mod tail;

pub use error::{Error, Result};
pub use field::{ConditionedField, ConstantField, Environment, FieldHeader, FieldTable, SampledField};
pub use gamma::{CountingReport, PathFamily, VisitCountTable};
pub use lattice::{LayerGraph, Point};
pub use polymer::{
    block_log_partition, enumerate_walks, free_energy_estimate, is_epsilon_good, last_passage, log_partition, path_energy,
    restricted_log_partition, FreeEnergyEstimate, Mode, PathWeightMatrix, Region,
};
pub use rare::{ConeBound, ConeEvent, ExactLaw, Proportion, RateFit, RatePoint};
pub use rate::{classify_regime, rate_functional, ClassifyOptions, RateProfile, Regime, RegimeVerdict};
pub use rng::SiteStreams;
pub use tail::{DerivedConstants, Distribution, MgfCheck, Monotonicity, TailFn, TailModel, TailSpec};
