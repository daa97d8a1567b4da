//! End-to-end pipelines assembled from the lower layers: correlated
//! multiples, factors that compute biased or high-Gowers-norm polynomials,
//! Goldreich–Levin decomposition over `F_p`, Reed–Muller decoding under
//! low-degree polynomial noise, and the worst-case to average-case
//! reduction over a given factor.
//!
//! Pipelines run sequentially; every stage derives its seed from the
//! caller's plan through [`branch_seed`](crate::estimators::branch_seed),
//! so a fixed top-level seed freezes every stream. [`decode_rm`] logs one
//! [`StageRecord`] per stage with its seed, wall time and whether the
//! stage's statistics were exact.
//!
//! Promise-style preconditions (a bias or agreement lower bound) are never
//! verified on entry. Instead each pipeline re-measures its conclusion on
//! exit — a measurability check, an exact agreement count — and surfaces a
//! named error when the conclusion fails, rather than returning unflagged
//! garbage.

mod decode;
mod factorize;
mod fourier;

pub use decode::{decode_rm, find_correlated_multiple, find_shift, DecodingResult};
pub use factorize::{bias_to_factor, gowers_to_factor, worst_to_average, BiasMode};
pub use fourier::{goldreich_levin, goldreich_levin_with_limit, FourierEntry, EXHAUSTIVE_LIMIT};

use serde::Serialize;
use std::time::Instant;

/// One stage of a pipeline run: name, the seed its streams derived from,
/// whether its statistics were exact, wall time, and a short summary.
#[derive(Clone, Debug, Serialize)]
pub struct StageRecord {
    pub stage: String,
    pub seed: u64,
    pub exact: bool,
    pub millis: u128,
    pub detail: String,
}

/// Ordered log of the stages a pipeline ran.
#[derive(Clone, Debug, Default, Serialize)]
pub struct PipelineTrace {
    pub stages: Vec<StageRecord>,
}

impl PipelineTrace {
    pub(crate) fn record(
        &mut self,
        stage: &str,
        seed: u64,
        exact: bool,
        started: Instant,
        detail: String,
    ) {
        self.stages.push(StageRecord {
            stage: stage.to_string(),
            seed,
            exact,
            millis: started.elapsed().as_millis(),
            detail,
        });
    }
}
