//! Regularity machinery for low-degree polynomials over small prime fields.
//!
//! The crate is organised around a few layers:
//!
//! * [`algebra`] — exact arithmetic: `F_p`, sparse polynomials identified
//!   with functions `F^n -> F`, additive derivatives, interpolation.
//! * [`estimators`] — bias, Gowers norms and derivative distributions, in
//!   exact (enumeration) and seeded Monte Carlo modes.
//! * [`factor`] — polynomial factors, their atoms, measurability witnesses
//!   and consistency spaces.
//! * [`bv`] — the sampling-based approximation of a biased polynomial by a
//!   function of its derivatives.
//! * [`refine`] — regularity checks and the three refinement loops
//!   (unbiased, uniform, strongly unbiased).
//! * [`apps`] — the end-to-end pipelines: correlated multiples, factors from
//!   bias or Gowers norms, Goldreich–Levin over `F_p`, Reed–Muller decoding
//!   under structured polynomial noise, and the worst-case to average-case
//!   reduction.
//! * [`io`] — the line-oriented `.poly` and `.fac` fixture formats.
//!
//! Everything randomized takes an explicit 64-bit seed and derives its
//! streams from (seed, index) pairs, so reports are reproducible across
//! runs and platforms.

pub mod algebra;
pub mod apps;
pub mod bv;
pub mod error;
pub mod estimators;
pub mod factor;
pub mod io;
pub mod refine;

pub use error::{Error, Result};
