//! Crate-wide error type.
//!
//! Every fallible operation reports one of these variants; pipeline stages
//! name the stage that failed so a caller can tell a broken promise from a
//! blown budget.

use std::error::Error as StdError;
use std::fmt;

/// Errors surfaced by the algebra, estimation and refinement layers.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Modulus was not a prime in the supported range `2..=65536`.
    NotPrime(u64),
    /// A coefficient, exponent or evaluation point did not match the field
    /// or variable count it was used with.
    DimensionMismatch(String),
    /// Input text (a `.poly` or `.fac` file) failed to parse.
    Parse(String),
    /// The oracle handed to interpolation is not a polynomial of the stated
    /// degree: the interpolant disagrees with the oracle on a probe point.
    Interpolation(String),
    /// An operation needed `|F|` strictly larger than some degree
    /// (factorial inverses, Taylor splits) and the field is too small.
    CharacteristicTooSmall { needed: u64, have: u64 },
    /// An exact enumeration or combination scan would exceed its budget.
    /// Carries the arithmetic so reports can show why.
    BudgetExceeded { need: f64, budget: f64, what: String },
    /// A refinement ran past its iteration cap without certifying.
    Diverged { iterations: usize },
    /// A refinement's output failed the measurability re-check; the desk
    /// constants were too lax for this instance.
    RefinementBroken(String),
    /// Rejection sampling never hit the requested atom.
    AtomNotHit { draws: u64 },
    /// No multiple `tP` passed the Gowers-norm threshold.
    NoCorrelatedMultiple,
    /// No heavy Fourier coefficient of the witness had low enough degree.
    NoHeavyLowDegreeCoefficient,
    /// The measure-separation premise failed: no candidate value is close
    /// to the observed derivative distribution.
    NoApproximation(String),
    /// A pipeline precondition that cannot be checked up front turned out
    /// to be violated mid-run.
    PromiseViolated(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::NotPrime(p) => write!(f, "{p} is not a prime in 2..=65536"),
            Error::DimensionMismatch(m) => write!(f, "dimension mismatch: {m}"),
            Error::Parse(m) => write!(f, "parse error: {m}"),
            Error::Interpolation(m) => write!(f, "inconsistent oracle: {m}"),
            Error::CharacteristicTooSmall { needed, have } => {
                write!(f, "field too small: need |F| > {needed}, have {have}")
            }
            Error::BudgetExceeded { need, budget, what } => {
                write!(f, "{what}: needs {need:.3e} points, budget is {budget:.3e}")
            }
            Error::Diverged { iterations } => {
                write!(f, "refinement did not certify within {iterations} steps")
            }
            Error::RefinementBroken(m) => {
                write!(f, "refinement broke (constants too lax): {m}")
            }
            Error::AtomNotHit { draws } => {
                write!(f, "atom not hit in {draws} rejection draws")
            }
            Error::NoCorrelatedMultiple => {
                write!(f, "no multiple tP passed the Gowers threshold")
            }
            Error::NoHeavyLowDegreeCoefficient => {
                write!(f, "no heavy Fourier coefficient of low degree")
            }
            Error::NoApproximation(m) => write!(f, "no approximation: {m}"),
            Error::PromiseViolated(m) => write!(f, "promise violated: {m}"),
        }
    }
}

impl StdError for Error {}

pub type Result<T> = std::result::Result<T, Error>;
