//! Exact arithmetic layer: prime fields, sparse polynomials-as-functions,
//! additive derivatives, interpolation and `F_p` linear algebra.

pub mod derive;
pub mod field;
pub mod interp;
pub mod linalg;
pub mod monomial;
pub mod poly;

pub use derive::{
    derivative_polynomial, directional_derivative, find_linear_dependency, symbolic_derivative_at,
    taylor_split, ExtendedPolynomial,
};
pub use field::{FieldElement, PrimeField};
pub use interp::interpolate_from_oracle;
pub use monomial::Monomial;
pub use poly::Polynomial;
