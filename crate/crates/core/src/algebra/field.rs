//! Prime fields `F_p` for `2 <= p <= 2^16` and their elements.
//!
//! Elements are plain reduced residues; all arithmetic goes through the
//! field so the modulus lives in exactly one place.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;

/// An element of some `F_p`, stored as a residue in `0..p`.
///
/// Construction goes through [`PrimeField::elem`], which reduces; the value
/// itself carries no field pointer, so mixing fields is the caller's bug and
/// is caught only where a field is in scope.
#[derive(Copy, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FieldElement(u16);

impl FieldElement {
    /// The zero element (of every field).
    pub const ZERO: FieldElement = FieldElement(0);

    /// Residue as an integer in `0..p`.
    pub fn value(self) -> u64 {
        self.0 as u64
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// The field `F_p` of prime order `p`, `2 <= p <= 2^16`.
#[derive(Copy, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimeField {
    p: u32,
}

impl fmt::Debug for PrimeField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "F_{}", self.p)
    }
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

impl PrimeField {
    /// Builds `F_p`, verifying primality by trial division (deterministic,
    /// and cheap for moduli up to 2^16).
    pub fn new(p: u64) -> Result<PrimeField> {
        if p < 2 || p > (1 << 16) || !is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        Ok(PrimeField { p: p as u32 })
    }

    /// The modulus `p`.
    pub fn order(&self) -> u64 {
        self.p as u64
    }

    /// Reduces an integer into the field.
    pub fn elem(&self, v: u64) -> FieldElement {
        FieldElement((v % self.p as u64) as u16)
    }

    /// Reduces a signed integer into the field.
    pub fn elem_i64(&self, v: i64) -> FieldElement {
        let p = self.p as i64;
        FieldElement(((v % p + p) % p) as u16)
    }

    pub fn zero(&self) -> FieldElement {
        FieldElement(0)
    }

    pub fn one(&self) -> FieldElement {
        self.elem(1)
    }

    pub fn add(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        let s = a.0 as u32 + b.0 as u32;
        FieldElement(if s >= self.p { (s - self.p) as u16 } else { s as u16 })
    }

    pub fn sub(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        let s = a.0 as u32 + self.p - b.0 as u32;
        FieldElement(if s >= self.p { (s - self.p) as u16 } else { s as u16 })
    }

    pub fn neg(&self, a: FieldElement) -> FieldElement {
        if a.0 == 0 {
            a
        } else {
            FieldElement((self.p - a.0 as u32) as u16)
        }
    }

    pub fn mul(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        FieldElement(((a.0 as u64 * b.0 as u64) % self.p as u64) as u16)
    }

    /// `a^e` by square-and-multiply. `0^0 = 1` by the usual convention.
    pub fn pow(&self, a: FieldElement, mut e: u64) -> FieldElement {
        let mut base = a;
        let mut acc = self.one();
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    /// Multiplicative inverse via Fermat; zero has none.
    pub fn inv(&self, a: FieldElement) -> Result<FieldElement> {
        if a.0 == 0 {
            return Err(Error::DimensionMismatch("inverse of zero".into()));
        }
        Ok(self.pow(a, self.p as u64 - 2))
    }

    /// Inverse of the integer `k` (for factorial divisions); requires
    /// `k` nonzero mod p.
    pub fn inv_int(&self, k: u64) -> Result<FieldElement> {
        let e = self.elem(k);
        if e.is_zero() {
            return Err(Error::CharacteristicTooSmall { needed: k, have: self.order() });
        }
        self.inv(e)
    }

    /// All field elements in order `0, 1, .., p-1`.
    pub fn elements(&self) -> impl Iterator<Item = FieldElement> {
        (0..self.p as u16).map(FieldElement)
    }

    /// Convenience for tests and parsers: a point from raw residues.
    pub fn point(&self, vals: &[u64]) -> Vec<FieldElement> {
        vals.iter().map(|&v| self.elem(v)).collect()
    }
}
