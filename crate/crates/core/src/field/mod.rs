//! Exact arithmetic in a prime field `F_q`.
//!
//! Elements are stored as canonical representatives in `[0, q)`. The modulus
//! is capped below `2^31` so that a product of two representatives fits in a
//! `u64` before reduction.

mod matrix;
mod poly;

use std::fmt;
use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

pub use matrix::{circulant_nonsingular, Matrix};
pub use poly::Polynomial;

use crate::error::{Error, Result};

/// The prime field `F_q`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u64", into = "u64")]
pub struct PrimeField {
    q: u64,
}

impl PrimeField {
    /// Exclusive upper bound on the modulus.
    pub const MODULUS_LIMIT: u64 = 1 << 31;

    pub fn new(q: u64) -> Result<Self> {
        if !(2..Self::MODULUS_LIMIT).contains(&q) {
            return Err(Error::ModulusOutOfRange(q));
        }
        if !is_prime(q) {
            return Err(Error::NotPrime(q));
        }
        Ok(PrimeField { q })
    }

    #[inline]
    pub fn modulus(self) -> u64 {
        self.q
    }

    /// The element congruent to `v` modulo `q`.
    #[inline]
    pub fn elem(self, v: u64) -> Fe {
        Fe { value: v % self.q, field: self }
    }

    /// The element congruent to the signed integer `v`.
    pub fn elem_i64(self, v: i64) -> Fe {
        let r = v.rem_euclid(self.q as i64) as u64;
        Fe { value: r, field: self }
    }

    #[inline]
    pub fn zero(self) -> Fe {
        Fe { value: 0, field: self }
    }

    #[inline]
    pub fn one(self) -> Fe {
        self.elem(1)
    }

    /// All elements `0, 1, ..., q-1` in order.
    pub fn elements(self) -> impl Iterator<Item = Fe> {
        (0..self.q).map(move |v| Fe { value: v, field: self })
    }

    #[inline]
    pub(crate) fn add_raw(self, a: u64, b: u64) -> u64 {
        let s = a + b;
        if s >= self.q {
            s - self.q
        } else {
            s
        }
    }

    #[inline]
    pub(crate) fn sub_raw(self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            a + self.q - b
        }
    }

    #[inline]
    pub(crate) fn mul_raw(self, a: u64, b: u64) -> u64 {
        a * b % self.q
    }

    #[inline]
    pub(crate) fn neg_raw(self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.q - a
        }
    }

    pub(crate) fn inv_raw(self, a: u64) -> Result<u64> {
        if a == 0 {
            return Err(Error::ZeroInverse);
        }
        // Extended Euclid on (a, q); q prime so gcd is 1.
        let (mut r0, mut r1) = (self.q as i64, a as i64);
        let (mut t0, mut t1) = (0i64, 1i64);
        while r1 != 0 {
            let quot = r0 / r1;
            (r0, r1) = (r1, r0 - quot * r1);
            (t0, t1) = (t1, t0 - quot * t1);
        }
        debug_assert_eq!(r0, 1);
        Ok(t0.rem_euclid(self.q as i64) as u64)
    }

    pub(crate) fn pow_raw(self, mut base: u64, mut exp: u64) -> u64 {
        let mut acc = 1 % self.q;
        base %= self.q;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul_raw(acc, base);
            }
            base = self.mul_raw(base, base);
            exp >>= 1;
        }
        acc
    }

    /// The smallest `g >= 2` of multiplicative order `q - 1`.
    pub fn primitive_element(self) -> Result<Fe> {
        if self.q < 3 {
            return Err(Error::InvalidParameter(format!(
                "primitive element search needs q >= 3, got {}",
                self.q
            )));
        }
        let order = self.q - 1;
        let primes = prime_factors(order);
        (2..self.q)
            .find(|&g| primes.iter().all(|&p| self.pow_raw(g, order / p) != 1))
            .map(|g| self.elem(g))
            .ok_or_else(|| Error::InvalidParameter("no primitive element found".into()))
    }

    /// Multiplicative order of a nonzero element.
    pub fn order_of(self, a: Fe) -> Result<u64> {
        self.check(a)?;
        if a.value == 0 {
            return Err(Error::ZeroInverse);
        }
        let mut ord = self.q - 1;
        for p in prime_factors(self.q - 1) {
            while ord.is_multiple_of(p) && self.pow_raw(a.value, ord / p) == 1 {
                ord /= p;
            }
        }
        Ok(ord)
    }

    fn check(self, a: Fe) -> Result<()> {
        if a.field != self {
            return Err(Error::FieldMismatch { left: self.q, right: a.field.q });
        }
        Ok(())
    }
}

impl fmt::Display for PrimeField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "F_{}", self.q)
    }
}

impl TryFrom<u64> for PrimeField {
    type Error = Error;

    fn try_from(q: u64) -> Result<Self> {
        PrimeField::new(q)
    }
}

impl From<PrimeField> for u64 {
    fn from(f: PrimeField) -> u64 {
        f.q
    }
}

/// Tally of field operations performed by an instrumented routine.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCount {
    /// Multiplications.
    pub mul: u64,
    /// Additions and subtractions.
    pub add: u64,
}

impl OpCount {
    pub fn total(&self) -> u64 {
        self.mul + self.add
    }
}

/// An element of a prime field.
///
/// The arithmetic operators panic when the operands come from different
/// fields; the `checked_*` methods report [`Error::FieldMismatch`] instead.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Fe {
    value: u64,
    field: PrimeField,
}

impl Fe {
    #[inline]
    pub fn value(self) -> u64 {
        self.value
    }

    #[inline]
    pub fn field(self) -> PrimeField {
        self.field
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.value == 0
    }

    fn same_field(self, other: Fe) -> Result<PrimeField> {
        if self.field != other.field {
            return Err(Error::FieldMismatch { left: self.field.q, right: other.field.q });
        }
        Ok(self.field)
    }

    pub fn checked_add(self, rhs: Fe) -> Result<Fe> {
        let f = self.same_field(rhs)?;
        Ok(Fe { value: f.add_raw(self.value, rhs.value), field: f })
    }

    pub fn checked_sub(self, rhs: Fe) -> Result<Fe> {
        let f = self.same_field(rhs)?;
        Ok(Fe { value: f.sub_raw(self.value, rhs.value), field: f })
    }

    pub fn checked_mul(self, rhs: Fe) -> Result<Fe> {
        let f = self.same_field(rhs)?;
        Ok(Fe { value: f.mul_raw(self.value, rhs.value), field: f })
    }

    /// Multiplicative inverse via the extended Euclidean algorithm.
    pub fn inv(self) -> Result<Fe> {
        Ok(Fe { value: self.field.inv_raw(self.value)?, field: self.field })
    }

    pub fn pow(self, exp: u64) -> Fe {
        Fe { value: self.field.pow_raw(self.value, exp), field: self.field }
    }
}

impl fmt::Debug for Fe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (mod {})", self.value, self.field.q)
    }
}

impl fmt::Display for Fe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

macro_rules! binop {
    ($tr:ident, $method:ident, $checked:ident, $assign_tr:ident, $assign:ident) => {
        impl $tr for Fe {
            type Output = Fe;

            #[inline]
            fn $method(self, rhs: Fe) -> Fe {
                match self.$checked(rhs) {
                    Ok(v) => v,
                    Err(e) => panic!("{e}"),
                }
            }
        }

        impl $assign_tr for Fe {
            #[inline]
            fn $assign(&mut self, rhs: Fe) {
                *self = $tr::$method(*self, rhs);
            }
        }
    };
}

binop!(Add, add, checked_add, AddAssign, add_assign);
binop!(Sub, sub, checked_sub, SubAssign, sub_assign);
binop!(Mul, mul, checked_mul, MulAssign, mul_assign);

impl Neg for Fe {
    type Output = Fe;

    #[inline]
    fn neg(self) -> Fe {
        Fe { value: self.field.neg_raw(self.value), field: self.field }
    }
}

/// Deterministic Miller–Rabin, exact for every `u64`.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for p in BASES {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let mulmod = |a: u64, b: u64| ((a as u128 * b as u128) % n as u128) as u64;
    let powmod = |mut b: u64, mut e: u64| {
        let mut acc = 1u64;
        while e > 0 {
            if e & 1 == 1 {
                acc = mulmod(acc, b);
            }
            b = mulmod(b, b);
            e >>= 1;
        }
        acc
    };
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'witness: for a in BASES {
        let mut x = powmod(a, d);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mulmod(x, x);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Distinct prime factors of `n`, ascending.
pub fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= n {
        if n.is_multiple_of(p) {
            out.push(p);
            while n.is_multiple_of(p) {
                n /= p;
            }
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push(n);
    }
    out
}
