use super::{Fe, PrimeField};
use crate::error::{Error, Result};

/// A univariate polynomial over `F_q`, constant term first.
///
/// Trailing zero coefficients are trimmed, so the zero polynomial has an
/// empty coefficient list and no degree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Polynomial {
    field: PrimeField,
    coeffs: Vec<u64>,
}

impl Polynomial {
    pub fn new(field: PrimeField, coeffs: impl IntoIterator<Item = Fe>) -> Result<Self> {
        let mut raw = Vec::new();
        for c in coeffs {
            if c.field() != field {
                return Err(Error::FieldMismatch { left: field.modulus(), right: c.field().modulus() });
            }
            raw.push(c.value());
        }
        Ok(Self::from_raw(field, raw))
    }

    pub(crate) fn from_raw(field: PrimeField, mut coeffs: Vec<u64>) -> Self {
        while coeffs.last() == Some(&0) {
            coeffs.pop();
        }
        Polynomial { field, coeffs }
    }

    pub fn zero(field: PrimeField) -> Self {
        Polynomial { field, coeffs: Vec::new() }
    }

    /// `x^m - 1`.
    pub fn x_pow_minus_one(field: PrimeField, m: usize) -> Self {
        let mut c = vec![0; m + 1];
        c[0] = field.neg_raw(1);
        c[m] = field.add_raw(c[m], 1);
        Self::from_raw(field, c)
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn coeffs(&self) -> impl Iterator<Item = Fe> + '_ {
        self.coeffs.iter().map(|&c| self.field.elem(c))
    }

    /// Horner evaluation.
    pub fn eval(&self, x: Fe) -> Fe {
        let f = self.field;
        let v = self.coeffs.iter().rev().fold(0, |acc, &c| f.add_raw(f.mul_raw(acc, x.value()), c));
        f.elem(v)
    }

    fn lead(&self) -> Option<u64> {
        self.coeffs.last().copied()
    }

    /// Remainder of division by a nonzero divisor.
    pub fn rem(&self, divisor: &Polynomial) -> Result<Polynomial> {
        let f = self.field;
        let lead = divisor.lead().ok_or(Error::ZeroInverse)?;
        let lead_inv = f.inv_raw(lead)?;
        let dd = divisor.coeffs.len() - 1;
        let mut r = self.coeffs.clone();
        while r.len() > dd && !r.is_empty() {
            let top = r.len() - 1;
            let factor = f.mul_raw(r[top], lead_inv);
            let shift = top - dd;
            for (i, &c) in divisor.coeffs.iter().enumerate() {
                r[shift + i] = f.sub_raw(r[shift + i], f.mul_raw(factor, c));
            }
            while r.last() == Some(&0) {
                r.pop();
            }
        }
        Ok(Self::from_raw(f, r))
    }

    /// Monic greatest common divisor (zero if both inputs are zero).
    pub fn gcd(&self, other: &Polynomial) -> Result<Polynomial> {
        let (mut a, mut b) = (self.clone(), other.clone());
        while !b.is_zero() {
            let r = a.rem(&b)?;
            a = b;
            b = r;
        }
        if let Some(l) = a.lead() {
            let inv = a.field.inv_raw(l)?;
            for c in a.coeffs.iter_mut() {
                *c = a.field.mul_raw(*c, inv);
            }
        }
        Ok(a)
    }

    /// `c · Π (x - r)` over the given roots.
    pub fn from_roots(constant: Fe, roots: &[Fe]) -> Self {
        let f = constant.field();
        let mut c = vec![constant.value()];
        for r in roots {
            let mut next = vec![0; c.len() + 1];
            for (i, &ci) in c.iter().enumerate() {
                next[i + 1] = f.add_raw(next[i + 1], ci);
                next[i] = f.sub_raw(next[i], f.mul_raw(ci, r.value()));
            }
            c = next;
        }
        Self::from_raw(f, c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trimming_and_degree() {
        let f = PrimeField::new(7).unwrap();
        let p = Polynomial::new(f, [f.elem(1), f.elem(2), f.zero()]).unwrap();
        assert_eq!(p.degree(), Some(1));
        assert!(Polynomial::zero(f).degree().is_none());
        assert_eq!(p.eval(f.elem(3)).value(), 0);
    }

    #[test]
    fn gcd_of_root_products() {
        let f = PrimeField::new(13).unwrap();
        let e = |v| f.elem(v);
        let a = Polynomial::from_roots(e(3), &[e(1), e(2), e(5)]);
        let b = Polynomial::from_roots(e(1), &[e(2), e(5), e(7)]);
        let g = a.gcd(&b).unwrap();
        assert_eq!(g, Polynomial::from_roots(e(1), &[e(2), e(5)]));
        let unit = Polynomial::new(f, [e(4)]).unwrap();
        assert_eq!(unit.gcd(&a).unwrap(), Polynomial::new(f, [e(1)]).unwrap());
    }

    #[test]
    fn x_pow_minus_one_vanishes_on_roots_of_unity() {
        let f = PrimeField::new(11).unwrap();
        let p = Polynomial::x_pow_minus_one(f, 5);
        let r = f.elem(4); // 4^5 = 1024 = 1 mod 11
        assert!(p.eval(r).is_zero());
        assert!(!p.eval(f.elem(2)).is_zero());
    }
}
