//! `(k, t)` Shamir sharing: the secret is the constant term of a random
//! polynomial of degree below `t`, and share `i` is its value at `γ_i`.
//!
//! Randomness is always supplied by the caller, so every function here is
//! deterministic.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::field::{Fe, OpCount, PrimeField};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShamirParams {
    field: PrimeField,
    t: usize,
    points: Vec<Fe>,
}

impl ShamirParams {
    /// `k` shares at the given points, any `t` of which recover the secret.
    pub fn new(field: PrimeField, t: usize, points: Vec<Fe>) -> Result<Self> {
        let k = points.len();
        if t == 0 || t > k {
            return Err(Error::InvalidParameter(format!("need 1 <= t <= k, got t={t} k={k}")));
        }
        if field.modulus() <= k as u64 {
            return Err(Error::FieldTooSmall { q: field.modulus(), needed: k });
        }
        check_points(field, &points)?;
        Ok(ShamirParams { field, t, points })
    }

    /// Points `γ_i = i` for `i = 1..=k`.
    pub fn with_default_points(field: PrimeField, k: usize, t: usize) -> Result<Self> {
        if field.modulus() <= k as u64 {
            return Err(Error::FieldTooSmall { q: field.modulus(), needed: k });
        }
        Self::new(field, t, default_points(field, k))
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn k(&self) -> usize {
        self.points.len()
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn points(&self) -> &[Fe] {
        &self.points
    }
}

/// `1, 2, …, k` as field elements.
pub fn default_points(field: PrimeField, k: usize) -> Vec<Fe> {
    (1..=k as u64).map(|i| field.elem(i)).collect()
}

fn check_points(field: PrimeField, points: &[Fe]) -> Result<()> {
    let mut seen = HashSet::new();
    for p in points {
        if p.field() != field {
            return Err(Error::FieldMismatch { left: field.modulus(), right: p.field().modulus() });
        }
        if p.is_zero() || !seen.insert(p.value()) {
            return Err(Error::BadEvaluationPoint(p.value()));
        }
    }
    Ok(())
}

/// Shares `P(γ_1), …, P(γ_k)` of `P(x) = s + Σ seed_i x^i`.
pub fn shamir_encode(s: Fe, params: &ShamirParams, seed: &[Fe]) -> Result<Vec<Fe>> {
    shamir_encode_counted(s, params, seed, &mut OpCount::default())
}

pub fn shamir_encode_counted(s: Fe, params: &ShamirParams, seed: &[Fe], ops: &mut OpCount) -> Result<Vec<Fe>> {
    if seed.len() + 1 != params.t {
        return Err(Error::LengthMismatch { what: "seed", expected: params.t - 1, got: seed.len() });
    }
    let f = params.field;
    for v in std::iter::once(&s).chain(seed) {
        if v.field() != f {
            return Err(Error::FieldMismatch { left: f.modulus(), right: v.field().modulus() });
        }
    }
    Ok(params
        .points
        .iter()
        .map(|&x| {
            // Horner from the top coefficient down to s
            let acc = seed.iter().rev().fold(f.zero(), |acc, &c| acc * x + c);
            ops.mul += seed.len() as u64 + 1;
            ops.add += seed.len() as u64 + 1;
            acc * x + s
        })
        .collect())
}

/// Coefficients `w_i` with `P(0) = Σ w_i P(x_i)` for every `P` of degree
/// below `points.len()`.
pub fn lagrange_weights_at_zero(points: &[Fe]) -> Result<Vec<Fe>> {
    let Some(first) = points.first() else {
        return Err(Error::InsufficientShares { needed: 1, got: 0 });
    };
    check_points(first.field(), points)?;
    points
        .iter()
        .enumerate()
        .map(|(i, &xi)| {
            let mut num = first.field().one();
            let mut den = first.field().one();
            for (l, &xl) in points.iter().enumerate() {
                if l != i {
                    num *= xl;
                    den *= xl - xi;
                }
            }
            Ok(num * den.inv()?)
        })
        .collect()
}

/// Interpolates the first `t` shares and returns the constant term.
pub fn shamir_decode(shares: &[(Fe, Fe)], t: usize) -> Result<Fe> {
    if t == 0 {
        return Err(Error::InvalidParameter("threshold must be at least 1".into()));
    }
    if shares.len() < t {
        return Err(Error::InsufficientShares { needed: t, got: shares.len() });
    }
    let points: Vec<Fe> = shares.iter().map(|&(x, _)| x).collect();
    check_points(points[0].field(), &points)?;
    let weights = lagrange_weights_at_zero(&points[..t])?;
    let f = points[0].field();
    shares[..t].iter().zip(weights).try_fold(f.zero(), |acc, (&(_, y), w)| acc.checked_add(w.checked_mul(y)?))
}
