//! Any number of users with `m + k - 1` stored symbols.
//!
//! The first user's polynomial is drawn from a seed of `k - 1` symbols and
//! fixes `y_1..y_k`. Every later user `j` inherits the `k - 1` symbols it
//! shares with user `j - 1`; together with `s_j` they pin down `P_j`, and
//! the one new symbol is `P_j(γ_k)`. With `D` the Vandermonde matrix of
//! `γ_1..γ_{k-1}` and `w = (γ_k, …, γ_k^{k-1})·D⁻¹`, that symbol is
//! `s_j + w·(y_j - s_j, …, y_{j+k-2} - s_j)`.

use super::{EncoderData, ProtocolDescriptor, ProtocolKind, StoringMatrix};
use crate::combinatorics::{binomial, window_sequence, DEFAULT_SEARCH_BUDGET};
use crate::design::{max_users, AccessStructure};
use crate::error::{Error, Result};
use crate::field::{Fe, Matrix, OpCount, PrimeField};
use crate::shamir::default_points;

/// Smallest `k` with `C(n,k) >= m`.
pub fn minimal_subset_size(n: usize, m: u64) -> Result<usize> {
    let max = max_users(n)?;
    if m == 0 || m > max {
        return Err(Error::InfeasibleUserCount { n, m, max });
    }
    for k in 1..=n {
        if binomial(n as u64, k as u64)? >= m {
            return Ok(k);
        }
    }
    unreachable!("C(n, n/2) >= m was checked above")
}

/// [`build_nearly_with_budget`] with the default search budget.
pub fn build_nearly(n: usize, m: usize, q: u64, k_override: Option<usize>) -> Result<ProtocolDescriptor> {
    build_nearly_with_budget(n, m, q, k_override, DEFAULT_SEARCH_BUDGET)
}

pub fn build_nearly_with_budget(
    n: usize,
    m: usize,
    q: u64,
    k_override: Option<usize>,
    budget: u64,
) -> Result<ProtocolDescriptor> {
    let k = match k_override {
        Some(k) if k == 0 || k > n => {
            return Err(Error::InvalidParameter(format!("subset size {k} outside 1..={n}")));
        }
        Some(k) => k,
        None => minimal_subset_size(n, m as u64)?,
    };
    if m == 0 {
        return Err(Error::InvalidParameter("need at least one user".into()));
    }
    let field = PrimeField::new(q)?;
    if q <= k as u64 {
        return Err(Error::FieldTooSmall { q, needed: k });
    }
    let sequence = window_sequence(n, k, m, false, budget).map_err(|e| match e {
        Error::Infeasible(why) => Error::WindowInfeasible(why),
        other => other,
    })?;

    let points = default_points(field, k);
    let weights = if k == 1 {
        Vec::new()
    } else {
        let d_inv = Matrix::vandermonde(&points[..k - 1], k - 1)?.invert()?;
        let last = Matrix::vandermonde(&points[k - 1..], k - 1)?;
        let w = last.mul(&d_inv)?;
        w.row(0).collect()
    };

    let sets = (0..m).map(|j| sequence.window_set(j)).collect::<Result<Vec<_>>>()?;
    let access = AccessStructure::new(sets)?;
    let storing = StoringMatrix::new(sequence.symbols.clone(), n)?;
    ProtocolDescriptor::from_parts(
        ProtocolKind::NearlyOptimal,
        field,
        n,
        Some(k),
        access,
        points,
        storing,
        EncoderData::NearlyOptimal { weights, sequence },
        None,
    )
}

/// `seed` holds the first user's non-constant coefficients.
pub(super) fn encode(points: &[Fe], weights: &[Fe], secrets: &[Fe], seed: &[Fe], ops: &mut OpCount) -> Vec<Fe> {
    let k = weights.len() + 1;
    let s1 = secrets[0];
    let mut y = Vec::with_capacity(secrets.len() + k - 1);
    for &x in &points[..k] {
        let tail = seed.iter().rev().fold(s1.field().zero(), |acc, &c| acc * x + c);
        y.push(tail * x + s1);
        ops.mul += k as u64;
        ops.add += k as u64;
    }
    for (j, &sj) in secrets.iter().enumerate().skip(1) {
        let mut next = sj;
        for (i, &w) in weights.iter().enumerate() {
            next += w * (y[j + i] - sj);
        }
        ops.mul += weights.len() as u64;
        ops.add += 2 * weights.len() as u64;
        y.push(next);
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combinatorics::Infeasibility;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    fn round_trip(d: &ProtocolDescriptor, trials: usize) {
        let f = d.field();
        let q = f.modulus();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..trials {
            let s: Vec<Fe> = (0..d.m()).map(|_| f.elem(rng.gen_range(0..q))).collect();
            let y = d.encode(&s, rng.gen()).unwrap();
            assert_eq!(y.len(), d.h());
            for (j, &sj) in s.iter().enumerate() {
                assert_eq!(d.decode(j, &d.user_view(j, &y).unwrap()).unwrap(), sj);
            }
        }
    }

    #[test]
    fn n4_m5_q7() {
        let d = build_nearly(4, 5, 7, None).unwrap();
        assert_eq!((d.k(), d.h()), (Some(2), 6));
        round_trip(&d, 100);
    }

    #[test]
    fn n5_m10_q13() {
        let d = build_nearly(5, 10, 13, None).unwrap();
        assert_eq!((d.k(), d.h()), (Some(2), 11));
        round_trip(&d, 50);
    }

    #[test]
    fn larger_window() {
        let d = build_nearly(6, 16, 31, None).unwrap();
        assert_eq!(d.k(), Some(3));
        round_trip(&d, 20);
    }

    // No path of length 22 over [6] shows all twenty 3-subsets.
    #[test]
    fn complete_path_can_be_infeasible() {
        assert!(matches!(
            build_nearly(6, 20, 31, None),
            Err(Error::WindowInfeasible(Infeasibility::ExhaustiveSearch { .. }))
        ));
    }

    #[test]
    fn single_user_and_k1() {
        let d = build_nearly(3, 1, 5, None).unwrap();
        assert_eq!((d.k(), d.h()), (Some(1), 1));
        let d = build_nearly(4, 3, 5, Some(1)).unwrap();
        let f = d.field();
        let s = [f.elem(4), f.elem(1), f.elem(1)];
        assert_eq!(d.encode_with(&s, &[]).unwrap(), s.to_vec());
    }

    #[test]
    fn weights_predict_the_last_point() {
        // for P(x) = x^2 + 2x over F_7: P(1)=3, P(2)=8=1, P(3)=15=1
        let d = build_nearly(6, 16, 7, Some(3)).unwrap();
        let EncoderData::NearlyOptimal { weights, .. } = d.encoder() else { panic!() };
        let f = d.field();
        let got = weights[0] * f.elem(3) + weights[1] * f.elem(1);
        assert_eq!(got, f.elem(1));
    }

    // (seed, s) -> y is a bijection on F_3^4.
    #[test]
    fn bijection_q3_n4_m3() {
        let d = build_nearly(4, 3, 3, Some(2)).unwrap();
        let f = d.field();
        let mut outputs = HashSet::new();
        for code in 0..81u64 {
            let digits: Vec<Fe> = (0..4).map(|i| f.elem(code / 3u64.pow(i) % 3)).collect();
            let y = d.encode_with(&digits[1..], &digits[..1]).unwrap();
            outputs.insert(y.iter().map(|v| v.value()).collect::<Vec<_>>());
        }
        assert_eq!(outputs.len(), 81);
    }

    #[test]
    fn errors() {
        assert_eq!(build_nearly(4, 7, 7, None), Err(Error::InfeasibleUserCount { n: 4, m: 7, max: 6 }));
        assert_eq!(build_nearly(4, 5, 2, None), Err(Error::FieldTooSmall { q: 2, needed: 2 }));
        assert!(matches!(
            build_nearly(4, 5, 7, Some(1)),
            Err(Error::WindowInfeasible(Infeasibility::TooManyWindows { .. }))
        ));
    }

    #[test]
    fn minimal_sizes() {
        assert_eq!(minimal_subset_size(4, 5).unwrap(), 2);
        assert_eq!(minimal_subset_size(4, 4).unwrap(), 1);
        assert_eq!(minimal_subset_size(64, 10_000).unwrap(), 3);
    }
}
