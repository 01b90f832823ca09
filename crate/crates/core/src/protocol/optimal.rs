//! One stored symbol per secret.
//!
//! User `j` owns a polynomial `P_j` of degree below `k` with `P_j(0) = s_j`
//! and must read `y_j, …, y_{j+k-1}` (indices mod `m`) as `P_j(γ^1), …,
//! P_j(γ^k)`. Consecutive users share `k - 1` symbols, so all the
//! polynomials are solved for at once: with unknowns
//! `b = (p_{1,1..k-1}, …, p_{m,1..k-1}, y_1, …, y_m)` the conditions read
//! `A b + K s = 0`, and `y = E s` with `E` the negated `y`-rows of `A⁻¹K`.

use super::{EncoderData, ProtocolDescriptor, ProtocolKind, StoringMatrix};
use crate::combinatorics::{binomial, window_sequence, DEFAULT_SEARCH_BUDGET};
use crate::design::AccessStructure;
use crate::error::{Error, Result};
use crate::field::{Fe, Matrix, OpCount, PrimeField};

/// Sufficient condition for `A` to be nonsingular: `q - 1` divides none of
/// `m, 2m, …, km`.
pub fn check_condition(q: u64, m: u64, k: u64) -> bool {
    q >= 2 && (1..=k).all(|i| !(i * m).is_multiple_of(q - 1))
}

fn primitive(field: PrimeField) -> Result<Fe> {
    if field.modulus() == 2 {
        return Ok(field.one());
    }
    field.primitive_element()
}

/// The `km × km` system matrix for `m` users with points `γ^1..γ^k`.
///
/// Row `j·k + r` states `Σ_c γ^{(r+1)c} p_{j,c} - y_{(j+r) mod m} = -s_j`.
pub fn system_matrix(field: PrimeField, m: usize, k: usize, gamma: Fe) -> Result<Matrix> {
    if m == 0 || k == 0 {
        return Err(Error::InvalidParameter(format!("need m, k >= 1, got m={m} k={k}")));
    }
    let size = k.checked_mul(m).ok_or_else(|| Error::Overflow("system size".into()))?;
    let mut a = Matrix::zeros(field, size, size);
    let y0 = m * (k - 1);
    let minus_one = -field.one();
    for j in 0..m {
        for r in 0..k {
            let row = j * k + r;
            let point = gamma.pow(r as u64 + 1);
            let mut power = field.one();
            for c in 0..k - 1 {
                power *= point;
                a.set(row, j * (k - 1) + c, power);
            }
            a.set(row, y0 + (j + r) % m, minus_one);
        }
    }
    Ok(a)
}

/// [`build_optimal_with_budget`] with the default search budget.
pub fn build_optimal(n: usize, k: usize, q: u64) -> Result<ProtocolDescriptor> {
    build_optimal_with_budget(n, k, q, DEFAULT_SEARCH_BUDGET)
}

/// Builds the protocol for all `m = C(n,k)` users of size `k`.
///
/// The cyclic window sequence is found first, since its absence is cheap to
/// certify. Nonsingularity of `A` is then settled by elimination itself, so
/// parameters outside [`check_condition`] still succeed when `det(A) ≠ 0`.
pub fn build_optimal_with_budget(n: usize, k: usize, q: u64, budget: u64) -> Result<ProtocolDescriptor> {
    if n < 2 || k == 0 || k > n / 2 {
        return Err(Error::InvalidParameter(format!("need n >= 2 and 1 <= k <= n/2, got n={n} k={k}")));
    }
    let field = PrimeField::new(q)?;
    if q <= k as u64 {
        return Err(Error::FieldTooSmall { q, needed: k });
    }
    let m = usize::try_from(binomial(n as u64, k as u64)?).map_err(|_| Error::Overflow("C(n,k)".into()))?;
    let sequence = window_sequence(n, k, m, true, budget).map_err(|e| match e {
        Error::Infeasible(why) => Error::WindowInfeasible(why),
        other => other,
    })?;

    let gamma = primitive(field)?;
    let a = system_matrix(field, m, k, gamma)?;
    let mut kmat = Matrix::zeros(field, k * m, m);
    for j in 0..m {
        for r in 0..k {
            kmat.set(j * k + r, j, field.one());
        }
    }
    let x = a.gauss_solve(&kmat).map_err(|e| match e {
        Error::SingularMatrix { .. } => Error::SingularSystem { q, m, k },
        other => other,
    })?;
    let y0 = m * (k - 1);
    let mut encoding = Matrix::zeros(field, m, m);
    for r in 0..m {
        for c in 0..m {
            encoding.set(r, c, -x.get(y0 + r, c));
        }
    }

    let sets = (0..m).map(|j| sequence.window_set(j)).collect::<Result<Vec<_>>>()?;
    let access = AccessStructure::new(sets)?;
    let storing = StoringMatrix::new(sequence.symbols.clone(), n)?;
    let points = (1..=k as u64).map(|i| gamma.pow(i)).collect();
    ProtocolDescriptor::from_parts(
        ProtocolKind::OptimalSo,
        field,
        n,
        Some(k),
        access,
        points,
        storing,
        EncoderData::OptimalSo { gamma, encoding, sequence },
        None,
    )
}

/// Dense `y = E·s`.
pub(super) fn encode(encoding: &Matrix, secrets: &[Fe], ops: &mut OpCount) -> Vec<Fe> {
    let f = encoding.field();
    (0..encoding.rows())
        .map(|r| {
            encoding.row(r).zip(secrets).fold(f.zero(), |acc, (e, &s)| {
                ops.mul += 1;
                ops.add += 1;
                acc + e * s
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combinatorics::Infeasibility;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn condition_examples() {
        assert!(check_condition(13, 10, 2));
        assert!(!check_condition(11, 10, 1));
        for q in [23u64, 29, 31, 97] {
            assert!(check_condition(q, 10, 2), "q={q} > km");
        }
    }

    #[test]
    fn condition_is_sufficient_small_cases() {
        for q in [3u64, 5, 7, 11, 13] {
            let f = PrimeField::new(q).unwrap();
            let g = primitive(f).unwrap();
            for k in 1..=2usize.min(q as usize - 1) {
                for m in 1..=8usize {
                    if check_condition(q, m as u64, k as u64) {
                        let a = system_matrix(f, m, k, g).unwrap();
                        assert!(!a.det().unwrap().is_zero(), "q={q} m={m} k={k}");
                    }
                }
            }
        }
    }

    #[test]
    fn builds_n5_k2_q13() {
        let d = build_optimal(5, 2, 13).unwrap();
        assert_eq!((d.m(), d.h()), (10, 10));
        let e = d.linear_map().unwrap();
        assert_eq!(e.rank(), 10);
        assert_eq!(d.points(), &[d.field().elem(2), d.field().elem(4)]);
        let f = d.field();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let s: Vec<Fe> = (0..10).map(|_| f.elem(rng.gen_range(0..13))).collect();
            let y = d.encode_with(&s, &[]).unwrap();
            for j in 0..10 {
                assert_eq!(d.decode(j, &d.user_view(j, &y).unwrap()).unwrap(), s[j]);
            }
        }
        assert!(d.encode_with(&[f.zero(); 10], &[]).unwrap().iter().all(|v| v.is_zero()));
    }

    #[test]
    fn singular_when_gamma_has_order_dividing_m() {
        assert_eq!(build_optimal(5, 2, 11), Err(Error::SingularSystem { q: 11, m: 10, k: 2 }));
        let f = PrimeField::new(11).unwrap();
        let a = system_matrix(f, 10, 2, primitive(f).unwrap()).unwrap();
        assert!(a.det().unwrap().is_zero());
    }

    #[test]
    fn no_cycle_for_n4_k2() {
        assert!(matches!(
            build_optimal(4, 2, 13),
            Err(Error::WindowInfeasible(Infeasibility::DegreeObstruction { .. }))
        ));
    }

    #[test]
    fn single_node_users_store_plaintext() {
        let d = build_optimal(4, 1, 5).unwrap();
        let f = d.field();
        let s = [f.elem(1), f.elem(2), f.elem(3), f.elem(4)];
        assert_eq!(d.encode_with(&s, &[]).unwrap(), s.to_vec());
    }

    #[test]
    fn parameter_errors() {
        assert!(matches!(build_optimal(5, 3, 13), Err(Error::InvalidParameter(_))));
        assert_eq!(build_optimal(5, 2, 2), Err(Error::FieldTooSmall { q: 2, needed: 2 }));
        assert_eq!(build_optimal(5, 2, 15), Err(Error::NotPrime(15)));
    }

    // The matrix outside the sufficient condition can still be nonsingular.
    #[test]
    fn det_decides_outside_condition() {
        assert!(!check_condition(5, 10, 2));
        assert!(build_optimal(5, 2, 5).is_ok());
    }
}
