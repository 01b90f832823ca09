use super::{EncoderData, ProtocolDescriptor, ProtocolKind, StoringMatrix};
use crate::combinatorics::KSubset;
use crate::design::AccessStructure;
use crate::error::{Error, Result};
use crate::field::PrimeField;
use crate::shamir::default_points;

/// One `(t_j, t_j)` Shamir sharing per user, `t_j = |A_j|`.
///
/// User `j`'s block occupies slots `τ_j .. τ_j + t_j`, and its `i`-th share
/// lives on the `i`-th smallest node of `A_j`.
pub fn build_sdssp(n: usize, sets: Vec<KSubset>, q: u64) -> Result<ProtocolDescriptor> {
    if sets.is_empty() {
        return Err(Error::InvalidParameter("need at least one user".into()));
    }
    let access = AccessStructure::new(sets)?;
    if access.max_node() > n {
        return Err(Error::InvalidParameter(format!("access set uses node {} but n={n}", access.max_node())));
    }
    let field = PrimeField::new(q)?;
    let widest = access.sets().iter().map(KSubset::len).max().unwrap_or(0);
    if q <= widest as u64 {
        return Err(Error::FieldTooSmall { q, needed: widest });
    }
    let mut offsets = Vec::with_capacity(access.len());
    let mut placements = Vec::new();
    for set in access.sets() {
        offsets.push(placements.len());
        placements.extend_from_slice(set.elements());
    }
    let first = access.sets()[0].len();
    let k = access.sets().iter().all(|s| s.len() == first).then_some(first);
    ProtocolDescriptor::from_parts(
        ProtocolKind::Sdssp,
        field,
        n,
        k,
        access,
        default_points(field, widest),
        StoringMatrix::new(placements, n)?,
        EncoderData::Sdssp { offsets },
        None,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combinatorics::k_subsets_lex;
    use crate::field::Fe;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ks(v: &[usize]) -> KSubset {
        KSubset::new(v.to_vec()).unwrap()
    }

    #[test]
    fn triangle_layout() {
        let d = build_sdssp(3, vec![ks(&[1, 2]), ks(&[2, 3]), ks(&[1, 3])], 5).unwrap();
        assert_eq!(d.h(), 6);
        assert_eq!(d.k(), Some(2));
        assert_eq!(d.storing().placements(), &[1, 2, 2, 3, 1, 3]);
        assert_eq!(d.decoder_plan(2).unwrap().iter().map(|p| p.0).collect::<Vec<_>>(), vec![4, 5]);
    }

    #[test]
    fn rejects_bad_structures() {
        assert_eq!(
            build_sdssp(2, vec![ks(&[1]), ks(&[1, 2])], 5),
            Err(Error::NotSperner { contained: 0, container: 1 })
        );
        assert_eq!(
            build_sdssp(3, vec![ks(&[1, 2, 3])], 3),
            Err(Error::FieldTooSmall { q: 3, needed: 3 })
        );
        assert!(matches!(build_sdssp(2, vec![ks(&[3])], 5), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn maximum_user_build() {
        let d = build_sdssp(4, k_subsets_lex(4, 2).collect(), 7).unwrap();
        assert_eq!(d.m(), 6);
        assert_eq!(d.h(), 12);
    }

    #[test]
    fn singleton_users_store_their_secret() {
        let d = build_sdssp(3, vec![ks(&[1]), ks(&[2]), ks(&[3])], 5).unwrap();
        let f = d.field();
        let s = [f.elem(4), f.elem(0), f.elem(2)];
        assert_eq!(d.encode(&s, 9).unwrap(), s.to_vec());
    }

    #[test]
    fn mixed_sizes_round_trip() {
        let d = build_sdssp(4, vec![ks(&[1]), ks(&[2, 3]), ks(&[2, 4]), ks(&[3, 4])], 13).unwrap();
        assert_eq!(d.k(), None);
        let f = d.field();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let s: Vec<Fe> = (0..4).map(|_| f.elem(rng.gen_range(0..13))).collect();
            let y = d.encode(&s, rng.gen()).unwrap();
            for (j, &sj) in s.iter().enumerate() {
                assert_eq!(d.decode(j, &d.user_view(j, &y).unwrap()).unwrap(), sj);
            }
        }
    }
}
