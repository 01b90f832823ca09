use dssp::audit::{audit_secrecy_rank, metrics};
use dssp::design::{achievable_min_c, max_users, solve_design, Rational};
use dssp::field::{Fe, PrimeField};
use dssp::io::{descriptor_from_json, descriptor_to_json, secrets_from_json, secrets_to_json};
use dssp::protocol::{build_nearly, build_optimal, build_sdssp, ProtocolDescriptor};
use dssp::Error;
use proptest::prelude::*;

const Q: u64 = 101;

fn secrets_for(m: usize, raw: &[u64]) -> Vec<Fe> {
    let f = PrimeField::new(Q).unwrap();
    (0..m).map(|j| f.elem(raw[j % raw.len()])).collect()
}

fn assert_round_trip(d: &ProtocolDescriptor, s: &[Fe], seed: u64) -> Result<(), TestCaseError> {
    let y = d.encode(s, seed).unwrap();
    prop_assert_eq!(y.len(), d.h());
    for (j, &sj) in s.iter().enumerate() {
        prop_assert_eq!(d.decode(j, &d.user_view(j, &y).unwrap()).unwrap(), sj);
    }
    Ok(())
}

fn design_instance() -> impl Strategy<Value = (usize, u64)> {
    (2usize..=7).prop_flat_map(|n| (Just(n), 1..=max_users(n).unwrap()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn sdssp_cost_bounded_below((n, m) in design_instance(), raw in prop::collection::vec(0..Q, 1..8), seed: u64) {
        let lower = solve_design(n, m).unwrap().c_star;
        let (c, family) = achievable_min_c(n, m, 1_000_000).unwrap();
        prop_assert!(c >= lower);
        let d = build_sdssp(n, family.sets().to_vec(), Q).unwrap();
        let mt = metrics(&d).unwrap();
        prop_assert_eq!(mt.c, c);
        prop_assert_eq!(mt.so, Rational::from_integer(c as i128) / Rational::from_integer(m as i128));
        assert_round_trip(&d, &secrets_for(m as usize, &raw), seed)?;
    }

    #[test]
    fn nearly_stores_one_extra_symbol_per_overlap(n in 3usize..=6, m_frac in 0.0f64..1.0, raw in prop::collection::vec(0..Q, 1..8), seed: u64) {
        let m = 1 + (m_frac * (max_users(n).unwrap() - 1) as f64) as usize;
        let d = match build_nearly(n, m, Q, None) {
            Err(Error::WindowInfeasible(_)) => return Ok(()),
            other => other.unwrap(),
        };
        let k = d.k().unwrap();
        prop_assert_eq!(d.h(), m + k - 1);
        prop_assert_eq!(metrics(&d).unwrap().c, (m * k) as u64);
        assert_round_trip(&d, &secrets_for(m, &raw), seed)?;
    }

    #[test]
    fn optimal_round_trip_and_rank_secrecy(n in prop::sample::select(vec![5usize, 7, 9]), raw in prop::collection::vec(0..Q, 1..8), seed: u64) {
        let d = build_optimal(n, 2, Q).unwrap();
        prop_assert_eq!(d.h(), d.m());
        assert_round_trip(&d, &secrets_for(d.m(), &raw), seed)?;
        prop_assert!(audit_secrecy_rank(&d).unwrap().pass());
    }

    #[test]
    fn descriptor_json_is_canonical(n in 5usize..=7, m in 1usize..=6, seed: u64) {
        let d = build_nearly(n, m, Q, Some(2)).unwrap().with_seed(Some(seed));
        let text = descriptor_to_json(&d).unwrap();
        let back = descriptor_from_json(&text).unwrap();
        prop_assert_eq!(descriptor_to_json(&back).unwrap(), text);
        let s = secrets_for(m, &[seed % Q, 7]);
        prop_assert_eq!(back.encode(&s, seed).unwrap(), d.encode(&s, seed).unwrap());
    }

    #[test]
    fn secrets_json_round_trip(raw in prop::collection::vec(0..Q, 0..20)) {
        let f = PrimeField::new(Q).unwrap();
        let s: Vec<Fe> = raw.iter().map(|&v| f.elem(v)).collect();
        let (g, back) = secrets_from_json(&secrets_to_json(f, &s).unwrap()).unwrap();
        prop_assert_eq!(g, f);
        prop_assert_eq!(back, s);
    }
}
