use std::collections::BTreeSet;

use curious_squares::curious::perfect_square_root;
use curious_squares::mordell::{filter_l, phi_forward, Appendix};
use curious_squares::prover::{search_witness, SearchCaps};
use curious_squares::sieve::{candidate_set, pattern_residue, residue_intersection};
use curious_squares::{enumerate_curious, FamilyKey};
use num_bigint::BigUint;
use proptest::prelude::*;

fn families_k7() -> Vec<FamilyKey> {
    candidate_set(7).unwrap().families
}

#[test]
fn sieve_never_drops_a_small_square() {
    let all = enumerate_curious(19).unwrap();
    let squares: Vec<_> = all.iter().filter(|(_, v)| perfect_square_root(v).is_some()).collect();
    for k in 4..=7 {
        let inter = residue_intersection(k).unwrap();
        let cands = candidate_set(k).unwrap();
        let sporadic: BTreeSet<&BigUint> = cands.sporadic_squares.iter().collect();
        for (p, v) in &squares {
            assert!(inter.contains(pattern_residue(p, k)), "{v} dropped at k={k}");
            let in_family = p.family().is_some_and(|f| cands.families.contains(&f) && p.m() + p.n() >= k);
            assert!(sporadic.contains(v) || in_family, "{v} not covered at k={k}");
        }
    }
}

#[test]
fn residues_outside_intersection_hold_no_square() {
    // every curious number whose residue was discarded is checked directly
    let inter = residue_intersection(7).unwrap();
    for (p, v) in enumerate_curious(14).unwrap() {
        if !inter.contains(pattern_residue(&p, 7)) {
            assert!(perfect_square_root(&v).is_none(), "{v}");
        }
    }
}

#[test]
fn proved_families_have_no_small_squares() {
    for f in families_k7() {
        assert!(search_witness(&f, SearchCaps::default()).is_some(), "{f}");
        for n in 0..=200 {
            assert!(perfect_square_root(&f.value(n)).is_none(), "{f} at n={n}");
        }
    }
}

#[test]
fn appendix_families_are_the_candidates() {
    let families: BTreeSet<FamilyKey> = families_k7().into_iter().collect();
    assert_eq!(Appendix::bundled().families(), families);
}

#[test]
fn phi_round_trip_on_known_squares() {
    for (a, b, m, n) in [(1, 2, 1, 1), (4, 8, 1, 1), (6, 7, 1, 1), (4, 9, 2, 1)] {
        let f = FamilyKey::new(a, b, m).unwrap();
        let (j, point) = phi_forward(&f, n).unwrap();
        let back = filter_l(&f, j, &[point]);
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].index(j), n);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn square_members_survive_the_sieve(root in 0u64..10_000_000u64) {
        let v = BigUint::from(root) * root;
        if let Some(p) = curious_squares::curious::curious_pattern_of(&v) {
            let inter = residue_intersection(4).unwrap();
            prop_assert!(inter.contains(pattern_residue(&p, 4)));
        }
    }
}
