use curious_squares::certificate::{
    brute_force_crosscheck, build_certificate, verify_certificate, Strategy, TheoremCertificate,
};
use curious_squares::mordell::Appendix;
use curious_squares::prover::ModularWitness;
use num_bigint::BigUint;
use serde_json::Value;

const SQUARES: [u64; 8] = [0, 1, 4, 9, 121, 484, 676, 44944];

fn expected() -> Vec<BigUint> {
    SQUARES.iter().map(|&v| BigUint::from(v)).collect()
}

#[test]
fn every_exponent_and_strategy_round_trips() {
    let appendix = Appendix::bundled();
    for k in 4..=7 {
        for s in [Strategy::Modular, Strategy::Elliptic, Strategy::Both] {
            let cert = build_certificate(k, s, Some(&appendix)).unwrap();
            assert_eq!(cert.conclusion, expected(), "k={k} {s}");
            let back = TheoremCertificate::from_text(&cert.to_text()).unwrap();
            assert_eq!(back, cert);
            verify_certificate(&back, Some(&appendix)).unwrap_or_else(|e| panic!("k={k} {s}: {e}"));
        }
    }
}

#[test]
fn k7_both_carries_both_proofs() {
    let cert = build_certificate(7, Strategy::Both, Some(&Appendix::bundled())).unwrap();
    assert_eq!(cert.family_proofs.len(), 13);
    for p in &cert.family_proofs {
        assert!(p.modular.is_some() && p.elliptic.is_some() && p.lift.is_none(), "{}", p.family);
        assert!(p.squares.is_empty());
    }
}

#[test]
fn crosscheck_is_inside_conclusion() {
    let cert = build_certificate(7, Strategy::Modular, None).unwrap();
    for d in [1, 3, 7, 12, 19] {
        let found = brute_force_crosscheck(d).unwrap();
        assert!(found.iter().all(|v| cert.conclusion.contains(v)), "d={d}");
    }
    assert_eq!(brute_force_crosscheck(19).unwrap(), expected());
}

#[test]
fn modulus_130_becomes_131() {
    let mut cert = build_certificate(7, Strategy::Modular, None).unwrap();
    let proof = cert.family_proofs.iter_mut().find(|p| p.family.to_string() == "14…41").unwrap();
    match proof.modular.as_mut().unwrap() {
        ModularWitness::NonResidue { modulus, .. } => {
            assert_eq!(*modulus, 130);
            *modulus = 131;
        }
        other => panic!("unexpected witness {other:?}"),
    }
    assert!(verify_certificate(&cert, None).is_err());
}

#[test]
fn embedded_rows_must_match_the_data_file() {
    let appendix = Appendix::bundled();
    let cert = build_certificate(7, Strategy::Elliptic, Some(&appendix)).unwrap();
    let mut other = appendix.clone();
    other.rows[0].points.pop();
    assert!(verify_certificate(&cert, Some(&other)).is_err());
    verify_certificate(&cert, None).unwrap();
}

fn perturb_leaf(v: &mut Value, target: usize, seen: &mut usize) -> bool {
    match v {
        Value::Object(map) => map.values_mut().any(|c| perturb_leaf(c, target, seen)),
        Value::Array(items) => items.iter_mut().any(|c| perturb_leaf(c, target, seen)),
        leaf => {
            let hit = *seen == target;
            *seen += 1;
            if hit {
                *leaf = match leaf {
                    Value::Null => Value::from(0),
                    Value::Bool(b) => Value::Bool(!*b),
                    Value::Number(n) => Value::from(n.as_i64().unwrap() + 1),
                    Value::String(s) => Value::String(format!("{s}1")),
                    _ => unreachable!(),
                };
            }
            hit
        }
    }
}

#[test]
fn every_single_leaf_tamper_is_rejected() {
    let appendix = Appendix::bundled();
    for strategy in [Strategy::Both, Strategy::Modular] {
        let cert = build_certificate(4, strategy, Some(&appendix)).unwrap();
        let original: Value = serde_json::from_str(&cert.to_text()).unwrap();
        let mut target = 0;
        loop {
            let mut doc = original.clone();
            let mut seen = 0;
            if !perturb_leaf(&mut doc, target, &mut seen) {
                break;
            }
            let accepted = TheoremCertificate::from_text(&doc.to_string())
                .map(|c| verify_certificate(&c, Some(&appendix)).is_ok())
                .unwrap_or(false);
            assert!(!accepted, "{strategy}: tamper of leaf {target} accepted");
            target += 1;
        }
        assert!(target > 100, "only {target} leaves");
    }
}
