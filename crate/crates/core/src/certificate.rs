//! The end-to-end proof as a self-contained, re-checkable document.
//!
//! A [`TheoremCertificate`] records the sieve output, one proof per surviving
//! family, and the root of every sporadic square. [`verify_certificate`]
//! trusts none of it: the sieve is recomputed, every witness is re-derived
//! from its family, and every curve proof is re-run from its embedded point
//! lists. Families that only survive a coarse sieve (`k < 7`) and lack a
//! witness or point data are closed by a [`ResidueLift`] to a finer modulus.
//! The only thing taken on faith is that those point lists are
//! complete, which the certificate states explicitly.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curious::{curious_pattern_of, enumerate_curious, perfect_square_root, CuriousError, FamilyKey};
use crate::mordell::{prove_family_via_curves, Appendix, CurveProof, MordellError};
use crate::prover::{prove_family, ModularOutcome, ModularWitness, SmallSquare, WitnessError};
use crate::serde_decimal;
use crate::sieve::{
    candidates_from_intersection, lift_family, residue_intersection, CandidateSet, LiftError, ResidueLift, SieveError,
    MIN_CANDIDATE_EXPONENT,
};

pub const CERTIFICATE_FORMAT: &str = "curious-squares-certificate/1";
/// Attached whenever a proof relies on tabulated integral points.
pub const APPENDIX_TRUST: &str = "point list completeness: external";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Modular,
    Elliptic,
    Both,
}

impl Strategy {
    pub fn uses_modular(self) -> bool {
        matches!(self, Self::Modular | Self::Both)
    }

    pub fn uses_elliptic(self) -> bool {
        matches!(self, Self::Elliptic | Self::Both)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Modular => "modular",
            Self::Elliptic => "elliptic",
            Self::Both => "both",
        })
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "modular" => Ok(Self::Modular),
            "elliptic" => Ok(Self::Elliptic),
            "both" => Ok(Self::Both),
            other => Err(format!("unknown strategy {other:?} (expected modular, elliptic or both)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SporadicCheck {
    #[serde(with = "serde_decimal::biguint")]
    pub value: BigUint,
    #[serde(with = "serde_decimal::biguint")]
    pub root: BigUint,
}

/// Evidence about one family. `lift` is present exactly when a proof the
/// strategy asks for is missing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyProof {
    pub family: FamilyKey,
    pub modular: Option<ModularWitness>,
    pub elliptic: Option<CurveProof>,
    pub lift: Option<ResidueLift>,
    /// Squares in the family; empty means the family is square-free.
    pub squares: Vec<SmallSquare>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoremCertificate {
    pub format: String,
    pub sieve_exponent: u32,
    pub strategy: Strategy,
    pub intersection: Vec<u64>,
    pub candidates: CandidateSet,
    pub sporadic_checks: Vec<SporadicCheck>,
    pub family_proofs: Vec<FamilyProof>,
    pub appendix_trust: Option<String>,
    /// Every curious perfect square.
    #[serde(with = "serde_decimal::vec_biguint")]
    pub conclusion: Vec<BigUint>,
}

impl TheoremCertificate {
    pub fn to_text(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("certificate serializes");
        s.push('\n');
        s
    }

    pub fn from_text(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[derive(Debug, Error)]
pub enum CertificateError {
    #[error(transparent)]
    Sieve(#[from] SieveError),
    #[error("family {0} has no modular witness and no residue lift")]
    Unproven(FamilyKey),
    #[error("family {0} has no integral-point rows and no residue lift")]
    MissingRows(FamilyKey),
    #[error("elliptic strategy needs appendix data")]
    NoAppendix,
    #[error(transparent)]
    Curve(#[from] MordellError),
    #[error("modular and elliptic proofs of {0} disagree")]
    Inconsistent(FamilyKey),
}

fn family_squares(f: &FamilyKey, squares: &[SmallSquare]) -> Vec<BigUint> {
    squares.iter().map(|s| f.value(s.n)).collect()
}

fn conclusion_of(sporadics: &[BigUint], proofs: &[FamilyProof]) -> Vec<BigUint> {
    let mut all: BTreeSet<BigUint> = sporadics.iter().cloned().collect();
    for p in proofs {
        all.extend(family_squares(&p.family, &p.squares));
    }
    all.into_iter().collect()
}

fn needs_lift(strategy: Strategy, modular: bool, elliptic: bool) -> bool {
    (strategy.uses_modular() && !modular) || (strategy.uses_elliptic() && !elliptic)
}

fn prove_one(
    f: &FamilyKey,
    k: u32,
    strategy: Strategy,
    appendix: Option<&Appendix>,
) -> Result<FamilyProof, CertificateError> {
    let modular = match strategy.uses_modular() {
        true => match prove_family(f) {
            ModularOutcome::Proven(w) => Some(w),
            ModularOutcome::Unproven(_) => None,
        },
        false => None,
    };
    let elliptic = match strategy.uses_elliptic() {
        true => {
            let appendix = appendix.ok_or(CertificateError::NoAppendix)?;
            match appendix.rows_for(f) {
                Some(rows) => Some(prove_family_via_curves(f, &rows)?),
                None => None,
            }
        }
        false => None,
    };
    let lift = match needs_lift(strategy, modular.is_some(), elliptic.is_some()) {
        true => Some(lift_family(f, k).ok_or(match strategy.uses_modular() && modular.is_none() {
            true => CertificateError::Unproven(*f),
            false => CertificateError::MissingRows(*f),
        })?),
        false => None,
    };
    let squares = elliptic.as_ref().map(|e| e.squares.clone()).unwrap_or_default();
    let tail = k.saturating_sub(f.m());
    if (modular.is_some() && !squares.is_empty()) || (lift.is_some() && squares.iter().any(|s| s.n >= tail)) {
        return Err(CertificateError::Inconsistent(*f));
    }
    Ok(FamilyProof { family: *f, modular, elliptic, lift, squares })
}

/// Runs the sieve, proves every surviving family and assembles the certificate.
pub fn build_certificate(
    k: u32,
    strategy: Strategy,
    appendix: Option<&Appendix>,
) -> Result<TheoremCertificate, CertificateError> {
    if k < MIN_CANDIDATE_EXPONENT {
        return Err(SieveError::ExponentTooSmall(k).into());
    }
    let intersection = residue_intersection(k)?;
    let candidates = candidates_from_intersection(&intersection)?;
    let sporadic_checks = candidates
        .sporadic_squares
        .iter()
        .map(|v| SporadicCheck { value: v.clone(), root: perfect_square_root(v).expect("sporadics are squares") })
        .collect();
    let family_proofs =
        candidates.families.par_iter().map(|f| prove_one(f, k, strategy, appendix)).collect::<Result<Vec<_>, _>>()?;
    let conclusion = conclusion_of(&candidates.sporadic_squares, &family_proofs);
    Ok(TheoremCertificate {
        format: CERTIFICATE_FORMAT.to_string(),
        sieve_exponent: k,
        strategy,
        intersection: intersection.to_vec(),
        candidates,
        sporadic_checks,
        family_proofs,
        appendix_trust: strategy.uses_elliptic().then(|| APPENDIX_TRUST.to_string()),
        conclusion,
    })
}

/// The first component of a certificate that failed to re-check.
#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("unsupported certificate format {0:?}")]
    Format(String),
    #[error("sieve: {0}")]
    Sieve(#[from] SieveError),
    #[error("sieve: recorded intersection differs from the recomputed one")]
    Intersection,
    #[error("sieve: recorded candidate set differs from the recomputed one")]
    Candidates,
    #[error("sporadic {value}: {detail}")]
    Sporadic { value: BigUint, detail: String },
    #[error("family proofs do not match the candidate families one-to-one")]
    FamilyList,
    #[error("family {family}: {detail}")]
    Family { family: FamilyKey, detail: String },
    #[error("family {family}: {source}")]
    Witness { family: FamilyKey, source: WitnessError },
    #[error("family {family}: {source}")]
    Lift { family: FamilyKey, source: LiftError },
    #[error("family {family}: {source}")]
    Curve { family: FamilyKey, source: MordellError },
    #[error("appendix trust annotation is {found:?}, expected {expected:?}")]
    Trust { expected: Option<String>, found: Option<String> },
    #[error("recorded conclusion differs from the proved set")]
    Conclusion,
    #[error(transparent)]
    Curious(#[from] CuriousError),
}

fn check_family(
    proof: &FamilyProof,
    k: u32,
    strategy: Strategy,
    appendix: Option<&Appendix>,
) -> Result<(), VerifyError> {
    let family = proof.family;
    let fail = |detail: &str| VerifyError::Family { family, detail: detail.to_string() };
    let (modular, elliptic) = (proof.modular.is_some(), proof.elliptic.is_some());
    if (modular && !strategy.uses_modular())
        || (elliptic && !strategy.uses_elliptic())
        || proof.lift.is_some() != needs_lift(strategy, modular, elliptic)
    {
        return Err(fail(&format!("evidence does not match strategy `{strategy}`")));
    }
    if let Some(lift) = &proof.lift {
        lift.check(&family, k).map_err(|source| VerifyError::Lift { family, source })?;
        if proof.squares.iter().any(|s| s.n >= lift.tail_start) {
            return Err(fail("the residue lift excludes squares in the tail, yet one is listed"));
        }
    }
    if let Some(w) = &proof.modular {
        w.check(&family).map_err(|source| VerifyError::Witness { family, source })?;
        if !proof.squares.is_empty() {
            return Err(fail("a modular witness excludes every square, yet squares are listed"));
        }
    }
    if let Some(e) = &proof.elliptic {
        if e.family != family {
            return Err(fail("curve proof belongs to another family"));
        }
        e.check().map_err(|source| VerifyError::Curve { family, source })?;
        if let Some(appendix) = appendix {
            if appendix.rows_for(&family).as_ref() != Some(&e.rows) {
                return Err(fail("embedded integral points differ from the appendix data"));
            }
        }
        if e.squares != proof.squares {
            return Err(fail("listed squares differ from the curve proof"));
        }
    } else if !proof.squares.is_empty() {
        return Err(fail("squares are listed without a curve proof"));
    }
    Ok(())
}

/// Re-checks a certificate from scratch. When `appendix` is given, embedded
/// point lists must also match it row for row.
pub fn verify_certificate(cert: &TheoremCertificate, appendix: Option<&Appendix>) -> Result<(), VerifyError> {
    if cert.format != CERTIFICATE_FORMAT {
        return Err(VerifyError::Format(cert.format.clone()));
    }
    let k = cert.sieve_exponent;
    if k < MIN_CANDIDATE_EXPONENT {
        return Err(SieveError::ExponentTooSmall(k).into());
    }
    let intersection = residue_intersection(k)?;
    if intersection.to_vec() != cert.intersection {
        return Err(VerifyError::Intersection);
    }
    if candidates_from_intersection(&intersection)? != cert.candidates {
        return Err(VerifyError::Candidates);
    }

    let recorded: Vec<&BigUint> = cert.sporadic_checks.iter().map(|c| &c.value).collect();
    if recorded != cert.candidates.sporadic_squares.iter().collect::<Vec<_>>() {
        return Err(VerifyError::Sporadic {
            value: recorded.first().map(|v| (*v).clone()).unwrap_or_default(),
            detail: "sporadic checks do not cover the candidate sporadics".into(),
        });
    }
    for c in &cert.sporadic_checks {
        let fail = |detail: &str| VerifyError::Sporadic { value: c.value.clone(), detail: detail.to_string() };
        if &c.root * &c.root != c.value {
            return Err(fail(&format!("{}² ≠ {}", c.root, c.value)));
        }
        if curious_pattern_of(&c.value).is_none() {
            return Err(fail("not a curious number"));
        }
    }

    let families: Vec<FamilyKey> = cert.family_proofs.iter().map(|p| p.family).collect();
    if families != cert.candidates.families {
        return Err(VerifyError::FamilyList);
    }
    cert.family_proofs
        .par_iter()
        .map(|p| check_family(p, k, cert.strategy, appendix))
        .collect::<Result<Vec<()>, _>>()?;

    let expected_trust = cert.strategy.uses_elliptic().then(|| APPENDIX_TRUST.to_string());
    if cert.appendix_trust != expected_trust {
        return Err(VerifyError::Trust { expected: expected_trust, found: cert.appendix_trust.clone() });
    }
    if conclusion_of(&cert.candidates.sporadic_squares, &cert.family_proofs) != cert.conclusion {
        return Err(VerifyError::Conclusion);
    }
    Ok(())
}

/// Every curious number with at most `max_digits` digits that is a square.
pub fn brute_force_crosscheck(max_digits: u32) -> Result<Vec<BigUint>, CuriousError> {
    Ok(enumerate_curious(max_digits)?.into_par_iter().filter_map(|(_, v)| perfect_square_root(&v).map(|_| v)).collect())
}
