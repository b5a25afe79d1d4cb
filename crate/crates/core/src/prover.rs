//! Modular witnesses that a family `a^m b^n a^m` contains no perfect square.
//!
//! Four kinds of certificate are produced:
//!
//! * [`ModularWitness::NonResidue`]: `M` is a non-residue mod `N`. Since
//!   `(3y)² = N·10^n + M`, any square in the family would make `M ≡ (3y)²`.
//! * [`ModularWitness::Periodic`]: for some `q` coprime to 10, every class
//!   `N·10^k + M mod q` with `0 ≤ k < ord_q(10)` is a non-residue mod `q`.
//! * [`ModularWitness::DirectPeriodic`]: the family values themselves,
//!   periodic mod `q` with period `ord_{9q}(10)`, all land on non-residues.
//!   This is what handles `10…01`, whose values are all `≡ 2 (mod 3)`.
//! * [`ModularWitness::SquareFactor`]: `a = c²a'`, `b = c²b'`, so the family is
//!   `c²` times another family and inherits that family's proof.

use std::fmt;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curious::{perfect_square_root, FamilyKey};
use crate::modular::{factorize, mul_mod, pow_mod, reduce, reduce_i128};
use crate::serde_decimal;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProverError {
    #[error("modulus must be positive")]
    ZeroModulus,
    #[error("{g} is not invertible modulo {q}")]
    NotCoprime { g: u64, q: u64 },
    #[error("modulus {0} is not coprime to 10")]
    ModulusNotCoprimeTo10(u64),
    #[error("coefficient N of {0} does not fit a machine word")]
    ModulusTooLarge(FamilyKey),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WitnessError {
    #[error("witness for {claimed} attached to family {family}")]
    WrongFamily { claimed: String, family: FamilyKey },
    #[error("NonResidue: modulus {found} differs from N = {expected}")]
    WrongModulus { expected: u64, found: u64 },
    #[error("period {found} differs from the multiplicative order {expected}")]
    WrongPeriod { expected: u64, found: u64 },
    #[error("residue list {found:?} differs from recomputed {expected:?}")]
    WrongResidues { expected: Vec<u64>, found: Vec<u64> },
    #[error("{value} is a quadratic residue modulo {modulus}")]
    ResidueIsSquare { value: u64, modulus: u64 },
    #[error("square factor {factor} does not map {family} onto {target}")]
    BadSquareFactor { factor: u8, family: FamilyKey, target: FamilyKey },
    #[error(transparent)]
    Prover(#[from] ProverError),
}

/// True iff `x² ≡ v (mod q)` has a solution.
///
/// Decided prime power by prime power: writing `v = p^s·u` with `p ∤ u`
/// inside `Z/p^e`, `v` is a square iff `v ≡ 0`, or `s` is even and `u` is a
/// square mod `p^(e−s)`; for odd `p` that is Euler's criterion on `u mod p`,
/// for `p = 2` it is `u ≡ 1` mod `min(8, 2^(e−s))`.
pub fn is_quadratic_residue(v: i128, q: u64) -> Result<bool, ProverError> {
    if q == 0 {
        return Err(ProverError::ZeroModulus);
    }
    let v = reduce_i128(v, q);
    Ok(factorize(q).into_iter().all(|(p, e)| is_residue_prime_power(v, p, e)))
}

fn is_residue_prime_power(v: u64, p: u64, e: u32) -> bool {
    let pe = p.pow(e);
    let mut u = v % pe;
    if u == 0 {
        return true;
    }
    let mut s = 0;
    while u.is_multiple_of(p) {
        u /= p;
        s += 1;
    }
    if s % 2 == 1 {
        return false;
    }
    let rest = e - s;
    if p == 2 {
        let bits = rest.min(3);
        u % (1 << bits) == 1 % (1 << bits)
    } else {
        pow_mod(u % p, (p - 1) / 2, p) == 1
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    num_integer::gcd(a, b)
}

/// Least `t ≥ 1` with `g^t ≡ 1 (mod q)`.
pub fn multiplicative_order(g: i128, q: u64) -> Result<u64, ProverError> {
    if q == 0 {
        return Err(ProverError::ZeroModulus);
    }
    let g = reduce_i128(g, q);
    if gcd(g, q) != 1 {
        return Err(ProverError::NotCoprime { g, q });
    }
    Ok(order_capped(g, q, u64::MAX).expect("unit has finite order"))
}

/// The order of the unit `g` mod `q` if it is at most `cap`.
fn order_capped(g: u64, q: u64, cap: u64) -> Option<u64> {
    let one = 1 % q;
    let mut x = g % q;
    let mut t = 1u64;
    while x != one {
        if t >= cap {
            return None;
        }
        x = mul_mod(x, g, q);
        t += 1;
    }
    Some(t)
}

/// A finite certificate that a family contains no square.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModularWitness {
    NonResidue {
        family: FamilyKey,
        /// `N` of the family.
        modulus: u64,
        /// `M mod N`.
        residue: u64,
    },
    Periodic {
        family: FamilyKey,
        modulus: u64,
        /// `ord_modulus(10)`.
        period: u64,
        /// `N·10^k + M mod modulus` for `k = 0..period`.
        residues: Vec<u64>,
    },
    DirectPeriodic {
        family: FamilyKey,
        modulus: u64,
        /// `ord_{9·modulus}(10)`.
        period: u64,
        /// Family value at `n = k`, mod `modulus`, for `k = 0..period`.
        residues: Vec<u64>,
    },
    SquareFactor {
        family: FamilyKey,
        factor: u8,
        target: FamilyKey,
        proof: Box<ModularWitness>,
    },
}

impl ModularWitness {
    pub fn family(&self) -> FamilyKey {
        match self {
            Self::NonResidue { family, .. }
            | Self::Periodic { family, .. }
            | Self::DirectPeriodic { family, .. }
            | Self::SquareFactor { family, .. } => *family,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::NonResidue { .. } => "non-residue",
            Self::Periodic { .. } => "periodic",
            Self::DirectPeriodic { .. } => "direct-periodic",
            Self::SquareFactor { .. } => "square-factor",
        }
    }

    /// Re-derives every number in the witness from its family and checks the
    /// non-residue claims.
    pub fn check(&self, family: &FamilyKey) -> Result<(), WitnessError> {
        if self.family() != *family {
            return Err(WitnessError::WrongFamily { claimed: self.family().to_string(), family: *family });
        }
        match self {
            Self::NonResidue { modulus, residue, .. } => {
                let (expected_modulus, expected_residue) = lemma1_data(family)?;
                if *modulus != expected_modulus {
                    return Err(WitnessError::WrongModulus { expected: expected_modulus, found: *modulus });
                }
                if *residue != expected_residue {
                    return Err(WitnessError::WrongResidues {
                        expected: vec![expected_residue],
                        found: vec![*residue],
                    });
                }
                non_residues(&[*residue], *modulus)
            }
            Self::Periodic { modulus, period, residues, .. } => {
                let expected_period = periodic_order(*modulus, 1)?;
                check_period(expected_period, *period)?;
                check_residues(scaled_residues(family, *modulus, expected_period), residues)?;
                non_residues(residues, *modulus)
            }
            Self::DirectPeriodic { modulus, period, residues, .. } => {
                let expected_period = periodic_order(*modulus, 9)?;
                check_period(expected_period, *period)?;
                check_residues(value_residues(family, *modulus, expected_period), residues)?;
                non_residues(residues, *modulus)
            }
            Self::SquareFactor { factor, target, proof, .. } => {
                if square_factor_reduce(family) != Some((*factor, *target)) {
                    return Err(WitnessError::BadSquareFactor { factor: *factor, family: *family, target: *target });
                }
                proof.check(target)
            }
        }
    }
}

impl fmt::Display for ModularWitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |r: &[u64]| r.iter().map(u64::to_string).collect::<Vec<_>>().join(", ");
        match self {
            Self::NonResidue { family, modulus, residue } => {
                write!(f, "{family}: M ≡ {residue} is a non-residue mod N = {modulus}")
            }
            Self::Periodic { family, modulus, period, residues } => write!(
                f,
                "{family}: q = {modulus}, ord_q(10) = {period}, N·10^k + M mod q = [{}] all non-residues",
                list(residues)
            ),
            Self::DirectPeriodic { family, modulus, period, residues } => write!(
                f,
                "{family}: q = {modulus}, ord_9q(10) = {period}, values mod q = [{}] all non-residues",
                list(residues)
            ),
            Self::SquareFactor { family, factor, target, proof } => {
                write!(f, "{family} = {}·({target}); {proof}", factor * factor)
            }
        }
    }
}

fn check_period(expected: u64, found: u64) -> Result<(), WitnessError> {
    if expected == found {
        Ok(())
    } else {
        Err(WitnessError::WrongPeriod { expected, found })
    }
}

fn check_residues(expected: Vec<u64>, found: &[u64]) -> Result<(), WitnessError> {
    if expected == found {
        Ok(())
    } else {
        Err(WitnessError::WrongResidues { expected, found: found.to_vec() })
    }
}

fn non_residues(values: &[u64], modulus: u64) -> Result<(), WitnessError> {
    for &value in values {
        if is_quadratic_residue(value as i128, modulus)? {
            return Err(WitnessError::ResidueIsSquare { value, modulus });
        }
    }
    Ok(())
}

fn lemma1_data(f: &FamilyKey) -> Result<(u64, u64), ProverError> {
    let c = f.coefficients();
    let modulus: u64 = (&c.multiplier).try_into().map_err(|_| ProverError::ModulusTooLarge(*f))?;
    Ok((modulus, reduce(&c.constant, modulus)))
}

/// `ord_{scale·q}(10)` after checking `gcd(q, 10) = 1`.
fn periodic_order(q: u64, scale: u64) -> Result<u64, ProverError> {
    if q == 0 {
        return Err(ProverError::ZeroModulus);
    }
    if gcd(q, 10) != 1 {
        return Err(ProverError::ModulusNotCoprimeTo10(q));
    }
    multiplicative_order(10, q * scale)
}

/// `N·10^k + M mod q` for `k = 0..period`.
fn scaled_residues(f: &FamilyKey, q: u64, period: u64) -> Vec<u64> {
    let c = f.coefficients();
    let (big_n, big_m) = (reduce(&c.multiplier, q), reduce(&c.constant, q));
    let mut p10 = 1 % q;
    (0..period)
        .map(|_| {
            let r = (mul_mod(big_n, p10, q) + big_m) % q;
            p10 = mul_mod(p10, 10, q);
            r
        })
        .collect()
}

/// The family values `a^m b^k a^m mod q` for `k = 0..period`.
fn value_residues(f: &FamilyKey, q: u64, period: u64) -> Vec<u64> {
    let m = f.m() as u64;
    let outer = repdigit_mod(f.a(), m, q);
    let head_shift = pow_mod(10, m, q);
    let mut inner = 0u64;
    let mut p10 = 1 % q;
    (0..period)
        .map(|_| {
            // a_m·10^(m+k) + b_k·10^m + a_m
            let v = (mul_mod(mul_mod(outer, p10, q), head_shift, q) + mul_mod(inner, head_shift, q) + outer) % q;
            inner = (mul_mod(inner, 10, q) + f.b() as u64) % q;
            p10 = mul_mod(p10, 10, q);
            v
        })
        .collect()
}

fn repdigit_mod(d: u8, len: u64, q: u64) -> u64 {
    (0..len).fold(0, |acc, _| (mul_mod(acc, 10, q) + d as u64) % q)
}

/// Lemma-style test on `M mod N`.
pub fn lemma1_test(f: &FamilyKey) -> Option<ModularWitness> {
    let (modulus, residue) = lemma1_data(f).ok()?;
    let non_residue = !is_quadratic_residue(residue as i128, modulus).ok()?;
    non_residue.then_some(ModularWitness::NonResidue { family: *f, modulus, residue })
}

/// Periodic test of `N·10^k + M` modulo `q`.
pub fn lemma2_test(f: &FamilyKey, q: u64) -> Result<Option<ModularWitness>, ProverError> {
    let period = periodic_order(q, 1)?;
    Ok(periodic_witness(f, q, period, scaled_residues).map(|(residues, period)| ModularWitness::Periodic {
        family: *f,
        modulus: q,
        period,
        residues,
    }))
}

/// Periodic test of the family values themselves modulo `q`.
pub fn direct_periodic_test(f: &FamilyKey, q: u64) -> Result<Option<ModularWitness>, ProverError> {
    let period = periodic_order(q, 9)?;
    Ok(periodic_witness(f, q, period, value_residues).map(|(residues, period)| ModularWitness::DirectPeriodic {
        family: *f,
        modulus: q,
        period,
        residues,
    }))
}

fn periodic_witness(
    f: &FamilyKey,
    q: u64,
    period: u64,
    residues_of: fn(&FamilyKey, u64, u64) -> Vec<u64>,
) -> Option<(Vec<u64>, u64)> {
    let residues = residues_of(f, q, period);
    residues.iter().all(|&r| !is_quadratic_residue(r as i128, q).expect("q > 0")).then_some((residues, period))
}

/// `(c, f')` with `a = c²a'` and `b = c²b'`, so every member of `f` is `c²`
/// times the matching member of `f'`.
pub fn square_factor_reduce(f: &FamilyKey) -> Option<(u8, FamilyKey)> {
    [2u8, 3].into_iter().find_map(|c| {
        let sq = c * c;
        if f.a().is_multiple_of(sq) && f.b().is_multiple_of(sq) {
            FamilyKey::new(f.a() / sq, f.b() / sq, f.m()).ok().map(|t| (c, t))
        } else {
            None
        }
    })
}

/// Search limits for [`search_witness`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchCaps {
    pub max_modulus: u64,
    pub max_period: u64,
}

impl Default for SearchCaps {
    fn default() -> Self {
        Self { max_modulus: 100_000, max_period: 1_000 }
    }
}

/// Tries, in order: the `M mod N` test, a square-factor reduction, then
/// ascending moduli `q` coprime to 10 (periodic test before direct test).
pub fn search_witness(f: &FamilyKey, caps: SearchCaps) -> Option<ModularWitness> {
    if let Some(w) = lemma1_test(f) {
        return Some(w);
    }
    if let Some((factor, target)) = square_factor_reduce(f) {
        if let Some(proof) = search_witness(&target, caps) {
            return Some(ModularWitness::SquareFactor { family: *f, factor, target, proof: Box::new(proof) });
        }
    }
    (3..=caps.max_modulus).filter(|q| gcd(*q, 10) == 1).find_map(|q| {
        if order_capped(10, q, caps.max_period).is_some() {
            if let Some(w) = lemma2_test(f, q).expect("q coprime to 10") {
                return Some(w);
            }
        }
        if order_capped(10 % (9 * q), 9 * q, caps.max_period).is_some() {
            return direct_periodic_test(f, q).expect("q coprime to 10");
        }
        None
    })
}

/// Why the modular strategies could not close a family.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureReport {
    pub family: FamilyKey,
    pub caps: SearchCaps,
    /// Squares found among the first [`FAILURE_SCAN`] members, as `(n, root)`.
    pub squares: Vec<SmallSquare>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmallSquare {
    pub n: u32,
    #[serde(with = "serde_decimal::biguint")]
    pub root: BigUint,
}

/// Members scanned for squares when a family resists every witness.
pub const FAILURE_SCAN: u32 = 64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModularOutcome {
    Proven(ModularWitness),
    Unproven(FailureReport),
}

pub fn prove_family(f: &FamilyKey) -> ModularOutcome {
    prove_family_with(f, SearchCaps::default())
}

pub fn prove_family_with(f: &FamilyKey, caps: SearchCaps) -> ModularOutcome {
    match search_witness(f, caps) {
        Some(w) => ModularOutcome::Proven(w),
        None => {
            let squares = (0..FAILURE_SCAN)
                .filter_map(|n| perfect_square_root(&f.value(n)).map(|root| SmallSquare { n, root }))
                .collect();
            ModularOutcome::Unproven(FailureReport { family: *f, caps, squares })
        }
    }
}
