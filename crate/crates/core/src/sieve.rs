//! Reduction of the curious-square problem modulo `10^k`.
//!
//! Every curious number falls into exactly one of three classes, read off its
//! canonical pattern:
//!
//! * **finite**: `m + n < k` (or a repdigit shorter than `k`). There are
//!   finitely many, all below `10^(2k)`.
//! * **stable family**: `1 ≤ m < k`, `a ≠ b`, `m + n ≥ k`. The last `k` digits
//!   are `b^(k−m) a^m` no matter how large `n` grows, so the whole tail of the
//!   family `(a, b, m)` shares a single residue.
//! * **saturated**: `m ≥ k` or a repdigit of length `≥ k`. The last `k` digits
//!   are a single repeated digit `d^k`, and the preimage is a two-parameter set
//!   that no single-variable argument can close off.
//!
//! Intersecting the curious residues with the square residues and expanding
//! each surviving residue into its preimage leaves a finite list of sporadic
//! squares plus a short list of families that still need a proof.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::{BigInt, BigUint};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curious::{perfect_square_root, DigitPattern, FamilyKey};
use crate::modular::{inv_mod, mul_mod, reduce};
use crate::serde_decimal;

/// Smallest exponent for which the sieve closes off every saturated residue.
pub const MIN_CANDIDATE_EXPONENT: u32 = 4;
/// Largest supported exponent: residues and their products must fit a `u64`.
pub const MAX_EXPONENT: u32 = 9;
pub const DEFAULT_EXPONENT: u32 = 7;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SieveError {
    #[error("modulus exponent k = {0} is outside 1..={max}", max = MAX_EXPONENT)]
    ExponentOutOfRange(u32),
    #[error("k >= {min} required to reduce to single-variable families (got k = {0})", min = MIN_CANDIDATE_EXPONENT)]
    ExponentTooSmall(u32),
    #[error("residue {residue} is not below 10^{k}")]
    ResidueOutOfRange { residue: u64, k: u32 },
    #[error(
        "residue {residue} mod 10^{k} has a saturated preimage (digits {digits:?}); no finite family cover exists"
    )]
    Saturated { residue: u64, k: u32, digits: Vec<u8> },
}

fn check_exponent(k: u32) -> Result<u64, SieveError> {
    if (1..=MAX_EXPONENT).contains(&k) {
        Ok(10u64.pow(k))
    } else {
        Err(SieveError::ExponentOutOfRange(k))
    }
}

/// A subset of `Z/10^k`, stored as a dense bitset.
#[derive(Clone, PartialEq, Eq)]
pub struct ResidueSet {
    exponent: u32,
    words: Vec<u64>,
}

impl ResidueSet {
    fn empty(exponent: u32) -> Self {
        let modulus = 10usize.pow(exponent);
        Self { exponent, words: vec![0; modulus.div_ceil(64)] }
    }

    pub fn exponent(&self) -> u32 {
        self.exponent
    }

    pub fn modulus(&self) -> u64 {
        10u64.pow(self.exponent)
    }

    fn insert(&mut self, r: u64) {
        self.words[(r / 64) as usize] |= 1 << (r % 64);
    }

    pub fn contains(&self, r: u64) -> bool {
        r < self.modulus() && self.words[(r / 64) as usize] >> (r % 64) & 1 == 1
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Members in ascending order.
    pub fn iter(&self) -> impl Iterator<Item = u64> + '_ {
        self.words.iter().enumerate().flat_map(|(i, &w)| {
            let base = i as u64 * 64;
            (0..64).filter(move |b| w >> b & 1 == 1).map(move |b| base + b)
        })
    }

    pub fn to_vec(&self) -> Vec<u64> {
        self.iter().collect()
    }

    pub fn intersection(&self, other: &Self) -> Self {
        assert_eq!(self.exponent, other.exponent, "residue sets over different moduli");
        Self { exponent: self.exponent, words: self.words.iter().zip(&other.words).map(|(a, b)| a & b).collect() }
    }

    fn union_with(mut self, other: &Self) -> Self {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
        self
    }

    pub fn from_members(exponent: u32, members: impl IntoIterator<Item = u64>) -> Result<Self, SieveError> {
        let modulus = check_exponent(exponent)?;
        let mut set = Self::empty(exponent);
        for r in members {
            if r >= modulus {
                return Err(SieveError::ResidueOutOfRange { residue: r, k: exponent });
            }
            set.insert(r);
        }
        Ok(set)
    }
}

impl std::fmt::Debug for ResidueSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ResidueSet").field("exponent", &self.exponent).field("len", &self.len()).finish()
    }
}

/// Residue of a pattern's value mod `10^k`, via `9^{-1}·(N·10^n + M)`.
///
/// Repdigit patterns (`m = 0`) have no coefficients and are built digitwise.
pub fn pattern_residue(p: &DigitPattern, k: u32) -> u64 {
    let modulus = 10u64.pow(k);
    let Some(family) = p.family() else {
        let len = p.n().min(k);
        return (10u64.pow(len) - 1) / 9 * p.b() as u64;
    };
    let inv9 = inv_mod(9, modulus).expect("9 is a unit mod 10^k");
    let c = family.coefficients();
    let shift = if p.n() >= k { 0 } else { 10u64.pow(p.n()) };
    let scaled = (mul_mod(reduce(&c.multiplier, modulus), shift, modulus) + reduce(&c.constant, modulus)) % modulus;
    mul_mod(inv9, scaled, modulus)
}

/// Residue shared by every member of `f` with `m + n ≥ k`.
pub fn stable_residue(f: &FamilyKey, k: u32) -> u64 {
    pattern_residue(&f.pattern(k.saturating_sub(f.m())), k)
}

/// `d^k`: the residue of every saturated curious number with digit `d`.
fn saturated_residue(d: u8, k: u32) -> u64 {
    (10u64.pow(k) - 1) / 9 * d as u64
}

/// Residues of all patterns with `m ≤ m_cap` and `n ≤ n_total_cap − m`.
pub fn curious_residues_with_caps(k: u32, m_cap: u32, n_total_cap: u32) -> Result<ResidueSet, SieveError> {
    check_exponent(k)?;
    let mut set = ResidueSet::empty(k);
    for m in 0..=m_cap {
        for n in 0..=n_total_cap.saturating_sub(m) {
            for a in 1..=9u8 {
                for b in 0..=9u8 {
                    let p = DigitPattern::new(a, b, m, n).expect("digits in range");
                    set.insert(pattern_residue(&p, k));
                }
            }
        }
    }
    Ok(set)
}

/// All residues mod `10^k` of curious numbers.
///
/// Patterns with `m ≤ k` and `n ≤ k − m` already realize every residue, since
/// any larger pattern agrees in its last `k` digits with one of them.
pub fn curious_residues(k: u32) -> Result<ResidueSet, SieveError> {
    curious_residues_with_caps(k, k, k)
}

/// `{ s² mod 10^k }`, built in parallel over disjoint ranges of `s`.
pub fn square_residues(k: u32) -> Result<ResidueSet, SieveError> {
    let modulus = check_exponent(k)?;
    const CHUNK: u64 = 1 << 16;
    // s and 10^k − s share a square, so half the range suffices
    let half = modulus / 2;
    let chunks = half / CHUNK + 1;
    let set = (0..chunks)
        .into_par_iter()
        .fold(
            || ResidueSet::empty(k),
            |mut acc, c| {
                let start = c * CHUNK;
                let end = (start + CHUNK).min(half + 1);
                let mut sq = mul_mod(start % modulus, start % modulus, modulus);
                for s in start..end {
                    acc.insert(sq);
                    // (s + 1)² = s² + 2s + 1
                    sq = (sq + 2 * s + 1) % modulus;
                }
                acc
            },
        )
        .reduce(|| ResidueSet::empty(k), |a, b| a.union_with(&b));
    Ok(set)
}

pub fn residue_intersection(k: u32) -> Result<ResidueSet, SieveError> {
    let (curious, squares) = rayon::join(|| curious_residues(k), || square_residues(k));
    Ok(curious?.intersection(&squares?))
}

/// The curious numbers reducing to one residue class mod `10^k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreimageStructure {
    pub residue: u64,
    pub exponent: u32,
    /// Canonical patterns with `m + n < k`, ascending by value.
    pub finite_members: Vec<(DigitPattern, BigUint)>,
    /// Families whose tail (`m + n ≥ k`) lands on this residue.
    pub stable_families: Vec<FamilyKey>,
    /// Digits `d` with `d^k` equal to the residue; nonempty means the preimage
    /// contains a two-parameter set.
    pub saturated_digits: Vec<u8>,
}

impl PreimageStructure {
    fn new(residue: u64, exponent: u32) -> Self {
        Self {
            residue,
            exponent,
            finite_members: Vec::new(),
            stable_families: Vec::new(),
            saturated_digits: Vec::new(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.stable_families.is_empty() && self.saturated_digits.is_empty()
    }
}

/// Every canonical finite pattern for exponent `k`, with its value.
fn finite_patterns(k: u32) -> Vec<(DigitPattern, BigUint)> {
    let mut out = vec![(DigitPattern::zero(), BigUint::from(0u32))];
    for d in 1..=9u8 {
        for len in 1..k {
            let p = DigitPattern::repdigit(d, len).expect("digit in range");
            out.push((p, p.value()));
        }
    }
    for m in 1..k {
        for n in 1..k - m {
            for a in 1..=9u8 {
                for b in (0..=9u8).filter(|&b| b != a) {
                    let p = DigitPattern::new(a, b, m, n).expect("digits in range");
                    out.push((p, p.value()));
                }
            }
        }
    }
    out
}

fn stable_families(k: u32) -> Vec<FamilyKey> {
    let mut out = Vec::new();
    for a in 1..=9u8 {
        for b in (0..=9u8).filter(|&b| b != a) {
            for m in 1..k {
                out.push(FamilyKey::new(a, b, m).expect("digits in range"));
            }
        }
    }
    out
}

/// Preimage structures for every residue in `residues`, built in one pass.
fn preimages(residues: &BTreeSet<u64>, k: u32) -> BTreeMap<u64, PreimageStructure> {
    let mut map: BTreeMap<u64, PreimageStructure> =
        residues.iter().map(|&r| (r, PreimageStructure::new(r, k))).collect();
    let modulus = 10u64.pow(k);
    for (p, v) in finite_patterns(k) {
        let r = reduce(&BigInt::from(v.clone()), modulus);
        if let Some(s) = map.get_mut(&r) {
            s.finite_members.push((p, v));
        }
    }
    for f in stable_families(k) {
        if let Some(s) = map.get_mut(&stable_residue(&f, k)) {
            s.stable_families.push(f);
        }
    }
    for d in 1..=9u8 {
        if let Some(s) = map.get_mut(&saturated_residue(d, k)) {
            s.saturated_digits.push(d);
        }
    }
    for s in map.values_mut() {
        s.finite_members.sort_by(|x, y| x.1.cmp(&y.1));
        s.stable_families.sort();
    }
    map
}

pub fn preimage_structure(residue: u64, k: u32) -> Result<PreimageStructure, SieveError> {
    let modulus = check_exponent(k)?;
    if residue >= modulus {
        return Err(SieveError::ResidueOutOfRange { residue, k });
    }
    Ok(preimages(&BTreeSet::from([residue]), k).remove(&residue).expect("requested residue present"))
}

/// What survives the sieve: sporadic squares plus families still to be proved.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub exponent: u32,
    #[serde(with = "serde_decimal::vec_biguint")]
    pub sporadic_squares: Vec<BigUint>,
    pub families: Vec<FamilyKey>,
}

/// Runs the full sieve for exponent `k ≥ 4`.
pub fn candidate_set(k: u32) -> Result<CandidateSet, SieveError> {
    if k < MIN_CANDIDATE_EXPONENT {
        return Err(SieveError::ExponentTooSmall(k));
    }
    let intersection = residue_intersection(k)?;
    candidates_from_intersection(&intersection)
}

/// Prunes an already computed intersection into a [`CandidateSet`].
pub fn candidates_from_intersection(intersection: &ResidueSet) -> Result<CandidateSet, SieveError> {
    let k = intersection.exponent();
    let residues: BTreeSet<u64> = intersection.iter().collect();
    let mut sporadic = BTreeSet::new();
    let mut families = BTreeSet::new();
    for (r, s) in preimages(&residues, k) {
        if !s.saturated_digits.is_empty() {
            return Err(SieveError::Saturated { residue: r, k, digits: s.saturated_digits });
        }
        sporadic.extend(s.finite_members.into_iter().filter(|(_, v)| perfect_square_root(v).is_some()).map(|(_, v)| v));
        families.extend(s.stable_families);
    }
    Ok(CandidateSet {
        exponent: k,
        sporadic_squares: sporadic.into_iter().collect(),
        families: families.into_iter().collect(),
    })
}

/// The tail `{n ≥ tail_start}` of a family is square-free because, from
/// `n ≥ exponent − m` on, every member is `≡ residue (mod 10^exponent)` and
/// `residue` is not a square modulo `10^exponent`; the members in between are
/// checked one by one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResidueLift {
    pub family: FamilyKey,
    pub tail_start: u32,
    pub exponent: u32,
    pub residue: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LiftError {
    #[error("lift for {found} attached to {expected}")]
    WrongFamily { expected: FamilyKey, found: FamilyKey },
    #[error("lift starts at n = {found}, expected {expected}")]
    WrongStart { expected: u32, found: u32 },
    #[error("lift exponent {0} is not above the outer run or exceeds {max}", max = MAX_EXPONENT)]
    BadExponent(u32),
    #[error("stable residue mod 10^{exponent} is {expected}, not {found}")]
    WrongResidue { exponent: u32, expected: u64, found: u64 },
    #[error("{residue} is a square modulo 10^{exponent}")]
    SquareResidue { exponent: u32, residue: u64 },
    #[error("member n = {0} is a perfect square")]
    SquareMember(u32),
}

impl ResidueLift {
    /// Re-derives the lift for `family` at sieve exponent `k`.
    pub fn check(&self, family: &FamilyKey, k: u32) -> Result<(), LiftError> {
        if self.family != *family {
            return Err(LiftError::WrongFamily { expected: *family, found: self.family });
        }
        let start = k.saturating_sub(family.m());
        if self.tail_start != start {
            return Err(LiftError::WrongStart { expected: start, found: self.tail_start });
        }
        let e = self.exponent;
        if e <= family.m() || e > MAX_EXPONENT {
            return Err(LiftError::BadExponent(e));
        }
        let expected = stable_residue(family, e);
        if expected != self.residue {
            return Err(LiftError::WrongResidue { exponent: e, expected, found: self.residue });
        }
        let modulus = 10u64.pow(e);
        if crate::prover::is_quadratic_residue(self.residue as i128, modulus).expect("modulus > 0") {
            return Err(LiftError::SquareResidue { exponent: e, residue: self.residue });
        }
        match (start..e - family.m()).find(|&n| perfect_square_root(&family.value(n)).is_some()) {
            Some(n) => Err(LiftError::SquareMember(n)),
            None => Ok(()),
        }
    }
}

/// Tries exponents above `k` in turn for a [`ResidueLift`] of `f`'s tail.
pub fn lift_family(f: &FamilyKey, k: u32) -> Option<ResidueLift> {
    (k.max(f.m() + 1)..=MAX_EXPONENT).find_map(|exponent| {
        let lift = ResidueLift {
            family: *f,
            tail_start: k.saturating_sub(f.m()),
            exponent,
            residue: stable_residue(f, exponent),
        };
        lift.check(f, k).ok().map(|()| lift)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn family(a: u8, b: u8, m: u32) -> FamilyKey {
        FamilyKey::new(a, b, m).unwrap()
    }

    /// Oracle: the last k digits read off the decimal string.
    fn residue_by_digits(p: &DigitPattern, k: u32) -> u64 {
        let s = p.value().to_string();
        let tail = &s[s.len().saturating_sub(k as usize)..];
        tail.parse().unwrap()
    }

    #[test]
    fn exponent_bounds() {
        assert_eq!(curious_residues(0).unwrap_err(), SieveError::ExponentOutOfRange(0));
        assert_eq!(square_residues(10).unwrap_err(), SieveError::ExponentOutOfRange(10));
        assert_eq!(candidate_set(3).unwrap_err(), SieveError::ExponentTooSmall(3));
        assert!(preimage_structure(10_000, 4).is_err());
    }

    #[test]
    fn k1_sets() {
        assert_eq!(curious_residues(1).unwrap().to_vec(), (0..10).collect::<Vec<_>>());
        assert_eq!(square_residues(1).unwrap().to_vec(), vec![0, 1, 4, 5, 6, 9]);
    }

    #[test]
    fn square_residues_match_direct_squaring() {
        for k in 1..=4 {
            let modulus = 10u64.pow(k);
            let direct: BTreeSet<u64> = (0..=modulus).map(|s| s * s % modulus).collect();
            assert_eq!(square_residues(k).unwrap().to_vec(), direct.into_iter().collect::<Vec<_>>());
        }
    }

    #[test]
    fn k7_memberships() {
        let c = curious_residues(7).unwrap();
        assert!(c.contains(2_222_224));
        assert!(c.contains(1));
        let s = square_residues(7).unwrap();
        assert!(s.contains(44944));
        assert!(!s.contains(7));
        let i = c.intersection(&s);
        assert!(i.contains(161) && i.contains(4_433_344));
        assert_eq!(i.len(), 77);
    }

    #[test]
    fn residue_routes_agree() {
        for k in 1..=7 {
            for m in 0..=9 {
                for n in 0..=9 {
                    for a in 1..=9 {
                        for b in 0..=9 {
                            let p = DigitPattern::new(a, b, m, n).unwrap();
                            assert_eq!(pattern_residue(&p, k), residue_by_digits(&p, k), "{p} k={k}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn covering_is_stable_under_larger_caps() {
        for k in 1..=6 {
            let base = curious_residues(k).unwrap();
            assert_eq!(curious_residues_with_caps(k, k + 3, k + 6).unwrap(), base, "k={k}");
        }
    }

    #[test]
    fn preimage_examples() {
        let s = preimage_structure(4_333_444, 7).unwrap();
        let finite: Vec<_> = s.finite_members.iter().map(|(_, v)| v.clone()).collect();
        assert_eq!(finite, vec![BigUint::from(444_333_444u64)]);
        assert!(s.stable_families.is_empty() && s.saturated_digits.is_empty());

        let s = preimage_structure(1, 7).unwrap();
        assert_eq!(s.finite_members.len(), 1);
        assert_eq!(s.finite_members[0].1, BigUint::from(1u32));
        assert_eq!(s.stable_families, vec![family(1, 0, 1)]);

        let s = preimage_structure(2_222_224, 7).unwrap();
        assert_eq!(s.stable_families, vec![family(4, 2, 1)]);

        let s = preimage_structure(444, 3).unwrap();
        assert_eq!(s.saturated_digits, vec![4]);
    }

    #[test]
    fn finite_members_really_reduce_to_residue() {
        let k = 5;
        for r in residue_intersection(k).unwrap().iter() {
            let s = preimage_structure(r, k).unwrap();
            for (p, v) in &s.finite_members {
                assert_eq!(residue_by_digits(p, k), r);
                assert!(p.m() + p.n() < k || p.m() == 0);
                assert_eq!(p.canonical(), *p);
                assert_eq!(&p.value(), v);
            }
            for f in &s.stable_families {
                for n in k - f.m()..k + 4 {
                    assert_eq!(residue_by_digits(&f.pattern(n), k), r);
                }
            }
        }
    }

    #[test]
    fn candidates_k7() {
        let c = candidate_set(7).unwrap();
        let sporadic: Vec<u64> = c.sporadic_squares.iter().map(|v| v.try_into().unwrap()).collect();
        assert_eq!(sporadic, vec![0, 1, 4, 9, 121, 484, 676, 44944]);
        assert_eq!(c.families.len(), 13);
        assert!(c.families.contains(&family(4, 3, 3)));
        assert!(!c.families.contains(&family(4, 4, 3)));
    }

    #[test]
    fn smaller_exponents_keep_more() {
        let seven = candidate_set(7).unwrap();
        for k in 4..7 {
            let c = candidate_set(k).unwrap();
            assert_eq!(c.sporadic_squares, seven.sporadic_squares, "k={k}");
            assert!(seven.families.iter().all(|f| c.families.contains(f)), "k={k}");
        }
    }

    #[test]
    fn lifts_close_extra_tails() {
        let seven = candidate_set(7).unwrap();
        for k in 4..7 {
            for f in candidate_set(k).unwrap().families {
                match lift_family(&f, k) {
                    Some(lift) => {
                        assert!(!seven.families.contains(&f), "{f} lifted at k={k}");
                        assert_eq!(lift.check(&f, k), Ok(()));
                    }
                    None => assert!(seven.families.contains(&f), "{f} at k={k} has no lift"),
                }
            }
        }
        let f = family(4, 8, 1);
        let lift = lift_family(&f, 4).unwrap();
        assert_eq!(lift.tail_start, 3);
        assert!(lift.check(&f, 3).is_err());
        let bad = ResidueLift { residue: lift.residue + 1, ..lift.clone() };
        assert!(bad.check(&f, 4).is_err());
        let bad = ResidueLift { exponent: 4, residue: stable_residue(&f, 4), ..lift };
        assert!(matches!(bad.check(&f, 4), Err(LiftError::SquareResidue { .. })));
    }

    proptest! {
        #[test]
        fn residue_set_membership(k in 1u32..5, members in proptest::collection::vec(0u64..10_000, 0..50)) {
            let modulus = 10u64.pow(k);
            let members: Vec<u64> = members.into_iter().map(|r| r % modulus).collect();
            let set = ResidueSet::from_members(k, members.iter().copied()).unwrap();
            let expected: BTreeSet<u64> = members.into_iter().collect();
            prop_assert_eq!(set.len(), expected.len());
            prop_assert_eq!(set.to_vec(), expected.into_iter().collect::<Vec<_>>());
        }
    }
}
