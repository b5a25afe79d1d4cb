//! Exact arithmetic on curious numbers.
//!
//! A curious number has decimal form `a…a b…b a…a`: `m` copies of the outer
//! digit `a` on each side of `n` copies of the inner digit `b`. Writing
//! `a_m = a·(10^m − 1)/9` for the repdigit of length `m`, the value is
//!
//! ```text
//! a_m b_n a_m = 10^(m+n)·a_m + 10^m·b_n + a_m
//! ```
//!
//! and for a fixed family `(a, b, m)` it satisfies the linear identity
//!
//! ```text
//! 9·a_m b_n a_m = N·10^n + M,   M = 10^m·(a − b) − a,   N = 10^m·(a·10^m + b − a)
//! ```
//!
//! which every other module builds on. All values are arbitrary precision.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::{BigInt, BigUint, Sign};
use num_traits::{Pow, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CuriousError {
    #[error("digit `{name}` = {value} is out of range {min}..=9")]
    DigitOutOfRange { name: &'static str, value: u8, min: u8 },
    #[error("a family needs a nonempty outer run (m >= 1)")]
    EmptyOuterRun,
    #[error("cannot take the square root of negative value {0}")]
    Negative(BigInt),
    #[error("max_digits must be at least 1")]
    NoDigits,
}

fn check_digit(name: &'static str, value: u8, min: u8) -> Result<u8, CuriousError> {
    if (min..=9).contains(&value) {
        Ok(value)
    } else {
        Err(CuriousError::DigitOutOfRange { name, value, min })
    }
}

fn pow10(e: u32) -> BigUint {
    BigUint::from(10u32).pow(e)
}

/// The tuple `(a, b, m, n)` naming one `(m, n)`-curious number.
///
/// When `m = 0` the outer digit does not occur and is stored as 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "RawPattern")]
pub struct DigitPattern {
    a: u8,
    b: u8,
    m: u32,
    n: u32,
}

impl DigitPattern {
    pub fn new(a: u8, b: u8, m: u32, n: u32) -> Result<Self, CuriousError> {
        let b = check_digit("b", b, 0)?;
        let a = if m == 0 { 1 } else { check_digit("a", a, 1)? };
        Ok(Self { a, b, m, n })
    }

    /// The pattern for 0: every run empty.
    pub const fn zero() -> Self {
        Self { a: 1, b: 0, m: 0, n: 0 }
    }

    /// The repdigit `d…d` of length `len`, in its `m = 0` form.
    pub fn repdigit(d: u8, len: u32) -> Result<Self, CuriousError> {
        Self::new(1, d, 0, len)
    }

    pub fn a(&self) -> u8 {
        self.a
    }

    pub fn b(&self) -> u8 {
        self.b
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    /// Length of the digit string `a^m b^n a^m` (leading zeros included).
    pub fn digit_count(&self) -> u32 {
        2 * self.m + self.n
    }

    pub fn value(&self) -> BigUint {
        curious_value(self)
    }

    /// True when every digit of the value is the same (or the value is 0).
    pub fn is_repdigit(&self) -> bool {
        self.m == 0 || self.n == 0 || self.a == self.b
    }

    /// The representation of the same value minimizing `(m, n)`.
    ///
    /// Repdigits collapse to the `m = 0` form; zero collapses to [`Self::zero`].
    /// Any other pattern (`m ≥ 1`, `n ≥ 1`, `a ≠ b`) is already unique.
    pub fn canonical(&self) -> Self {
        if self.m == 0 && (self.b == 0 || self.n == 0) {
            return Self::zero();
        }
        if self.is_repdigit() {
            let d = if self.m == 0 { self.b } else { self.a };
            return Self { a: 1, b: d, m: 0, n: self.digit_count() };
        }
        *self
    }

    /// The family this pattern belongs to, when it has an outer run.
    pub fn family(&self) -> Option<FamilyKey> {
        FamilyKey::new(self.a, self.b, self.m).ok()
    }
}

impl fmt::Display for DigitPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(a={}, b={}, m={}, n={})", self.a, self.b, self.m, self.n)
    }
}

/// A single-variable family `{a_m b_n a_m : n ≥ 0}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "RawFamily")]
pub struct FamilyKey {
    a: u8,
    b: u8,
    m: u32,
}

impl FamilyKey {
    pub fn new(a: u8, b: u8, m: u32) -> Result<Self, CuriousError> {
        if m == 0 {
            return Err(CuriousError::EmptyOuterRun);
        }
        Ok(Self { a: check_digit("a", a, 1)?, b: check_digit("b", b, 0)?, m })
    }

    pub fn a(&self) -> u8 {
        self.a
    }

    pub fn b(&self) -> u8 {
        self.b
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    /// The `n`-th member pattern `a^m b^n a^m`.
    pub fn pattern(&self, n: u32) -> DigitPattern {
        DigitPattern { a: self.a, b: self.b, m: self.m, n }
    }

    pub fn value(&self, n: u32) -> BigUint {
        curious_value(&self.pattern(n))
    }

    pub fn coefficients(&self) -> Coefficients {
        coefficients(self)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPattern {
    a: u8,
    b: u8,
    m: u32,
    n: u32,
}

impl TryFrom<RawPattern> for DigitPattern {
    type Error = CuriousError;

    fn try_from(r: RawPattern) -> Result<Self, Self::Error> {
        let p = Self::new(r.a, r.b, r.m, r.n)?;
        if p.a != r.a {
            return Err(CuriousError::DigitOutOfRange { name: "a", value: r.a, min: 1 });
        }
        Ok(p)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFamily {
    a: u8,
    b: u8,
    m: u32,
}

impl TryFrom<RawFamily> for FamilyKey {
    type Error = CuriousError;

    fn try_from(r: RawFamily) -> Result<Self, Self::Error> {
        Self::new(r.a, r.b, r.m)
    }
}

/// Shown the way the families are usually written, e.g. `442…244`.
impl fmt::Display for FamilyKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let outer = char::from(b'0' + self.a).to_string().repeat(self.m as usize);
        let inner = char::from(b'0' + self.b);
        write!(f, "{outer}{inner}…{inner}{outer}")
    }
}

/// The pair `(M, N)` with `9·a_m b_n a_m = N·10^n + M` for every `n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Coefficients {
    /// `M = 10^m·(a − b) − a`; negative whenever `b > a`.
    pub constant: BigInt,
    /// `N = 10^m·(a·10^m + b − a)`; always positive.
    pub multiplier: BigInt,
}

impl Coefficients {
    /// `N·10^n + M`, which equals nine times the `n`-th family member.
    pub fn scaled_value(&self, n: u32) -> BigInt {
        &self.multiplier * BigInt::from(pow10(n)) + &self.constant
    }
}

/// `a·(10^m − 1)/9`: the digit `a` repeated `m` times.
pub fn repdigit_value(a: u8, m: u32) -> Result<BigUint, CuriousError> {
    let a = check_digit("a", a, 0)?;
    Ok((pow10(m) - 1u32) / 9u32 * a)
}

/// Value of `a^m b^n a^m` computed as `10^(m+n)·a_m + 10^m·b_n + a_m`.
pub fn curious_value(p: &DigitPattern) -> BigUint {
    let outer = (pow10(p.m) - 1u32) / 9u32 * p.a;
    let inner = (pow10(p.n) - 1u32) / 9u32 * p.b;
    pow10(p.m + p.n) * &outer + pow10(p.m) * inner + outer
}

pub fn coefficients(f: &FamilyKey) -> Coefficients {
    let scale = BigInt::from(pow10(f.m));
    let a = BigInt::from(f.a);
    let b = BigInt::from(f.b);
    Coefficients { constant: &scale * (&a - &b) - &a, multiplier: &scale * (&a * &scale + b - a) }
}

/// Returns the square root when `x` is a perfect square.
pub fn is_perfect_square(x: &BigInt) -> Result<Option<BigUint>, CuriousError> {
    match x.sign() {
        Sign::Minus => Err(CuriousError::Negative(x.clone())),
        _ => Ok(perfect_square_root(x.magnitude())),
    }
}

/// [`is_perfect_square`] for values already known to be nonnegative.
pub fn perfect_square_root(x: &BigUint) -> Option<BigUint> {
    // squares mod 64 occupy only 12 of 64 classes
    let low = x.iter_u64_digits().next().unwrap_or(0) & 63;
    if (0x0202_0212_0203_0213u64 >> low) & 1 == 0 {
        return None;
    }
    let root = x.sqrt();
    (&root * &root == *x).then_some(root)
}

/// The canonical pattern of `x` if its decimal form is `a…ab…ba…a`.
pub fn curious_pattern_of(x: &BigUint) -> Option<DigitPattern> {
    let digits: Vec<u8> = x.to_string().bytes().map(|c| c - b'0').collect();
    let a = digits[0];
    let outer = digits.iter().take_while(|&&d| d == a).count();
    if outer == digits.len() {
        return DigitPattern::repdigit(a, digits.len() as u32).ok().map(|p| p.canonical());
    }
    let tail = digits.iter().rev().take_while(|&&d| d == a).count();
    let inner = &digits[outer..digits.len() - tail];
    if tail != outer || inner.iter().any(|&d| d != inner[0]) {
        return None;
    }
    DigitPattern::new(a, inner[0], outer as u32, inner.len() as u32).ok()
}

/// All curious numbers with at most `max_digits` decimal digits, ascending,
/// one entry per value, each paired with its canonical pattern.
pub fn enumerate_curious(max_digits: u32) -> Result<Vec<(DigitPattern, BigUint)>, CuriousError> {
    if max_digits == 0 {
        return Err(CuriousError::NoDigits);
    }
    let mut by_value: BTreeMap<BigUint, DigitPattern> = BTreeMap::new();
    by_value.insert(BigUint::zero(), DigitPattern::zero());
    for d in 1..=9u8 {
        for len in 1..=max_digits {
            let p = DigitPattern { a: 1, b: d, m: 0, n: len };
            by_value.entry(p.value()).or_insert(p);
        }
    }
    for m in 1..=max_digits / 2 {
        for n in 1..=max_digits - 2 * m {
            for a in 1..=9u8 {
                for b in (0..=9u8).filter(|&b| b != a) {
                    let p = DigitPattern { a, b, m, n };
                    by_value.entry(p.value()).or_insert(p);
                }
            }
        }
    }
    Ok(by_value.into_iter().map(|(v, p)| (p, v)).collect())
}
