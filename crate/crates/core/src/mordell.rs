//! Squares in a family as integral points on Mordell curves.
//!
//! Multiplying `(3y)² = N·10^n + M` by `N²·10^(2j)` with `n = 3k + j` gives
//!
//! ```text
//! (N·10^j·3y)² = (N·10^(j+k))³ + N²·10^(2j)·M
//! ```
//!
//! so every square in the family `(a, b, m)` is an integral point on one of the
//! three curves `y² = x³ + B_j`, `B_j = N²·10^(2j)·M`, and it has the special
//! shape `(N·10^(j+k), 3N·10^j·y)`. Conversely any point of that shape yields a
//! square at `n = 3k + j`. Given complete lists of integral points on the
//! three curves, the squares of the family are read off exactly.

use std::cmp::Ordering;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{Pow, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curious::{perfect_square_root, FamilyKey};
use crate::prover::SmallSquare;
use crate::serde_decimal;

pub mod appendix;

pub use appendix::{verify_appendix, Appendix, AppendixCheck, AppendixFailure, AppendixReport, DEFAULT_X_MAX};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MordellError {
    #[error("curve index j = {0} is outside 0..=2")]
    BadIndex(u8),
    #[error("family {0} has M = 0; its curves are singular")]
    Degenerate(FamilyKey),
    #[error("expected the three rows j = 0, 1, 2 of {family}; {detail}")]
    Rows { family: FamilyKey, detail: String },
    #[error("row ({family}, j={j}): B = {found} but the curve has B = {expected}")]
    ConstantMismatch { family: FamilyKey, j: u8, expected: BigInt, found: BigInt },
    #[error("row ({family}, j={j}): point ({x}, {y}) is not on the curve")]
    OffCurve { family: FamilyKey, j: u8, x: BigInt, y: BigInt },
    #[error("{family} at n = {n} is not a perfect square")]
    NotASquare { family: FamilyKey, n: u32 },
    #[error("recorded squares {found:?} differ from those derived from the points {expected:?}")]
    SquaresMismatch { expected: Vec<u32>, found: Vec<u32> },
}

/// `y² = x³ + B` with `B ≠ 0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MordellCurve {
    constant: BigInt,
    origin: Option<(FamilyKey, u8)>,
}

impl MordellCurve {
    /// A curve not tied to any family. Returns `None` for the singular `B = 0`.
    pub fn new(constant: BigInt) -> Option<Self> {
        (!constant.is_zero()).then_some(Self { constant, origin: None })
    }

    pub fn constant(&self) -> &BigInt {
        &self.constant
    }

    pub fn origin(&self) -> Option<(FamilyKey, u8)> {
        self.origin
    }

    /// `−16·27·B²`, never zero.
    pub fn discriminant(&self) -> BigInt {
        BigInt::from(-432) * &self.constant * &self.constant
    }

    pub fn contains(&self, p: &IntegralPoint) -> bool {
        is_on_curve(self, p)
    }
}

/// An integral point, kept with `y ≥ 0`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IntegralPoint {
    #[serde(with = "serde_decimal::bigint")]
    pub x: BigInt,
    #[serde(with = "serde_decimal::bigint")]
    pub y: BigInt,
}

impl IntegralPoint {
    pub fn new(x: impl Into<BigInt>, y: impl Into<BigInt>) -> Self {
        Self { x: x.into(), y: y.into() }
    }
}

/// A point of shape `(N·10^(j+k), 3N·10^j·root)`; it encodes `root²` as the
/// family member at `n = 3k + j`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct LFormPoint {
    pub k: u32,
    pub root: BigUint,
}

impl LFormPoint {
    pub fn index(&self, j: u8) -> u32 {
        3 * self.k + j as u32
    }

    pub fn to_point(&self, f: &FamilyKey, j: u8) -> IntegralPoint {
        let n = f.coefficients().multiplier;
        let scale = BigInt::from(10u32).pow(j as u32);
        IntegralPoint {
            x: &n * &scale * BigInt::from(10u32).pow(self.k),
            y: &n * scale * 3 * BigInt::from(self.root.clone()),
        }
    }
}

fn check_index(j: u8) -> Result<(), MordellError> {
    if j <= 2 {
        Ok(())
    } else {
        Err(MordellError::BadIndex(j))
    }
}

/// The curve `y² = x³ + N²·10^(2j)·M` attached to `(f, j)`.
pub fn curve_for(f: &FamilyKey, j: u8) -> Result<MordellCurve, MordellError> {
    check_index(j)?;
    let c = f.coefficients();
    if c.constant.is_zero() {
        return Err(MordellError::Degenerate(*f));
    }
    let constant = &c.multiplier * &c.multiplier * BigInt::from(10u32).pow(2 * j as u32) * c.constant;
    Ok(MordellCurve { constant, origin: Some((*f, j)) })
}

pub fn is_on_curve(c: &MordellCurve, p: &IntegralPoint) -> bool {
    &p.y * &p.y == &p.x * &p.x * &p.x + &c.constant
}

/// Least `x` with `x³ + B ≥ 0`.
fn search_floor(b: &BigInt) -> BigInt {
    let root = b.magnitude().cbrt();
    match b.sign() {
        Sign::Minus => {
            let root = BigInt::from(root);
            if &root * &root * &root == -b {
                root
            } else {
                root + 1
            }
        }
        _ => -BigInt::from(root),
    }
}

/// Residue filters: `ok[x mod q]` says whether `x³ + B` can be a square mod `q`.
struct CubeFilter {
    moduli: [i64; 4],
    ok: [Vec<bool>; 4],
}

impl CubeFilter {
    fn new(b: i128) -> Self {
        let moduli = [64, 63, 65, 11];
        let ok = moduli.map(|q| {
            let squares: Vec<bool> = {
                let mut s = vec![false; q as usize];
                for x in 0..q {
                    s[(x * x % q) as usize] = true;
                }
                s
            };
            (0..q)
                .map(|x| {
                    let v = (x * x * x) as i128 + b;
                    squares[v.rem_euclid(q as i128) as usize]
                })
                .collect()
        });
        Self { moduli, ok }
    }

    #[inline]
    fn may_be_square(&self, x: i64) -> bool {
        self.moduli.iter().zip(&self.ok).all(|(&q, ok)| ok[x.rem_euclid(q) as usize])
    }
}

fn exact_sqrt_i128(v: i128) -> Option<i128> {
    if v < 0 {
        return None;
    }
    let mut r = (v as f64).sqrt() as i128;
    while r * r > v {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= v {
        r += 1;
    }
    (r * r == v).then_some(r)
}

const SEARCH_CHUNK: i64 = 1 << 18;
/// The machine-word path needs `|x|³ + |B|` to fit an `i128`.
const FAST_X_LIMIT: i64 = 1_000_000_000_000;

/// Every integral point with `x ≤ x_max` and `y ≥ 0`, ascending in `x`.
///
/// Candidates run from the least `x` with `x³ + B ≥ 0` up to `x_max`; each is
/// kept iff `x³ + B` is a perfect square.
pub fn bounded_point_search(c: &MordellCurve, x_max: i64) -> Vec<IntegralPoint> {
    let lower = search_floor(&c.constant);
    let fast = (|| {
        let lo = lower.to_i64()?;
        let b = c.constant.to_i128()?;
        (lo.abs() <= FAST_X_LIMIT && x_max <= FAST_X_LIMIT && b.unsigned_abs() < 1 << 124).then_some((lo, b))
    })();
    match fast {
        Some((lo, b)) => search_fast(lo, x_max, b),
        None => search_big(&lower, x_max, &c.constant),
    }
}

fn search_fast(lo: i64, hi: i64, b: i128) -> Vec<IntegralPoint> {
    if lo > hi {
        return Vec::new();
    }
    let filter = CubeFilter::new(b);
    let chunks = (hi - lo) / SEARCH_CHUNK + 1;
    let mut points: Vec<IntegralPoint> = (0..chunks)
        .into_par_iter()
        .flat_map_iter(|i| {
            let start = lo + i * SEARCH_CHUNK;
            let end = (start + SEARCH_CHUNK - 1).min(hi);
            let filter = &filter;
            (start..=end).filter_map(move |x| {
                if !filter.may_be_square(x) {
                    return None;
                }
                let x128 = x as i128;
                exact_sqrt_i128(x128 * x128 * x128 + b).map(|y| IntegralPoint::new(x, y))
            })
        })
        .collect();
    points.sort();
    points
}

fn search_big(lo: &BigInt, hi: i64, b: &BigInt) -> Vec<IntegralPoint> {
    let hi = BigInt::from(hi);
    let mut out = Vec::new();
    let mut x = lo.clone();
    while x <= hi {
        let v = &x * &x * &x + b;
        if let Some(y) = perfect_square_root(v.magnitude()).filter(|_| !v.is_negative()) {
            out.push(IntegralPoint::new(x.clone(), y));
        }
        x += 1;
    }
    out
}

/// Points of `(f, j)` in L-form, as `(k, root)` pairs.
pub fn filter_l(f: &FamilyKey, j: u8, points: &[IntegralPoint]) -> Vec<LFormPoint> {
    let n = f.coefficients().multiplier;
    let y_unit = &n * 3 * BigInt::from(10u32).pow(j as u32);
    let mut out: Vec<LFormPoint> = points
        .iter()
        .filter_map(|p| {
            if !p.x.is_positive() || p.y.is_negative() {
                return None;
            }
            let (t, rem) = p.x.div_rem(&n);
            if !rem.is_zero() {
                return None;
            }
            let exponent = power_of_ten(&t)?.checked_sub(j as u32)?;
            let (root, rem) = p.y.div_rem(&y_unit);
            rem.is_zero().then(|| LFormPoint { k: exponent, root: root.magnitude().clone() })
        })
        .collect();
    out.sort();
    out
}

fn power_of_ten(t: &BigInt) -> Option<u32> {
    let mut t = t.clone();
    let mut e = 0;
    let ten = BigInt::from(10u32);
    while t > BigInt::from(1u32) {
        let (q, r) = t.div_rem(&ten);
        if !r.is_zero() {
            return None;
        }
        t = q;
        e += 1;
    }
    (t == BigInt::from(1u32)).then_some(e)
}

/// The L-form point encoding a square family member `n`.
pub fn phi_forward(f: &FamilyKey, n: u32) -> Result<(u8, IntegralPoint), MordellError> {
    let root = perfect_square_root(&f.value(n)).ok_or(MordellError::NotASquare { family: *f, n })?;
    let j = (n % 3) as u8;
    Ok((j, LFormPoint { k: n / 3, root }.to_point(f, j)))
}

/// A family's square set read off its three curves.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurveProof {
    pub family: FamilyKey,
    /// The rows for `j = 0, 1, 2`, in that order.
    pub rows: Vec<AppendixRow>,
    /// Members that are squares; empty proves the family square-free.
    pub squares: Vec<SmallSquare>,
}

impl CurveProof {
    /// Recomputes the proof from its rows and compares conclusions.
    pub fn check(&self) -> Result<(), MordellError> {
        let fresh = prove_family_via_curves(&self.family, &self.rows)?;
        if fresh.rows != self.rows {
            return Err(MordellError::Rows { family: self.family, detail: "rows are not in j order".into() });
        }
        if fresh.squares != self.squares {
            return Err(MordellError::SquaresMismatch {
                expected: fresh.squares.iter().map(|s| s.n).collect(),
                found: self.squares.iter().map(|s| s.n).collect(),
            });
        }
        Ok(())
    }
}

/// Integral points of one curve `E_{a,b,m,j}`, listed up to sign.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppendixRow {
    pub family: FamilyKey,
    pub j: u8,
    #[serde(with = "serde_decimal::bigint")]
    pub constant: BigInt,
    pub points: Vec<IntegralPoint>,
}

impl AppendixRow {
    /// Checks `B` against the family and every point against the curve.
    pub fn check(&self) -> Result<MordellCurve, MordellError> {
        let curve = curve_for(&self.family, self.j)?;
        if curve.constant != self.constant {
            return Err(MordellError::ConstantMismatch {
                family: self.family,
                j: self.j,
                expected: curve.constant,
                found: self.constant.clone(),
            });
        }
        if let Some(p) = self.points.iter().find(|p| !curve.contains(p) || p.y.is_negative()) {
            return Err(MordellError::OffCurve { family: self.family, j: self.j, x: p.x.clone(), y: p.y.clone() });
        }
        Ok(curve)
    }
}

/// Determines every square of `f` from complete point lists of its three curves.
pub fn prove_family_via_curves(f: &FamilyKey, rows: &[AppendixRow]) -> Result<CurveProof, MordellError> {
    let mut ordered: Vec<AppendixRow> = rows.to_vec();
    ordered.sort_by_key(|x| x.j);
    let js: Vec<u8> = ordered.iter().map(|r| r.j).collect();
    if js != [0, 1, 2] {
        return Err(MordellError::Rows { family: *f, detail: format!("got j values {js:?}") });
    }
    if let Some(r) = ordered.iter().find(|r| r.family != *f) {
        return Err(MordellError::Rows { family: *f, detail: format!("row belongs to {}", r.family) });
    }
    let mut squares = Vec::new();
    for row in &ordered {
        row.check()?;
        for l in filter_l(f, row.j, &row.points) {
            let n = l.index(row.j);
            let value = f.value(n);
            if &l.root * &l.root != value {
                return Err(MordellError::NotASquare { family: *f, n });
            }
            squares.push(SmallSquare { n, root: l.root });
        }
    }
    squares.sort_by(|x, y| x.n.cmp(&y.n).then(Ordering::Equal));
    Ok(CurveProof { family: *f, rows: ordered, squares })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn family(a: u8, b: u8, m: u32) -> FamilyKey {
        FamilyKey::new(a, b, m).unwrap()
    }

    fn pts(list: &[(i64, i64)]) -> Vec<IntegralPoint> {
        list.iter().map(|&(x, y)| IntegralPoint::new(x, y)).collect()
    }

    #[test]
    fn curve_constants() {
        assert_eq!(curve_for(&family(4, 2, 1), 0).unwrap().constant(), &BigInt::from(2_310_400));
        assert_eq!(curve_for(&family(4, 2, 1), 2).unwrap().constant(), &BigInt::from(23_104_000_000i64));
        assert_eq!(curve_for(&family(1, 4, 1), 0).unwrap().constant(), &BigInt::from(-523_900));
        assert_eq!(curve_for(&family(1, 4, 1), 3), Err(MordellError::BadIndex(3)));
        let c = curve_for(&family(4, 2, 1), 0).unwrap();
        assert_eq!(c.discriminant(), BigInt::from(-432) * BigInt::from(2_310_400i64).pow(2u32));
    }

    #[test]
    fn on_curve_examples() {
        let c = MordellCurve::new(BigInt::from(2_310_400)).unwrap();
        assert!(is_on_curve(&c, &IntegralPoint::new(80, 1680)));
        assert!(is_on_curve(&c, &IntegralPoint::new(0, 1520)));
        assert!(!is_on_curve(&c, &IntegralPoint::new(1, 1)));
        assert!(MordellCurve::new(BigInt::zero()).is_none());
    }

    #[test]
    fn bounded_search_examples() {
        let c = MordellCurve::new(BigInt::from(2_310_400)).unwrap();
        assert_eq!(bounded_point_search(&c, 2000), pts(&[(-76, 1368), (0, 1520), (80, 1680), (1520, 59280)]));
        let c = MordellCurve::new(BigInt::from(231_040_000)).unwrap();
        assert_eq!(bounded_point_search(&c, 100_000), pts(&[(0, 15200)]));
        let c = MordellCurve::new(BigInt::from(-5_239_000_000i64)).unwrap();
        assert_eq!(bounded_point_search(&c, 10_000), pts(&[(3500, 194000)]));
    }

    #[test]
    fn search_floor_bounds() {
        assert_eq!(search_floor(&BigInt::from(8)), BigInt::from(-2));
        assert_eq!(search_floor(&BigInt::from(9)), BigInt::from(-2));
        assert_eq!(search_floor(&BigInt::from(-8)), BigInt::from(2));
        assert_eq!(search_floor(&BigInt::from(-9)), BigInt::from(3));
        // x_max below the floor: nothing to search
        let c = MordellCurve::new(BigInt::from(-1_000_000)).unwrap();
        assert!(bounded_point_search(&c, 50).is_empty());
    }

    #[test]
    fn fast_and_big_paths_agree() {
        for b in [-523_900i64, 72_900, 2_310_400, 1_392_400, -2_051_900, 1, -1, 17, -26] {
            let c = MordellCurve::new(BigInt::from(b)).unwrap();
            let lo = search_floor(c.constant());
            assert_eq!(bounded_point_search(&c, 30_000), search_big(&lo, 30_000, c.constant()), "B = {b}");
        }
    }

    #[test]
    fn l_filter_examples() {
        let f = family(4, 2, 1);
        let four = pts(&[(-76, 1368), (0, 1520), (80, 1680), (1520, 59280)]);
        for j in 0..3 {
            assert!(filter_l(&f, j, &four).is_empty());
        }
        let l = filter_l(&family(4, 9, 2), 1, &pts(&[(405_000, 257_580_000)]));
        assert_eq!(l, vec![LFormPoint { k: 0, root: 212u32.into() }]);
        let l = filter_l(&family(1, 2, 1), 1, &pts(&[(1100, 36300)]));
        assert_eq!(l, vec![LFormPoint { k: 0, root: 11u32.into() }]);
    }

    #[test]
    fn phi_examples() {
        assert_eq!(phi_forward(&family(1, 2, 1), 1).unwrap(), (1, IntegralPoint::new(1100, 36300)));
        assert_eq!(phi_forward(&family(4, 9, 2), 1).unwrap(), (1, IntegralPoint::new(405_000, 257_580_000)));
        assert_eq!(phi_forward(&family(4, 2, 1), 0), Err(MordellError::NotASquare { family: family(4, 2, 1), n: 0 }));
        let (j, p) = phi_forward(&family(1, 2, 1), 1).unwrap();
        let back = filter_l(&family(1, 2, 1), j, &[p]);
        assert_eq!(back[0].index(j), 1);
    }

    #[test]
    fn phi_round_trip_on_known_squares() {
        for (f, n) in [(family(1, 2, 1), 1), (family(4, 8, 1), 1), (family(6, 7, 1), 1), (family(4, 9, 2), 1)] {
            let (j, p) = phi_forward(&f, n).unwrap();
            assert!(curve_for(&f, j).unwrap().contains(&p));
            let l = filter_l(&f, j, std::slice::from_ref(&p));
            assert_eq!(l.len(), 1);
            assert_eq!(l[0].index(j), n);
            assert_eq!(l[0].to_point(&f, j), p);
        }
    }

    #[test]
    fn proof_from_rows() {
        let f = family(1, 2, 1);
        let rows: Vec<AppendixRow> = (0..3)
            .map(|j| {
                let curve = curve_for(&f, j).unwrap();
                AppendixRow {
                    family: f,
                    j,
                    constant: curve.constant().clone(),
                    points: bounded_point_search(&curve, 5000),
                }
            })
            .collect();
        let proof = prove_family_via_curves(&f, &rows).unwrap();
        assert_eq!(proof.squares, vec![SmallSquare { n: 1, root: 11u32.into() }]);
        assert_eq!(proof.check(), Ok(()));
        assert!(matches!(prove_family_via_curves(&f, &rows[..2]), Err(MordellError::Rows { .. })));

        let mut bad = rows.clone();
        bad[1].points.push(IntegralPoint::new(1, 1));
        assert!(matches!(prove_family_via_curves(&f, &bad), Err(MordellError::OffCurve { .. })));
        let mut bad = rows;
        bad[0].constant += 1;
        assert!(matches!(prove_family_via_curves(&f, &bad), Err(MordellError::ConstantMismatch { .. })));
    }

    proptest! {
        #[test]
        fn search_is_sound_and_closed(b in -200_000i64..200_000, probe in 0i64..3000) {
            prop_assume!(b != 0);
            let c = MordellCurve::new(BigInt::from(b)).unwrap();
            let found = bounded_point_search(&c, 3000);
            for p in &found {
                prop_assert!(c.contains(p));
            }
            let x = search_floor(c.constant()) + probe;
            if x <= BigInt::from(3000) && !found.iter().any(|p| p.x == x) {
                let v = &x * &x * &x + c.constant();
                prop_assert!(perfect_square_root(v.magnitude()).is_none() || v.is_negative());
            }
        }
    }
}
