//! Word-sized modular arithmetic shared by the sieve and the provers.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::ToPrimitive;

#[inline]
pub fn mul_mod(a: u64, b: u64, q: u64) -> u64 {
    if a <= u32::MAX as u64 && b <= u32::MAX as u64 {
        a * b % q
    } else {
        ((a as u128 * b as u128) % q as u128) as u64
    }
}

pub fn pow_mod(mut base: u64, mut exp: u64, q: u64) -> u64 {
    if q == 1 {
        return 0;
    }
    let mut acc = 1u64;
    base %= q;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, q);
        }
        base = mul_mod(base, base, q);
        exp >>= 1;
    }
    acc
}

/// Inverse of `a` modulo `q`, if `gcd(a, q) = 1`.
pub fn inv_mod(a: u64, q: u64) -> Option<u64> {
    let e = (a as i128).extended_gcd(&(q as i128));
    (e.gcd == 1).then(|| e.x.rem_euclid(q as i128) as u64)
}

/// Reduces an arbitrary-precision integer into `[0, q)`.
pub fn reduce(v: &BigInt, q: u64) -> u64 {
    v.mod_floor(&BigInt::from(q)).to_u64().expect("residue below a u64 modulus")
}

pub fn reduce_i128(v: i128, q: u64) -> u64 {
    v.rem_euclid(q as i128) as u64
}

/// Prime factorization by trial division, as `(p, e)` pairs in ascending `p`.
pub fn factorize(mut q: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut p = 2u64;
    while p * p <= q {
        if q.is_multiple_of(p) {
            let mut e = 0;
            while q.is_multiple_of(p) {
                q /= p;
                e += 1;
            }
            out.push((p, e));
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if q > 1 {
        out.push((q, 1));
    }
    out
}

pub fn euler_phi(q: u64) -> u64 {
    factorize(q).iter().fold(q, |acc, &(p, _)| acc / p * (p - 1))
}
