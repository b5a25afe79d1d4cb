//! Serde adapters writing big integers as decimal strings.

use std::str::FromStr;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serializer};

fn parse<'de, D, T>(s: &str) -> Result<T, D::Error>
where
    D: Deserializer<'de>,
    T: FromStr,
{
    // FromStr for big integers accepts a leading '+'; canonical form does not
    if s.starts_with('+') || (s.len() > 1 && (s.starts_with('0') || s.starts_with("-0"))) {
        return Err(D::Error::custom(format!("non-canonical decimal integer {s:?}")));
    }
    s.parse().map_err(|_| D::Error::custom(format!("invalid decimal integer {s:?}")))
}

macro_rules! decimal_module {
    ($name:ident, $vec_name:ident, $ty:ty) => {
        pub mod $name {
            use super::*;

            pub fn serialize<S: Serializer>(v: &$ty, s: S) -> Result<S::Ok, S::Error> {
                s.collect_str(v)
            }

            pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<$ty, D::Error> {
                let s = String::deserialize(d)?;
                parse::<D, $ty>(&s)
            }
        }

        #[allow(dead_code)]
        pub mod $vec_name {
            use super::*;

            pub fn serialize<S: Serializer>(v: &[$ty], s: S) -> Result<S::Ok, S::Error> {
                s.collect_seq(v.iter().map(|x| x.to_string()))
            }

            pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<$ty>, D::Error> {
                Vec::<String>::deserialize(d)?.iter().map(|s| parse::<D, $ty>(s)).collect()
            }
        }
    };
}

decimal_module!(biguint, vec_biguint, num_bigint::BigUint);
decimal_module!(bigint, vec_bigint, num_bigint::BigInt);
