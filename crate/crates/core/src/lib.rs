//! Which curious numbers `a…ab…ba…a` are perfect squares?
//!
//! The pipeline: a residue sieve modulo `10^k` ([`sieve`]) narrows the search
//! to a few sporadic values and single-variable families; each family is shown
//! square-free either by modular witnesses ([`prover`]) or through integral
//! points on Mordell curves ([`mordell`]); [`certificate`] bundles the whole
//! argument into a file that can be re-checked independently.

pub mod certificate;
pub mod curious;
pub mod modular;
pub mod mordell;
pub mod prover;
pub(crate) mod serde_decimal;
pub mod sieve;

pub use curious::{
    coefficients, curious_value, enumerate_curious, is_perfect_square, repdigit_value, Coefficients, CuriousError,
    DigitPattern, FamilyKey,
};
