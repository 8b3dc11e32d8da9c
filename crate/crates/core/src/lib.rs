//! Exact-arithmetic toolkit for finite Weyl groups, Iwahori-Hecke algebras,
//! and point counting on flag varieties over prime fields.
//!
//! Everything here is integer-exact: group elements are (signed) permutations,
//! Hecke coefficients are polynomials over arbitrary-precision integers,
//! matrices live over F_p for explicit small primes, and polynomial fits of
//! point-count series run over exact rationals. No floating point anywhere.

pub mod chevalley;
pub mod counting;
pub mod coxeter;
pub mod hecke;
pub mod matfq;
