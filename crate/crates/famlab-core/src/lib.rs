//! Exact combinatorial machinery for finitely additive measures on finite
//! Boolean algebras: atom enumeration, measures and conditioning, dyadic
//! cylinder algebras, periodic free measures with simple-function
//! integration, probability trees with relative expectations, intersection
//! numbers with an exact LP lower bound, and the FAM-limit witness pipeline.
//!
//! All arithmetic is exact rational; every inequality this crate reports is
//! an exact comparison of `BigRational` values.

#![cfg_attr(not(test), no_std)]
// error enums deliberately carry the offending elements for diagnostics
#![allow(clippy::result_large_err)]

extern crate alloc;

pub mod bits;
pub mod boolalg;
pub mod cylinder;
pub mod fam;
pub mod famlimit;
pub mod intnum;
pub mod ptree;
pub mod rat;
pub mod simplex;

pub use rat::Rat;
