//! File formats, experiment runners and built-in property suites for the
//! exact finitely-additive-measure laboratory. The heavy lifting happens
//! in `famlab-core`; this crate adds JSON/CSV interchange and batch
//! orchestration. All rationals cross file boundaries as `"num/den"`
//! strings, so reports round-trip exactly.

// error enums deliberately carry the offending values for diagnostics
#![allow(clippy::result_large_err)]

pub mod certificate;
pub mod config;
pub mod report;
pub mod runner;
pub mod suite;
