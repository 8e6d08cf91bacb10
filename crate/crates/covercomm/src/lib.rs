//! Exact combinatorial machinery for graph coverings, subgroup graphs of
//! free groups, commensurations of groups, and their completions.
//!
//! Everything here is exact: identifiers are strings, counts are integers,
//! ratios are arbitrary-precision rationals. All searches are deterministic
//! and the expensive ones emit certificates that can be re-checked without
//! re-running the search (see [`cert`]).

pub mod abelian;
pub mod amalgam;
pub mod canon;
pub mod cert;
pub mod cli;
pub mod covering;
pub mod error;
pub mod graph;
pub mod io;
pub mod permgroup;
pub mod stallings;
pub mod vh;
pub mod word;
pub mod zlin;

pub use error::{Error, Result};
