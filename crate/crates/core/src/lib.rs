//! Loop-invariant analysis engine for single-loop SIP programs.

pub mod engine;
pub mod interp;
pub mod lang;
pub mod level;
pub mod smt;
pub mod solver;
pub mod value;
pub mod vcgen;
