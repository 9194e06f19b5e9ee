//! Command-line drivers: batch verification of invariant lists and a
//! template-enumeration agent that plays through the service API.

pub mod agent;
pub mod verify;
