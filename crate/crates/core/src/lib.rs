//! Rateless network error-correcting codes for random linear network coding
//! under Byzantine attack.
//!
//! Two schemes are provided. [`scheme_sc`] assumes a low-rate secret side
//! channel from source to sink; [`scheme_rs`] only assumes a small shared
//! random secret. Both keep sending redundancy until the sink's decoder finds
//! a unique message consistent with its observations and hashes. The
//! [`channel`] module simulates the adversarial network and [`harness`] runs
//! Monte Carlo experiments over either scheme.

pub mod channel;
pub mod field;
pub mod harness;
pub mod linalg;
pub mod scheme_rs;
pub mod scheme_sc;
pub mod session;
