//! Information-theoretic privacy amplification and interactive
//! authentication over a channel controlled by an active adversary.

pub mod adversary;
pub mod bits;
pub mod codes;
pub mod entropy;
pub mod error;
pub mod extractors;
pub mod harness;
pub mod par;
pub mod protocol;
pub mod rng;

pub use bits::{BitMatrix, BitString};
pub use error::{Error, Result};
