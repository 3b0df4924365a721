//! Named-entity swapping for text corpora with a risk-utility decision
//! framework. `no_std` with `alloc`; IO, file formats and the command line
//! live in the `entswap` crate.

#![no_std]
extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod contingency;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod evaluation;
pub mod ewens_pitman;
pub mod math;
pub mod mixture;
pub mod risk_utility;
pub mod swap;

pub use error::{Error, Result};
