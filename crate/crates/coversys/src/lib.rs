//! Exact tooling for covering systems of the integers: construction and
//! verification of covers, Simpson bounds, frame families and their
//! counting quantities, coordinate-by-coordinate exploration of covers
//! with frame extraction, and brute-force census oracles at desk scale.

pub mod arith;
pub mod census;
pub mod cover;
pub mod error;
pub mod frames;
pub mod io;
pub mod space;
pub mod structure;

pub use error::{Error, Result};
