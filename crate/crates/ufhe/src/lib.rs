//! Leveled BGV homomorphic encryption over non-power-of-two cyclotomic
//! rings, with SIMD slot packing and low-depth word-wise integer
//! comparison circuits.

pub mod arith;
pub mod bgv;
pub mod compare;
pub mod error;
pub mod metrics;
pub mod pipeline;
pub mod plainspace;
pub mod ring;
pub mod serialize;
pub mod rng;
pub mod slotmgr;
pub mod transform;

pub use error::{Error, Result};
