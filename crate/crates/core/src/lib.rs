//! Simulation of a single-pixel camera that hashes a scene in the optical and
//! analogue domains before anything is digitised.
//!
//! A fixed [`CameraProgram`] of random lines or circles is traced over a scene,
//! only the minimum and maximum intensity along each curve is kept, and the
//! resulting pairs are sorted into an order-free [`Fingerprint`]. On top of
//! those fingerprints the crate provides bag-of-words localisation, an
//! evaluation harness, and tools that measure how much of the scene survives
//! the hashing.

pub mod curves;
pub mod error;
pub mod evaluation;
pub mod hashing;
pub mod imaging;
pub mod localisation;
pub mod par;
pub mod privacy;
pub mod rng;

pub use curves::{CameraProgram, Curve, CurveKind, CurveShape};
pub use error::{Error, Result};
pub use hashing::{DensityGrid, ExtremaPair, Fingerprint};
pub use imaging::GrayImage;
pub use localisation::{Codebook, RetrievalIndex};

/// 64-bit FNV-1a over a byte slice.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    bytes
        .iter()
        .fold(OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(PRIME))
}
