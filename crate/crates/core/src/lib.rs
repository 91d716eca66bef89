//! Core algorithms for quantum-keyed chaotic image encryption.
//!
//! Everything in this crate is a pure function of its inputs: chaotic map
//! trajectories, keystream whitening, an entanglement-based key distribution
//! simulation with eavesdropping detection, the layered XOR image cipher,
//! and the evaluation metrics. No I/O happens here; the companion `qke-cli`
//! crate carries file formats and the command-line surface.
//!
//! The crate is `no_std` (with `alloc`), and all floating-point work is
//! 64-bit IEEE binary with strict evaluation order and no fused
//! multiply-add, so keystreams regenerate bit-identically across platforms.
//! Decryption correctness depends on that contract.

#![cfg_attr(not(test), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod chaos;
pub mod cipher;
pub mod image;
pub mod metrics;
pub mod qkd;
pub mod rng;

pub use chaos::{ChaosParams, ChaosSeeds, Keystream, MapKind};
pub use cipher::{CipherEnvelope, RoundtripVerdict};
pub use image::GrayImage;
pub use metrics::MetricsReport;
pub use qkd::{BitKey, ChannelConfig, Eavesdropper, QkdSession};
pub use rng::{session_rng, SessionRng};

pub(crate) mod hash {
    /// 64-bit FNV-1a, used for parameter fingerprints and key identifiers.
    pub fn fnv1a64(bytes: impl IntoIterator<Item = u8>) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h
    }
}
