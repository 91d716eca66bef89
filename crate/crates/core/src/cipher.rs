//! Layered XOR image cipher and the classical message workflow.
//!
//! Four keystreams — logistic, Henon, tent, Arnold — are generated from the
//! key and fused into a single XOR mask per pixel. XOR layering commutes and
//! cancels itself, so [`xor_transform`] is both encrypt and decrypt; the
//! canonical layer order exists only for envelope bookkeeping.

use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::chaos::{
    self, arnold_sequence, derive_keystream, derive_seeds, henon_sequence, logistic_sequence,
    tent_sequence, ChaosError, ChaosParams, Keystream, MapKind,
};
use crate::image::GrayImage;
use crate::qkd::BitKey;

/// Minimum key length for image work, in bits.
pub const MIN_IMAGE_KEY_BITS: usize = chaos::MIN_KEY_BITS;

/// Minimum key length for the classical message workflow, in bits.
pub const MIN_MESSAGE_KEY_BITS: usize = 8;

/// The canonical layer order recorded in envelopes.
pub const LAYER_ORDER: [MapKind; 4] = [
    MapKind::Logistic,
    MapKind::Henon,
    MapKind::Tent,
    MapKind::Arnold,
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CipherError {
    #[error("key of {bits} bits is shorter than the {min}-bit minimum")]
    KeyTooShort { bits: usize, min: usize },
    #[error("invalid chaos parameters: {0}")]
    InvalidParams(ChaosError),
    #[error("{layer} layer failed: {source}")]
    Layer {
        layer: MapKind,
        #[source]
        source: ChaosError,
    },
    #[error("message must be non-empty")]
    EmptyMessage,
}

/// Ciphertext plus the bookkeeping needed to decrypt it later without
/// storing any secret: a parameter fingerprint and an opaque key identifier.
#[derive(Debug, Clone, PartialEq)]
pub struct CipherEnvelope {
    pub image: GrayImage,
    pub params_fingerprint: u64,
    pub key_id: u64,
    pub layer_order: [MapKind; 4],
}

impl CipherEnvelope {
    pub fn seal(image: GrayImage, key: &BitKey, params: &ChaosParams) -> Self {
        Self {
            image,
            params_fingerprint: params.fingerprint(),
            key_id: key_id(key),
            layer_order: LAYER_ORDER,
        }
    }
}

/// Opaque identifier for a key: a digest of its packed bits and length,
/// enough to match key to ciphertext without revealing the bits.
pub fn key_id(key: &BitKey) -> u64 {
    let bytes = key
        .to_bytes()
        .into_iter()
        .chain((key.len() as u64).to_le_bytes());
    crate::hash::fnv1a64(bytes)
}

fn layer(result: Result<Keystream, ChaosError>, kind: MapKind) -> Result<Keystream, CipherError> {
    result.map_err(|source| CipherError::Layer {
        layer: kind,
        source,
    })
}

/// Generate the four keystreams for a key/parameter set, each `n` bytes
/// after burn-in, in canonical layer order.
pub fn keystreams(
    key: &BitKey,
    params: &ChaosParams,
    n: usize,
) -> Result<[Keystream; 4], CipherError> {
    params.validate().map_err(CipherError::InvalidParams)?;
    if key.len() < MIN_IMAGE_KEY_BITS {
        return Err(CipherError::KeyTooShort {
            bits: key.len(),
            min: MIN_IMAGE_KEY_BITS,
        });
    }
    let seeds = derive_seeds(key).map_err(CipherError::InvalidParams)?;
    let total = params.burn_in + n;

    let logistic = layer(
        logistic_sequence(seeds.logistic_x0, params.logistic_r, total)
            .and_then(|t| derive_keystream(&t, n, params.burn_in, MapKind::Logistic)),
        MapKind::Logistic,
    )?;

    let (hx, hy) = seeds.henon_start();
    let henon = layer(
        henon_sequence(hx, hy, params.henon_a, params.henon_b, total).and_then(|t| {
            let xs: Vec<f64> = t.iter().map(|&(x, _)| x).collect();
            derive_keystream(&xs, n, params.burn_in, MapKind::Henon)
        }),
        MapKind::Henon,
    )?;

    let tent = layer(
        tent_sequence(seeds.tent_x0, params.tent_r, total)
            .and_then(|t| derive_keystream(&t, n, params.burn_in, MapKind::Tent)),
        MapKind::Tent,
    )?;

    let arnold = layer(
        arnold_sequence(
            seeds.arnold_x0,
            seeds.arnold_y0,
            params.arnold_a,
            params.arnold_b,
            total,
        )
        .and_then(|t| {
            let xs: Vec<f64> = t.iter().map(|&(x, _)| x).collect();
            derive_keystream(&xs, n, params.burn_in, MapKind::Arnold)
        }),
        MapKind::Arnold,
    )?;

    Ok([logistic, henon, tent, arnold])
}

fn apply_layers(pixels: &[u8], streams: &[Keystream; 4]) -> Vec<u8> {
    pixels
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            p ^ streams[0].bytes[i]
                ^ streams[1].bytes[i]
                ^ streams[2].bytes[i]
                ^ streams[3].bytes[i]
        })
        .collect()
}

/// XOR every pixel with the fused four-layer keystream derived from the key.
///
/// The transform is an involution: applying it twice with the same key and
/// parameters returns the original image, so this one operation serves as
/// both encrypt and decrypt.
pub fn xor_transform(
    image: &GrayImage,
    key: &BitKey,
    params: &ChaosParams,
) -> Result<GrayImage, CipherError> {
    let streams = keystreams(key, params, image.pixel_count())?;
    let pixels = apply_layers(image.pixels(), &streams);
    Ok(GrayImage::new(image.width(), image.height(), pixels)
        .expect("shape preserved by construction"))
}

/// XOR message bytes with the key's packed bytes repeated cyclically.
/// Running it twice with the same key restores the message.
pub fn encrypt_message(message: &[u8], combined_key: &BitKey) -> Result<Vec<u8>, CipherError> {
    if message.is_empty() {
        return Err(CipherError::EmptyMessage);
    }
    if combined_key.len() < MIN_MESSAGE_KEY_BITS {
        return Err(CipherError::KeyTooShort {
            bits: combined_key.len(),
            min: MIN_MESSAGE_KEY_BITS,
        });
    }
    let key_bytes = combined_key.to_bytes();
    Ok(message
        .iter()
        .enumerate()
        .map(|(i, &b)| b ^ key_bytes[i % key_bytes.len()])
        .collect())
}

/// Outcome of comparing a decrypted image against the original.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoundtripVerdict {
    Success,
    DimensionMismatch,
    PixelMismatch { first_index: usize },
}

impl RoundtripVerdict {
    pub fn is_success(&self) -> bool {
        matches!(self, RoundtripVerdict::Success)
    }
}

impl fmt::Display for RoundtripVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RoundtripVerdict::Success => f.write_str("Decryption Successful"),
            _ => f.write_str("Error: Decryption Failed"),
        }
    }
}

/// Exact comparison: success only when dimensions and every pixel match.
/// A mismatch is a verdict, not an error.
pub fn roundtrip_verify(original: &GrayImage, decrypted: &GrayImage) -> RoundtripVerdict {
    if original.dimensions() != decrypted.dimensions() {
        return RoundtripVerdict::DimensionMismatch;
    }
    match original
        .pixels()
        .iter()
        .zip(decrypted.pixels())
        .position(|(a, b)| a != b)
    {
        None => RoundtripVerdict::Success,
        Some(first_index) => RoundtripVerdict::PixelMismatch { first_index },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qkd::generate_key;
    use crate::rng::session_rng;
    use alloc::vec;

    fn test_key(seed: u64) -> BitKey {
        generate_key(256, &mut session_rng(seed)).unwrap()
    }

    #[test]
    fn fused_xor_on_crafted_streams() {
        // Combined stream byte 0xFF turns pixel 0x55 into 0xAA; all-zero
        // streams are the identity transform.
        let mk = |byte: u8, origin| Keystream {
            bytes: vec![byte],
            origin,
        };
        let streams = [
            mk(0xF0, MapKind::Logistic),
            mk(0x0F, MapKind::Henon),
            mk(0x00, MapKind::Tent),
            mk(0x00, MapKind::Arnold),
        ];
        assert_eq!(apply_layers(&[0x55], &streams), vec![0xAA]);

        let zeros = [
            mk(0, MapKind::Logistic),
            mk(0, MapKind::Henon),
            mk(0, MapKind::Tent),
            mk(0, MapKind::Arnold),
        ];
        assert_eq!(apply_layers(&[0x55], &zeros), vec![0x55]);
    }

    #[test]
    fn transform_is_involution() {
        let key = test_key(1);
        let params = ChaosParams::default();
        let image = GrayImage::new(17, 9, (0..17 * 9).map(|i| (i * 7) as u8).collect()).unwrap();
        let encrypted = xor_transform(&image, &key, &params).unwrap();
        assert_ne!(encrypted, image);
        let decrypted = xor_transform(&encrypted, &key, &params).unwrap();
        assert_eq!(decrypted, image);
    }

    #[test]
    fn layer_order_does_not_matter() {
        let key = test_key(2);
        let params = ChaosParams::default();
        let image = GrayImage::filled(8, 8, 127).unwrap();
        let streams = keystreams(&key, &params, 64).unwrap();

        let fused = apply_layers(image.pixels(), &streams);
        // Apply layers one at a time in reversed order.
        let mut sequential: Vec<u8> = image.pixels().to_vec();
        for stream in streams.iter().rev() {
            for (p, k) in sequential.iter_mut().zip(&stream.bytes) {
                *p ^= k;
            }
        }
        assert_eq!(fused, sequential);
    }

    #[test]
    fn transform_rejects_short_keys() {
        let key = generate_key(64, &mut session_rng(3)).unwrap();
        let image = GrayImage::filled(4, 4, 0).unwrap();
        assert!(matches!(
            xor_transform(&image, &key, &ChaosParams::default()),
            Err(CipherError::KeyTooShort { bits: 64, min: 128 })
        ));
    }

    #[test]
    fn half_slope_tent_still_round_trips() {
        let params = ChaosParams {
            tent_r: 0.5,
            ..Default::default()
        };
        assert!(params.tent_collapses());
        let key = test_key(4);
        let image = GrayImage::new(16, 16, (0..256).map(|i| i as u8).collect()).unwrap();
        let encrypted = xor_transform(&image, &key, &params).unwrap();
        let decrypted = xor_transform(&encrypted, &key, &params).unwrap();
        assert_eq!(decrypted, image);
        // The collapsed tent layer contributes nothing after burn-in.
        let streams = keystreams(&key, &params, 64).unwrap();
        assert!(streams[2].bytes.iter().all(|&b| b == 0));
    }

    #[test]
    fn message_cipher_round_trips_hello() {
        let classical: BitKey = "10101100".parse().unwrap();
        let quantum: BitKey = "11011010".parse().unwrap();
        let combined = crate::qkd::combine_keys(&classical, &quantum).unwrap();
        let ciphertext = encrypt_message(b"HELLO", &combined).unwrap();
        let decrypted = encrypt_message(&ciphertext, &combined).unwrap();
        assert_eq!(decrypted, b"HELLO");
    }

    #[test]
    fn message_cipher_zero_key_is_identity() {
        let key: BitKey = "00000000".parse().unwrap();
        assert_eq!(encrypt_message(b"abc", &key).unwrap(), b"abc");
    }

    #[test]
    fn message_cipher_rejects_empty_and_short() {
        let key: BitKey = "10101100".parse().unwrap();
        assert!(matches!(
            encrypt_message(b"", &key),
            Err(CipherError::EmptyMessage)
        ));
        let short: BitKey = "1010".parse().unwrap();
        assert!(matches!(
            encrypt_message(b"hi", &short),
            Err(CipherError::KeyTooShort { bits: 4, min: 8 })
        ));
    }

    #[test]
    fn verdict_reports_exact_comparison() {
        let a = GrayImage::new(2, 2, vec![1, 2, 3, 4]).unwrap();
        assert_eq!(roundtrip_verify(&a, &a), RoundtripVerdict::Success);
        assert!(roundtrip_verify(&a, &a).is_success());

        let b = GrayImage::new(2, 2, vec![1, 2, 9, 4]).unwrap();
        assert_eq!(
            roundtrip_verify(&a, &b),
            RoundtripVerdict::PixelMismatch { first_index: 2 }
        );

        let c = GrayImage::new(4, 1, vec![1, 2, 3, 4]).unwrap();
        assert_eq!(
            roundtrip_verify(&a, &c),
            RoundtripVerdict::DimensionMismatch
        );
        assert_eq!(
            alloc::format!("{}", roundtrip_verify(&a, &a)),
            "Decryption Successful"
        );
        assert_eq!(
            alloc::format!("{}", roundtrip_verify(&a, &b)),
            "Error: Decryption Failed"
        );
    }

    #[test]
    fn envelope_binds_params_and_key() {
        let key = test_key(5);
        let params = ChaosParams::default();
        let image = GrayImage::filled(4, 4, 9).unwrap();
        let encrypted = xor_transform(&image, &key, &params).unwrap();
        let envelope = CipherEnvelope::seal(encrypted, &key, &params);
        assert_eq!(envelope.layer_order, LAYER_ORDER);
        assert_eq!(envelope.params_fingerprint, params.fingerprint());
        assert_eq!(envelope.key_id, key_id(&key));
        assert_ne!(envelope.key_id, key_id(&test_key(6)));
    }
}
