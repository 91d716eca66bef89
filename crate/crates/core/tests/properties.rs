//! Property tests for the algebraic invariants: XOR involutions, key
//! combination cancellation, exact noise endpoints, metric symmetries.

use proptest::collection::vec;
use proptest::prelude::*;

use qke_core::chaos::ChaosParams;
use qke_core::cipher::{encrypt_message, roundtrip_verify, xor_transform, RoundtripVerdict};
use qke_core::metrics::{ber, entropy, psnr, ssim};
use qke_core::qkd::{apply_channel_noise, combine_keys, generate_key, BitKey};
use qke_core::rng::session_rng;
use qke_core::GrayImage;

fn arb_bitkey(len: std::ops::Range<usize>) -> impl Strategy<Value = BitKey> {
    vec(0u8..=1, len).prop_map(|bits| BitKey::from_bits(bits).unwrap())
}

fn arb_image(max_side: usize) -> impl Strategy<Value = GrayImage> {
    (1..=max_side, 1..=max_side).prop_flat_map(|(w, h)| {
        vec(any::<u8>(), w * h).prop_map(move |pixels| GrayImage::new(w, h, pixels).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, ..ProptestConfig::default() })]

    #[test]
    fn xor_transform_is_an_involution(
        image in arb_image(24),
        key in arb_bitkey(128..512),
        burn_in in 0usize..64,
    ) {
        let params = ChaosParams { burn_in, ..Default::default() };
        let encrypted = xor_transform(&image, &key, &params).unwrap();
        let decrypted = xor_transform(&encrypted, &key, &params).unwrap();
        prop_assert_eq!(&decrypted, &image);
        prop_assert_eq!(roundtrip_verify(&image, &decrypted), RoundtripVerdict::Success);
    }

    #[test]
    fn combining_twice_restores_the_key(
        bits in vec(0u8..=1, 1..512),
        mask_bits in vec(0u8..=1, 1..512),
    ) {
        let len = bits.len().min(mask_bits.len());
        let key = BitKey::from_bits(bits[..len].to_vec()).unwrap();
        let mask = BitKey::from_bits(mask_bits[..len].to_vec()).unwrap();
        let combined = combine_keys(&key, &mask).unwrap();
        prop_assert_eq!(combine_keys(&combined, &mask).unwrap(), key);
    }

    #[test]
    fn noise_endpoints_hold_for_any_seed(key in arb_bitkey(1..256), seed in any::<u64>()) {
        let same = apply_channel_noise(&key, 0.0, &mut session_rng(seed)).unwrap();
        prop_assert_eq!(&same, &key);
        let flipped = apply_channel_noise(&key, 1.0, &mut session_rng(seed)).unwrap();
        let all_differ = key.bits().iter().zip(flipped.bits()).all(|(a, b)| a != b);
        prop_assert!(all_differ);
    }

    #[test]
    fn message_cipher_is_an_involution(message in vec(any::<u8>(), 1..256), key in arb_bitkey(8..128)) {
        let ciphertext = encrypt_message(&message, &key).unwrap();
        prop_assert_eq!(encrypt_message(&ciphertext, &key).unwrap(), message);
    }

    #[test]
    fn comparison_metrics_are_symmetric(a in arb_image(12), pixels in vec(any::<u8>(), 144)) {
        let b = GrayImage::new(a.width(), a.height(), pixels[..a.pixel_count()].to_vec()).unwrap();
        prop_assert_eq!(psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
        prop_assert_eq!(ber(&a, &b).unwrap(), ber(&b, &a).unwrap());
        if a.pixel_count() >= 2 {
            prop_assert!((ssim(&a, &b).unwrap() - ssim(&b, &a).unwrap()).abs() < 1e-15);
        }
    }

    #[test]
    fn entropy_ignores_pixel_order(pixels in vec(any::<u8>(), 64), rotation in 0usize..64) {
        let img = GrayImage::new(8, 8, pixels.clone()).unwrap();
        let mut reordered = pixels;
        reordered.reverse();
        reordered.rotate_left(rotation);
        let img2 = GrayImage::new(8, 8, reordered).unwrap();
        prop_assert_eq!(entropy(&img), entropy(&img2));
        prop_assert!((0.0..=8.0).contains(&entropy(&img)));
    }

    #[test]
    fn generated_keys_respect_length(n in 1usize..2048, seed in any::<u64>()) {
        let key = generate_key(n, &mut session_rng(seed)).unwrap();
        prop_assert_eq!(key.len(), n);
        prop_assert!(key.bits().iter().all(|&b| b <= 1));
    }
}
