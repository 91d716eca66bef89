//! Entanglement-based key distribution simulation.
//!
//! A session models a source of singlet pairs shared by two parties. Each
//! round both sides pick a measurement angle at random — one side from
//! `{0, π/4, π/2}`, the other from `{π/4, π/2, 3π/4}` — and record a ±1
//! outcome whose joint statistics follow the singlet correlation
//! `E(a, b) = −cos(a − b)`.
//!
//! * Rounds where the two angles coincide (the π/4 and π/2 overlaps) are
//!   sifted into key bits. A +1 outcome maps to bit 0 and −1 to bit 1, with
//!   the receiver's outcome inverted first so ideal keys agree exactly.
//! * The four non-overlapping angle combinations feed a CHSH estimator:
//!   the magnitude reaches 2√2 for an undisturbed source and falls to the
//!   classical range once an interceptor breaks the entanglement.
//! * Channel noise flips the receiver's outcome with a configured
//!   probability, modeling a one-way noisy transmission.
//! * An intercept-resend eavesdropper measures every flying qubit in one of
//!   the two orthogonal receiver-set angles (π/4 or 3π/4) and forwards a
//!   freshly prepared outcome. Orthogonal interception directions induce a
//!   25% error rate at every key angle, so sifted agreement concentrates at
//!   0.75 regardless of which overlap round was hit.
//!
//! Detection compares the agreement on a sacrificed fraction of the sifted
//! key against a threshold (default 80%): strictly below means eavesdropping.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand_core::RngCore;
use thiserror::Error;

use crate::rng::{index3, sign, unit_f64};

/// Fewest pairs a session will simulate.
pub const MIN_PAIR_COUNT: usize = 16;

/// Measurement angles available to the sending side.
pub const ALICE_ANGLES: [f64; 3] = [
    0.0,
    core::f64::consts::FRAC_PI_4,
    core::f64::consts::FRAC_PI_2,
];

/// Measurement angles available to the receiving side.
pub const BOB_ANGLES: [f64; 3] = [
    core::f64::consts::FRAC_PI_4,
    core::f64::consts::FRAC_PI_2,
    3.0 * core::f64::consts::FRAC_PI_4,
];

/// Angle-index pairs sifted into key bits: both sides at π/4 or both at π/2.
const KEY_PAIRS: [(u8, u8); 2] = [(1, 0), (2, 1)];

/// Angle-index pairs feeding the four CHSH estimator cells, in the order the
/// statistic combines them.
const ESTIMATOR_PAIRS: [(u8, u8); 4] = [(0, 0), (0, 2), (2, 0), (2, 2)];

/// The interceptor's two measurement directions: the orthogonal pair inside
/// the receiver's angle set. Orthogonality makes the induced error rate
/// exactly 25% for every key angle.
const EVE_ANGLES: [f64; 2] = [
    core::f64::consts::FRAC_PI_4,
    3.0 * core::f64::consts::FRAC_PI_4,
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QkdError {
    #[error("parameter {name} = {value} outside valid range {range}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error("bit keys must be non-empty")]
    EmptyKey,
    #[error("bit values must be 0 or 1, found {value} at index {index}")]
    InvalidBit { value: u8, index: usize },
    #[error("key lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("session needs at least {MIN_PAIR_COUNT} pairs, requested {requested}")]
    TooFewPairs { requested: usize },
    #[error("{pair_count} pairs produced no sifted bits; request more pairs")]
    NoSiftedBits { pair_count: usize },
    #[error("no samples for estimator angle pair ({alice_index}, {bob_index})")]
    EmptyEstimatorCell { alice_index: u8, bob_index: u8 },
    #[error("sifted key exhausted by the agreement test; request more pairs")]
    NoKeyMaterial,
    #[error("bit index {index} out of range for {len}-bit key")]
    BitIndexOutOfRange { index: usize, len: usize },
    #[error("invalid bit character {found:?} at index {index}")]
    InvalidBitChar { found: char, index: usize },
}

/// An ordered sequence of bits with explicit length.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitKey {
    bits: Vec<u8>,
}

impl BitKey {
    /// Build from explicit 0/1 values. Rejects empty input and any value
    /// outside `{0, 1}`.
    pub fn from_bits(bits: Vec<u8>) -> Result<Self, QkdError> {
        if bits.is_empty() {
            return Err(QkdError::EmptyKey);
        }
        for (index, &value) in bits.iter().enumerate() {
            if value > 1 {
                return Err(QkdError::InvalidBit { value, index });
            }
        }
        Ok(Self { bits })
    }

    /// Unpack `len` bits from MSB-first packed bytes. Trailing pad bits in
    /// the final byte must be zero.
    pub fn from_bytes(bytes: &[u8], len: usize) -> Result<Self, QkdError> {
        if len == 0 {
            return Err(QkdError::EmptyKey);
        }
        if bytes.len() != len.div_ceil(8) {
            return Err(QkdError::LengthMismatch {
                left: bytes.len() * 8,
                right: len,
            });
        }
        let mut bits = Vec::with_capacity(len);
        for i in 0..bytes.len() * 8 {
            let bit = (bytes[i / 8] >> (7 - i % 8)) & 1;
            if i < len {
                bits.push(bit);
            } else if bit != 0 {
                return Err(QkdError::InvalidBit {
                    value: bit,
                    index: i,
                });
            }
        }
        Ok(Self { bits })
    }

    /// Pack MSB-first into bytes, zero-padding the final byte.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut bytes = alloc::vec![0u8; self.bits.len().div_ceil(8)];
        for (i, &bit) in self.bits.iter().enumerate() {
            if bit == 1 {
                bytes[i / 8] |= 1 << (7 - i % 8);
            }
        }
        bytes
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn bit(&self, index: usize) -> Option<u8> {
        self.bits.get(index).copied()
    }

    pub fn ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b == 1).count()
    }

    /// Copy with one bit flipped; errors when the index is out of range.
    pub fn with_bit_flipped(&self, index: usize) -> Result<Self, QkdError> {
        if index >= self.bits.len() {
            return Err(QkdError::BitIndexOutOfRange {
                index,
                len: self.bits.len(),
            });
        }
        let mut bits = self.bits.clone();
        bits[index] ^= 1;
        Ok(Self { bits })
    }
}

impl fmt::Display for BitKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &bit in &self.bits {
            write!(f, "{bit}")?;
        }
        Ok(())
    }
}

impl FromStr for BitKey {
    type Err = QkdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut bits = Vec::with_capacity(s.len());
        for (index, ch) in s.chars().enumerate() {
            match ch {
                '0' => bits.push(0),
                '1' => bits.push(1),
                found => return Err(QkdError::InvalidBitChar { found, index }),
            }
        }
        Self::from_bits(bits)
    }
}

/// Eavesdropper strategy on the quantum channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Eavesdropper {
    #[default]
    None,
    /// Measure every flying qubit in a random one of the two orthogonal
    /// receiver-set angles and forward a re-prepared outcome, destroying
    /// entanglement for that pair.
    InterceptResend,
}

impl fmt::Display for Eavesdropper {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Eavesdropper::None => f.write_str("none"),
            Eavesdropper::InterceptResend => f.write_str("intercept-resend"),
        }
    }
}

/// Quantum-channel model and detection policy for a session.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelConfig {
    /// Probability that the receiver's outcome is flipped in transit.
    pub p_noise: f64,
    pub eavesdropper: Eavesdropper,
    /// Agreement threshold; strictly below means eavesdropping detected.
    pub detection_threshold: f64,
    /// Fraction of the sifted key sacrificed for the agreement test; the
    /// remainder is key material.
    pub test_fraction: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            p_noise: 0.0,
            eavesdropper: Eavesdropper::None,
            detection_threshold: 0.80,
            test_fraction: 0.25,
        }
    }
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<(), QkdError> {
        if !(0.0..=1.0).contains(&self.p_noise) {
            return Err(QkdError::InvalidParameter {
                name: "p_noise",
                value: self.p_noise,
                range: "[0, 1]",
            });
        }
        let threshold_ok = self.detection_threshold > 0.0 && self.detection_threshold <= 1.0;
        if !threshold_ok {
            return Err(QkdError::InvalidParameter {
                name: "detection_threshold",
                value: self.detection_threshold,
                range: "(0, 1]",
            });
        }
        let fraction_ok = self.test_fraction > 0.0 && self.test_fraction < 1.0;
        if !fraction_ok {
            return Err(QkdError::InvalidParameter {
                name: "test_fraction",
                value: self.test_fraction,
                range: "(0, 1)",
            });
        }
        Ok(())
    }
}

/// Full record of one session: per-pair choices and outcomes, the sifted
/// keys, and the derived statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct QkdSession {
    pub pair_count: usize,
    /// Index into [`ALICE_ANGLES`] per pair.
    pub alice_angles: Vec<u8>,
    /// Index into [`BOB_ANGLES`] per pair.
    pub bob_angles: Vec<u8>,
    pub alice_outcomes: Vec<i8>,
    pub bob_outcomes: Vec<i8>,
    pub sifted_key_alice: BitKey,
    pub sifted_key_bob: BitKey,
    /// Bits sacrificed from the front of the sifted keys for the agreement
    /// test.
    pub sacrificed_bits: usize,
    /// Matching-bit fraction over the sacrificed prefix.
    pub agreement: f64,
    /// Magnitude of the CHSH combination over the four estimator cells.
    pub chsh_s: f64,
    pub eavesdrop_detected: bool,
}

impl QkdSession {
    pub fn sifted_len(&self) -> usize {
        self.sifted_key_alice.len()
    }

    /// Sifted-key error rate: `1 − agreement`.
    pub fn qber(&self) -> f64 {
        1.0 - self.agreement
    }

    /// The sending side's sifted bits left after the sacrificed prefix.
    pub fn key_material(&self) -> Result<BitKey, QkdError> {
        let bits = &self.sifted_key_alice.bits()[self.sacrificed_bits..];
        if bits.is_empty() {
            return Err(QkdError::NoKeyMaterial);
        }
        BitKey::from_bits(bits.to_vec())
    }
}

/// Draw `n` independent uniform bits from the given source.
pub fn generate_key(n: usize, rng: &mut impl RngCore) -> Result<BitKey, QkdError> {
    if n == 0 {
        return Err(QkdError::EmptyKey);
    }
    let mut bytes = alloc::vec![0u8; n.div_ceil(8)];
    rng.fill_bytes(&mut bytes);
    let bits = (0..n).map(|i| (bytes[i / 8] >> (7 - i % 8)) & 1).collect();
    BitKey::from_bits(bits)
}

/// Flip each bit independently with probability `p_noise`.
///
/// The endpoints are exact, not statistical: a zero probability returns the
/// input unchanged and probability one returns the bitwise complement,
/// because the uniform draw lives in `[0, 1)`.
pub fn apply_channel_noise(
    key: &BitKey,
    p_noise: f64,
    rng: &mut impl RngCore,
) -> Result<BitKey, QkdError> {
    if !(0.0..=1.0).contains(&p_noise) {
        return Err(QkdError::InvalidParameter {
            name: "p_noise",
            value: p_noise,
            range: "[0, 1]",
        });
    }
    let bits = key
        .bits()
        .iter()
        .map(|&b| if unit_f64(rng) < p_noise { b ^ 1 } else { b })
        .collect();
    BitKey::from_bits(bits)
}

/// Fraction of positions where the two keys carry the same bit.
pub fn bit_agreement(a: &BitKey, b: &BitKey) -> Result<f64, QkdError> {
    if a.len() != b.len() {
        return Err(QkdError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let matching = a
        .bits()
        .iter()
        .zip(b.bits())
        .filter(|(x, y)| x == y)
        .count();
    Ok(matching as f64 / a.len() as f64)
}

/// True when the agreement falls strictly below the threshold; hitting the
/// boundary exactly passes.
pub fn detect_eavesdropping(agreement: f64, threshold: f64) -> bool {
    agreement < threshold
}

/// Bitwise XOR of two equal-length keys.
pub fn combine_keys(k: &BitKey, k1: &BitKey) -> Result<BitKey, QkdError> {
    if k.len() != k1.len() {
        return Err(QkdError::LengthMismatch {
            left: k.len(),
            right: k1.len(),
        });
    }
    let bits = k.bits().iter().zip(k1.bits()).map(|(a, b)| a ^ b).collect();
    BitKey::from_bits(bits)
}

/// Pairs to request so a session yields at least `key_bits` of key material
/// after sifting (2 of 9 angle combinations) and the sacrificed test
/// fraction, with ~30% margin over the expectation plus a fixed floor
/// against small-count fluctuation.
pub fn pairs_for_key_bits(key_bits: usize, test_fraction: f64) -> usize {
    let keep = (1.0 - test_fraction).max(0.05);
    let expected_pairs = key_bits as f64 / keep * 4.5;
    let padded = expected_pairs * 1.3 + 64.0;
    (padded as usize).max(MIN_PAIR_COUNT)
}

fn correlated_partner(first: i8, correlation: f64, rng: &mut impl RngCore) -> i8 {
    // P(partner == first) = (1 + correlation) / 2 reproduces
    // E[first · partner] = correlation with symmetric ±1 marginals.
    if unit_f64(rng) < (1.0 + correlation) / 2.0 {
        first
    } else {
        -first
    }
}

fn outcome_to_bit(outcome: i8) -> u8 {
    if outcome == 1 {
        0
    } else {
        1
    }
}

/// Simulate a full session over `pair_count` singlet pairs.
///
/// Per pair the draw order is fixed (sender angle, receiver angle, sender
/// outcome, interceptor draws if enabled, receiver outcome, noise draw), so
/// one seed reproduces the session bit-for-bit.
pub fn run_e91_session(
    pair_count: usize,
    config: &ChannelConfig,
    rng: &mut impl RngCore,
) -> Result<QkdSession, QkdError> {
    if pair_count < MIN_PAIR_COUNT {
        return Err(QkdError::TooFewPairs {
            requested: pair_count,
        });
    }
    config.validate()?;

    let mut alice_angles = Vec::with_capacity(pair_count);
    let mut bob_angles = Vec::with_capacity(pair_count);
    let mut alice_outcomes = Vec::with_capacity(pair_count);
    let mut bob_outcomes = Vec::with_capacity(pair_count);
    let mut sifted_alice = Vec::new();
    let mut sifted_bob = Vec::new();

    for _ in 0..pair_count {
        let a_idx = index3(rng);
        let b_idx = index3(rng);
        let a_angle = ALICE_ANGLES[a_idx as usize];
        let b_angle = BOB_ANGLES[b_idx as usize];

        let alice = sign(rng);
        let mut bob = match config.eavesdropper {
            Eavesdropper::None => {
                let correlation = -libm::cos(a_angle - b_angle);
                correlated_partner(alice, correlation, rng)
            }
            Eavesdropper::InterceptResend => {
                let e_angle = EVE_ANGLES[(rng.next_u64() & 1) as usize];
                // The interceptor shares singlet statistics with the sender,
                // then forwards an eigenstate of its own measurement; the
                // receiver sees only the classical alignment with that state.
                let eve = correlated_partner(alice, -libm::cos(a_angle - e_angle), rng);
                correlated_partner(eve, libm::cos(b_angle - e_angle), rng)
            }
        };
        if unit_f64(rng) < config.p_noise {
            bob = -bob;
        }

        alice_angles.push(a_idx);
        bob_angles.push(b_idx);
        alice_outcomes.push(alice);
        bob_outcomes.push(bob);

        if KEY_PAIRS.contains(&(a_idx, b_idx)) {
            sifted_alice.push(outcome_to_bit(alice));
            sifted_bob.push(outcome_to_bit(-bob));
        }
    }

    if sifted_alice.is_empty() {
        return Err(QkdError::NoSiftedBits { pair_count });
    }
    let sifted_key_alice = BitKey::from_bits(sifted_alice)?;
    let sifted_key_bob = BitKey::from_bits(sifted_bob)?;

    let sifted_len = sifted_key_alice.len();
    let sacrificed_bits =
        (libm::ceil(sifted_len as f64 * config.test_fraction) as usize).clamp(1, sifted_len);
    let matching = sifted_key_alice.bits()[..sacrificed_bits]
        .iter()
        .zip(&sifted_key_bob.bits()[..sacrificed_bits])
        .filter(|(a, b)| a == b)
        .count();
    let agreement = matching as f64 / sacrificed_bits as f64;

    let chsh_s = chsh_from_rounds(&alice_angles, &bob_angles, &alice_outcomes, &bob_outcomes)?;

    Ok(QkdSession {
        pair_count,
        alice_angles,
        bob_angles,
        alice_outcomes,
        bob_outcomes,
        sifted_key_alice,
        sifted_key_bob,
        sacrificed_bits,
        agreement,
        chsh_s,
        eavesdrop_detected: detect_eavesdropping(agreement, config.detection_threshold),
    })
}

fn chsh_from_rounds(
    alice_angles: &[u8],
    bob_angles: &[u8],
    alice_outcomes: &[i8],
    bob_outcomes: &[i8],
) -> Result<f64, QkdError> {
    let mut sums = [0i64; 4];
    let mut counts = [0u64; 4];
    for i in 0..alice_angles.len() {
        if let Some(cell) = ESTIMATOR_PAIRS
            .iter()
            .position(|&p| p == (alice_angles[i], bob_angles[i]))
        {
            sums[cell] += (alice_outcomes[i] * bob_outcomes[i]) as i64;
            counts[cell] += 1;
        }
    }
    let mut correlators = [0.0f64; 4];
    for cell in 0..4 {
        if counts[cell] == 0 {
            let (alice_index, bob_index) = ESTIMATOR_PAIRS[cell];
            return Err(QkdError::EmptyEstimatorCell {
                alice_index,
                bob_index,
            });
        }
        correlators[cell] = sums[cell] as f64 / counts[cell] as f64;
    }
    let s = correlators[0] - correlators[1] + correlators[2] + correlators[3];
    Ok(libm::fabs(s))
}

/// Magnitude of the CHSH combination
/// `E(a₁,b₁) − E(a₁,b₃) + E(a₃,b₁) + E(a₃,b₃)` over a session's estimator
/// rounds. Bounded by 4 algebraically; an undisturbed source approaches
/// 2√2 while any local strategy stays at or below 2.
pub fn chsh_statistic(session: &QkdSession) -> Result<f64, QkdError> {
    chsh_from_rounds(
        &session.alice_angles,
        &session.bob_angles,
        &session.alice_outcomes,
        &session.bob_outcomes,
    )
}
