//! Chaotic map trajectories and keystream derivation.
//!
//! Four maps feed the cipher, each iterated in 64-bit floating point with
//! strict left-to-right evaluation:
//!
//! * logistic: `x' = r·x·(1 − x)`
//! * Henon: `x' = 1 − a·x² + y`, `y' = b·x`
//! * tent: `x' = r·x` for `x < 0.5`, else `r·(1 − x)`
//! * Arnold cat: `x' = (x + a·y) mod 1`, `y' = (b·x + y) mod 1`
//!
//! Raw trajectory values are far from uniform (the logistic density piles up
//! near 0 and 1), so [`derive_keystream`] whitens each value through the
//! fractional part of a large multiple before quantizing to a byte. Seeds for
//! all four maps come from key material via [`derive_seeds`].

use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::qkd::BitKey;

/// Minimum key length accepted by [`derive_seeds`], in bits.
pub const MIN_KEY_BITS: usize = 128;

/// Orbit magnitude beyond which the Henon recurrence is declared divergent.
pub const DIVERGENCE_LIMIT: f64 = 10.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChaosError {
    #[error("parameter {name} = {value} outside valid range {range}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error("sequence length must be at least 1")]
    EmptySequence,
    #[error("orbit diverged at iteration {iteration} (|x| > {DIVERGENCE_LIMIT})")]
    Divergence { iteration: usize },
    #[error("trajectory holds {available} values, need burn-in {burn_in} + {n}")]
    TrajectoryTooShort {
        available: usize,
        burn_in: usize,
        n: usize,
    },
    #[error("key of {bits} bits is shorter than the {MIN_KEY_BITS}-bit minimum")]
    KeyTooShort { bits: usize },
}

/// Which map produced a value or keystream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MapKind {
    Logistic,
    Henon,
    Tent,
    Arnold,
}

impl MapKind {
    pub fn name(&self) -> &'static str {
        match self {
            MapKind::Logistic => "logistic",
            MapKind::Henon => "henon",
            MapKind::Tent => "tent",
            MapKind::Arnold => "arnold",
        }
    }
}

impl fmt::Display for MapKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Control parameters for the four maps plus the shared burn-in length.
///
/// The tent slope defaults to 1.9999 rather than the half-slope variant
/// (`r = 0.5`): with any slope at or below 1 every tent orbit contracts to
/// zero and the layer degenerates to a constant keystream. The half-slope
/// value is still accepted when explicitly configured; callers can check
/// [`ChaosParams::tent_collapses`] and warn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChaosParams {
    pub logistic_r: f64,
    pub henon_a: f64,
    pub henon_b: f64,
    pub tent_r: f64,
    pub arnold_a: f64,
    pub arnold_b: f64,
    /// Leading iterations discarded so keystreams start deep in the attractor.
    pub burn_in: usize,
}

impl Default for ChaosParams {
    fn default() -> Self {
        Self {
            logistic_r: 3.99,
            henon_a: 1.4,
            henon_b: 0.3,
            tent_r: 1.9999,
            arnold_a: 1.0,
            arnold_b: 1.0,
            burn_in: 1024,
        }
    }
}

impl ChaosParams {
    pub fn validate(&self) -> Result<(), ChaosError> {
        // Comparisons are phrased positively so NaN fails them.
        let logistic_ok = self.logistic_r > 0.0 && self.logistic_r <= 4.0;
        if !logistic_ok {
            return Err(ChaosError::InvalidParameter {
                name: "logistic_r",
                value: self.logistic_r,
                range: "(0, 4]",
            });
        }
        let tent_ok = self.tent_r > 0.0;
        if !tent_ok {
            return Err(ChaosError::InvalidParameter {
                name: "tent_r",
                value: self.tent_r,
                range: "(0, inf)",
            });
        }
        if !self.henon_a.is_finite() || !self.henon_b.is_finite() {
            return Err(ChaosError::InvalidParameter {
                name: "henon_a/henon_b",
                value: if self.henon_a.is_finite() {
                    self.henon_b
                } else {
                    self.henon_a
                },
                range: "finite",
            });
        }
        if !self.arnold_a.is_finite() || !self.arnold_b.is_finite() {
            return Err(ChaosError::InvalidParameter {
                name: "arnold_a/arnold_b",
                value: if self.arnold_a.is_finite() {
                    self.arnold_b
                } else {
                    self.arnold_a
                },
                range: "finite",
            });
        }
        Ok(())
    }

    /// True when every tent orbit contracts toward zero (slope ≤ 1), which
    /// turns that layer into a constant keystream after burn-in.
    pub fn tent_collapses(&self) -> bool {
        self.tent_r <= 1.0
    }

    /// Order-independent digest of the parameter set, recorded in cipher
    /// envelopes so a ciphertext can be matched to its decryption parameters.
    pub fn fingerprint(&self) -> u64 {
        let fields = [
            self.logistic_r,
            self.henon_a,
            self.henon_b,
            self.tent_r,
            self.arnold_a,
            self.arnold_b,
        ];
        let bytes = fields
            .iter()
            .flat_map(|v| v.to_bits().to_le_bytes())
            .chain((self.burn_in as u64).to_le_bytes());
        crate::hash::fnv1a64(bytes)
    }
}

/// Initial conditions for the four maps, all strictly inside `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChaosSeeds {
    pub logistic_x0: f64,
    pub henon_x0: f64,
    pub henon_y0: f64,
    pub tent_x0: f64,
    pub arnold_x0: f64,
    pub arnold_y0: f64,
}

impl ChaosSeeds {
    /// Starting point for the Henon layer.
    ///
    /// The raw unit-square seed pair is squeezed into the rectangle
    /// `(−0.4, 0.4) × (−0.1, 0.1)`, which sits strictly inside the map's
    /// trapping quadrilateral for the `a = 1.4, b = 0.3` regime. Seeding the
    /// unit square directly would let roughly a fifth of all keys launch
    /// orbits that escape to infinity; from the trapping region no orbit can
    /// leave, so key-derived keystream generation is total.
    pub fn henon_start(&self) -> (f64, f64) {
        ((self.henon_x0 - 0.5) * 0.8, (self.henon_y0 - 0.5) * 0.2)
    }
}

/// A whitened byte stream plus the map that generated it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Keystream {
    pub bytes: Vec<u8>,
    pub origin: MapKind,
}

fn check_len(n: usize) -> Result<(), ChaosError> {
    if n == 0 {
        Err(ChaosError::EmptySequence)
    } else {
        Ok(())
    }
}

/// Iterate the logistic map, returning `x_1..x_n`.
///
/// All outputs stay in `[0, 1]` for `r ≤ 4` and `x0` inside the open unit
/// interval.
pub fn logistic_sequence(x0: f64, r: f64, n: usize) -> Result<Vec<f64>, ChaosError> {
    check_len(n)?;
    let x0_ok = x0 > 0.0 && x0 < 1.0;
    if !x0_ok {
        return Err(ChaosError::InvalidParameter {
            name: "x0",
            value: x0,
            range: "(0, 1)",
        });
    }
    let r_ok = r > 0.0 && r <= 4.0;
    if !r_ok {
        return Err(ChaosError::InvalidParameter {
            name: "r",
            value: r,
            range: "(0, 4]",
        });
    }
    let mut out = Vec::with_capacity(n);
    let mut x = x0;
    for _ in 0..n {
        x = r * x * (1.0 - x);
        out.push(x);
    }
    Ok(out)
}

/// Iterate the Henon map, returning `(x_1, y_1)..(x_n, y_n)`.
///
/// The accepted start box is the standard attractor basin heuristic; escape
/// is still detected on every step and reported with the iteration index
/// rather than assumed away.
pub fn henon_sequence(
    x0: f64,
    y0: f64,
    a: f64,
    b: f64,
    n: usize,
) -> Result<Vec<(f64, f64)>, ChaosError> {
    check_len(n)?;
    let x0_ok = libm::fabs(x0) <= 1.5;
    if !x0_ok {
        return Err(ChaosError::InvalidParameter {
            name: "x0",
            value: x0,
            range: "[-1.5, 1.5]",
        });
    }
    let y0_ok = libm::fabs(y0) <= 0.5;
    if !y0_ok {
        return Err(ChaosError::InvalidParameter {
            name: "y0",
            value: y0,
            range: "[-0.5, 0.5]",
        });
    }
    let mut out = Vec::with_capacity(n);
    let (mut x, mut y) = (x0, y0);
    for i in 0..n {
        let next_x = 1.0 - a * x * x + y;
        let next_y = b * x;
        x = next_x;
        y = next_y;
        if libm::fabs(x) > DIVERGENCE_LIMIT {
            return Err(ChaosError::Divergence { iteration: i + 1 });
        }
        out.push((x, y));
    }
    Ok(out)
}

/// Iterate the tent map, returning `x_1..x_n`.
pub fn tent_sequence(x0: f64, r: f64, n: usize) -> Result<Vec<f64>, ChaosError> {
    check_len(n)?;
    if !(0.0..=1.0).contains(&x0) {
        return Err(ChaosError::InvalidParameter {
            name: "x0",
            value: x0,
            range: "[0, 1]",
        });
    }
    let r_ok = r > 0.0;
    if !r_ok {
        return Err(ChaosError::InvalidParameter {
            name: "r",
            value: r,
            range: "(0, inf)",
        });
    }
    let mut out = Vec::with_capacity(n);
    let mut x = x0;
    for _ in 0..n {
        x = if x < 0.5 { r * x } else { r * (1.0 - x) };
        out.push(x);
    }
    Ok(out)
}

/// Reduce into `[0, 1)`, mapping the `1.0` rounding edge back to zero.
fn mod_unit(v: f64) -> f64 {
    let mut m = v % 1.0;
    if m < 0.0 {
        m += 1.0;
    }
    if m >= 1.0 {
        0.0
    } else {
        m
    }
}

/// Iterate the Arnold cat map, returning `(x_1, y_1)..(x_n, y_n)` with both
/// coordinates reduced modulo 1 into `[0, 1)`.
pub fn arnold_sequence(
    x0: f64,
    y0: f64,
    a: f64,
    b: f64,
    n: usize,
) -> Result<Vec<(f64, f64)>, ChaosError> {
    check_len(n)?;
    if !(0.0..1.0).contains(&x0) {
        return Err(ChaosError::InvalidParameter {
            name: "x0",
            value: x0,
            range: "[0, 1)",
        });
    }
    if !(0.0..1.0).contains(&y0) {
        return Err(ChaosError::InvalidParameter {
            name: "y0",
            value: y0,
            range: "[0, 1)",
        });
    }
    let mut out = Vec::with_capacity(n);
    let (mut x, mut y) = (x0, y0);
    for _ in 0..n {
        let next_x = mod_unit(x + a * y);
        let next_y = mod_unit(b * x + y);
        x = next_x;
        y = next_y;
        out.push((x, y));
    }
    Ok(out)
}

/// Whiten one trajectory value into a byte: `⌊frac(|x|·10⁶)·256⌋`, clamped
/// to `[0, 255]`.
///
/// Multiplying by 10⁶ before taking the fractional part wraps the slowly
/// varying trajectory density around the unit circle many thousands of
/// times, which flattens the arcsine-shaped logistic histogram into a
/// near-uniform byte distribution.
pub fn whiten(x: f64) -> u8 {
    let scaled = libm::fabs(x) * 1.0e6;
    let frac = scaled - libm::floor(scaled);
    let byte = libm::floor(frac * 256.0);
    if byte >= 255.0 {
        255
    } else {
        byte as u8
    }
}

/// Drop `burn_in` leading values from a trajectory and whiten the next `n`
/// into a byte keystream. For two-dimensional maps pass the x-coordinates.
pub fn derive_keystream(
    trajectory: &[f64],
    n: usize,
    burn_in: usize,
    origin: MapKind,
) -> Result<Keystream, ChaosError> {
    let needed = burn_in
        .checked_add(n)
        .ok_or(ChaosError::TrajectoryTooShort {
            available: trajectory.len(),
            burn_in,
            n,
        })?;
    if trajectory.len() < needed {
        return Err(ChaosError::TrajectoryTooShort {
            available: trajectory.len(),
            burn_in,
            n,
        });
    }
    let bytes = trajectory[burn_in..burn_in + n]
        .iter()
        .map(|&x| whiten(x))
        .collect();
    Ok(Keystream { bytes, origin })
}

/// Largest `f64` strictly below 1.
const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

/// Nudge applied when a tent seed lands exactly on the map's peak preimage.
const TENT_NUDGE: f64 = 1.0 / 4_294_967_296.0; // 2^-32

fn seed_from_word(word: u64) -> f64 {
    // Correctly rounded value of (word + 1/2) / 2^64, computed as the odd
    // 65-bit numerator (2w + 1) over 2^65. The numerator never rounds to an
    // even multiple, so the seed cannot reach 0; the clamp keeps the
    // w = u64::MAX edge, which rounds up to 1.0, inside the open interval.
    let numerator = 2 * (word as u128) + 1;
    let seed = numerator as f64 / (1u128 << 65) as f64;
    seed.min(BELOW_ONE)
}

/// Expand key material into initial conditions for all four maps.
///
/// The key bits are packed MSB-first into four 64-bit chunks (keys shorter
/// than 256 bits are zero-padded; longer keys fold back onto the chunks by
/// XOR so every bit still influences the result). Six words are mixed as
/// `w_i = chunk_{i mod 4} XOR rotl(chunk_{(i+1) mod 4}, 8·(i+1))` and each
/// becomes a seed `(w_i + 1/2) / 2^64`, strictly inside `(0, 1)`. A tent
/// seed landing exactly on 0.5 is nudged by 2⁻³² so the orbit cannot fold
/// straight onto a fixed point.
pub fn derive_seeds(key: &BitKey) -> Result<ChaosSeeds, ChaosError> {
    if key.len() < MIN_KEY_BITS {
        return Err(ChaosError::KeyTooShort { bits: key.len() });
    }
    let mut chunks = [0u64; 4];
    for (i, &bit) in key.bits().iter().enumerate() {
        if bit == 1 {
            let pos = i % 256;
            chunks[pos / 64] ^= 1u64 << (63 - (pos % 64));
        }
    }
    let mut words = [0u64; 6];
    for (i, word) in words.iter_mut().enumerate() {
        let base = chunks[i % 4];
        let mixed = chunks[(i + 1) % 4].rotate_left(8 * (i as u32 + 1));
        *word = base ^ mixed;
    }
    let mut tent_x0 = seed_from_word(words[3]);
    if tent_x0 == 0.5 {
        tent_x0 += TENT_NUDGE;
    }
    Ok(ChaosSeeds {
        logistic_x0: seed_from_word(words[0]),
        henon_x0: seed_from_word(words[1]),
        henon_y0: seed_from_word(words[2]),
        tent_x0,
        arnold_x0: seed_from_word(words[4]),
        arnold_y0: seed_from_word(words[5]),
    })
}
