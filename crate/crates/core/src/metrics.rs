//! Image quality and security metrics.
//!
//! Pixel sums are accumulated in integers (exact for any image this toolkit
//! can represent) before entering floating point, so the degenerate cases
//! the comparisons care about — identical images, complements, constant
//! rasters — come out exactly: infinite PSNR, SSIM 1.0, NCC ±1.0, BER 0.0.

use thiserror::Error;

use crate::chaos::ChaosParams;
use crate::cipher::{xor_transform, CipherError};
use crate::image::GrayImage;
use crate::qkd::{BitKey, QkdSession};

/// Luminance stabilizer `(0.01 · 255)²` in the structural similarity index.
pub const SSIM_C1: f64 = 6.5025;
/// Contrast stabilizer `(0.03 · 255)²`.
pub const SSIM_C2: f64 = 58.5225;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("image shapes differ: {left_width}x{left_height} vs {right_width}x{right_height}")]
    ShapeMismatch {
        left_width: usize,
        left_height: usize,
        right_width: usize,
        right_height: usize,
    },
    #[error("{metric} needs at least {needed} pixels")]
    TooFewPixels { metric: &'static str, needed: usize },
    #[error("{metric} is undefined: {reason}")]
    UndefinedMetric {
        metric: &'static str,
        reason: &'static str,
    },
    #[error("flip index {index} out of range for {key_bits}-bit key")]
    FlipIndexOutOfRange { index: usize, key_bits: usize },
    #[error("cipher failed during key-sensitivity probe: {0}")]
    Cipher(#[from] CipherError),
}

/// Everything the evaluation tables report for one pipeline run.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub entropy_original: f64,
    pub entropy_encrypted: f64,
    pub entropy_decrypted: f64,
    /// Peak signal-to-noise ratio in decibels; `f64::INFINITY` when the
    /// compared images are identical.
    pub psnr_db: f64,
    pub ssim: f64,
    pub ncc: f64,
    pub ber: f64,
    pub pearson_od: f64,
    pub key_sensitivity_ssim: f64,
    pub eavesdrop_detected: bool,
}

fn check_shapes(a: &GrayImage, b: &GrayImage) -> Result<(), MetricsError> {
    if a.dimensions() != b.dimensions() {
        return Err(MetricsError::ShapeMismatch {
            left_width: a.width(),
            left_height: a.height(),
            right_width: b.width(),
            right_height: b.height(),
        });
    }
    Ok(())
}

/// Shannon entropy of the 256-bin intensity histogram, in bits per pixel,
/// with `0·log 0 = 0`. Always lands in `[0, 8]`.
pub fn entropy(image: &GrayImage) -> f64 {
    let mut histogram = [0u64; 256];
    for &p in image.pixels() {
        histogram[p as usize] += 1;
    }
    let n = image.pixel_count() as f64;
    let mut h = 0.0;
    for &count in &histogram {
        if count > 0 {
            let p = count as f64 / n;
            h -= p * libm::log2(p);
        }
    }
    h.min(8.0)
}

/// Peak signal-to-noise ratio `10·log10(255² / MSE)` in decibels, with a
/// 255 peak. Identical images return `f64::INFINITY`.
pub fn psnr(a: &GrayImage, b: &GrayImage) -> Result<f64, MetricsError> {
    check_shapes(a, b)?;
    let sum_sq: u64 = a
        .pixels()
        .iter()
        .zip(b.pixels())
        .map(|(&x, &y)| {
            let d = x as i64 - y as i64;
            (d * d) as u64
        })
        .sum();
    if sum_sq == 0 {
        return Ok(f64::INFINITY);
    }
    let mse = sum_sq as f64 / a.pixel_count() as f64;
    Ok(10.0 * libm::log10(255.0 * 255.0 / mse))
}

struct PairwiseSums {
    n: u64,
    sum_a: u64,
    sum_b: u64,
    sum_aa: u64,
    sum_bb: u64,
    sum_ab: u64,
}

fn pairwise_sums(a: &GrayImage, b: &GrayImage) -> PairwiseSums {
    let mut sums = PairwiseSums {
        n: a.pixel_count() as u64,
        sum_a: 0,
        sum_b: 0,
        sum_aa: 0,
        sum_bb: 0,
        sum_ab: 0,
    };
    for (&x, &y) in a.pixels().iter().zip(b.pixels()) {
        let (x, y) = (x as u64, y as u64);
        sums.sum_a += x;
        sums.sum_b += y;
        sums.sum_aa += x * x;
        sums.sum_bb += y * y;
        sums.sum_ab += x * y;
    }
    sums
}

/// Global-statistics structural similarity: one window spanning the whole
/// image, population variances, standard stabilizers.
pub fn ssim(a: &GrayImage, b: &GrayImage) -> Result<f64, MetricsError> {
    check_shapes(a, b)?;
    if a.pixel_count() < 2 {
        return Err(MetricsError::TooFewPixels {
            metric: "ssim",
            needed: 2,
        });
    }
    let s = pairwise_sums(a, b);
    let n = s.n as f64;
    let mean_a = s.sum_a as f64 / n;
    let mean_b = s.sum_b as f64 / n;
    let var_a = s.sum_aa as f64 / n - mean_a * mean_a;
    let var_b = s.sum_bb as f64 / n - mean_b * mean_b;
    let cov = s.sum_ab as f64 / n - mean_a * mean_b;

    let numerator = (2.0 * mean_a * mean_b + SSIM_C1) * (2.0 * cov + SSIM_C2);
    let denominator = (mean_a * mean_a + mean_b * mean_b + SSIM_C1) * (var_a + var_b + SSIM_C2);
    Ok(numerator / denominator)
}

/// Zero-lag normalized cross-correlation `Σab / √(Σa²·Σb²)`, no mean
/// subtraction. Exactly 1.0 whenever one image is a nonnegative scaling of
/// the other (Cauchy-Schwarz equality, checked in exact integers).
pub fn ncc(a: &GrayImage, b: &GrayImage) -> Result<f64, MetricsError> {
    check_shapes(a, b)?;
    let s = pairwise_sums(a, b);
    if s.sum_aa == 0 || s.sum_bb == 0 {
        return Err(MetricsError::UndefinedMetric {
            metric: "ncc",
            reason: "an operand is all-zero",
        });
    }
    let cross = s.sum_ab as u128 * s.sum_ab as u128;
    let auto = s.sum_aa as u128 * s.sum_bb as u128;
    if cross == auto {
        return Ok(1.0);
    }
    Ok(s.sum_ab as f64 / libm::sqrt(s.sum_aa as f64 * s.sum_bb as f64))
}

/// Bit error rate: differing bits over all 8-bit pixels, as a fraction.
pub fn ber(a: &GrayImage, b: &GrayImage) -> Result<f64, MetricsError> {
    check_shapes(a, b)?;
    let differing: u64 = a
        .pixels()
        .iter()
        .zip(b.pixels())
        .map(|(&x, &y)| (x ^ y).count_ones() as u64)
        .sum();
    Ok(differing as f64 / (8 * a.pixel_count()) as u64 as f64)
}

/// Pearson correlation over pixel pairs.
///
/// Two equal constant images correlate perfectly (1.0); a constant image
/// against anything else leaves the coefficient undefined.
pub fn pearson_correlation(a: &GrayImage, b: &GrayImage) -> Result<f64, MetricsError> {
    check_shapes(a, b)?;
    let s = pairwise_sums(a, b);
    let n = s.n as i128;
    let cov = n * s.sum_ab as i128 - s.sum_a as i128 * s.sum_b as i128;
    let var_a = n * s.sum_aa as i128 - (s.sum_a as i128) * (s.sum_a as i128);
    let var_b = n * s.sum_bb as i128 - (s.sum_b as i128) * (s.sum_b as i128);

    if var_a == 0 && var_b == 0 {
        return if a.pixels() == b.pixels() {
            Ok(1.0)
        } else {
            Err(MetricsError::UndefinedMetric {
                metric: "pearson",
                reason: "both operands are constant but unequal",
            })
        };
    }
    if var_a == 0 || var_b == 0 {
        return Err(MetricsError::UndefinedMetric {
            metric: "pearson",
            reason: "one operand is constant",
        });
    }
    // Exact ±1 for identical images and exact complements.
    if var_a == var_b && cov == var_a {
        return Ok(1.0);
    }
    if var_a == var_b && cov == -var_a {
        return Ok(-1.0);
    }
    Ok(cov as f64 / (libm::sqrt(var_a as f64) * libm::sqrt(var_b as f64)))
}

/// Encrypt with `key`, decrypt with the same key except one flipped bit, and
/// return the structural similarity between the original and the wrongly
/// decrypted image. Near zero for a healthy cipher.
pub fn key_sensitivity(
    original: &GrayImage,
    key: &BitKey,
    params: &ChaosParams,
    flip_index: usize,
) -> Result<f64, MetricsError> {
    if flip_index >= key.len() {
        return Err(MetricsError::FlipIndexOutOfRange {
            index: flip_index,
            key_bits: key.len(),
        });
    }
    let encrypted = xor_transform(original, key, params)?;
    let wrong_key = key
        .with_bit_flipped(flip_index)
        .expect("index checked above");
    let wrongly_decrypted = xor_transform(&encrypted, &wrong_key, params)?;
    ssim(original, &wrongly_decrypted)
}

/// Assemble the full report: comparison metrics on (original, decrypted),
/// entropies of all three images, the supplied key-sensitivity value, and
/// the session's eavesdropping verdict.
pub fn build_report(
    original: &GrayImage,
    encrypted: &GrayImage,
    decrypted: &GrayImage,
    session: &QkdSession,
    sensitivity: f64,
) -> Result<MetricsReport, MetricsError> {
    check_shapes(original, encrypted)?;
    check_shapes(original, decrypted)?;
    Ok(MetricsReport {
        entropy_original: entropy(original),
        entropy_encrypted: entropy(encrypted),
        entropy_decrypted: entropy(decrypted),
        psnr_db: psnr(original, decrypted)?,
        ssim: ssim(original, decrypted)?,
        ncc: ncc(original, decrypted)?,
        ber: ber(original, decrypted)?,
        pearson_od: pearson_correlation(original, decrypted)?,
        key_sensitivity_ssim: sensitivity,
        eavesdrop_detected: session.eavesdrop_detected,
    })
}

/// Convenience for batch evaluation: the four lossless-pipeline comparison
/// values in one call.
pub fn comparison_quartet(
    original: &GrayImage,
    decrypted: &GrayImage,
) -> Result<(f64, f64, f64, f64), MetricsError> {
    Ok((
        psnr(original, decrypted)?,
        ssim(original, decrypted)?,
        ncc(original, decrypted)?,
        ber(original, decrypted)?,
    ))
}
