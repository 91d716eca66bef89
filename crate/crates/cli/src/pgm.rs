//! Bit-exact binary PGM (P5) codec, grayscale ingestion of common raster
//! formats, and dataset directory scanning.
//!
//! Binary PGM is the canonical interchange format: cipher correctness is
//! checked at the byte level, so the writer is deterministic and the reader
//! rejects anything it could not reproduce. Compressed rasters (PNG, JPEG)
//! are accepted read-only and converted to grayscale behind the same
//! [`GrayImage`] boundary.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use qke_core::image::{GrayImage, ImageError};
use thiserror::Error;

/// Largest accepted side length, per side.
pub const MAX_DIMENSION: usize = 65_536;

/// File extensions the dataset scanner picks up.
pub const SUPPORTED_EXTENSIONS: [&str; 4] = ["pgm", "png", "jpg", "jpeg"];

#[derive(Debug, Error)]
pub enum PgmError {
    #[error("byte {offset}: not a binary PGM, magic must be \"P5\"")]
    BadMagic { offset: usize },
    #[error("byte {offset}: unexpected end of data while reading {what}")]
    UnexpectedEof { what: &'static str, offset: usize },
    #[error("byte {offset}: expected decimal digit for {what}")]
    InvalidDigit { what: &'static str, offset: usize },
    #[error("byte {offset}: {what} exceeds limit {limit}")]
    ValueTooLarge {
        what: &'static str,
        limit: usize,
        offset: usize,
    },
    #[error("byte {offset}: {what} must be at least 1")]
    ZeroValue { what: &'static str, offset: usize },
    #[error("byte {offset}: payload truncated, need {expected} bytes but only {found} remain")]
    TruncatedPayload {
        expected: usize,
        found: usize,
        offset: usize,
    },
    #[error("byte {offset}: {count} unexpected trailing bytes after pixel payload")]
    TrailingData { count: usize, offset: usize },
    #[error(transparent)]
    Image(#[from] ImageError),
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    /// Skip whitespace and `#` comments (which run to end of line).
    fn skip_separators(&mut self, what: &'static str) -> Result<(), PgmError> {
        loop {
            match self.peek() {
                Some(b) if b.is_ascii_whitespace() => self.pos += 1,
                Some(b'#') => {
                    while let Some(b) = self.peek() {
                        self.pos += 1;
                        if b == b'\n' {
                            break;
                        }
                    }
                }
                Some(_) => return Ok(()),
                None => {
                    return Err(PgmError::UnexpectedEof {
                        what,
                        offset: self.pos,
                    })
                }
            }
        }
    }

    fn read_number(&mut self, what: &'static str, limit: usize) -> Result<usize, PgmError> {
        let start = self.pos;
        let mut value: usize = 0;
        let mut digits = 0;
        while let Some(b) = self.peek() {
            if !b.is_ascii_digit() {
                break;
            }
            value = value
                .checked_mul(10)
                .and_then(|v| v.checked_add((b - b'0') as usize))
                .filter(|&v| v <= limit)
                .ok_or(PgmError::ValueTooLarge {
                    what,
                    limit,
                    offset: start,
                })?;
            digits += 1;
            self.pos += 1;
        }
        if digits == 0 {
            return match self.peek() {
                Some(_) => Err(PgmError::InvalidDigit {
                    what,
                    offset: self.pos,
                }),
                None => Err(PgmError::UnexpectedEof {
                    what,
                    offset: self.pos,
                }),
            };
        }
        if value == 0 {
            return Err(PgmError::ZeroValue {
                what,
                offset: start,
            });
        }
        Ok(value)
    }

    /// The single whitespace byte separating the header from the payload.
    fn expect_one_whitespace(&mut self) -> Result<(), PgmError> {
        match self.peek() {
            Some(b) if b.is_ascii_whitespace() => {
                self.pos += 1;
                Ok(())
            }
            Some(_) => Err(PgmError::InvalidDigit {
                what: "header/payload separator",
                offset: self.pos,
            }),
            None => Err(PgmError::UnexpectedEof {
                what: "header/payload separator",
                offset: self.pos,
            }),
        }
    }
}

/// Decode a binary PGM from raw file content.
pub fn read_pgm(bytes: &[u8]) -> Result<GrayImage, PgmError> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(PgmError::BadMagic { offset: 0 });
    }
    let mut cursor = Cursor { bytes, pos: 2 };
    cursor.skip_separators("width")?;
    let width = cursor.read_number("width", MAX_DIMENSION)?;
    cursor.skip_separators("height")?;
    let height = cursor.read_number("height", MAX_DIMENSION)?;
    cursor.skip_separators("maxval")?;
    cursor.read_number("maxval", 255)?;
    cursor.expect_one_whitespace()?;

    let expected = width * height;
    let found = bytes.len() - cursor.pos;
    if found < expected {
        return Err(PgmError::TruncatedPayload {
            expected,
            found,
            offset: cursor.pos,
        });
    }
    if found > expected {
        return Err(PgmError::TrailingData {
            count: found - expected,
            offset: cursor.pos + expected,
        });
    }
    let pixels = bytes[cursor.pos..cursor.pos + expected].to_vec();
    Ok(GrayImage::new(width, height, pixels)?)
}

/// Encode as canonical binary PGM: `P5\n<w> <h>\n255\n` followed by the
/// row-major payload. Byte-for-byte deterministic.
pub fn write_pgm(image: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend_from_slice(image.pixels());
    out
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("unsupported bit depth: {found} (only 8-bit channels are accepted)")]
    UnsupportedBitDepth { found: &'static str },
    #[error("decode failed: {0}")]
    Decode(String),
    #[error(transparent)]
    Shape(#[from] ImageError),
}

/// A decoded 8-bit raster awaiting grayscale conversion.
#[derive(Debug, Clone)]
pub enum Raster {
    Gray {
        width: usize,
        height: usize,
        pixels: Vec<u8>,
    },
    /// Interleaved RGB, three bytes per pixel.
    Rgb {
        width: usize,
        height: usize,
        pixels: Vec<u8>,
    },
}

/// BT.601 luma with round-half-up, pinned so ingestion is reproducible.
pub fn luma(r: u8, g: u8, b: u8) -> u8 {
    let y = 0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64;
    let rounded = (y + 0.5).floor();
    if rounded >= 255.0 {
        255
    } else {
        rounded as u8
    }
}

/// Convert a decoded raster to grayscale. Gray input passes through
/// unchanged; RGB converts per pixel via [`luma`].
pub fn ingest_to_gray(raster: &Raster) -> Result<GrayImage, IngestError> {
    match raster {
        Raster::Gray {
            width,
            height,
            pixels,
        } => Ok(GrayImage::new(*width, *height, pixels.clone())?),
        Raster::Rgb {
            width,
            height,
            pixels,
        } => {
            let gray = pixels
                .chunks_exact(3)
                .map(|px| luma(px[0], px[1], px[2]))
                .collect();
            Ok(GrayImage::new(*width, *height, gray)?)
        }
    }
}

/// Decode PNG/JPEG bytes into an 8-bit raster, dropping any alpha channel.
/// Anything deeper than 8 bits per channel is rejected.
pub fn decode_raster(bytes: &[u8]) -> Result<Raster, IngestError> {
    use image::DynamicImage;

    let decoded = image::load_from_memory(bytes).map_err(|e| IngestError::Decode(e.to_string()))?;
    let (width, height) = (decoded.width() as usize, decoded.height() as usize);
    match decoded {
        DynamicImage::ImageLuma8(img) => Ok(Raster::Gray {
            width,
            height,
            pixels: img.into_raw(),
        }),
        DynamicImage::ImageLumaA8(img) => Ok(Raster::Gray {
            width,
            height,
            pixels: img.pixels().map(|p| p.0[0]).collect(),
        }),
        DynamicImage::ImageRgb8(img) => Ok(Raster::Rgb {
            width,
            height,
            pixels: img.into_raw(),
        }),
        DynamicImage::ImageRgba8(img) => Ok(Raster::Rgb {
            width,
            height,
            pixels: img
                .pixels()
                .flat_map(|p| [p.0[0], p.0[1], p.0[2]])
                .collect(),
        }),
        DynamicImage::ImageLuma16(_)
        | DynamicImage::ImageLumaA16(_)
        | DynamicImage::ImageRgb16(_)
        | DynamicImage::ImageRgba16(_) => Err(IngestError::UnsupportedBitDepth {
            found: "16-bit channels",
        }),
        _ => Err(IngestError::UnsupportedBitDepth {
            found: "floating-point channels",
        }),
    }
}

/// How a loaded image entered the grayscale pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceFormat {
    Pgm,
    Converted,
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {source}")]
    Pgm {
        path: PathBuf,
        #[source]
        source: PgmError,
    },
    #[error("{path}: {source}")]
    Ingest {
        path: PathBuf,
        #[source]
        source: IngestError,
    },
}

/// Load any supported image file as grayscale.
pub fn load_gray(path: &Path) -> Result<(GrayImage, SourceFormat), LoadError> {
    let bytes = fs::read(path).map_err(|source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let is_pgm = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("pgm"));
    if is_pgm {
        let image = read_pgm(&bytes).map_err(|source| LoadError::Pgm {
            path: path.to_path_buf(),
            source,
        })?;
        Ok((image, SourceFormat::Pgm))
    } else {
        let image = decode_raster(&bytes)
            .and_then(|r| ingest_to_gray(&r))
            .map_err(|source| LoadError::Ingest {
                path: path.to_path_buf(),
                source,
            })?;
        Ok((image, SourceFormat::Converted))
    }
}

/// One readable image found during a dataset scan.
#[derive(Debug, Clone)]
pub struct ImageFileRecord {
    pub path: PathBuf,
    pub width: usize,
    pub height: usize,
    pub source_format: SourceFormat,
}

/// Scan outcome: records in deterministic order plus per-file warnings for
/// anything unreadable.
#[derive(Debug, Default)]
pub struct ScanReport {
    pub records: Vec<ImageFileRecord>,
    pub warnings: Vec<String>,
}

/// List supported images directly under `root` in lexicographic path order.
/// Unreadable or corrupt files become warnings, not failures; a missing
/// directory is an error.
pub fn scan_dataset(root: &Path) -> io::Result<ScanReport> {
    let mut paths: Vec<PathBuf> = fs::read_dir(root)?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension().and_then(|e| e.to_str()).is_some_and(|ext| {
                    SUPPORTED_EXTENSIONS
                        .iter()
                        .any(|s| ext.eq_ignore_ascii_case(s))
                })
        })
        .collect();
    paths.sort();

    let mut report = ScanReport::default();
    for path in paths {
        match load_gray(&path) {
            Ok((image, source_format)) => report.records.push(ImageFileRecord {
                path,
                width: image.width(),
                height: image.height(),
                source_format,
            }),
            Err(e) => report.warnings.push(e.to_string()),
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decodes_minimal_header() {
        let bytes = b"P5\n2 2\n255\n\x01\x02\x03\x04";
        let img = read_pgm(bytes).unwrap();
        assert_eq!(img.dimensions(), (2, 2));
        assert_eq!(img.pixels(), &[1, 2, 3, 4]);
    }

    #[test]
    fn header_accepts_comments_and_mixed_whitespace() {
        let bytes = b"P5 # a comment\n# another\n 2\t1 # w h\n255\n\xAA\xBB";
        let img = read_pgm(bytes).unwrap();
        assert_eq!(img.dimensions(), (2, 1));
        assert_eq!(img.pixels(), &[0xAA, 0xBB]);
    }

    #[test]
    fn canonical_write_is_exact() {
        let img = GrayImage::new(1, 1, vec![0]).unwrap();
        let bytes = write_pgm(&img);
        // Header "P5\n1 1\n255\n" is 11 bytes; one payload byte follows.
        assert_eq!(bytes, b"P5\n1 1\n255\n\x00");
        assert_eq!(bytes.len(), 12);
    }

    #[test]
    fn write_read_round_trip() {
        let img = GrayImage::new(3, 2, vec![0, 255, 7, 8, 9, 10]).unwrap();
        assert_eq!(read_pgm(&write_pgm(&img)).unwrap(), img);
    }

    #[test]
    fn read_write_identity_on_canonical_bytes() {
        let bytes = b"P5\n2 2\n255\nabcd".to_vec();
        let img = read_pgm(&bytes).unwrap();
        assert_eq!(write_pgm(&img), bytes);
    }

    #[test]
    fn rejects_wrong_magic() {
        assert!(matches!(
            read_pgm(b"P6\n1 1\n255\nx"),
            Err(PgmError::BadMagic { offset: 0 })
        ));
        assert!(matches!(read_pgm(b"P"), Err(PgmError::BadMagic { .. })));
    }

    #[test]
    fn rejects_oversized_maxval_and_dimensions() {
        assert!(matches!(
            read_pgm(b"P5\n1 1\n65535\nxx"),
            Err(PgmError::ValueTooLarge { what: "maxval", .. })
        ));
        let err = read_pgm(b"P5\n65537 1\n255\nx").unwrap_err();
        assert!(matches!(err, PgmError::ValueTooLarge { what: "width", .. }));
    }

    #[test]
    fn rejects_truncated_and_trailing_payload() {
        match read_pgm(b"P5\n2 2\n255\nab") {
            Err(PgmError::TruncatedPayload {
                expected: 4,
                found: 2,
                ..
            }) => {}
            other => panic!("unexpected: {other:?}"),
        }
        assert!(matches!(
            read_pgm(b"P5\n1 1\n255\nab"),
            Err(PgmError::TrailingData { count: 1, .. })
        ));
    }

    #[test]
    fn reports_byte_offsets() {
        match read_pgm(b"P5\nx") {
            Err(PgmError::InvalidDigit { offset, .. }) => assert_eq!(offset, 3),
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn luma_matches_hand_values() {
        assert_eq!(luma(255, 255, 255), 255);
        assert_eq!(luma(0, 0, 0), 0);
        // 0.299 * 255 = 76.245 rounds half-up to 76
        assert_eq!(luma(255, 0, 0), 76);
        assert_eq!(luma(0, 255, 0), 150); // 149.685
        assert_eq!(luma(0, 0, 255), 29); // 29.07
    }

    #[test]
    fn gray_raster_passes_through() {
        let raster = Raster::Gray {
            width: 2,
            height: 1,
            pixels: vec![9, 200],
        };
        assert_eq!(ingest_to_gray(&raster).unwrap().pixels(), &[9, 200]);
    }

    #[test]
    fn rgb_raster_converts_per_pixel() {
        let raster = Raster::Rgb {
            width: 2,
            height: 1,
            pixels: vec![255, 0, 0, 0, 0, 255],
        };
        assert_eq!(ingest_to_gray(&raster).unwrap().pixels(), &[76, 29]);
    }
}
