//! Key file format: a small JSON document carrying the key bits as hex,
//! the bit length, the seed the run was driven by, and (for channel-derived
//! keys) the session statistics.

use qke_core::qkd::{BitKey, ChannelConfig, QkdError, QkdSession};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const KEY_FILE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum KeyFileError {
    #[error("key file version {found} is not supported (expected {KEY_FILE_VERSION})")]
    UnsupportedVersion { found: u32 },
    #[error("bits_hex has a non-hex character at position {index}")]
    BadHex { index: usize },
    #[error("bits_hex holds {hex_bits} bits but length says {length}")]
    LengthMismatch { hex_bits: usize, length: usize },
    #[error(transparent)]
    Key(#[from] QkdError),
    #[error("malformed key file: {0}")]
    Json(#[from] serde_json::Error),
}

/// Statistics of the session a key came from.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SessionStats {
    pub pairs: usize,
    pub p_noise: f64,
    pub eavesdropper: String,
    pub detection_threshold: f64,
    pub test_fraction: f64,
    pub sifted_bits: usize,
    pub sacrificed_bits: usize,
    pub agreement: f64,
    pub chsh_s: f64,
    pub eavesdrop_detected: bool,
}

impl SessionStats {
    pub fn from_session(session: &QkdSession, config: &ChannelConfig) -> Self {
        Self {
            pairs: session.pair_count,
            p_noise: config.p_noise,
            eavesdropper: config.eavesdropper.to_string(),
            detection_threshold: config.detection_threshold,
            test_fraction: config.test_fraction,
            sifted_bits: session.sifted_len(),
            sacrificed_bits: session.sacrificed_bits,
            agreement: session.agreement,
            chsh_s: session.chsh_s,
            eavesdrop_detected: session.eavesdrop_detected,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct KeyFile {
    pub version: u32,
    pub bits_hex: String,
    pub length: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_with_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_stats: Option<SessionStats>,
}

fn to_hex(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        s.push(char::from_digit((b >> 4) as u32, 16).unwrap());
        s.push(char::from_digit((b & 0xF) as u32, 16).unwrap());
    }
    s
}

fn from_hex(hex: &str) -> Result<Vec<u8>, KeyFileError> {
    if !hex.len().is_multiple_of(2) {
        return Err(KeyFileError::BadHex { index: hex.len() });
    }
    let digits: Vec<u8> = hex
        .bytes()
        .enumerate()
        .map(|(index, b)| {
            (b as char)
                .to_digit(16)
                .map(|d| d as u8)
                .ok_or(KeyFileError::BadHex { index })
        })
        .collect::<Result<_, _>>()?;
    Ok(digits.chunks_exact(2).map(|p| (p[0] << 4) | p[1]).collect())
}

impl KeyFile {
    pub fn new(
        key: &BitKey,
        created_with_seed: Option<u64>,
        session_stats: Option<SessionStats>,
    ) -> Self {
        Self {
            version: KEY_FILE_VERSION,
            bits_hex: to_hex(&key.to_bytes()),
            length: key.len(),
            created_with_seed,
            session_stats,
        }
    }

    /// Reconstruct the key, validating version, hex, and length consistency.
    pub fn key(&self) -> Result<BitKey, KeyFileError> {
        if self.version != KEY_FILE_VERSION {
            return Err(KeyFileError::UnsupportedVersion {
                found: self.version,
            });
        }
        let bytes = from_hex(&self.bits_hex)?;
        if bytes.len() != self.length.div_ceil(8) {
            return Err(KeyFileError::LengthMismatch {
                hex_bits: bytes.len() * 8,
                length: self.length,
            });
        }
        Ok(BitKey::from_bytes(&bytes, self.length)?)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("key file serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, KeyFileError> {
        Ok(serde_json::from_str(text)?)
    }
}
