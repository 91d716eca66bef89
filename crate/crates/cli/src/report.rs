//! Evaluation report documents: a machine-readable JSON form (the contract)
//! plus human-readable tables. Infinite PSNR serializes as the string
//! `"inf"` because JSON has no infinity literal.

use qke_core::MetricsReport;
use serde::{Deserialize, Serialize};

pub const REPORT_VERSION: u32 = 1;

/// Serialize/deserialize a PSNR field that may be infinite.
pub mod psnr_fmt {
    use serde::de::Error;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &f64, serializer: S) -> Result<S::Ok, S::Error> {
        if value.is_finite() {
            serializer.serialize_f64(*value)
        } else {
            serializer.serialize_str("inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Number(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<f64, D::Error> {
        match Repr::deserialize(deserializer)? {
            Repr::Number(v) => Ok(v),
            Repr::Text(s) if s == "inf" => Ok(f64::INFINITY),
            Repr::Text(s) => Err(D::Error::custom(format!("invalid psnr value {s:?}"))),
        }
    }
}

fn fmt_psnr(value: f64) -> String {
    if value.is_finite() {
        format!("{value:.4}")
    } else {
        "inf".into()
    }
}

/// Report written by `analyze` for one original/encrypted/decrypted triple.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AnalysisReport {
    pub version: u32,
    pub original: String,
    pub encrypted: String,
    pub decrypted: String,
    #[serde(with = "psnr_fmt")]
    pub psnr_db: f64,
    pub ssim: f64,
    pub ncc: f64,
    pub ber: f64,
    pub pearson_od: f64,
    pub key_sensitivity_ssim: f64,
    pub key_flip_index: usize,
    pub entropy_original: f64,
    pub entropy_encrypted: f64,
    pub entropy_decrypted: f64,
    pub eavesdrop_detected: bool,
}

impl AnalysisReport {
    pub fn from_metrics(
        metrics: &MetricsReport,
        paths: (&str, &str, &str),
        key_flip_index: usize,
    ) -> Self {
        Self {
            version: REPORT_VERSION,
            original: paths.0.into(),
            encrypted: paths.1.into(),
            decrypted: paths.2.into(),
            psnr_db: metrics.psnr_db,
            ssim: metrics.ssim,
            ncc: metrics.ncc,
            ber: metrics.ber,
            pearson_od: metrics.pearson_od,
            key_sensitivity_ssim: metrics.key_sensitivity_ssim,
            key_flip_index,
            entropy_original: metrics.entropy_original,
            entropy_encrypted: metrics.entropy_encrypted,
            entropy_decrypted: metrics.entropy_decrypted,
            eavesdrop_detected: metrics.eavesdrop_detected,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("PSNR (dB)          {}\n", fmt_psnr(self.psnr_db)));
        out.push_str(&format!("SSIM               {:.4}\n", self.ssim));
        out.push_str(&format!("NCC                {:.4}\n", self.ncc));
        out.push_str(&format!("BER                {:.4}\n", self.ber));
        out.push_str(&format!("Pearson (O & D)    {:.4}\n", self.pearson_od));
        out.push_str(&format!(
            "Key sensitivity    {:.4} (flip index {})\n",
            self.key_sensitivity_ssim, self.key_flip_index
        ));
        out.push_str(&format!(
            "Entropy O/E/D      {:.4} / {:.4} / {:.4}\n",
            self.entropy_original, self.entropy_encrypted, self.entropy_decrypted
        ));
        out.push_str(&format!(
            "Eavesdrop detected {}\n",
            if self.eavesdrop_detected { "yes" } else { "no" }
        ));
        out
    }
}

/// One dataset image in a batch run. Timings are informational only and are
/// excluded from reproducibility guarantees.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BatchRow {
    pub image: String,
    pub width: usize,
    pub height: usize,
    #[serde(with = "psnr_fmt")]
    pub psnr_db: f64,
    pub ssim: f64,
    pub ncc: f64,
    pub ber: f64,
    pub key_sensitivity_ssim: f64,
    pub entropy_original: f64,
    pub entropy_encrypted: f64,
    pub entropy_decrypted: f64,
    pub pearson_od: f64,
    pub eavesdrop_detected: bool,
    pub encrypt_seconds: f64,
    pub decrypt_seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BatchSummary {
    pub images: usize,
    pub lossless_rows: usize,
    pub min_entropy_encrypted: f64,
    pub mean_entropy_encrypted: f64,
    pub mean_key_sensitivity: f64,
    pub eavesdrop_detections: usize,
    pub mean_encrypt_seconds: f64,
    pub mean_decrypt_seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BatchReport {
    pub version: u32,
    pub seed: u64,
    pub rows: Vec<BatchRow>,
    pub summary: BatchSummary,
}

impl BatchReport {
    pub fn new(seed: u64, rows: Vec<BatchRow>) -> Self {
        let images = rows.len();
        let lossless_rows = rows
            .iter()
            .filter(|r| r.psnr_db.is_infinite() && r.ssim == 1.0 && r.ncc == 1.0 && r.ber == 0.0)
            .count();
        let min_entropy_encrypted = rows
            .iter()
            .map(|r| r.entropy_encrypted)
            .fold(f64::INFINITY, f64::min);
        let mean = |f: fn(&BatchRow) -> f64| -> f64 {
            rows.iter().map(f).sum::<f64>() / images.max(1) as f64
        };
        let summary = BatchSummary {
            images,
            lossless_rows,
            min_entropy_encrypted,
            mean_entropy_encrypted: mean(|r| r.entropy_encrypted),
            mean_key_sensitivity: mean(|r| r.key_sensitivity_ssim),
            eavesdrop_detections: rows.iter().filter(|r| r.eavesdrop_detected).count(),
            mean_encrypt_seconds: mean(|r| r.encrypt_seconds),
            mean_decrypt_seconds: mean(|r| r.decrypt_seconds),
        };
        Self {
            version: REPORT_VERSION,
            seed,
            rows,
            summary,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<28} {:>9} {:>7} {:>7} {:>7} {:>8} {:>7} {:>7} {:>7} {:>6} {:>5} {:>7} {:>7}\n",
            "Image",
            "PSNR",
            "SSIM",
            "NCC",
            "BER",
            "KeySens",
            "OE",
            "EE",
            "DE",
            "O&D",
            "ED",
            "EncS",
            "DecS"
        ));
        for r in &self.rows {
            out.push_str(&format!(
                "{:<28} {:>9} {:>7.4} {:>7.4} {:>7.4} {:>8.4} {:>7.4} {:>7.4} {:>7.4} {:>6.3} {:>5} {:>7.3} {:>7.3}\n",
                truncate_name(&r.image, 28),
                fmt_psnr(r.psnr_db),
                r.ssim,
                r.ncc,
                r.ber,
                r.key_sensitivity_ssim,
                r.entropy_original,
                r.entropy_encrypted,
                r.entropy_decrypted,
                r.pearson_od,
                if r.eavesdrop_detected { "yes" } else { "no" },
                r.encrypt_seconds,
                r.decrypt_seconds,
            ));
        }
        let s = &self.summary;
        out.push_str(&format!(
            "summary: {} images, {} lossless, EE min {:.4} mean {:.4}, key-sens mean {:.4}, {} detections, enc mean {:.3}s, dec mean {:.3}s\n",
            s.images,
            s.lossless_rows,
            s.min_entropy_encrypted,
            s.mean_entropy_encrypted,
            s.mean_key_sensitivity,
            s.eavesdrop_detections,
            s.mean_encrypt_seconds,
            s.mean_decrypt_seconds,
        ));
        out
    }
}

fn truncate_name(name: &str, max: usize) -> String {
    if name.len() <= max {
        name.to_string()
    } else {
        format!("...{}", &name[name.len() - (max - 3)..])
    }
}
