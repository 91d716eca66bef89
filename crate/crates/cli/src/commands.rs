//! Subcommand implementations. Every output file goes through an atomic
//! temp-file + rename so no partial artifact is ever observable.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::process;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use qke_core::chaos::{ChaosError, ChaosParams};
use qke_core::cipher::{
    self, encrypt_message, xor_transform, CipherEnvelope, CipherError, RoundtripVerdict,
};
use qke_core::metrics::{self, MetricsError, MetricsReport};
use qke_core::qkd::{
    combine_keys, generate_key, pairs_for_key_bits, run_e91_session, BitKey, ChannelConfig,
    QkdError,
};
use qke_core::rng::session_rng;

use crate::keyfile::{KeyFile, KeyFileError, SessionStats};
use crate::pgm::{load_gray, scan_dataset, write_pgm, LoadError, PgmError};
use crate::report::{AnalysisReport, BatchReport, BatchRow};

/// Error with a stable machine-parsable category, printed as
/// `error: <category>: <message>`.
#[derive(Debug)]
pub struct Failure {
    pub category: &'static str,
    pub message: String,
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.category, self.message)
    }
}

fn fail(category: &'static str, message: impl Into<String>) -> Failure {
    Failure {
        category,
        message: message.into(),
    }
}

impl From<LoadError> for Failure {
    fn from(e: LoadError) -> Self {
        fail("image", e.to_string())
    }
}
impl From<PgmError> for Failure {
    fn from(e: PgmError) -> Self {
        fail("format", e.to_string())
    }
}
impl From<KeyFileError> for Failure {
    fn from(e: KeyFileError) -> Self {
        fail("keyfile", e.to_string())
    }
}
impl From<CipherError> for Failure {
    fn from(e: CipherError) -> Self {
        fail("cipher", e.to_string())
    }
}
impl From<QkdError> for Failure {
    fn from(e: QkdError) -> Self {
        fail("qkd", e.to_string())
    }
}
impl From<ChaosError> for Failure {
    fn from(e: ChaosError) -> Self {
        fail("params", e.to_string())
    }
}
impl From<MetricsError> for Failure {
    fn from(e: MetricsError) -> Self {
        fail("metrics", e.to_string())
    }
}

fn io_fail(path: &Path, e: io::Error) -> Failure {
    fail("io", format!("{}: {e}", path.display()))
}

/// Final status for `main` to map onto an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Clean,
    /// Distinct status so scripts can branch on detection.
    EavesdropDetected,
}

/// Write via a temp file in the same directory plus rename.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| fail("io", format!("{}: not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), process::id()));
    fs::write(&tmp, bytes).map_err(|e| io_fail(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        io_fail(path, e)
    })
}

/// Resolve the run seed: the given one, or fresh OS entropy. The effective
/// seed is always recorded in outputs so any run can be replayed.
pub fn effective_seed(seed: Option<u64>) -> Result<u64, Failure> {
    use rand_core::TryRngCore;
    match seed {
        Some(s) => Ok(s),
        None => rand_core::OsRng
            .try_next_u64()
            .map_err(|e| fail("entropy", format!("no OS entropy available: {e}"))),
    }
}

/// Optional overrides for the chaos parameters, as a JSON document.
#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsFile {
    pub logistic_r: Option<f64>,
    pub henon_a: Option<f64>,
    pub henon_b: Option<f64>,
    pub tent_r: Option<f64>,
    pub arnold_a: Option<f64>,
    pub arnold_b: Option<f64>,
    pub burn_in: Option<usize>,
}

impl ParamsFile {
    pub fn apply(&self, mut params: ChaosParams) -> ChaosParams {
        if let Some(v) = self.logistic_r {
            params.logistic_r = v;
        }
        if let Some(v) = self.henon_a {
            params.henon_a = v;
        }
        if let Some(v) = self.henon_b {
            params.henon_b = v;
        }
        if let Some(v) = self.tent_r {
            params.tent_r = v;
        }
        if let Some(v) = self.arnold_a {
            params.arnold_a = v;
        }
        if let Some(v) = self.arnold_b {
            params.arnold_b = v;
        }
        if let Some(v) = self.burn_in {
            params.burn_in = v;
        }
        params
    }
}

/// Load chaos parameters, applying any overrides file on top of defaults.
pub fn load_params(path: Option<&Path>) -> Result<ChaosParams, Failure> {
    let params = match path {
        None => ChaosParams::default(),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| io_fail(p, e))?;
            let overrides: ParamsFile = serde_json::from_str(&text)
                .map_err(|e| fail("params", format!("{}: {e}", p.display())))?;
            overrides.apply(ChaosParams::default())
        }
    };
    params.validate()?;
    Ok(params)
}

fn read_keyfile(path: &Path) -> Result<KeyFile, Failure> {
    let text = fs::read_to_string(path).map_err(|e| io_fail(path, e))?;
    Ok(KeyFile::from_json(&text)?)
}

fn warn_degenerate_tent(params: &ChaosParams) {
    if params.tent_collapses() {
        eprintln!(
            "warning: tent slope {} collapses every orbit to zero; that keystream layer is constant",
            params.tent_r
        );
    }
}

pub fn cmd_keygen(bits: usize, seed: Option<u64>, out: &Path) -> Result<(), Failure> {
    let seed = effective_seed(seed)?;
    let key = generate_key(bits, &mut session_rng(seed))?;
    let file = KeyFile::new(&key, Some(seed), None);
    atomic_write(out, file.to_json().as_bytes())?;
    println!("wrote {} ({bits} bits, seed {seed})", out.display());
    Ok(())
}

pub fn cmd_qkd(
    pairs: usize,
    config: &ChannelConfig,
    seed: Option<u64>,
    out: &Path,
) -> Result<Outcome, Failure> {
    let seed = effective_seed(seed)?;
    let session = run_e91_session(pairs, config, &mut session_rng(seed))?;
    let material = session.key_material()?;
    let stats = SessionStats::from_session(&session, config);
    let file = KeyFile::new(&material, Some(seed), Some(stats));
    atomic_write(out, file.to_json().as_bytes())?;

    println!(
        "session: {} pairs, {} sifted bits ({} sacrificed), agreement {:.4}, chsh {:.4}, seed {seed}",
        session.pair_count,
        session.sifted_len(),
        session.sacrificed_bits,
        session.agreement,
        session.chsh_s,
    );
    println!("wrote {} ({} key bits)", out.display(), material.len());
    if session.eavesdrop_detected {
        println!(
            "eavesdrop-detected: agreement {:.4} below threshold {:.2}; do not use this key",
            session.agreement, config.detection_threshold
        );
        Ok(Outcome::EavesdropDetected)
    } else {
        Ok(Outcome::Clean)
    }
}

/// Sidecar document binding a ciphertext to the fingerprints needed to
/// decrypt it, without storing any secret.
#[derive(Debug, Serialize, Deserialize)]
pub struct EnvelopeFile {
    pub version: u32,
    pub width: usize,
    pub height: usize,
    pub params_fingerprint: String,
    pub key_id: String,
    pub layer_order: Vec<String>,
}

impl EnvelopeFile {
    fn from_envelope(envelope: &CipherEnvelope) -> Self {
        Self {
            version: 1,
            width: envelope.image.width(),
            height: envelope.image.height(),
            params_fingerprint: format!("{:016x}", envelope.params_fingerprint),
            key_id: format!("{:016x}", envelope.key_id),
            layer_order: envelope
                .layer_order
                .iter()
                .map(|m| m.name().to_string())
                .collect(),
        }
    }
}

/// `<image path>.envelope.json`
pub fn envelope_path(image_path: &Path) -> PathBuf {
    PathBuf::from(format!("{}.envelope.json", image_path.display()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Encrypt,
    Decrypt,
}

pub fn cmd_transform(
    direction: Direction,
    input: &Path,
    key_path: &Path,
    params_path: Option<&Path>,
    out: &Path,
) -> Result<(), Failure> {
    let key = read_keyfile(key_path)?.key()?;
    let params = load_params(params_path)?;
    warn_degenerate_tent(&params);
    let (image, _) = load_gray(input)?;

    if direction == Direction::Decrypt {
        verify_envelope(input, &key, &params)?;
    }

    let started = Instant::now();
    let transformed = xor_transform(&image, &key, &params)?;
    let seconds = started.elapsed().as_secs_f64();

    atomic_write(out, &write_pgm(&transformed))?;
    if direction == Direction::Encrypt {
        let envelope = CipherEnvelope::seal(transformed, &key, &params);
        let doc = EnvelopeFile::from_envelope(&envelope);
        let mut json = serde_json::to_string_pretty(&doc).map_err(|e| fail("io", e.to_string()))?;
        json.push('\n');
        atomic_write(&envelope_path(out), json.as_bytes())?;
    }

    let verb = match direction {
        Direction::Encrypt => "encrypted",
        Direction::Decrypt => "decrypted",
    };
    println!(
        "{verb} {} -> {} ({}x{}, {seconds:.3}s)",
        input.display(),
        out.display(),
        image.width(),
        image.height(),
    );
    Ok(())
}

/// When the ciphertext has an envelope sidecar, refuse to decrypt with a key
/// or parameter set that does not match what sealed it.
fn verify_envelope(input: &Path, key: &BitKey, params: &ChaosParams) -> Result<(), Failure> {
    let path = envelope_path(input);
    let text = match fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(()),
        Err(e) => return Err(io_fail(&path, e)),
    };
    let doc: EnvelopeFile = serde_json::from_str(&text)
        .map_err(|e| fail("envelope", format!("{}: {e}", path.display())))?;

    let key_id = format!("{:016x}", cipher::key_id(key));
    if doc.key_id != key_id {
        return Err(fail(
            "key-mismatch",
            format!(
                "key id {key_id} does not match envelope {} recorded at encryption; \
                 pass the key file used to encrypt, or remove {} to skip this check",
                doc.key_id,
                path.display()
            ),
        ));
    }
    let fingerprint = format!("{:016x}", params.fingerprint());
    if doc.params_fingerprint != fingerprint {
        return Err(fail(
            "params-mismatch",
            format!(
                "parameter fingerprint {fingerprint} does not match envelope {} recorded at \
                 encryption; pass the --params file used to encrypt, or remove {} to skip this check",
                doc.params_fingerprint,
                path.display()
            ),
        ));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_analyze(
    original_path: &Path,
    encrypted_path: &Path,
    decrypted_path: &Path,
    key_path: &Path,
    params_path: Option<&Path>,
    flip_index: usize,
    out: &Path,
) -> Result<(), Failure> {
    let keyfile = read_keyfile(key_path)?;
    let key = keyfile.key()?;
    let params = load_params(params_path)?;
    let (original, _) = load_gray(original_path)?;
    let (encrypted, _) = load_gray(encrypted_path)?;
    let (decrypted, _) = load_gray(decrypted_path)?;

    let eavesdrop_detected = keyfile
        .session_stats
        .as_ref()
        .map(|s| s.eavesdrop_detected)
        .unwrap_or(false);

    let metrics = MetricsReport {
        entropy_original: metrics::entropy(&original),
        entropy_encrypted: metrics::entropy(&encrypted),
        entropy_decrypted: metrics::entropy(&decrypted),
        psnr_db: metrics::psnr(&original, &decrypted)?,
        ssim: metrics::ssim(&original, &decrypted)?,
        ncc: metrics::ncc(&original, &decrypted)?,
        ber: metrics::ber(&original, &decrypted)?,
        pearson_od: metrics::pearson_correlation(&original, &decrypted)?,
        key_sensitivity_ssim: metrics::key_sensitivity(&original, &key, &params, flip_index)?,
        eavesdrop_detected,
    };
    let report = AnalysisReport::from_metrics(
        &metrics,
        (
            &original_path.display().to_string(),
            &encrypted_path.display().to_string(),
            &decrypted_path.display().to_string(),
        ),
        flip_index,
    );
    atomic_write(out, report.to_json().as_bytes())?;
    print!("{}", report.render_table());
    println!("wrote {}", out.display());
    Ok(())
}

/// Everything `batch` needs per run.
pub struct BatchOptions {
    pub dataset: PathBuf,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub params_path: Option<PathBuf>,
    pub channel: ChannelConfig,
    pub key_bits: usize,
    pub pairs: Option<usize>,
    pub jobs: usize,
}

pub fn cmd_batch(options: &BatchOptions) -> Result<(), Failure> {
    let params = load_params(options.params_path.as_deref())?;
    warn_degenerate_tent(&params);
    let seed = effective_seed(options.seed)?;
    let scan = scan_dataset(&options.dataset).map_err(|e| io_fail(&options.dataset, e))?;
    for w in &scan.warnings {
        eprintln!("warning: {w}");
    }
    if scan.records.is_empty() {
        return Err(fail(
            "dataset",
            format!("{}: no readable images found", options.dataset.display()),
        ));
    }

    let pairs = options
        .pairs
        .unwrap_or_else(|| pairs_for_key_bits(options.key_bits, options.channel.test_fraction));
    let jobs = options.jobs.max(1).min(scan.records.len());

    let process = |index: usize| -> Result<BatchRow, Failure> {
        let record = &scan.records[index];
        // Per-image seed keeps rows independent of scheduling and of each
        // other while staying reproducible from the base seed.
        let image_seed = seed.wrapping_add(index as u64);
        let mut rng = session_rng(image_seed);
        let session = run_e91_session(pairs, &options.channel, &mut rng)?;
        let material = session.key_material()?;
        if material.len() < options.key_bits {
            return Err(fail(
                "qkd",
                format!(
                    "{}: session yielded {} key bits, need {}; raise --pairs",
                    record.path.display(),
                    material.len(),
                    options.key_bits
                ),
            ));
        }
        let key = BitKey::from_bits(material.bits()[..options.key_bits].to_vec())?;
        let (original, _) = load_gray(&record.path)?;

        let started = Instant::now();
        let encrypted = xor_transform(&original, &key, &params)?;
        let encrypt_seconds = started.elapsed().as_secs_f64();
        let started = Instant::now();
        let decrypted = xor_transform(&encrypted, &key, &params)?;
        let decrypt_seconds = started.elapsed().as_secs_f64();

        let sensitivity = metrics::key_sensitivity(&original, &key, &params, 0)?;
        let report =
            metrics::build_report(&original, &encrypted, &decrypted, &session, sensitivity)?;
        Ok(BatchRow {
            image: record.path.display().to_string(),
            width: original.width(),
            height: original.height(),
            psnr_db: report.psnr_db,
            ssim: report.ssim,
            ncc: report.ncc,
            ber: report.ber,
            key_sensitivity_ssim: report.key_sensitivity_ssim,
            entropy_original: report.entropy_original,
            entropy_encrypted: report.entropy_encrypted,
            entropy_decrypted: report.entropy_decrypted,
            pearson_od: report.pearson_od,
            eavesdrop_detected: report.eavesdrop_detected,
            encrypt_seconds,
            decrypt_seconds,
        })
    };

    let count = scan.records.len();
    let mut slots: Vec<Option<Result<BatchRow, Failure>>> = Vec::new();
    slots.resize_with(count, || None);
    if jobs <= 1 {
        for (index, slot) in slots.iter_mut().enumerate() {
            *slot = Some(process(index));
        }
    } else {
        let cursor = AtomicUsize::new(0);
        let results: Vec<(usize, Result<BatchRow, Failure>)> = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..jobs)
                .map(|_| {
                    scope.spawn(|| {
                        let mut local = Vec::new();
                        loop {
                            let index = cursor.fetch_add(1, Ordering::Relaxed);
                            if index >= count {
                                break local;
                            }
                            local.push((index, process(index)));
                        }
                    })
                })
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("batch worker panicked"))
                .collect()
        });
        for (index, result) in results {
            slots[index] = Some(result);
        }
    }

    let mut rows = Vec::with_capacity(count);
    for slot in slots {
        rows.push(slot.expect("every index processed")?);
    }

    let report = BatchReport::new(seed, rows);
    atomic_write(&options.out, report.to_json().as_bytes())?;
    print!("{}", report.render_table());
    println!("wrote {}", options.out.display());
    Ok(())
}

pub fn cmd_demo_message(text: &str, key_path: &Path, seed: Option<u64>) -> Result<(), Failure> {
    if text.is_empty() {
        return Err(fail("usage", "--text must be non-empty"));
    }
    let classical = read_keyfile(key_path)?.key()?;
    let seed = effective_seed(seed)?;
    let quantum = generate_key(classical.len(), &mut session_rng(seed))?;
    let combined = combine_keys(&classical, &quantum)?;
    let ciphertext = encrypt_message(text.as_bytes(), &combined)?;
    let decrypted = encrypt_message(&ciphertext, &combined)?;

    let verdict = if decrypted == text.as_bytes() {
        RoundtripVerdict::Success
    } else {
        RoundtripVerdict::PixelMismatch { first_index: 0 }
    };

    println!("Plaintext (M): {text:?}");
    println!("Classical Key (K): {classical}");
    println!("Quantum Key (K1): {quantum}");
    println!("Combined Key (K'): {combined}");
    println!("Ciphertext (C, hex): {}", hex_string(&ciphertext));
    println!(
        "Decrypted Message (M'): {:?}",
        String::from_utf8_lossy(&decrypted)
    );
    println!("{verdict}");
    if verdict.is_success() {
        Ok(())
    } else {
        Err(fail("demo", "decrypted message differs from plaintext"))
    }
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Compare two images and report the round-trip verdict; used by tests and
/// available for scripting.
pub fn verify_files(original: &Path, decrypted: &Path) -> Result<RoundtripVerdict, Failure> {
    let (a, _) = load_gray(original)?;
    let (b, _) = load_gray(decrypted)?;
    Ok(cipher::roundtrip_verify(&a, &b))
}
