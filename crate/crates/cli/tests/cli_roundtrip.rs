//! End-to-end runs of the `qke` binary: key generation, channel sessions,
//! encrypt/decrypt round trips, reports, exit codes, and error lines.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qke_cli::keyfile::KeyFile;
use qke_cli::pgm::{scan_dataset, write_pgm};
use qke_cli::report::{AnalysisReport, BatchReport};
use qke_core::GrayImage;

fn qke(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qke"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn assert_ok(output: &Output) {
    assert!(
        output.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        stdout(output),
        stderr(output)
    );
}

fn sample_image(width: usize, height: usize) -> GrayImage {
    let pixels = (0..width * height)
        .map(|i| ((i * 31 + i / width * 7) % 256) as u8)
        .collect();
    GrayImage::new(width, height, pixels).unwrap()
}

fn write_image(path: &Path, image: &GrayImage) {
    fs::write(path, write_pgm(image)).unwrap();
}

#[test]
fn keygen_encrypt_decrypt_analyze_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let image = sample_image(40, 25);
    write_image(&root.join("plain.pgm"), &image);

    assert_ok(&qke(
        root,
        &[
            "keygen", "--bits", "256", "--seed", "7", "--out", "key.json",
        ],
    ));
    let keyfile = KeyFile::from_json(&fs::read_to_string(root.join("key.json")).unwrap()).unwrap();
    assert_eq!(keyfile.length, 256);
    assert_eq!(keyfile.created_with_seed, Some(7));

    assert_ok(&qke(
        root,
        &[
            "encrypt",
            "--in",
            "plain.pgm",
            "--key",
            "key.json",
            "--out",
            "enc.pgm",
        ],
    ));
    assert!(root.join("enc.pgm.envelope.json").exists());
    let ciphertext = fs::read(root.join("enc.pgm")).unwrap();
    assert_ne!(ciphertext, fs::read(root.join("plain.pgm")).unwrap());

    assert_ok(&qke(
        root,
        &[
            "decrypt", "--in", "enc.pgm", "--key", "key.json", "--out", "dec.pgm",
        ],
    ));
    assert_eq!(
        fs::read(root.join("dec.pgm")).unwrap(),
        fs::read(root.join("plain.pgm")).unwrap(),
        "decrypted bytes must equal the original file"
    );

    let analyze = qke(
        root,
        &[
            "analyze",
            "--original",
            "plain.pgm",
            "--encrypted",
            "enc.pgm",
            "--decrypted",
            "dec.pgm",
            "--key",
            "key.json",
            "--out",
            "report.json",
        ],
    );
    assert_ok(&analyze);
    assert!(stdout(&analyze).contains("inf"));
    let report =
        AnalysisReport::from_json(&fs::read_to_string(root.join("report.json")).unwrap()).unwrap();
    assert!(report.psnr_db.is_infinite());
    assert_eq!(report.ssim, 1.0);
    assert_eq!(report.ncc, 1.0);
    assert_eq!(report.ber, 0.0);
    assert_eq!(report.pearson_od, 1.0);
    assert_eq!(report.entropy_decrypted, report.entropy_original);
    assert!(report.key_sensitivity_ssim.abs() < 0.05);
}

#[test]
fn seeded_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    write_image(&root.join("plain.pgm"), &sample_image(16, 16));

    for out in ["a.json", "b.json"] {
        assert_ok(&qke(
            root,
            &["keygen", "--bits", "128", "--seed", "42", "--out", out],
        ));
    }
    assert_eq!(
        fs::read(root.join("a.json")).unwrap(),
        fs::read(root.join("b.json")).unwrap()
    );

    for out in ["qa.json", "qb.json"] {
        assert_ok(&qke(
            root,
            &["qkd", "--pairs", "4096", "--seed", "42", "--out", out],
        ));
    }
    assert_eq!(
        fs::read(root.join("qa.json")).unwrap(),
        fs::read(root.join("qb.json")).unwrap()
    );

    for out in ["e1.pgm", "e2.pgm"] {
        assert_ok(&qke(
            root,
            &[
                "encrypt",
                "--in",
                "plain.pgm",
                "--key",
                "a.json",
                "--out",
                out,
            ],
        ));
    }
    assert_eq!(
        fs::read(root.join("e1.pgm")).unwrap(),
        fs::read(root.join("e2.pgm")).unwrap()
    );
}

#[test]
fn qkd_detection_exit_code_is_distinct() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();

    let detected = qke(
        root,
        &[
            "qkd",
            "--pairs",
            "10000",
            "--eavesdrop",
            "intercept-resend",
            "--threshold",
            "0.8",
            "--seed",
            "1",
            "--out",
            "tapped.json",
        ],
    );
    assert_eq!(
        detected.status.code(),
        Some(3),
        "stderr: {}",
        stderr(&detected)
    );
    assert!(stdout(&detected).contains("eavesdrop-detected"));
    let keyfile =
        KeyFile::from_json(&fs::read_to_string(root.join("tapped.json")).unwrap()).unwrap();
    let stats = keyfile.session_stats.unwrap();
    assert!(stats.eavesdrop_detected);
    assert!((stats.agreement - 0.75).abs() < 0.1);

    let clean = qke(
        root,
        &[
            "qkd",
            "--pairs",
            "10000",
            "--seed",
            "1",
            "--out",
            "clean.json",
        ],
    );
    assert_eq!(clean.status.code(), Some(0));
    let keyfile =
        KeyFile::from_json(&fs::read_to_string(root.join("clean.json")).unwrap()).unwrap();
    assert!(!keyfile.session_stats.unwrap().eavesdrop_detected);
}

#[test]
fn demo_message_reports_success() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    assert_ok(&qke(
        root,
        &["keygen", "--bits", "48", "--seed", "2", "--out", "key.json"],
    ));
    let demo = qke(
        root,
        &[
            "demo-message",
            "--text",
            "HELLO",
            "--key",
            "key.json",
            "--seed",
            "5",
        ],
    );
    assert_ok(&demo);
    let text = stdout(&demo);
    assert!(text.contains("Plaintext (M): \"HELLO\""));
    assert!(text.contains("Combined Key (K')"));
    assert!(text.contains("Decrypted Message (M'): \"HELLO\""));
    assert!(text.contains("Decryption Successful"));
}

#[test]
fn envelope_rejects_wrong_key_and_params() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    write_image(&root.join("plain.pgm"), &sample_image(8, 8));
    assert_ok(&qke(
        root,
        &["keygen", "--seed", "1", "--out", "right.json"],
    ));
    assert_ok(&qke(
        root,
        &["keygen", "--seed", "2", "--out", "wrong.json"],
    ));
    assert_ok(&qke(
        root,
        &[
            "encrypt",
            "--in",
            "plain.pgm",
            "--key",
            "right.json",
            "--out",
            "enc.pgm",
        ],
    ));

    let bad_key = qke(
        root,
        &[
            "decrypt",
            "--in",
            "enc.pgm",
            "--key",
            "wrong.json",
            "--out",
            "dec.pgm",
        ],
    );
    assert_eq!(bad_key.status.code(), Some(1));
    assert!(stderr(&bad_key).starts_with("error: key-mismatch"));

    fs::write(root.join("params.json"), r#"{ "tent_r": 1.5 }"#).unwrap();
    let bad_params = qke(
        root,
        &[
            "decrypt",
            "--in",
            "enc.pgm",
            "--key",
            "right.json",
            "--params",
            "params.json",
            "--out",
            "dec.pgm",
        ],
    );
    assert_eq!(bad_params.status.code(), Some(1));
    assert!(stderr(&bad_params).starts_with("error: params-mismatch"));

    // With the matching key and params the round trip completes.
    assert_ok(&qke(
        root,
        &[
            "decrypt",
            "--in",
            "enc.pgm",
            "--key",
            "right.json",
            "--out",
            "dec.pgm",
        ],
    ));
    assert_eq!(
        fs::read(root.join("dec.pgm")).unwrap(),
        fs::read(root.join("plain.pgm")).unwrap()
    );
}

#[test]
fn errors_are_machine_parsable() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    assert_ok(&qke(root, &["keygen", "--seed", "3", "--out", "key.json"]));

    let missing = qke(
        root,
        &[
            "encrypt",
            "--in",
            "absent.pgm",
            "--key",
            "key.json",
            "--out",
            "x.pgm",
        ],
    );
    assert_eq!(missing.status.code(), Some(1));
    assert!(stderr(&missing).starts_with("error: image:"));

    fs::write(root.join("bad.pgm"), b"P5\n3 3\n255\nxx").unwrap();
    let corrupt = qke(
        root,
        &[
            "encrypt", "--in", "bad.pgm", "--key", "key.json", "--out", "x.pgm",
        ],
    );
    assert_eq!(corrupt.status.code(), Some(1));
    let err = stderr(&corrupt);
    assert!(err.starts_with("error: image:"), "got: {err}");
    assert!(err.contains("byte"), "offset missing from: {err}");

    let unknown_flag = qke(root, &["encrypt", "--nonsense"]);
    assert!(!unknown_flag.status.success());
}

#[test]
fn degenerate_tent_emits_warning_but_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    write_image(&root.join("plain.pgm"), &sample_image(12, 12));
    fs::write(root.join("half.json"), r#"{ "tent_r": 0.5 }"#).unwrap();
    assert_ok(&qke(root, &["keygen", "--seed", "4", "--out", "key.json"]));

    let enc = qke(
        root,
        &[
            "encrypt",
            "--in",
            "plain.pgm",
            "--key",
            "key.json",
            "--params",
            "half.json",
            "--out",
            "enc.pgm",
        ],
    );
    assert_ok(&enc);
    assert!(stderr(&enc).contains("warning: tent slope 0.5"));

    assert_ok(&qke(
        root,
        &[
            "decrypt",
            "--in",
            "enc.pgm",
            "--key",
            "key.json",
            "--params",
            "half.json",
            "--out",
            "dec.pgm",
        ],
    ));
    assert_eq!(
        fs::read(root.join("dec.pgm")).unwrap(),
        fs::read(root.join("plain.pgm")).unwrap()
    );
}

#[test]
fn batch_reports_lossless_rows_and_is_seed_stable() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let dataset = root.join("data");
    fs::create_dir(&dataset).unwrap();
    write_image(&dataset.join("a.pgm"), &sample_image(24, 24));
    write_image(&dataset.join("b.pgm"), &sample_image(32, 16));
    write_image(
        &dataset.join("c.pgm"),
        &GrayImage::filled(20, 20, 128).unwrap(),
    );
    write_image(&dataset.join("d.pgm"), &sample_image(256, 256));

    let run = |out: &str, jobs: &str| {
        let output = qke(
            root,
            &[
                "batch",
                "--dataset",
                "data",
                "--seed",
                "9",
                "--jobs",
                jobs,
                "--out",
                out,
            ],
        );
        assert_ok(&output);
        BatchReport::from_json(&fs::read_to_string(root.join(out)).unwrap()).unwrap()
    };

    let sequential = run("r1.json", "1");
    assert_eq!(sequential.rows.len(), 4);
    assert_eq!(sequential.summary.lossless_rows, 4);
    assert_eq!(sequential.summary.eavesdrop_detections, 0);
    for row in &sequential.rows {
        assert!(row.psnr_db.is_infinite());
        assert_eq!(row.ssim, 1.0);
        assert_eq!(row.ncc, 1.0);
        assert_eq!(row.ber, 0.0);
        assert_eq!(row.entropy_decrypted, row.entropy_original);
        assert!(row.key_sensitivity_ssim.abs() < 0.1);
    }
    // The 256x256 input must land near the 8-bit entropy ceiling once
    // encrypted.
    let big = sequential.rows.iter().find(|r| r.width == 256).unwrap();
    assert!(
        big.entropy_encrypted >= 7.98,
        "EE = {}",
        big.entropy_encrypted
    );

    // Parallel run must produce the same rows, timings aside.
    let parallel = run("r2.json", "2");
    for (a, b) in sequential.rows.iter().zip(&parallel.rows) {
        assert_eq!(a.image, b.image);
        assert_eq!(a.psnr_db, b.psnr_db);
        assert_eq!(a.ssim, b.ssim);
        assert_eq!(a.entropy_encrypted, b.entropy_encrypted);
        assert_eq!(a.key_sensitivity_ssim, b.key_sensitivity_ssim);
    }
}

#[test]
fn batch_rejects_empty_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    fs::create_dir(root.join("empty")).unwrap();
    let output = qke(
        root,
        &[
            "batch",
            "--dataset",
            "empty",
            "--seed",
            "1",
            "--out",
            "r.json",
        ],
    );
    assert_eq!(output.status.code(), Some(1));
    assert!(stderr(&output).starts_with("error: dataset:"));
}

#[test]
fn scan_skips_corrupt_files_with_warning() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    write_image(&root.join("b.pgm"), &sample_image(4, 4));
    write_image(&root.join("a.pgm"), &sample_image(4, 4));
    fs::write(root.join("c.pgm"), b"P5\n9 9\n255\nshort").unwrap();
    fs::write(root.join("notes.txt"), b"ignored").unwrap();

    let report = scan_dataset(root).unwrap();
    let names: Vec<PathBuf> = report.records.iter().map(|r| r.path.clone()).collect();
    assert_eq!(names, vec![root.join("a.pgm"), root.join("b.pgm")]);
    assert_eq!(report.warnings.len(), 1);
    assert!(report.warnings[0].contains("c.pgm"));

    assert!(scan_dataset(&root.join("missing")).is_err());
    let empty = tempfile::tempdir().unwrap();
    assert!(scan_dataset(empty.path()).unwrap().records.is_empty());
}

#[test]
fn png_input_is_ingested_to_gray() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    // 2x1 RGB png: pure red and pure green.
    let mut png_bytes = Vec::new();
    {
        use image::ImageEncoder;
        let encoder = image::codecs::png::PngEncoder::new(&mut png_bytes);
        encoder
            .write_image(
                &[255, 0, 0, 0, 255, 0],
                2,
                1,
                image::ExtendedColorType::Rgb8,
            )
            .unwrap();
    }
    fs::write(root.join("in.png"), &png_bytes).unwrap();
    assert_ok(&qke(root, &["keygen", "--seed", "6", "--out", "key.json"]));
    assert_ok(&qke(
        root,
        &[
            "encrypt", "--in", "in.png", "--key", "key.json", "--out", "enc.pgm",
        ],
    ));
    assert_ok(&qke(
        root,
        &[
            "decrypt", "--in", "enc.pgm", "--key", "key.json", "--out", "dec.pgm",
        ],
    ));
    // Decrypted pixels are the BT.601 luma of the png: 76 and 150.
    let decrypted = qke_cli::pgm::read_pgm(&fs::read(root.join("dec.pgm")).unwrap()).unwrap();
    assert_eq!(decrypted.pixels(), &[76, 150]);
}
