use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use qke_cli::commands::{self, BatchOptions, Direction, Failure, Outcome};
use qke_core::qkd::{ChannelConfig, Eavesdropper};

#[derive(Parser)]
#[command(
    name = "qke",
    version,
    about = "Quantum-keyed chaotic image encryption toolkit",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum EavesdropArg {
    None,
    InterceptResend,
}

impl From<EavesdropArg> for Eavesdropper {
    fn from(arg: EavesdropArg) -> Self {
        match arg {
            EavesdropArg::None => Eavesdropper::None,
            EavesdropArg::InterceptResend => Eavesdropper::InterceptResend,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a uniformly random bit key and write it as a key file
    Keygen {
        /// Key length in bits
        #[arg(long, default_value_t = 256)]
        bits: usize,
        /// Seed for a reproducible run (fresh OS entropy otherwise)
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate an entangled-pair key distribution session and write the
    /// resulting key material; exits with status 3 when eavesdropping is
    /// detected
    Qkd {
        /// Number of entangled pairs to simulate
        #[arg(long)]
        pairs: usize,
        /// Channel bit-flip probability on the receiving side
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, value_enum, default_value_t = EavesdropArg::None)]
        eavesdrop: EavesdropArg,
        /// Agreement threshold; strictly below means detection
        #[arg(long, default_value_t = 0.80)]
        threshold: f64,
        /// Fraction of sifted bits sacrificed for the agreement test
        #[arg(long, default_value_t = 0.25)]
        test_fraction: f64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Encrypt an image with the four-layer chaotic keystream
    Encrypt {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        key: PathBuf,
        /// JSON file overriding chaos parameters
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Decrypt an image (the transform is its own inverse)
    Decrypt {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute the evaluation metrics for an original/encrypted/decrypted
    /// triple and write a JSON report
    Analyze {
        #[arg(long)]
        original: PathBuf,
        #[arg(long)]
        encrypted: PathBuf,
        #[arg(long)]
        decrypted: PathBuf,
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        params: Option<PathBuf>,
        /// Key bit flipped for the sensitivity probe
        #[arg(long, default_value_t = 0)]
        flip_index: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the full pipeline over every image in a directory and write a
    /// tabular report
    Batch {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, value_enum, default_value_t = EavesdropArg::None)]
        eavesdrop: EavesdropArg,
        #[arg(long, default_value_t = 0.80)]
        threshold: f64,
        #[arg(long, default_value_t = 0.25)]
        test_fraction: f64,
        /// Key material drawn from each per-image session
        #[arg(long, default_value_t = 256)]
        key_bits: usize,
        /// Pairs per session (derived from --key-bits when omitted)
        #[arg(long)]
        pairs: Option<usize>,
        /// Worker threads; 1 keeps runs fully sequential
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Classical message workflow: combine the stored key with a fresh
    /// quantum key, encrypt the text, decrypt it back, and report the verdict
    DemoMessage {
        #[arg(long)]
        text: String,
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn channel_config(
    noise: f64,
    eavesdrop: EavesdropArg,
    threshold: f64,
    test_fraction: f64,
) -> ChannelConfig {
    ChannelConfig {
        p_noise: noise,
        eavesdropper: eavesdrop.into(),
        detection_threshold: threshold,
        test_fraction,
    }
}

fn run(cli: Cli) -> Result<Outcome, Failure> {
    match cli.command {
        Command::Keygen { bits, seed, out } => {
            commands::cmd_keygen(bits, seed, &out)?;
            Ok(Outcome::Clean)
        }
        Command::Qkd {
            pairs,
            noise,
            eavesdrop,
            threshold,
            test_fraction,
            seed,
            out,
        } => commands::cmd_qkd(
            pairs,
            &channel_config(noise, eavesdrop, threshold, test_fraction),
            seed,
            &out,
        ),
        Command::Encrypt {
            input,
            key,
            params,
            out,
        } => {
            commands::cmd_transform(Direction::Encrypt, &input, &key, params.as_deref(), &out)?;
            Ok(Outcome::Clean)
        }
        Command::Decrypt {
            input,
            key,
            params,
            out,
        } => {
            commands::cmd_transform(Direction::Decrypt, &input, &key, params.as_deref(), &out)?;
            Ok(Outcome::Clean)
        }
        Command::Analyze {
            original,
            encrypted,
            decrypted,
            key,
            params,
            flip_index,
            out,
        } => {
            commands::cmd_analyze(
                &original,
                &encrypted,
                &decrypted,
                &key,
                params.as_deref(),
                flip_index,
                &out,
            )?;
            Ok(Outcome::Clean)
        }
        Command::Batch {
            dataset,
            out,
            seed,
            params,
            noise,
            eavesdrop,
            threshold,
            test_fraction,
            key_bits,
            pairs,
            jobs,
        } => {
            commands::cmd_batch(&BatchOptions {
                dataset,
                out,
                seed,
                params_path: params,
                channel: channel_config(noise, eavesdrop, threshold, test_fraction),
                key_bits,
                pairs,
                jobs,
            })?;
            Ok(Outcome::Clean)
        }
        Command::DemoMessage { text, key, seed } => {
            commands::cmd_demo_message(&text, &key, seed)?;
            Ok(Outcome::Clean)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Clean) => ExitCode::SUCCESS,
        Ok(Outcome::EavesdropDetected) => ExitCode::from(3),
        Err(failure) => {
            eprintln!("error: {failure}");
            ExitCode::from(1)
        }
    }
}
