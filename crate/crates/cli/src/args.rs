use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use packhe::cnn::Packing;
use packhe::wire::BackendKind;

#[derive(Debug, Parser)]
#[command(name = "packhe", version, about = "Compact SIMD packing for encrypted CNN inference and matrix products")]
pub struct Cli {
    #[command(flatten)]
    pub run: RunArgs,

    #[command(subcommand)]
    pub command: Command,
}

/// Knobs shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Parameter profile (mnist, retina, desk, or one from --profiles).
    #[arg(long, global = true, default_value = "desk")]
    pub profile: String,

    /// Extra profile definitions (TOML) replacing the built-in set.
    #[arg(long, global = true, value_name = "FILE")]
    pub profiles: Option<PathBuf>,

    #[arg(long, global = true, default_value = "sim")]
    pub backend: BackendKind,

    #[arg(long, global = true, default_value = "compact")]
    pub packing: Packing,

    /// Slots per ciphertext used by compact packing; defaults to the
    /// profile's slot count.
    #[arg(long, global = true)]
    pub slots_used: Option<usize>,

    /// Evaluation threads; 0 picks one per core.
    #[arg(long, global = true, env = "PACKHE_THREADS", default_value_t = 0)]
    pub threads: usize,

    /// Refuse runs whose estimated ciphertext memory exceeds this
    /// (e.g. 188GB, 512MiB, 1000000).
    #[arg(long, global = true, value_parser = parse_bytes)]
    pub mem_cap: Option<u64>,

    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Output file, or directory for keygen.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Service URL; without it an in-process service is started.
    #[arg(long, global = true, env = "PACKHE_SERVER")]
    pub server: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate FV keys into a directory (secret.key, eval.key, params.json).
    Keygen,
    /// Quantize and encrypt an image.
    EncryptImage {
        /// PGM/PPM or raw tensor file.
        #[arg(long)]
        image: PathBuf,
        /// Model whose input_bits sets the quantization.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Overrides the model's input_bits (default 8 without a model).
        #[arg(long)]
        input_bits: Option<u32>,
        /// Key directory (fv backend).
        #[arg(long)]
        keys: Option<PathBuf>,
    },
    /// Encrypted inference of one image.
    Infer {
        #[arg(long)]
        model: PathBuf,
        /// Plain image (encrypted here) or an encrypt-image output.
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        keys: Option<PathBuf>,
        /// Evaluate all-zero weight segments instead of skipping them.
        #[arg(long)]
        no_skip_zero: bool,
    },
    /// Compact against interleaved packing on the simulator.
    Compare {
        #[arg(long)]
        model: PathBuf,
        /// Plain image; a random one (from --seed) when omitted.
        #[arg(long)]
        image: Option<PathBuf>,
        /// Print planned counters without running either packing.
        #[arg(long)]
        estimate_only: bool,
    },
    /// Encrypted d×d product in RCP × CCP layouts.
    Matmul {
        #[arg(long, default_value_t = 4)]
        dim: usize,
        /// JSON matrices (arrays of rows); random entries in [-7, 7] otherwise.
        #[arg(long, requires = "b")]
        a: Option<PathBuf>,
        #[arg(long, requires = "a")]
        b: Option<PathBuf>,
        #[arg(long)]
        keys: Option<PathBuf>,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
}

/// Byte counts with an optional decimal (KB, MB, GB, TB) or binary
/// (KiB, MiB, GiB, TiB) suffix.
pub fn parse_bytes(text: &str) -> Result<u64, String> {
    let t = text.trim();
    let split = t.find(|c: char| !(c.is_ascii_digit() || c == '.')).unwrap_or(t.len());
    let (num, unit) = t.split_at(split);
    let value: f64 = num.parse().map_err(|_| format!("`{text}` is not a byte count"))?;
    let scale: f64 = match unit.trim().to_ascii_lowercase().as_str() {
        "" | "b" => 1.0,
        "k" | "kb" => 1e3,
        "m" | "mb" => 1e6,
        "g" | "gb" => 1e9,
        "t" | "tb" => 1e12,
        "kib" => 1024.0,
        "mib" => 1024f64.powi(2),
        "gib" => 1024f64.powi(3),
        "tib" => 1024f64.powi(4),
        other => return Err(format!("unknown unit `{other}`")),
    };
    let bytes = (value * scale).round();
    if bytes < 1.0 || bytes >= u64::MAX as f64 {
        return Err(format!("memory cap `{text}` must be positive"));
    }
    Ok(bytes as u64)
}
