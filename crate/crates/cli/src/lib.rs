//! `packhe` subcommands. Key handling, encryption and decryption stay on
//! this side; evaluation goes through the service, in-process unless
//! `--server` points elsewhere.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use packhe::cnn::{argmax, pack_image, pack_image_interleaved, EncryptedImage, EncryptedLogits, Packing};
use packhe::fv::{io as fv_io, FvBackend};
use packhe::hemat::{pack_matrix, unpack_matrix, EncMatrixFile, Layout, PlainMatrix};
use packhe::model::random::random_image;
use packhe::model::{load_image, IntegerModel, Shape};
use packhe::slot::{PlainVec, SimBackend, SlotBackend};
use packhe::wire::{BackendKind, CompareRequest, InferRequest, MatMulRequest};
use packhe::{BackendParams, ErrorKind, Profiles};
use packhe_client::{Client, ClientError};
use packhe_service::AppState;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde_json::json;

pub mod args;
pub mod report;

use args::{Cli, Command, RunArgs};

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_CAPACITY: u8 = 3;
pub const EXIT_IO: u8 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Capacity => EXIT_CAPACITY,
        ErrorKind::Invalid => EXIT_USAGE,
        ErrorKind::Io => EXIT_IO,
        ErrorKind::Internal => 1,
    }
}

impl From<packhe::Error> for CliError {
    fn from(e: packhe::Error) -> Self {
        CliError { code: exit_code(e.kind()), message: e.to_string() }
    }
}

impl From<ClientError> for CliError {
    fn from(e: ClientError) -> Self {
        CliError { code: exit_code(e.kind()), message: e.to_string() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError { code: EXIT_IO, message: e.to_string() }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| CliError { code: EXIT_IO, message: format!("{}: {e}", path.display()) })
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| CliError { code: EXIT_IO, message: format!("{}: {e}", path.display()) })
}

fn load_model(path: &Path) -> Result<IntegerModel> {
    let text = String::from_utf8(read(path)?)
        .map_err(|_| CliError { code: EXIT_USAGE, message: format!("{}: not UTF-8", path.display()) })?;
    IntegerModel::from_json(&text).map_err(|e| CliError { code: EXIT_USAGE, message: format!("{}: {e}", path.display()) })
}

/// Resolved run configuration.
struct Run {
    args: RunArgs,
    profiles: Profiles,
    params: BackendParams,
}

impl Run {
    fn new(args: RunArgs) -> Result<Self> {
        let profiles = match &args.profiles {
            Some(path) => Profiles::load(path)?,
            None => Profiles::builtin(),
        };
        let params = profiles.get(&args.profile)?;
        if let Some(s) = args.slots_used {
            if s == 0 || s > params.slot_count {
                return Err(CliError {
                    code: EXIT_USAGE,
                    message: format!("--slots-used must be in 1..={} for profile {}", params.slot_count, params.name),
                });
            }
        }
        Ok(Run { args, profiles, params })
    }

    fn slots_used(&self) -> usize {
        self.args.slots_used.unwrap_or(self.params.slot_count)
    }

    /// The configured service, or a fresh in-process one on a loopback port.
    async fn client(&self) -> Result<Client> {
        if let Some(url) = &self.args.server {
            return Ok(Client::new(url.clone())?);
        }
        let state = AppState::new(self.profiles.clone(), self.args.threads)?;
        let (addr, _) = packhe_service::spawn(([127, 0, 0, 1], 0).into(), state).await?;
        Ok(Client::new(format!("http://{addr}"))?)
    }
}

/// Client-side backend: the simulator, or FV with keys.
enum Local {
    Sim(SimBackend),
    Fv(FvBackend, Vec<u8>),
}

macro_rules! with_local {
    ($local:expr, $b:ident => $body:expr) => {
        match $local {
            Local::Sim($b) => $body,
            Local::Fv($b, _) => $body,
        }
    };
}

impl Local {
    /// FV keys come from `keys` (a keygen directory) or are generated from
    /// the seed for this run only.
    fn new(run: &Run, keys: Option<&Path>, out: &mut dyn Write) -> Result<Self> {
        let params = &run.params;
        match run.args.backend {
            BackendKind::Sim => Ok(Local::Sim(SimBackend::new(params.clone())?)),
            BackendKind::Fv => match keys {
                Some(dir) => {
                    let ctx = FvBackend::context_for(params)?;
                    let eval_bytes = read(&dir.join("eval.key"))?;
                    let eval = fv_io::decode_eval_keys(&eval_bytes, &ctx, params.hash())?;
                    let secret_path = dir.join("secret.key");
                    let secret = if secret_path.exists() {
                        Some(fv_io::decode_secret_key(&read(&secret_path)?, &ctx, params.hash())?)
                    } else {
                        None
                    };
                    Ok(Local::Fv(FvBackend::with_keys(params, ctx, eval, secret, run.args.seed)?, eval_bytes))
                }
                None => {
                    writeln!(out, "no --keys given: generating session keys from seed {}", run.args.seed)?;
                    let (b, keys) = FvBackend::generate(params, run.args.seed, &[])?;
                    let eval = fv_io::encode_eval_keys(&keys.eval, params.hash());
                    Ok(Local::Fv(b, eval))
                }
            },
        }
    }

    fn eval_keys(&self) -> Option<Vec<u8>> {
        match self {
            Local::Sim(_) => None,
            Local::Fv(_, bytes) => Some(bytes.clone()),
        }
    }

    fn can_decrypt(&self) -> bool {
        match self {
            Local::Sim(_) => true,
            Local::Fv(b, _) => b.secret_key().is_some(),
        }
    }
}

fn encrypt_image<B: SlotBackend>(b: &B, tensor: &[i64], shape: Shape, packing: Packing, s: usize) -> Result<EncryptedImage> {
    Ok(match packing {
        Packing::Compact => EncryptedImage::from_packed(b, &pack_image(b, tensor, shape, s)?),
        Packing::Interleaved => EncryptedImage::from_interleaved(b, shape, 0, &pack_image_interleaved(b, tensor)?),
    })
}

pub async fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let run = Run::new(cli.run)?;
    match cli.command {
        Command::Keygen => keygen(&run, out),
        Command::EncryptImage { image, model, input_bits, keys } => {
            encrypt_image_cmd(&run, &image, model.as_deref(), input_bits, keys.as_deref(), out)
        }
        Command::Infer { model, image, keys, no_skip_zero } => {
            infer(&run, &model, &image, keys.as_deref(), !no_skip_zero, out).await
        }
        Command::Compare { model, image, estimate_only } => compare(&run, &model, image.as_deref(), estimate_only, out).await,
        Command::Matmul { dim, a, b, keys } => matmul(&run, dim, a.zip(b), keys.as_deref(), out).await,
        Command::Serve { addr } => serve(&run, addr, out).await,
    }
}

fn keygen(run: &Run, out: &mut dyn Write) -> Result<()> {
    let dir = run.args.out.clone().unwrap_or_else(|| PathBuf::from("keys"));
    fs::create_dir_all(&dir)?;
    let params = &run.params;
    let (backend, keys) = FvBackend::generate(params, run.args.seed, &[])?;
    let secret = fv_io::encode_secret_key(&keys.secret, params.hash());
    let eval = fv_io::encode_eval_keys(&keys.eval, params.hash());
    write(&dir.join("secret.key"), &secret)?;
    write(&dir.join("eval.key"), &eval)?;
    let params_json = serde_json::to_string_pretty(params).expect("parameters serialize");
    write(&dir.join("params.json"), params_json.as_bytes())?;

    let mut rng = ChaCha20Rng::seed_from_u64(run.args.seed ^ 0x5eed);
    let half = params.half_modulus() as i64;
    let probe = PlainVec((0..backend.slot_count()).map(|_| rng.random_range(-half..=half)).collect());
    let round_trip = backend.decrypt(&backend.encrypt(&probe)?)? == probe;
    writeln!(out, "wrote {} (profile {}, {} rotation keys)", dir.display(), params.name, keys.eval.galois.len())?;
    writeln!(out, "  secret.key  {}", report::human_bytes(secret.len() as u64))?;
    writeln!(out, "  eval.key    {}", report::human_bytes(eval.len() as u64))?;
    writeln!(out, "encrypt/decrypt round trip: {}", if round_trip { "ok" } else { "FAILED" })?;
    report::metric(out, "round_trip", json!(round_trip))?;
    if round_trip {
        Ok(())
    } else {
        Err(CliError { code: 1, message: "fresh keys failed an encrypt/decrypt round trip".into() })
    }
}

fn encrypt_image_cmd(
    run: &Run,
    image: &Path,
    model: Option<&Path>,
    input_bits: Option<u32>,
    keys: Option<&Path>,
    out: &mut dyn Write,
) -> Result<()> {
    let bits = match (input_bits, model) {
        (Some(b), _) => b,
        (None, Some(m)) => load_model(m)?.input_bits,
        (None, None) => 8,
    };
    if !(1..=8).contains(&bits) {
        return Err(CliError { code: EXIT_USAGE, message: format!("input bits {bits} must be in 1..=8") });
    }
    let img = load_image(image)?;
    let local = Local::new(run, keys, out)?;
    let tensor = img.quantized(bits);
    let enc = with_local!(&local, b => encrypt_image(b, &tensor, img.shape, run.args.packing, run.slots_used()))?;
    let path = run.args.out.clone().unwrap_or_else(|| PathBuf::from("image.enc"));
    let bytes = enc.to_bytes();
    write(&path, &bytes)?;
    writeln!(
        out,
        "encrypted {} image ({} packing, {} bits) into {} ciphertexts: {} ({})",
        img.shape,
        enc.packing,
        bits,
        enc.ciphertexts.len(),
        path.display(),
        report::human_bytes(bytes.len() as u64)
    )?;
    Ok(report::metric(out, "ciphertexts", json!(enc.ciphertexts.len()))?)
}

async fn infer(
    run: &Run,
    model_path: &Path,
    image: &Path,
    keys: Option<&Path>,
    skip_zero_segments: bool,
    out: &mut dyn Write,
) -> Result<()> {
    let model = load_model(model_path)?;
    let local = Local::new(run, keys, out)?;
    let bytes = read(image)?;
    let enc = if bytes.starts_with(b"PHEI") {
        EncryptedImage::from_bytes(&bytes)?
    } else {
        let img = load_image(image)?;
        let tensor = img.quantized(model.input_bits);
        with_local!(&local, b => encrypt_image(b, &tensor, img.shape, run.args.packing, run.slots_used()))?
    };
    let req = InferRequest {
        profile: run.params.name.clone(),
        backend: run.args.backend,
        packing: enc.packing,
        model,
        image: enc.to_bytes(),
        eval_keys: local.eval_keys(),
        mem_cap: run.args.mem_cap,
        skip_zero_segments,
    };
    let client = run.client().await?;
    let resp = client.infer(&req).await?;
    if let Some(path) = &run.args.out {
        write(path, &resp.logits)?;
        writeln!(out, "encrypted logits written to {}", path.display())?;
    }
    writeln!(out, "profile {}  backend {}  packing {}", run.params.name, run.args.backend, enc.packing)?;
    if local.can_decrypt() {
        let logits = EncryptedLogits::from_bytes(&resp.logits)?;
        let values = with_local!(&local, b => logits.decrypt(b))?;
        let prediction = argmax(&values);
        writeln!(out, "prediction {prediction}")?;
        writeln!(out, "logits {values:?}")?;
        report::metric(out, "prediction", json!(prediction))?;
        report::metric(out, "logits", json!(values))?;
    } else {
        writeln!(out, "no secret key: logits stay encrypted")?;
    }
    report::cost(out, "service cost report", &resp.report, resp.wall_time_ms)?;
    Ok(())
}

async fn compare(run: &Run, model_path: &Path, image: Option<&Path>, estimate_only: bool, out: &mut dyn Write) -> Result<()> {
    let model = load_model(model_path)?;
    let tensor = match image {
        Some(path) => load_image(path)?.quantized(model.input_bits),
        None => random_image(model.input_shape, &mut ChaCha20Rng::seed_from_u64(run.args.seed)).quantized(model.input_bits),
    };
    let req = CompareRequest {
        profile: run.params.name.clone(),
        model,
        image: tensor,
        slots_used: run.args.slots_used,
        mem_cap: run.args.mem_cap,
        estimate_only,
    };
    let resp = run.client().await?.compare(&req).await?;
    if let Some(path) = &run.args.out {
        write(path, serde_json::to_string_pretty(&resp).expect("response serializes").as_bytes())?;
    }
    report::compare(out, &resp, run.args.mem_cap)?;
    Ok(())
}

fn read_matrix(path: &Path) -> Result<PlainMatrix> {
    let rows: Vec<Vec<i64>> = serde_json::from_slice(&read(path)?)
        .map_err(|e| CliError { code: EXIT_USAGE, message: format!("{}: {e}", path.display()) })?;
    Ok(PlainMatrix::from_rows(&rows)?)
}

async fn matmul(
    run: &Run,
    dim: usize,
    files: Option<(PathBuf, PathBuf)>,
    keys: Option<&Path>,
    out: &mut dyn Write,
) -> Result<()> {
    let (a, b) = match files {
        Some((pa, pb)) => (read_matrix(&pa)?, read_matrix(&pb)?),
        None => {
            if dim == 0 {
                return Err(CliError { code: EXIT_USAGE, message: "--dim must be positive".into() });
            }
            let mut rng = ChaCha20Rng::seed_from_u64(run.args.seed);
            let mut random = || PlainMatrix::new(dim, dim, (0..dim * dim).map(|_| rng.random_range(-7..=7)).collect());
            (random()?, random()?)
        }
    };
    let local = Local::new(run, keys, out)?;
    let s = run.slots_used();
    let (ea, eb) = with_local!(&local, be => (
        EncMatrixFile::from_matrix(be, &pack_matrix(be, &a, Layout::Rcp, s)?),
        EncMatrixFile::from_matrix(be, &pack_matrix(be, &b, Layout::Ccp, s)?),
    ));
    let req = MatMulRequest {
        profile: run.params.name.clone(),
        backend: run.args.backend,
        a: ea.to_bytes(),
        b: eb.to_bytes(),
        eval_keys: local.eval_keys(),
    };
    let resp = run.client().await?.matmul(&req).await?;
    if let Some(path) = &run.args.out {
        write(path, &resp.c)?;
    }
    writeln!(out, "{}×{} RCP times {}×{} CCP on {} ({})", a.rows, a.cols, b.rows, b.cols, run.params.name, run.args.backend)?;
    if local.can_decrypt() {
        let file = EncMatrixFile::from_bytes(&resp.c)?;
        let c = with_local!(&local, be => unpack_matrix(be, &file.to_matrix(be)?))?;
        let t = run.params.plain_modulus;
        let expected = a.checked_mul(&b).map(|m| m.centered(t));
        for r in 0..c.rows {
            writeln!(out, "  {:?}", (0..c.cols).map(|j| c.get(r, j)).collect::<Vec<_>>())?;
        }
        let matches = expected.as_ref() == Some(&c);
        writeln!(out, "matches plaintext product: {}", if matches { "yes" } else { "NO" })?;
        report::metric(out, "matches_plaintext", json!(matches))?;
    }
    report::cost(out, "cost report delta", &resp.report, resp.wall_time_ms)?;
    Ok(())
}

async fn serve(run: &Run, addr: std::net::SocketAddr, out: &mut dyn Write) -> Result<()> {
    let state = AppState::new(run.profiles.clone(), run.args.threads)?;
    let (bound, handle) = packhe_service::spawn(addr, state).await?;
    writeln!(out, "listening on http://{bound}")?;
    out.flush()?;
    tokio::select! {
        r = handle => match r {
            Ok(r) => r?,
            Err(e) => return Err(CliError { code: 1, message: e.to_string() }),
        },
        r = tokio::signal::ctrl_c() => r?,
    }
    Ok(())
}
