//! Request handlers as plain synchronous functions over the core library.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use packhe::cnn::{
    infer, interleaved_infer, pack_image, pack_image_interleaved, packed_count, plan_compact, plan_interleaved,
    unpack_interleaved, unpack_vector, CompiledNetwork, EncryptedImage, EncryptedLogits, EvalOptions, Packing,
};
use packhe::fv::{io as fv_io, FvBackend, FvContext};
use packhe::hemat::{mat_mul, EncMatrixFile};
use packhe::slot::{CostReport, SimBackend, SlotBackend};
use packhe::wire::{
    BackendKind, CompareRequest, CompareResponse, InferRequest, InferResponse, MatMulRequest, MatMulResponse,
    PackingSummary,
};
use packhe::{BackendParams, Error, Profiles, Result};

/// Shared state: profiles and per-profile FV contexts, which are costly
/// to build.
pub struct Engine {
    profiles: Profiles,
    contexts: Mutex<HashMap<String, Arc<FvContext>>>,
}

impl Engine {
    pub fn new(profiles: Profiles) -> Self {
        Engine { profiles, contexts: Mutex::new(HashMap::new()) }
    }

    pub fn profiles(&self) -> &Profiles {
        &self.profiles
    }

    fn context(&self, params: &BackendParams) -> Result<Arc<FvContext>> {
        if let Some(ctx) = self.contexts.lock().expect("context cache").get(&params.name) {
            return Ok(ctx.clone());
        }
        let ctx = FvBackend::context_for(params)?;
        self.contexts.lock().expect("context cache").insert(params.name.clone(), ctx.clone());
        Ok(ctx)
    }

    /// Server-side FV backend: evaluation keys only, no secret.
    fn fv_backend(&self, params: &BackendParams, eval_keys: Option<&[u8]>) -> Result<FvBackend> {
        let bytes = eval_keys.ok_or_else(|| Error::InvalidParams("the fv backend needs evaluation keys".into()))?;
        let ctx = self.context(params)?;
        let keys = fv_io::decode_eval_keys(bytes, &ctx, params.hash())?;
        FvBackend::with_keys(params, ctx, keys, None, rand::random())
    }

    pub fn infer(&self, req: &InferRequest) -> Result<InferResponse> {
        let params = self.profiles.get(&req.profile)?;
        match req.backend {
            BackendKind::Sim => infer_with(&SimBackend::new(params)?, req),
            BackendKind::Fv => infer_with(&self.fv_backend(&params, req.eval_keys.as_deref())?, req),
        }
    }

    pub fn matmul(&self, req: &MatMulRequest) -> Result<MatMulResponse> {
        let params = self.profiles.get(&req.profile)?;
        match req.backend {
            BackendKind::Sim => matmul_with(&SimBackend::new(params)?, req),
            BackendKind::Fv => matmul_with(&self.fv_backend(&params, req.eval_keys.as_deref())?, req),
        }
    }

    pub fn compare(&self, req: &CompareRequest) -> Result<CompareResponse> {
        let params = self.profiles.get(&req.profile)?;
        compare(&params, req)
    }
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

fn check_cap(planned: &CostReport, cap: Option<u64>) -> Result<()> {
    match cap {
        Some(cap) if planned.estimated_ciphertext_bytes > cap => {
            Err(Error::CapacityRefused { estimate_bytes: planned.estimated_ciphertext_bytes, cap_bytes: cap })
        }
        _ => Ok(()),
    }
}

fn infer_with<B: SlotBackend>(backend: &B, req: &InferRequest) -> Result<InferResponse> {
    let image = EncryptedImage::from_bytes(&req.image)?;
    if image.packing != req.packing {
        return Err(Error::Layout(format!("image is packed {}, request asks for {}", image.packing, req.packing)));
    }
    let start = Instant::now();
    let logits = match req.packing {
        Packing::Compact => {
            let opts = EvalOptions { skip_zero_segments: req.skip_zero_segments };
            let net = CompiledNetwork::new(&req.model, image.slots_used)?;
            if req.mem_cap.is_some() {
                check_cap(&plan_compact(&req.model, backend.params(), image.slots_used, opts)?, req.mem_cap)?;
            }
            let x = image.to_packed(backend)?;
            EncryptedLogits::from_packed(backend, &infer(backend, &net, &x, opts)?)
        }
        Packing::Interleaved => {
            let x = image.decode_ciphertexts(backend)?;
            EncryptedLogits::from_interleaved(backend, &interleaved_infer(backend, &req.model, &x, req.mem_cap)?)
        }
    };
    Ok(InferResponse { logits: logits.to_bytes(), report: backend.cost_report(), wall_time_ms: elapsed_ms(start) })
}

fn matmul_with<B: SlotBackend>(backend: &B, req: &MatMulRequest) -> Result<MatMulResponse> {
    let a = EncMatrixFile::from_bytes(&req.a)?.to_matrix(backend)?;
    let b = EncMatrixFile::from_bytes(&req.b)?.to_matrix(backend)?;
    let start = Instant::now();
    let c = mat_mul(backend, &a, &b)?;
    let wall_time_ms = elapsed_ms(start);
    Ok(MatMulResponse {
        c: EncMatrixFile::from_matrix(backend, &c).to_bytes(),
        report: backend.cost_report(),
        wall_time_ms,
    })
}

fn planned(input_ciphertexts: usize, report: CostReport, refused: Option<String>) -> PackingSummary {
    PackingSummary {
        input_ciphertexts: input_ciphertexts as u64,
        report,
        measured: false,
        wall_time_ms: None,
        logits: None,
        refused,
    }
}

/// Both packings on the simulator, or their plans when `estimate_only`
/// is set or the memory cap refuses a run.
pub fn compare(params: &BackendParams, req: &CompareRequest) -> Result<CompareResponse> {
    let model = &req.model;
    model.validate()?;
    let shape = model.input_shape;
    if req.image.len() != shape.len() {
        return Err(Error::Dimension(format!("{} pixels for a {shape} model input", req.image.len())));
    }
    let s = req.slots_used.unwrap_or(params.slot_count);
    let opts = EvalOptions::default();
    let compact_plan = plan_compact(model, params, s, opts)?;
    let interleaved_plan = plan_interleaved(model, params)?;

    let refusal = |plan: &CostReport| check_cap(plan, req.mem_cap).err().map(|e| e.to_string());
    let compact = match refusal(&compact_plan) {
        None if !req.estimate_only => {
            let backend = SimBackend::new(params.clone())?;
            let net = CompiledNetwork::new(model, s)?;
            let start = Instant::now();
            let x = pack_image(&backend, &req.image, shape, s)?;
            let y = infer(&backend, &net, &x, opts)?;
            let wall = elapsed_ms(start);
            PackingSummary {
                input_ciphertexts: x.ciphertext_count() as u64,
                report: backend.cost_report(),
                measured: true,
                wall_time_ms: Some(wall),
                logits: Some(unpack_vector(&backend, &y)?),
                refused: None,
            }
        }
        refused => planned(packed_count(shape.len(), s), compact_plan, refused),
    };
    let interleaved = match refusal(&interleaved_plan) {
        None if !req.estimate_only => {
            let backend = SimBackend::new(params.clone())?;
            let start = Instant::now();
            let x = pack_image_interleaved(&backend, &req.image)?;
            let y = interleaved_infer(&backend, model, &x, None)?;
            let wall = elapsed_ms(start);
            PackingSummary {
                input_ciphertexts: x.len() as u64,
                report: backend.cost_report(),
                measured: true,
                wall_time_ms: Some(wall),
                logits: Some(unpack_interleaved(&backend, &y)?),
                refused: None,
            }
        }
        refused => planned(shape.len(), interleaved_plan, refused),
    };
    let ratios = ratios(&compact, &interleaved);
    Ok(CompareResponse { profile: params.name.clone(), slots_used: s, compact, interleaved, ratios })
}

/// Interleaved over compact for every metric with a nonzero compact value.
pub fn ratios(compact: &PackingSummary, interleaved: &PackingSummary) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    let mut put = |name: &str, i: f64, c: f64| {
        if c > 0.0 {
            out.insert(name.to_string(), i / c);
        }
    };
    put("input_ciphertexts", interleaved.input_ciphertexts as f64, compact.input_ciphertexts as f64);
    for ((name, i), (_, c)) in interleaved.report.metrics().into_iter().zip(compact.report.metrics()) {
        put(name, i as f64, c as f64);
    }
    if let (Some(i), Some(c)) = (interleaved.wall_time_ms, compact.wall_time_ms) {
        put("wall_time", i, c);
    }
    out
}
