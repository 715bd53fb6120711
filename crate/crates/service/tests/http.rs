use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use packhe::cnn::{pack_image, pack_image_interleaved, EncryptedImage, EncryptedLogits, Packing};
use packhe::fv::{io as fv_io, FvBackend};
use packhe::hemat::{pack_matrix, unpack_matrix, EncMatrixFile, Layout, PlainMatrix};
use packhe::model::random::{certified_network, random_image, SparseNetOptions};
use packhe::model::{plaintext_infer_int, IntegerModel, Shape};
use packhe::slot::SimBackend;
use packhe::wire::{
    BackendKind, CompareRequest, CompareResponse, ErrorBody, InferRequest, InferResponse, MatMulRequest,
    MatMulResponse,
};
use packhe::{profile, BackendParams, ErrorKind, Profiles};
use packhe_service::{router, AppState};
use rand::rngs::StdRng;
use rand::SeedableRng;
use serde::de::DeserializeOwned;
use serde::Serialize;
use std::sync::Arc;
use tower::ServiceExt;

fn app() -> axum::Router {
    router(Arc::new(AppState::new(Profiles::builtin(), 2).unwrap()))
}

async fn call<T: DeserializeOwned>(app: axum::Router, method: &str, uri: &str, body: Option<Vec<u8>>) -> (StatusCode, T) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map(Body::from).unwrap_or_else(Body::empty))
        .unwrap();
    let resp = app.oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&bytes))))
}

async fn post<Q: Serialize, T: DeserializeOwned>(uri: &str, req: &Q) -> (StatusCode, T) {
    call(app(), "POST", uri, Some(serde_json::to_vec(req).unwrap())).await
}

/// conv 2×2/2 → square on a 4×4 input: three levels, within the FV budget.
fn shallow_model() -> IntegerModel {
    IntegerModel::from_json(
        r#"{"input_shape":[1,4,4],"input_bits":2,"layers":[
            {"type":"conv","filters":2,"kernel":[2,2],"stride":[2,2],"scale_bits":0,
             "weights":[1,-2,0,3,2,1,-1,0],"biases":[1,-1]},
            {"type":"square"}]}"#,
    )
    .unwrap()
}

fn desk() -> BackendParams {
    profile("desk").unwrap()
}

#[tokio::test]
async fn health_and_profiles() {
    let (status, text): (_, String) = call(app(), "GET", "/health", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(text, "ok");
    let (status, list): (_, Vec<BackendParams>) = call(app(), "GET", "/v1/profiles", None).await;
    assert_eq!(status, StatusCode::OK);
    let names: Vec<_> = list.iter().map(|p| p.name.as_str()).collect();
    assert_eq!(names, ["desk", "mnist", "retina"]);
}

#[tokio::test]
async fn sim_inference_in_both_packings_matches_the_oracle() {
    let params = desk();
    let mut rng = StdRng::seed_from_u64(5);
    let model = certified_network(Shape::new(1, 28, 28), 10, SparseNetOptions::small_modulus(), params.plain_modulus, &mut rng)
        .unwrap();
    let image = random_image(Shape::new(1, 28, 28), &mut rng).quantized(model.input_bits);
    let want = plaintext_infer_int(&model, &image).unwrap();
    let client = SimBackend::new(params.clone()).unwrap();

    let compact = EncryptedImage::from_packed(&client, &pack_image(&client, &image, model.input_shape, 2048).unwrap());
    let px = pack_image_interleaved(&client, &image).unwrap();
    let interleaved = EncryptedImage::from_interleaved(&client, model.input_shape, 0, &px);
    let mut counts = Vec::new();
    for (packing, img) in [(Packing::Compact, compact), (Packing::Interleaved, interleaved)] {
        let req = InferRequest {
            profile: "desk".into(),
            backend: BackendKind::Sim,
            packing,
            model: model.clone(),
            image: img.to_bytes(),
            eval_keys: None,
            mem_cap: None,
            skip_zero_segments: true,
        };
        let (status, resp): (_, InferResponse) = post("/v1/infer", &req).await;
        assert_eq!(status, StatusCode::OK);
        let logits = EncryptedLogits::from_bytes(&resp.logits).unwrap();
        assert_eq!(logits.decrypt(&client).unwrap(), want, "{packing}");
        counts.push(resp.report.cmult_count);
    }
    assert!(counts[0] < counts[1]);
}

#[tokio::test]
async fn fv_inference_with_uploaded_evaluation_keys() {
    let params = desk();
    let model = shallow_model();
    let image: Vec<i64> = (0..16).map(|i| (i * 7 % 4) as i64).collect();
    let (client, keys) = FvBackend::generate(&params, 11, &[]).unwrap();
    let x = pack_image(&client, &image, model.input_shape, 16).unwrap();
    let req = InferRequest {
        profile: "desk".into(),
        backend: BackendKind::Fv,
        packing: Packing::Compact,
        model: model.clone(),
        image: EncryptedImage::from_packed(&client, &x).to_bytes(),
        eval_keys: Some(fv_io::encode_eval_keys(&keys.eval, params.hash())),
        mem_cap: None,
        skip_zero_segments: true,
    };
    let (status, resp): (_, InferResponse) = post("/v1/infer", &req).await;
    assert_eq!(status, StatusCode::OK);
    let logits = EncryptedLogits::from_bytes(&resp.logits).unwrap().decrypt(&client).unwrap();
    assert_eq!(logits, plaintext_infer_int(&model, &image).unwrap());
    assert_eq!(resp.report.max_level_used, 3);

    let (status, err): (_, ErrorBody) = post("/v1/infer", &InferRequest { eval_keys: None, ..req }).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err.kind, ErrorKind::Invalid);
}

#[tokio::test]
async fn refusals_and_malformed_bodies_map_to_error_kinds() {
    let model = shallow_model();
    let client = SimBackend::new(desk()).unwrap();
    let px = pack_image_interleaved(&client, &[1; 16]).unwrap();
    let req = InferRequest {
        profile: "desk".into(),
        backend: BackendKind::Sim,
        packing: Packing::Interleaved,
        model,
        image: EncryptedImage::from_interleaved(&client, Shape::new(1, 4, 4), 0, &px).to_bytes(),
        eval_keys: None,
        mem_cap: Some(1),
        skip_zero_segments: true,
    };
    let (status, err): (_, ErrorBody) = post("/v1/infer", &req).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err.kind, ErrorKind::Capacity);

    let (status, err): (_, ErrorBody) = post("/v1/infer", &InferRequest { packing: Packing::Compact, ..req.clone() }).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(err.message.contains("packed"));

    let (status, err): (_, ErrorBody) =
        post("/v1/infer", &InferRequest { profile: "nope".into(), ..req }).await;
    assert_eq!((status, err.kind), (StatusCode::BAD_REQUEST, ErrorKind::Invalid));

    let (status, err): (_, ErrorBody) = call(app(), "POST", "/v1/infer", Some(b"{not json".to_vec())).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err.kind, ErrorKind::Invalid);
}

#[tokio::test]
async fn compare_reports_runs_and_plans() {
    let model = shallow_model();
    let image = vec![1, 2, 3, 0, 1, 1, 2, 3, 0, 0, 1, 2, 3, 3, 2, 1];
    let req = CompareRequest {
        profile: "desk".into(),
        model: model.clone(),
        image: image.clone(),
        slots_used: Some(16),
        mem_cap: None,
        estimate_only: false,
    };
    let (status, resp): (_, CompareResponse) = post("/v1/compare", &req).await;
    assert_eq!(status, StatusCode::OK);
    let want = plaintext_infer_int(&model, &image).unwrap();
    assert_eq!(resp.compact.logits.as_ref(), Some(&want));
    assert_eq!(resp.interleaved.logits.as_ref(), Some(&want));
    assert_eq!(resp.ratios["input_ciphertexts"], 16.0);
    assert!(resp.compact.measured && resp.interleaved.measured);

    let (_, planned): (_, CompareResponse) = post("/v1/compare", &CompareRequest { estimate_only: true, ..req.clone() }).await;
    assert!(!planned.compact.measured);
    // planner and instrumentation agree exactly
    assert_eq!(planned.compact.report, resp.compact.report);
    assert_eq!(planned.interleaved.report, resp.interleaved.report);

    let cap = resp.compact.report.estimated_ciphertext_bytes;
    let (_, capped): (_, CompareResponse) = post("/v1/compare", &CompareRequest { mem_cap: Some(cap), ..req }).await;
    assert!(capped.compact.measured);
    assert!(capped.interleaved.refused.is_some());
    assert_eq!(capped.interleaved.report, resp.interleaved.report);
}

#[tokio::test]
async fn matmul_on_the_simulator() {
    let client = SimBackend::new(desk()).unwrap();
    let a = PlainMatrix::from_rows(&[vec![1, 2, 0, -1], vec![3, 0, 1, 1], vec![0, -2, 2, 0], vec![1, 1, 1, 1]]).unwrap();
    let b = a.transpose();
    let ea = EncMatrixFile::from_matrix(&client, &pack_matrix(&client, &a, Layout::Rcp, 16).unwrap());
    let eb = EncMatrixFile::from_matrix(&client, &pack_matrix(&client, &b, Layout::Ccp, 16).unwrap());
    let req = MatMulRequest {
        profile: "desk".into(),
        backend: BackendKind::Sim,
        a: ea.to_bytes(),
        b: eb.to_bytes(),
        eval_keys: None,
    };
    let (status, resp): (_, MatMulResponse) = post("/v1/matmul", &req).await;
    assert_eq!(status, StatusCode::OK);
    let c = EncMatrixFile::from_bytes(&resp.c).unwrap().to_matrix(&client).unwrap();
    assert_eq!(unpack_matrix(&client, &c).unwrap(), a.checked_mul(&b).unwrap());
    assert_eq!(resp.report.mult_count, 4);
    assert_eq!(resp.report.max_level_used, 2);
}
