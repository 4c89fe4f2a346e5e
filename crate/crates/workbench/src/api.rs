use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{FromRequest, Path, Query, Request, State};
use axum::http::{HeaderMap, HeaderName, HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use bioinvert_core::corpus::{ReviewBatch, Verdict};
use bioinvert_core::decision::{g1_weights, matrix_to_csv, ClusterReport, G1Judgment, ManualScores, RankingRun};
use bioinvert_core::inversion::{EngineeringKB, ScreenVerdict};
use bioinvert_core::knowledge::{
    parse_document, parse_frame, validate_frame, DesignProblem, Dimension, EnvironmentDesc,
    ValidationReport, Violation,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::WorkbenchError;
use crate::jobs::Jobs;
use crate::project::{BackendKind, EventKind, Project, SampleParams, Stage, StageParams, StageState, SCHEMA_VERSION};
use crate::store::{export_text, Outcome, Workbench};

pub const VERSION_HEADER: HeaderName = HeaderName::from_static("x-fbce-version");
/// Event-log head a mutating request was based on; echoed on responses.
pub const HEAD_HEADER: HeaderName = HeaderName::from_static("x-fbce-head");

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    wb: Workbench,
    jobs: Jobs,
    writers: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl AppState {
    pub fn new(wb: Workbench) -> Self {
        AppState {
            inner: Arc::new(Inner {
                wb,
                jobs: Jobs::default(),
                writers: Mutex::new(HashMap::new()),
            }),
        }
    }

    pub fn workbench(&self) -> &Workbench {
        &self.inner.wb
    }

    fn writer(&self, id: &str) -> Arc<Mutex<()>> {
        self.inner
            .writers
            .lock()
            .expect("writer table")
            .entry(id.to_string())
            .or_default()
            .clone()
    }

    /// Commits one event off the async runtime, serialized per project.
    async fn commit(&self, id: String, kind: EventKind, head: Option<u64>) -> Result<Outcome, ApiError> {
        let state = self.clone();
        blocking(move || {
            let writer = state.writer(&id);
            let _guard = writer.lock().unwrap_or_else(|p| p.into_inner());
            state.inner.wb.execute(&id, kind, head, None)
        })
        .await
    }

    async fn read<T: Send + 'static>(
        &self,
        id: String,
        f: impl FnOnce(Project) -> Result<T, WorkbenchError> + Send + 'static,
    ) -> Result<(u64, T), ApiError> {
        let state = self.clone();
        blocking(move || {
            let p = state.inner.wb.open(&id)?.load()?;
            let head = p.head;
            f(p).map(|v| (head, v))
        })
        .await
    }
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, WorkbenchError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| WorkbenchError::Io(format!("worker failed: {e}")))?
        .map_err(ApiError)
}

pub fn router(state: AppState) -> Router {
    let projects = Router::new()
        .route("/", get(list_projects).post(create_project))
        .route("/{id}", get(get_project).delete(delete_project))
        .route("/{id}/kb", put(put_kb))
        .route("/{id}/problem", put(put_problem))
        .route("/{id}/stages/{stage}/run", post(run_stage))
        .route("/{id}/samples", post(post_samples))
        .route("/{id}/review/batches", get(list_batches))
        .route("/{id}/review/batches/{batch}", get(get_batch))
        .route("/{id}/review/batches/{batch}/verdicts", post(post_verdicts))
        .route("/{id}/review/step", post(review_step))
        .route("/{id}/frames", get(list_frames))
        .route("/{id}/frames/{frame}", get(get_frame).put(put_frame))
        .route("/{id}/inversion", get(get_inversion).post(post_inversion))
        .route("/{id}/inversion/{frame}/waiver", post(post_waiver))
        .route("/{id}/screening", get(get_screening))
        .route("/{id}/screening/verdicts", post(post_screen_verdicts))
        .route("/{id}/decision/g1-judgment", post(post_judgment))
        .route("/{id}/decision/manual-scores", put(put_manual_scores))
        .route("/{id}/decision/run", post(run_decision))
        .route("/{id}/decision/result", get(get_decision))
        .route("/{id}/decision/matrix", get(get_matrix))
        .route("/{id}/clusters/run", post(run_clusters))
        .route("/{id}/clusters", get(get_clusters))
        .route("/{id}/export", get(export))
        .route("/{id}/events", get(events));
    let api = Router::new()
        .nest("/projects", projects)
        .route("/decision/g1-weights", post(preview_weights))
        .route("/frames/validate", post(validate))
        .route("/jobs/{job}", get(get_job).delete(cancel_job));
    Router::new()
        .nest("/api", api)
        .fallback(|| async { ApiError(WorkbenchError::NotFound("no such endpoint".into())) })
        .layer(middleware::from_fn(envelope))
        .with_state(state)
}

/// Runs the service until the process is stopped.
pub async fn serve(state: AppState, bind: &str, port: u16) -> Result<(), WorkbenchError> {
    let listener = tokio::net::TcpListener::bind((bind, port))
        .await
        .map_err(|e| WorkbenchError::Bind(format!("{bind}:{port}: {e}")))?;
    let addr = listener.local_addr().map_err(|e| WorkbenchError::Bind(e.to_string()))?;
    tracing::info!(%addr, root = %state.workbench().root().display(), "serving");
    axum::serve(listener, router(state))
        .await
        .map_err(|e| WorkbenchError::Io(e.to_string()))
}

// ---- errors ----

#[derive(Debug)]
pub struct ApiError(pub WorkbenchError);

impl From<WorkbenchError> for ApiError {
    fn from(e: WorkbenchError) -> Self {
        ApiError(e)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Envelope {
    pub code: String,
    pub message: String,
    pub path: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<Violation>,
}

/// Error details carried from a handler to the envelope middleware, which
/// knows the request path.
#[derive(Clone)]
struct Pending(Envelope);

pub fn status_of(e: &WorkbenchError) -> StatusCode {
    use bioinvert_core::corpus::CorpusError;
    use bioinvert_core::inversion::InversionError;
    match e {
        WorkbenchError::ProjectNotFound(_) | WorkbenchError::NotFound(_) => StatusCode::NOT_FOUND,
        WorkbenchError::StageOrder { .. }
        | WorkbenchError::Conflict { .. }
        | WorkbenchError::Locked(_)
        | WorkbenchError::ProjectExists(_)
        | WorkbenchError::Cancelled => StatusCode::CONFLICT,
        WorkbenchError::Schema { .. }
        | WorkbenchError::VersionMismatch(_)
        | WorkbenchError::BadRequest(_)
        | WorkbenchError::BadProjectId(_) => StatusCode::BAD_REQUEST,
        WorkbenchError::Llm(_)
        | WorkbenchError::Inversion {
            source: InversionError::Llm(_),
            ..
        }
        | WorkbenchError::Corpus {
            source: CorpusError::ClassifierUnavailable(_) | CorpusError::ParaphraseFailed(_),
            ..
        } => StatusCode::BAD_GATEWAY,
        WorkbenchError::Io(_) | WorkbenchError::Bind(_) => StatusCode::INTERNAL_SERVER_ERROR,
        WorkbenchError::Validation(_)
        | WorkbenchError::MissingInput(_)
        | WorkbenchError::Corpus { .. }
        | WorkbenchError::Inversion { .. }
        | WorkbenchError::Decision { .. } => StatusCode::UNPROCESSABLE_ENTITY,
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let e = self.0;
        let violations = match &e {
            WorkbenchError::Validation(r) => r.violations.clone(),
            _ => Vec::new(),
        };
        let envelope = Envelope {
            code: e.code().to_string(),
            message: e.to_string(),
            path: e.pointer().unwrap_or_default(),
            violations,
        };
        let mut res = (status_of(&e), Json(&envelope)).into_response();
        res.extensions_mut().insert(Pending(envelope));
        res
    }
}

/// Version check on the way in; version header and error paths on the way out.
async fn envelope(req: Request, next: Next) -> Response {
    let path = req.uri().path().to_string();
    let version = req.headers().get(&VERSION_HEADER).map(|v| v.to_str().unwrap_or("?").to_string());
    let mut res = match version {
        Some(v) if v.trim() != SCHEMA_VERSION.to_string() => ApiError(WorkbenchError::VersionMismatch(format!(
            "request has {VERSION_HEADER}: {v}, this server speaks {SCHEMA_VERSION}"
        )))
        .into_response(),
        _ => next.run(req).await,
    };
    if let Some(Pending(mut env)) = res.extensions_mut().remove::<Pending>() {
        if env.path.is_empty() {
            env.path = path;
        }
        let status = res.status();
        res = (status, Json(env)).into_response();
    }
    res.headers_mut().insert(VERSION_HEADER, HeaderValue::from(SCHEMA_VERSION));
    res
}

/// JSON body parsed with JSON-pointer error paths. An empty body reads as `{}`.
pub struct Body<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequest<S> for Body<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        let bytes = Bytes::from_request(req, state)
            .await
            .map_err(|e| WorkbenchError::BadRequest(e.body_text()))?;
        let text = std::str::from_utf8(&bytes).map_err(|e| WorkbenchError::BadRequest(e.to_string()))?;
        let text = if text.trim().is_empty() { "{}" } else { text };
        Ok(Body(parse_document(text).map_err(WorkbenchError::from)?))
    }
}

fn expected_head(headers: &HeaderMap) -> Result<Option<u64>, ApiError> {
    match headers.get(&HEAD_HEADER) {
        None => Ok(None),
        Some(v) => v
            .to_str()
            .ok()
            .and_then(|s| s.trim().parse().ok())
            .map(Some)
            .ok_or_else(|| ApiError(WorkbenchError::BadRequest(format!("{HEAD_HEADER} must be an event sequence number")))),
    }
}

fn with_head(head: u64, body: impl IntoResponse) -> Response {
    let mut res = body.into_response();
    res.headers_mut().insert(HEAD_HEADER, HeaderValue::from(head));
    res
}

type ApiResult = Result<Response, ApiError>;

async fn mutate(state: &AppState, id: String, headers: &HeaderMap, kind: EventKind) -> ApiResult {
    let head = expected_head(headers)?;
    let outcome = state.commit(id, kind, head).await?;
    Ok(with_head(outcome.head, Json(outcome)))
}

// ---- projects ----

async fn list_projects(State(state): State<AppState>) -> ApiResult {
    let st = state.clone();
    let list = blocking(move || st.inner.wb.list()).await?;
    Ok(Json(list).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NewProject {
    id: String,
    #[serde(default)]
    name: Option<String>,
}

async fn create_project(State(state): State<AppState>, Body(req): Body<NewProject>) -> ApiResult {
    let st = state.clone();
    let outcome = blocking(move || {
        let writer = st.writer(&req.id);
        let _g = writer.lock().unwrap_or_else(|p| p.into_inner());
        let name = req.name.unwrap_or_else(|| req.id.clone());
        st.inner.wb.create(&req.id, &name)
    })
    .await?;
    Ok(with_head(outcome.head, (StatusCode::CREATED, Json(outcome))))
}

async fn get_project(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let (head, p) = state.read(id, Ok).await?;
    Ok(with_head(head, Json(p)))
}

async fn delete_project(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let st = state.clone();
    blocking(move || {
        let writer = st.writer(&id);
        let _g = writer.lock().unwrap_or_else(|p| p.into_inner());
        st.inner.wb.delete(&id)
    })
    .await?;
    Ok(StatusCode::NO_CONTENT.into_response())
}

async fn put_kb(
    State(state): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: String,
) -> ApiResult {
    let kb = EngineeringKB::from_json(&body).map_err(|source| WorkbenchError::Inversion {
        stage: Stage::Inverted,
        source,
    })?;
    mutate(&state, id, &headers, EventKind::KbSet { kb }).await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemBody {
    problem: DesignProblem,
    #[serde(default)]
    target_env: Option<EnvironmentDesc>,
}

async fn put_problem(
    State(state): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    Body(b): Body<ProblemBody>,
) -> ApiResult {
    mutate(
        &state,
        id,
        &headers,
        EventKind::ProblemSet {
            problem: b.problem,
            target_env: b.target_env,
        },
    )
    .await
}

// ---- stages ----

#[derive(Deserialize, Default)]
struct RunQuery {
    #[serde(default, rename = "async")]
    background: bool,
}

async fn run_stage(
    State(state): State<AppState>,
    Path((id, stage)): Path<(String, String)>,
    Query(q): Query<RunQuery>,
    headers: HeaderMap,
    Body(params): Body<StageParams>,
) -> ApiResult {
    let stage: Stage = stage.parse().map_err(WorkbenchError::NotFound)?;
    start_stage(&state, id, stage, params, q.background, &headers).await
}

async fn start_stage(
    state: &AppState,
    id: String,
    stage: Stage,
    params: StageParams,
    background: bool,
    headers: &HeaderMap,
) -> ApiResult {
    let kind = EventKind::StageRun { stage, params };
    if !background {
        return mutate(state, id, headers, kind).await;
    }
    let head = expected_head(headers)?;
    state.inner.wb.open(&id)?;
    let (job, cancel) = state.inner.jobs.start(&id, stage);
    let st = state.clone();
    let job_id = job.clone();
    tokio::task::spawn_blocking(move || {
        let writer = st.writer(&id);
        let result = {
            let _g = writer.lock().unwrap_or_else(|p| p.into_inner());
            st.inner.wb.execute(&id, kind, head, Some(&cancel))
        };
        st.inner.jobs.finish(&job_id, result);
    });
    Ok((StatusCode::ACCEPTED, Json(json!({ "job_id": job }))).into_response())
}

async fn get_job(State(state): State<AppState>, Path(job): Path<String>) -> ApiResult {
    let s = state
        .inner
        .jobs
        .status(&job)
        .ok_or_else(|| WorkbenchError::NotFound(format!("job {job}")))?;
    Ok(Json(s).into_response())
}

async fn cancel_job(State(state): State<AppState>, Path(job): Path<String>) -> ApiResult {
    let s = state
        .inner
        .jobs
        .cancel(&job)
        .ok_or_else(|| WorkbenchError::NotFound(format!("job {job}")))?;
    Ok((StatusCode::ACCEPTED, Json(s)).into_response())
}

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct SamplesBody {
    seed: Option<u64>,
    target_size: Option<usize>,
    ratio_real: Option<f64>,
    backend: Option<BackendKind>,
}

async fn post_samples(
    State(state): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    Body(b): Body<SamplesBody>,
) -> ApiResult {
    let d = &state.inner.wb.engine().config().defaults;
    let params = SampleParams {
        seed: b.seed.unwrap_or(d.seed),
        target_size: b.target_size.unwrap_or(d.target_size),
        ratio_real: b.ratio_real.unwrap_or(d.ratio_real),
        backend: b.backend.unwrap_or(d.backend),
    };
    mutate(&state, id, &headers, EventKind::SamplesGenerated { params }).await
}

// ---- review ----

#[derive(Serialize)]
struct BatchView<'a> {
    state: Option<StageState>,
    #[serde(flatten)]
    batch: &'a ReviewBatch,
}

async fn list_batches(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let (head, v) = state
        .read(id, |p| {
            let st = p.state(Stage::Reviewed);
            Ok(json!(p
                .batches
                .iter()
                .map(|batch| BatchView { state: st, batch })
                .collect::<Vec<_>>()))
        })
        .await?;
    Ok(with_head(head, Json(v)))
}

fn find_batch(p: &Project, batch: u32) -> Result<Value, WorkbenchError> {
    let b = p
        .batches
        .iter()
        .find(|b| b.batch_no == batch)
        .ok_or_else(|| WorkbenchError::NotFound(format!("review batch {batch}")))?;
    Ok(json!(BatchView {
        state: p.state(Stage::Reviewed),
        batch: b,
    }))
}

async fn get_batch(State(state): State<AppState>, Path((id, batch)): Path<(String, u32)>) -> ApiResult {
    let (head, v) = state.read(id, move |p| find_batch(&p, batch)).await?;
    Ok(with_head(head, Json(v)))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct VerdictsBody {
    verdicts: BTreeMap<String, Verdict>,
}

async fn post_verdicts(
    State(state): State<AppState>,
    Path((id, batch)): Path<(String, u32)>,
    headers: HeaderMap,
    Body(b): Body<VerdictsBody>,
) -> ApiResult {
    let head = expected_head(&headers)?;
    let kind = EventKind::VerdictsRecorded {
        batch_no: batch,
        verdicts: b.verdicts,
    };
    let outcome = state.commit(id.clone(), kind, head).await?;
    let (_, v) = state.read(id, move |p| find_batch(&p, batch)).await?;
    Ok(with_head(outcome.head, Json(v)))
}

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct StepBody {
    seed: Option<u64>,
    labels: BTreeMap<String, Vec<Dimension>>,
}

async fn review_step(
    State(state): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    Body(b): Body<StepBody>,
) -> ApiResult {
    let seed = b.seed.unwrap_or(state.inner.wb.engine().config().defaults.seed);
    mutate(&state, id, &headers, EventKind::ReviewStepped { seed, labels: b.labels }).await
}

// ---- frames ----

async fn list_frames(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let (head, v) = state.read(id, |p| Ok(p.frames)).await?;
    Ok(with_head(head, Json(v)))
}

async fn get_frame(State(state): State<AppState>, Path((id, frame)): Path<(String, String)>) -> ApiResult {
    let (head, v) = state
        .read(id, move |p| {
            p.frame(&frame)
                .cloned()
                .ok_or_else(|| WorkbenchError::NotFound(format!("frame {frame}")))
        })
        .await?;
    Ok(with_head(head, Json(v)))
}

/// Accepts the frame document form (with `fbce_version`).
async fn put_frame(
    State(state): State<AppState>,
    Path((id, frame_id)): Path<(String, String)>,
    headers: HeaderMap,
    body: String,
) -> ApiResult {
    let frame = parse_frame(&body).map_err(WorkbenchError::from)?;
    if frame.id.as_str() != frame_id {
        return Err(WorkbenchError::schema("/id", format!("body id {:?} does not match the URL", frame.id.as_str())).into());
    }
    mutate(&state, id, &headers, EventKind::FrameEdited { frame }).await
}

async fn validate(body: String) -> ApiResult {
    let frame = parse_frame(&body).map_err(WorkbenchError::from)?;
    let report: ValidationReport = validate_frame(&frame);
    Ok(Json(report).into_response())
}

// ---- inversion and screening ----

async fn post_inversion(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<RunQuery>,
    headers: HeaderMap,
    Body(params): Body<StageParams>,
) -> ApiResult {
    start_stage(&state, id, Stage::Inverted, params, q.background, &headers).await
}

async fn get_inversion(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let (head, v) = state
        .read(id, |p| {
            Ok(json!({
                "state": p.state(Stage::Inverted),
                "results": p.inversions,
                "errors": p.inversion_errors,
            }))
        })
        .await?;
    Ok(with_head(head, Json(v)))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WaiverBody {
    waived: bool,
}

async fn post_waiver(
    State(state): State<AppState>,
    Path((id, frame_id)): Path<(String, String)>,
    headers: HeaderMap,
    Body(b): Body<WaiverBody>,
) -> ApiResult {
    mutate(&state, id, &headers, EventKind::UnresolvedWaived { frame_id, waived: b.waived }).await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScreenBody {
    verdicts: BTreeMap<String, ScreenVerdict>,
}

async fn post_screen_verdicts(
    State(state): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    Body(b): Body<ScreenBody>,
) -> ApiResult {
    mutate(&state, id, &headers, EventKind::ScreenVerdictsSet { verdicts: b.verdicts }).await
}

async fn get_screening(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let (head, v) = state
        .read(id, |p| {
            Ok(json!({
                "state": p.state(Stage::Screened),
                "verdicts": p.screen_verdicts,
                "screening": p.screening,
            }))
        })
        .await?;
    Ok(with_head(head, Json(v)))
}

// ---- decision ----

async fn preview_weights(Body(judgment): Body<G1Judgment>) -> ApiResult {
    let w = g1_weights(&judgment).map_err(|source| WorkbenchError::Decision {
        stage: Stage::Ranked,
        source,
    })?;
    Ok(Json(w).into_response())
}

async fn post_judgment(
    State(state): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    Body(judgment): Body<G1Judgment>,
) -> ApiResult {
    mutate(&state, id, &headers, EventKind::JudgmentSet { judgment }).await
}

async fn put_manual_scores(
    State(state): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    Body(scores): Body<ManualScores>,
) -> ApiResult {
    mutate(&state, id, &headers, EventKind::ManualScoresSet { scores }).await
}

async fn run_decision(
    State(state): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    Body(params): Body<StageParams>,
) -> ApiResult {
    start_stage(&state, id, Stage::Ranked, params, false, &headers).await
}

#[derive(Serialize)]
struct Stamped<T> {
    state: Option<StageState>,
    #[serde(flatten)]
    value: T,
}

async fn get_decision(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let (head, v) = state
        .read(id, |p| {
            let run: RankingRun = p
                .ranking
                .clone()
                .ok_or_else(|| WorkbenchError::NotFound("no ranking has been run".into()))?;
            Ok(Stamped {
                state: p.state(Stage::Ranked),
                value: run,
            })
        })
        .await?;
    Ok(with_head(head, Json(v)))
}

async fn get_matrix(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let (head, csv) = state
        .read(id, |p| {
            p.ranking
                .as_ref()
                .map(|r| matrix_to_csv(&r.matrix))
                .ok_or_else(|| WorkbenchError::NotFound("no ranking has been run".into()))
        })
        .await?;
    Ok(with_head(head, ([("content-type", "text/csv")], csv)))
}

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct ClusterBody {
    k: Option<usize>,
    threshold: Option<f64>,
    force: bool,
}

async fn run_clusters(
    State(state): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    Body(b): Body<ClusterBody>,
) -> ApiResult {
    let params = StageParams {
        k: b.k,
        cluster_threshold: b.threshold,
        force: b.force,
        ..Default::default()
    };
    start_stage(&state, id, Stage::Clustered, params, false, &headers).await
}

async fn get_clusters(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let (head, v) = state
        .read(id, |p| {
            let report: ClusterReport = p
                .clusters
                .clone()
                .ok_or_else(|| WorkbenchError::NotFound("no clustering has been run".into()))?;
            Ok(Stamped {
                state: p.state(Stage::Clustered),
                value: report,
            })
        })
        .await?;
    Ok(with_head(head, Json(v)))
}

// ---- export ----

async fn export(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let st = state.clone();
    let (head, text) = blocking(move || {
        let dir = st.inner.wb.open(&id)?;
        let p = dir.load()?;
        Ok((p.head, export_text(&p, &dir.events()?)))
    })
    .await?;
    Ok(with_head(head, ([("content-type", "application/json")], text)))
}

async fn events(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let st = state.clone();
    let events = blocking(move || st.inner.wb.open(&id)?.events()).await?;
    Ok(Json(events).into_response())
}
