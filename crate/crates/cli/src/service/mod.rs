//! HTTP backend for human orientation labelling.
//!
//! | route | effect |
//! |---|---|
//! | `POST /sessions` `{labeler_id}` | opens a session, 201 |
//! | `GET /sessions/{id}` | lease and progress counters |
//! | `DELETE /sessions/{id}` | closes a session and requeues its leases, 204 |
//! | `GET /instances/next?session=` | leases the next instance; 204 when none are left |
//! | `POST /labels` `{instance_id, theta_deg, labeler_id}` | stores a label, 201 |
//! | `GET /examples?bin=&n=` | newest labelled instances in one bin |
//! | `GET /images/{path}`, `GET /crops/{path}` | static image bytes |
//!
//! Instance ids are `image_ref#instance_id`. The crop of an instance is looked up as
//! `<crops>/<image_ref>/<instance_id>.<ext>` where `ext` is the extension of the image.

mod sessions;
mod store;

use std::collections::HashMap;
use std::path::{Component, Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use bodyorient_core::dataset::{BBox, DatasetManifest, LabelRecord, LabelSource, Split};
use bodyorient_core::geometry::{OrientationLabel, NUM_BINS};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

pub use sessions::{Assignments, Clock, ManualClock, Progress, SessionInfo, SystemClock};
pub use store::{LabelStore, Recovery, StoreError, StoredLabel};

pub const DEFAULT_SESSION_TTL: Duration = Duration::from_secs(15 * 60);
pub const DEFAULT_EXAMPLES: usize = 8;
pub const MAX_EXAMPLES: usize = 100;
/// Slider step of the labelling tool in degrees.
pub const LABEL_STEP_DEG: f64 = 5.0;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub images_dir: PathBuf,
    pub crops_dir: PathBuf,
    pub store_path: PathBuf,
    pub session_ttl: Duration,
}

impl ServiceConfig {
    /// Crops under `<images>/crops` and the label store at `<images>/labels.human.jsonl`.
    pub fn with_defaults(images_dir: &Path) -> Self {
        Self {
            images_dir: images_dir.to_path_buf(),
            crops_dir: images_dir.join("crops"),
            store_path: images_dir.join("labels.human.jsonl"),
            session_ttl: DEFAULT_SESSION_TTL,
        }
    }
}

#[derive(Debug, Clone)]
struct Instance {
    id: String,
    image_ref: String,
    instance_id: String,
    bbox: BBox,
    split: Option<Split>,
}

impl Instance {
    fn descriptor(&self) -> InstanceDescriptor {
        InstanceDescriptor {
            instance_id: self.id.clone(),
            image_url: format!("/images/{}", self.image_ref),
            bbox: self.bbox,
            crop_url: crop_url(&self.image_ref, &self.instance_id),
        }
    }
}

fn crop_url(image_ref: &str, instance_id: &str) -> String {
    let ext = Path::new(image_ref)
        .extension()
        .and_then(|e| e.to_str())
        .unwrap_or("png");
    format!("/crops/{image_ref}/{instance_id}.{ext}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceDescriptor {
    pub instance_id: String,
    pub image_url: String,
    pub bbox: BBox,
    pub crop_url: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleDescriptor {
    pub instance_id: String,
    pub theta_deg: f64,
    pub bin: usize,
    pub labeler_id: String,
    pub timestamp: DateTime<Utc>,
    pub image_url: String,
    pub crop_url: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRequest {
    pub instance_id: String,
    pub theta_deg: f64,
    pub labeler_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelAccepted {
    pub instance_id: String,
    pub theta_deg: f64,
    pub bin: usize,
    pub labeler_id: String,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewSession {
    pub labeler_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: String,
    pub labeler_id: String,
}

/// Shared state behind the router.
///
/// Lock order is `assignments` before `store`.
pub struct AppState {
    config: ServiceConfig,
    instances: Vec<Instance>,
    index: HashMap<String, usize>,
    assignments: Mutex<Assignments>,
    store: Mutex<LabelStore>,
    clock: Box<dyn Clock>,
}

impl AppState {
    /// Loads the instance list from `manifest` and replays the label store.
    ///
    /// Instances that already carry a human label in the store are not served again.
    pub fn new(
        manifest: &DatasetManifest,
        config: ServiceConfig,
        clock: impl Clock,
    ) -> Result<(Arc<Self>, Recovery), StoreError> {
        let (store, recovery) = LabelStore::open(&config.store_path)?;
        let instances: Vec<Instance> = manifest
            .records()
            .iter()
            .map(|r| Instance {
                id: format!("{}#{}", r.image_ref, r.instance_id),
                image_ref: r.image_ref.clone(),
                instance_id: r.instance_id.clone(),
                bbox: r.bbox,
                split: r.split,
            })
            .collect();
        let index = instances.iter().enumerate().map(|(i, x)| (x.id.clone(), i)).collect();
        let labelled = instances
            .iter()
            .map(|x| store.is_labelled(&x.image_ref, &x.instance_id))
            .collect();
        let assignments = Assignments::new(labelled, config.session_ttl);
        Ok((
            Arc::new(Self {
                config,
                instances,
                index,
                assignments: Mutex::new(assignments),
                store: Mutex::new(store),
                clock: Box::new(clock),
            }),
            recovery,
        ))
    }

    /// Live human labels, oldest first.
    pub fn labels(&self) -> Vec<LabelRecord> {
        let store = self.store.lock().unwrap();
        store.records().into_iter().map(|s| s.record.clone()).collect()
    }

    pub fn remaining(&self) -> usize {
        self.assignments.lock().unwrap().remaining()
    }

    /// Whether every unfinished instance is queued or leased exactly once.
    pub fn assignments_consistent(&self) -> bool {
        self.assignments.lock().unwrap().check_invariant()
    }
}

#[derive(Debug)]
enum ApiError {
    NotFound(String),
    Unprocessable(String),
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, message) = match self {
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, m),
            ApiError::Unprocessable(m) => (StatusCode::UNPROCESSABLE_ENTITY, m),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, m),
        };
        (status, Json(serde_json::json!({ "error": message }))).into_response()
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session).delete(delete_session))
        .route("/instances/next", get(next_instance))
        .route("/labels", post(post_label))
        .route("/examples", get(examples))
        .route("/images/{*path}", get(image_file))
        .route("/crops/{*path}", get(crop_file))
        .with_state(state)
}

/// Serves `router` until the listener fails.
pub async fn serve(listener: tokio::net::TcpListener, state: Arc<AppState>) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

async fn create_session(
    State(state): State<Arc<AppState>>,
    Json(body): Json<NewSession>,
) -> Result<(StatusCode, Json<SessionCreated>), ApiError> {
    if body.labeler_id.trim().is_empty() {
        return Err(ApiError::Unprocessable("labeler_id must not be empty".into()));
    }
    let now = state.clock.now();
    let session_id = state.assignments.lock().unwrap().open_session(&body.labeler_id, now);
    Ok((
        StatusCode::CREATED,
        Json(SessionCreated {
            session_id,
            labeler_id: body.labeler_id,
        }),
    ))
}

async fn get_session(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<SessionInfo>, ApiError> {
    let now = state.clock.now();
    state
        .assignments
        .lock()
        .unwrap()
        .session(&id, now)
        .map(Json)
        .ok_or_else(|| ApiError::NotFound(format!("unknown session `{id}`")))
}

async fn delete_session(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> Result<StatusCode, ApiError> {
    let now = state.clock.now();
    if state.assignments.lock().unwrap().close_session(&id, now) {
        Ok(StatusCode::NO_CONTENT)
    } else {
        Err(ApiError::NotFound(format!("unknown session `{id}`")))
    }
}

#[derive(Debug, Deserialize)]
struct NextQuery {
    session: String,
}

async fn next_instance(State(state): State<Arc<AppState>>, Query(q): Query<NextQuery>) -> Result<Response, ApiError> {
    let now = state.clock.now();
    let leased = state.assignments.lock().unwrap().next(&q.session, now);
    match leased {
        None => Err(ApiError::NotFound(format!("unknown session `{}`", q.session))),
        Some(None) => Ok(StatusCode::NO_CONTENT.into_response()),
        Some(Some(i)) => Ok(Json(state.instances[i].descriptor()).into_response()),
    }
}

/// Accepts only the slider positions `0, 5, ..., 355`.
pub fn validate_theta(theta_deg: f64) -> Result<OrientationLabel, String> {
    let on_grid = theta_deg.is_finite()
        && (0.0..=360.0 - LABEL_STEP_DEG).contains(&theta_deg)
        && (theta_deg / LABEL_STEP_DEG).fract() == 0.0;
    if !on_grid {
        return Err(format!(
            "theta_deg must be a multiple of {LABEL_STEP_DEG} in [0, {}], got {theta_deg}",
            360.0 - LABEL_STEP_DEG
        ));
    }
    OrientationLabel::from_degrees(theta_deg).map_err(|e| e.to_string())
}

async fn post_label(
    State(state): State<Arc<AppState>>,
    Json(body): Json<LabelRequest>,
) -> Result<(StatusCode, Json<LabelAccepted>), ApiError> {
    let orientation = validate_theta(body.theta_deg).map_err(ApiError::Unprocessable)?;
    if body.labeler_id.trim().is_empty() {
        return Err(ApiError::Unprocessable("labeler_id must not be empty".into()));
    }
    let &i = state
        .index
        .get(&body.instance_id)
        .ok_or_else(|| ApiError::NotFound(format!("unknown instance `{}`", body.instance_id)))?;
    let inst = &state.instances[i];
    let record = LabelRecord {
        image_ref: inst.image_ref.clone(),
        instance_id: inst.instance_id.clone(),
        bbox: inst.bbox,
        orientation,
        labeler_id: body.labeler_id.clone(),
        timestamp: state.clock.utc(),
        source: LabelSource::Human,
        split: inst.split,
        extra: Default::default(),
    };
    let timestamp = record.timestamp;

    let now = state.clock.now();
    let mut assignments = state.assignments.lock().unwrap();
    state
        .store
        .lock()
        .unwrap()
        .append(record)
        .map_err(|e| ApiError::Internal(e.to_string()))?;
    assignments.complete(i, &body.labeler_id, now);
    drop(assignments);

    Ok((
        StatusCode::CREATED,
        Json(LabelAccepted {
            instance_id: body.instance_id,
            theta_deg: orientation.theta_deg(),
            bin: orientation.bin(),
            labeler_id: body.labeler_id,
            timestamp,
        }),
    ))
}

#[derive(Debug, Deserialize)]
struct ExamplesQuery {
    bin: i64,
    n: Option<usize>,
}

async fn examples(
    State(state): State<Arc<AppState>>,
    Query(q): Query<ExamplesQuery>,
) -> Result<Json<Vec<ExampleDescriptor>>, ApiError> {
    if !(0..NUM_BINS as i64).contains(&q.bin) {
        return Err(ApiError::Unprocessable(format!(
            "bin must be in 0..{NUM_BINS}, got {}",
            q.bin
        )));
    }
    let n = q.n.unwrap_or(DEFAULT_EXAMPLES).min(MAX_EXAMPLES);
    let store = state.store.lock().unwrap();
    let out = store
        .newest_in_bin(q.bin as usize, n)
        .into_iter()
        .map(|s| {
            let r = &s.record;
            ExampleDescriptor {
                instance_id: format!("{}#{}", r.image_ref, r.instance_id),
                theta_deg: r.orientation.theta_deg(),
                bin: r.orientation.bin(),
                labeler_id: r.labeler_id.clone(),
                timestamp: r.timestamp,
                image_url: format!("/images/{}", r.image_ref),
                crop_url: crop_url(&r.image_ref, &r.instance_id),
            }
        })
        .collect();
    Ok(Json(out))
}

async fn image_file(State(state): State<Arc<AppState>>, UrlPath(path): UrlPath<String>) -> Result<Response, ApiError> {
    static_file(&state.config.images_dir, &path).await
}

async fn crop_file(State(state): State<Arc<AppState>>, UrlPath(path): UrlPath<String>) -> Result<Response, ApiError> {
    static_file(&state.config.crops_dir, &path).await
}

/// Reads `root/rel`, refusing anything that could leave `root`.
async fn static_file(root: &Path, rel: &str) -> Result<Response, ApiError> {
    let rel = Path::new(rel);
    if rel.components().any(|c| !matches!(c, Component::Normal(_))) {
        return Err(ApiError::NotFound("no such file".into()));
    }
    let path = root.join(rel);
    let bytes = tokio::fs::read(&path)
        .await
        .map_err(|_| ApiError::NotFound("no such file".into()))?;
    let mime = match path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .as_deref()
    {
        Some("png") => "image/png",
        Some("jpg" | "jpeg") => "image/jpeg",
        Some("gif") => "image/gif",
        Some("webp") => "image/webp",
        _ => "application/octet-stream",
    };
    Ok(([(header::CONTENT_TYPE, mime)], bytes).into_response())
}
