//! The studio HTTP/JSON API.
//!
//! [`Studio`] holds the shared, immutable corpus snapshot and index plus the
//! live sessions, and implements every endpoint as a plain blocking method.
//! [`router`] wraps those methods for axum. Each session sits behind its own
//! mutex, so mutations to one board are serialized while different sessions
//! proceed in parallel.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use jianzhi_core::classify::{Exemplar, DEFAULT_K as CLASSIFY_K};
use jianzhi_core::cutout::DEFAULT_MIN_AREA;
use jianzhi_core::ideation::{
    build_ideation_prompt, compose_idea, edit_idea, request_suggestions, DesignIntent, IdeaDescription,
    IdeationError, SuggestionRef, SuggestionSet, TextProvider, DEFAULT_EXEMPLARS,
};
use jianzhi_core::knowledge::KnowledgeBase;
use jianzhi_core::moodboard::{BoardError, BoardOp, Canvas, SceneGraph};
use jianzhi_core::raster::{BinaryImage, Pixel, PixelBox};
use jianzhi_core::retrieval::{build_index, search, EmbedItem, RetrievalIndex, DEFAULT_K};
use jianzhi_core::segment::SegmentError;
use jianzhi_core::vectorize::{mismatch, vectorize, DEFAULT_TOLERANCE};
use jianzhi_core::VectorPath;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::corpus::{index_items, load_corpus, load_exemplars, read_index};
use crate::gateway::{
    build_generation_prompt, Gateway, GatewayConfig, GatewayError, GenerationRequest, SegmentSource,
    DEFAULT_GENERATION_COUNT,
};
use crate::imaging::{decode_gray, encode_mask_pbm};
use crate::pipeline::{binarize_default, extract_patterns, PatternManifest};
use crate::session::{load_session, save_session, Origin, Reference, Session, SessionError};
use crate::svg::{export_svg, ExportOptions};

pub const DEFAULT_LISTEN: &str = "127.0.0.1:8640";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    pub listen: String,
    pub gateway: GatewayConfig,
    pub k_retrieve: usize,
    /// Sessions are written here after every change, and reloaded on start.
    pub session_dir: Option<PathBuf>,
    /// A prebuilt index; built from the corpus with the gateway embedder
    /// when absent.
    pub index_path: Option<PathBuf>,
}

impl ServiceConfig {
    pub fn new(data_dir: PathBuf, gateway: GatewayConfig) -> Self {
        ServiceConfig {
            data_dir,
            listen: DEFAULT_LISTEN.into(),
            gateway,
            k_retrieve: DEFAULT_K,
            session_dir: None,
            index_path: None,
        }
    }

    /// `HC_DATA_DIR`, `HC_LISTEN`, `HC_K_RETRIEVE`, `HC_SESSION_DIR` and the
    /// gateway variables.
    pub fn from_env(var: impl Fn(&str) -> Option<String>) -> Self {
        let gateway = GatewayConfig::from_env(&var);
        let mut c = ServiceConfig::new(var("HC_DATA_DIR").map_or_else(|| PathBuf::from("data"), PathBuf::from), gateway);
        if let Some(l) = var("HC_LISTEN") {
            c.listen = l;
        }
        if let Some(k) = var("HC_K_RETRIEVE").and_then(|s| s.parse().ok()) {
            c.k_retrieve = k;
        }
        c.session_dir = var("HC_SESSION_DIR").map(PathBuf::from);
        c
    }
}

/// An error reply: HTTP status plus `{"error": kind, "message", ...extra}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ApiError {
    pub status: u16,
    pub kind: String,
    pub message: String,
    pub extra: Option<Value>,
}

impl ApiError {
    pub fn new(status: u16, kind: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            kind: kind.into(),
            message: message.into(),
            extra: None,
        }
    }

    fn with(mut self, extra: Value) -> Self {
        self.extra = Some(extra);
        self
    }

    pub fn body(&self) -> Value {
        let mut v = json!({ "error": self.kind, "message": self.message });
        if let Some(Value::Object(m)) = &self.extra {
            for (k, x) in m {
                v[k] = x.clone();
            }
        }
        v
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self.body())).into_response()
    }
}

/// Variant name of a serde-tagged error enum.
fn variant_name<E: Serialize>(e: &E) -> String {
    match serde_json::to_value(e) {
        Ok(Value::String(s)) => s,
        Ok(Value::Object(m)) => m.keys().next().cloned().unwrap_or_default(),
        _ => String::from("Error"),
    }
}

fn board_error(e: &BoardError) -> ApiError {
    ApiError::new(422, &variant_name(e), e.to_string())
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        match &e {
            SessionError::Stale { current, .. } => {
                ApiError::new(409, "StaleVersion", e.to_string()).with(json!({ "current_version": current }))
            }
            SessionError::Board(b) => board_error(b),
            SessionError::NothingToUndo => ApiError::new(422, "NothingToUndo", e.to_string()),
            SessionError::CorruptSession(_) => ApiError::new(500, "CorruptSession", e.to_string()),
            SessionError::Io(_) => ApiError::new(500, "Io", e.to_string()),
        }
    }
}

fn gateway_status(e: &GatewayError) -> ApiError {
    match e {
        GatewayError::InvalidRequest(_) | GatewayError::EmptyIdea => ApiError::new(400, e.kind(), e.to_string()),
        _ => ApiError::new(502, e.kind(), e.to_string()),
    }
}

fn parse_body<T: for<'de> Deserialize<'de>>(bytes: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(bytes).map_err(|e| ApiError::new(400, "SchemaError", e.to_string()))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CreateSession {
    #[serde(default)]
    pub canvas: Option<Canvas>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntentReply {
    #[serde(flatten)]
    pub suggestions: SuggestionSet,
    pub fault: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IdeaRequest {
    #[serde(default)]
    pub accepted: Vec<SuggestionRef>,
    /// Replaces the composed text when present and non-blank.
    #[serde(default)]
    pub text: Option<String>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReferenceMode {
    #[default]
    Retrieved,
    Generated,
    Both,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReferenceQuery {
    #[serde(default)]
    pub mode: ReferenceMode,
    #[serde(default)]
    pub suffix: Option<String>,
    #[serde(default)]
    pub count: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceReply {
    pub retrieved: Vec<Reference>,
    pub generated: Vec<Reference>,
    /// Set in `both` mode when generation failed; retrieval still ran.
    pub generated_error: Option<Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentRequest {
    pub image_ref: String,
    pub fg: Vec<Pixel>,
    #[serde(default)]
    pub bg: Vec<Pixel>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentReply {
    pub source: SegmentSource,
    pub fault: Option<String>,
    pub width: u32,
    pub height: u32,
    pub area: usize,
    pub bbox: PixelBox,
    /// Outline in image pixel coordinates.
    pub path: VectorPath,
    pub mismatch_px: usize,
    pub mask_pbm_b64: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoardOpRequest {
    pub version: u64,
    pub op: BoardOp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VersionRequest {
    pub version: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoardOpReply {
    pub version: u64,
    pub created: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoardView {
    pub version: u64,
    pub board: SceneGraph,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PatternQuery {
    #[serde(default)]
    pub min_area: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExportQuery {
    #[serde(default)]
    pub mm_per_unit: Option<f64>,
}

pub struct Studio {
    pub config: ServiceConfig,
    pub kb: KnowledgeBase,
    pub index: RetrievalIndex,
    pub exemplars: Vec<Exemplar>,
    pub gateway: Gateway,
    sessions: RwLock<BTreeMap<String, Arc<Mutex<Session>>>>,
    next_id: AtomicU64,
}

impl Studio {
    pub fn open(config: ServiceConfig) -> anyhow::Result<Self> {
        let gateway = Gateway::new(config.gateway.clone());
        Self::with_gateway(config, gateway)
    }

    pub fn with_gateway(config: ServiceConfig, gateway: Gateway) -> anyhow::Result<Self> {
        anyhow::ensure!(config.k_retrieve >= 1, "k_retrieve must be at least 1");
        let kb = load_corpus(&config.data_dir)?;
        let exemplars = load_exemplars(&config.data_dir)?;
        let index = match &config.index_path {
            Some(p) => {
                let file = read_index(p)?;
                anyhow::ensure!(
                    file.index.dim == gateway.config.embed_dim,
                    "index has dimension {}, the embedder {}",
                    file.index.dim,
                    gateway.config.embed_dim
                );
                file.index
            }
            None => build_index(&index_items(&kb), &gateway)?,
        };
        let studio = Studio {
            config,
            kb,
            index,
            exemplars,
            gateway,
            sessions: RwLock::new(BTreeMap::new()),
            next_id: AtomicU64::new(1),
        };
        studio.reload_sessions()?;
        Ok(studio)
    }

    fn reload_sessions(&self) -> anyhow::Result<()> {
        let Some(dir) = &self.config.session_dir else {
            return Ok(());
        };
        if !dir.exists() {
            return Ok(());
        }
        let mut files: Vec<PathBuf> = fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        files.sort();
        let mut sessions = self.sessions.write().expect("session map lock");
        for f in files {
            let s = load_session(&f)?;
            if let Some(n) = s.session_id.strip_prefix('s').and_then(|n| n.parse::<u64>().ok()) {
                self.next_id.fetch_max(n + 1, Ordering::SeqCst);
            }
            sessions.insert(s.session_id.clone(), Arc::new(Mutex::new(s)));
        }
        Ok(())
    }

    fn session_path(&self, id: &str) -> Option<PathBuf> {
        self.config.session_dir.as_ref().map(|d| d.join(format!("{id}.json")))
    }

    fn persist(&self, s: &Session) -> Result<(), ApiError> {
        match self.session_path(&s.session_id) {
            Some(p) => save_session(s, &p).map_err(ApiError::from),
            None => Ok(()),
        }
    }

    fn handle(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        self.sessions
            .read()
            .expect("session map lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(404, "UnknownSession", format!("no session {id:?}")))
    }

    /// Run `f` on the session under its lock. The session is restored if
    /// `f` fails or leaves the board violating its invariants, and saved
    /// otherwise.
    fn with_session<T>(&self, id: &str, f: impl FnOnce(&mut Session) -> Result<T, ApiError>) -> Result<T, ApiError> {
        let handle = self.handle(id)?;
        let mut s = handle.lock().unwrap_or_else(|p| p.into_inner());
        let before = s.clone();
        let out = f(&mut s).and_then(|v| {
            s.board
                .check_invariants()
                .map_err(|e| ApiError::new(500, "Corrupt", e.to_string()))?;
            Ok(v)
        });
        match out {
            Ok(v) => {
                if *s != before {
                    self.persist(&s)?;
                }
                Ok(v)
            }
            Err(e) => {
                *s = before;
                Err(e)
            }
        }
    }

    pub fn create_session(&self, req: CreateSession) -> Result<Session, ApiError> {
        let canvas = req.canvas.unwrap_or_default();
        if !(canvas.width > 0.0 && canvas.height > 0.0 && canvas.width.is_finite() && canvas.height.is_finite()) {
            return Err(ApiError::new(400, "SchemaError", "canvas size must be positive"));
        }
        let mut sessions = self.sessions.write().expect("session map lock");
        let id = loop {
            let id = format!("s{}", self.next_id.fetch_add(1, Ordering::SeqCst));
            if !sessions.contains_key(&id) {
                break id;
            }
        };
        let s = Session::new(id.clone(), canvas);
        self.persist(&s)?;
        sessions.insert(id, Arc::new(Mutex::new(s.clone())));
        Ok(s)
    }

    pub fn session(&self, id: &str) -> Result<Session, ApiError> {
        let handle = self.handle(id)?;
        let s = handle.lock().unwrap_or_else(|p| p.into_inner());
        Ok(s.clone())
    }

    pub fn set_intent(&self, id: &str, intent: DesignIntent) -> Result<IntentReply, ApiError> {
        self.with_session(id, |s| {
            let violations = intent.validate(&self.kb);
            if !violations.is_empty() {
                return Err(ApiError::new(400, "InvalidIntent", "intent does not match the taxonomy")
                    .with(json!({ "violations": violations })));
            }
            let e = if self.kb.templates().is_empty() { 0 } else { DEFAULT_EXEMPLARS };
            let bundle = build_ideation_prompt(&intent, &self.kb, e).map_err(|e| ApiError::new(400, "InvalidIntent", e.to_string()))?;
            let provider: &dyn TextProvider = &self.gateway;
            let outcome = request_suggestions(&bundle, &intent, &self.kb, Some(provider))
                .map_err(|e| ApiError::new(400, "InvalidIntent", e.to_string()))?;
            if let Some(f) = &outcome.fault {
                s.faults.push(format!("suggestions: {f}"));
            }
            s.intent = Some(intent);
            s.suggestions = Some(outcome.set.clone());
            s.idea = None;
            s.references = Default::default();
            Ok(IntentReply {
                suggestions: outcome.set,
                fault: outcome.fault,
            })
        })
    }

    pub fn set_idea(&self, id: &str, req: IdeaRequest) -> Result<IdeaDescription, ApiError> {
        self.with_session(id, |s| {
            let (Some(intent), Some(set)) = (&s.intent, &s.suggestions) else {
                return Err(ApiError::new(409, "NoIntent", "set an intent before composing an idea"));
            };
            let mut idea = compose_idea(intent, set, &req.accepted).map_err(|e| match e {
                IdeationError::BadReference(_) => ApiError::new(400, "BadReference", e.to_string()),
                _ => ApiError::new(400, "EmptyIdea", e.to_string()),
            })?;
            if let Some(t) = req.text.as_deref().filter(|t| !t.trim().is_empty()) {
                idea = edit_idea(&idea, t.trim());
            }
            s.idea = Some(idea.clone());
            s.references = Default::default();
            Ok(idea)
        })
    }

    fn retrieve(&self, idea: &IdeaDescription) -> Result<Vec<Reference>, ApiError> {
        let q = self
            .gateway
            .embed_item(EmbedItem::Text(&idea.text))
            .map_err(|e| gateway_status(&e))?;
        let ranked = search(&self.index, &q, self.config.k_retrieve)
            .map_err(|e| ApiError::new(502, "EmbedderFault", e.to_string()))?;
        Ok(ranked
            .into_iter()
            .map(|r| {
                let meta = self.index.entries.get(&r.work_id).map(|e| &e.metadata);
                let field = |k: &str| meta.and_then(|m| m.get(k)).cloned();
                Reference {
                    origin: Origin::Retrieved,
                    rank: r.rank,
                    image_ref: field("image_ref").unwrap_or_default(),
                    title: field("title"),
                    work_id: Some(r.work_id),
                    score: Some(r.score),
                }
            })
            .collect())
    }

    fn generate(&self, idea: &IdeaDescription, q: &ReferenceQuery) -> Result<Vec<Reference>, ApiError> {
        let prompt = build_generation_prompt(&idea.text, q.suffix.as_deref().unwrap_or(""))
            .map_err(|e| gateway_status(&e))?;
        let mut req = GenerationRequest::new(prompt);
        req.count = q.count.unwrap_or(DEFAULT_GENERATION_COUNT);
        let images = self.gateway.generate_images(&req).map_err(|e| gateway_status(&e))?;
        Ok(images
            .into_iter()
            .enumerate()
            .map(|(i, g)| Reference {
                origin: Origin::Generated,
                rank: i + 1,
                image_ref: g.image_ref,
                work_id: None,
                title: None,
                score: None,
            })
            .collect())
    }

    pub fn references(&self, id: &str, q: ReferenceQuery) -> Result<ReferenceReply, ApiError> {
        self.with_session(id, |s| {
            let Some(idea) = s.idea.clone() else {
                return Err(ApiError::new(409, "NoIdea", "confirm an idea before exploring references"));
            };
            let mut reply = ReferenceReply {
                retrieved: Vec::new(),
                generated: Vec::new(),
                generated_error: None,
            };
            if q.mode != ReferenceMode::Generated {
                reply.retrieved = self.retrieve(&idea)?;
            }
            if q.mode != ReferenceMode::Retrieved {
                match self.generate(&idea, &q) {
                    Ok(g) => reply.generated = g,
                    Err(e) if q.mode == ReferenceMode::Both && e.status == 502 => {
                        s.faults.push(format!("generation: {}", e.message));
                        reply.generated_error = Some(e.body());
                    }
                    Err(e) => return Err(e),
                }
            }
            if q.mode != ReferenceMode::Generated {
                s.references.retrieved = reply.retrieved.clone();
            }
            if q.mode != ReferenceMode::Retrieved {
                s.references.generated = reply.generated.clone();
            }
            Ok(reply)
        })
    }

    /// Bytes of an image the session may segment: any corpus work image, or
    /// an image generated for this session.
    fn image_bytes(&self, s: &Session, image_ref: &str) -> Result<Vec<u8>, ApiError> {
        let not_found = || ApiError::new(404, "UnknownImage", format!("unknown image {image_ref:?}"));
        let path = if self.kb.works().iter().any(|w| w.image_ref == image_ref) {
            self.config.data_dir.join(image_ref)
        } else if s.references.generated.iter().any(|r| r.image_ref == image_ref) {
            self.config.gateway.generate.cache_dir.join(image_ref)
        } else {
            return Err(not_found());
        };
        fs::read(&path).map_err(|_| not_found())
    }

    pub fn segment(&self, id: &str, req: SegmentRequest) -> Result<SegmentReply, ApiError> {
        let handle = self.handle(id)?;
        let bytes = {
            let s = handle.lock().unwrap_or_else(|p| p.into_inner());
            self.image_bytes(&s, &req.image_ref)?
        };
        let gray = decode_gray(&bytes, &req.image_ref).map_err(|e| ApiError::new(422, "UndecodableImage", e.to_string()))?;
        let binary = binarize_default(&gray);
        let outcome = self.gateway.segment(&bytes, &binary, &req.fg, &req.bg).map_err(|e| match &e {
            GatewayError::SegmentationFailed(se) => {
                let status = if matches!(se, SegmentError::NoForegroundPoint) { 400 } else { 422 };
                ApiError::new(status, &variant_name(se), se.to_string())
            }
            _ => gateway_status(&e),
        })?;
        let path = vectorize(&outcome.mask, DEFAULT_TOLERANCE).map_err(|e| ApiError::new(422, "EmptyResult", e.to_string()))?;
        let mask = BinaryImage::from_region(binary.width(), binary.height(), &outcome.mask)
            .map_err(|e| ApiError::new(500, "Internal", e.to_string()))?;
        if let Some(f) = &outcome.fault {
            self.with_session(id, |s| {
                s.faults.push(format!("segmentation: {f}"));
                Ok(())
            })?;
        }
        Ok(SegmentReply {
            source: outcome.source,
            width: binary.width(),
            height: binary.height(),
            area: outcome.mask.area(),
            bbox: outcome.mask.bbox().expect("segmentation masks are non-empty"),
            mismatch_px: mismatch(&outcome.mask, &path),
            path,
            mask_pbm_b64: B64.encode(encode_mask_pbm(&mask)),
            fault: outcome.fault,
        })
    }

    pub fn work_patterns(&self, work_id: &str, q: PatternQuery) -> Result<PatternManifest, ApiError> {
        let work = self
            .kb
            .work(work_id)
            .ok_or_else(|| ApiError::new(404, "UnknownWork", format!("no work {work_id:?}")))?;
        let bytes = fs::read(self.config.data_dir.join(&work.image_ref))
            .map_err(|e| ApiError::new(404, "UnknownImage", format!("{}: {e}", work.image_ref)))?;
        let gray = decode_gray(&bytes, &work.image_ref).map_err(|e| ApiError::new(422, "UndecodableImage", e.to_string()))?;
        let mask = binarize_default(&gray);
        let min_area = q.min_area.unwrap_or(DEFAULT_MIN_AREA).max(1);
        Ok(extract_patterns(work_id, &mask, min_area, &self.exemplars, CLASSIFY_K).0)
    }

    pub fn board(&self, id: &str) -> Result<BoardView, ApiError> {
        let s = self.session(id)?;
        Ok(BoardView {
            version: s.board_version,
            board: s.board,
        })
    }

    pub fn board_op(&self, id: &str, req: BoardOpRequest) -> Result<BoardOpReply, ApiError> {
        self.with_session(id, |s| {
            let created = s.apply_op(req.op, req.version)?;
            Ok(BoardOpReply {
                version: s.board_version,
                created,
            })
        })
    }

    pub fn undo(&self, id: &str, req: VersionRequest) -> Result<BoardOpReply, ApiError> {
        self.with_session(id, |s| {
            s.undo(req.version)?;
            Ok(BoardOpReply {
                version: s.board_version,
                created: None,
            })
        })
    }

    pub fn export(&self, id: &str, q: ExportQuery) -> Result<String, ApiError> {
        if q.mm_per_unit.is_some_and(|m| !(m > 0.0 && m.is_finite())) {
            return Err(ApiError::new(400, "SchemaError", "mm_per_unit must be positive"));
        }
        let s = self.session(id)?;
        Ok(export_svg(&s.board, ExportOptions { mm_per_unit: q.mm_per_unit }))
    }

    pub fn health(&self) -> Value {
        json!({
            "status": "ok",
            "works": self.kb.works().len(),
            "index_size": self.index.len(),
            "index_stamp": self.index.build_stamp,
            "offline": self.config.gateway.text.offline,
        })
    }
}

type Shared = State<Arc<Studio>>;

async fn blocking<T, F>(f: F) -> Response
where
    T: Serialize + Send + 'static,
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
{
    match tokio::task::spawn_blocking(f).await {
        Ok(Ok(v)) => Json(v).into_response(),
        Ok(Err(e)) => e.into_response(),
        Err(_) => ApiError::new(500, "Internal", "request handler panicked").into_response(),
    }
}

async fn health(State(st): Shared) -> Response {
    Json(st.health()).into_response()
}

async fn create_session(State(st): Shared, body: Bytes) -> Response {
    let req = if body.iter().all(u8::is_ascii_whitespace) {
        Ok(CreateSession::default())
    } else {
        parse_body(&body)
    };
    match req.and_then(|r| st.create_session(r)) {
        Ok(s) => (StatusCode::CREATED, Json(s)).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn get_session(State(st): Shared, UrlPath(id): UrlPath<String>) -> Response {
    blocking(move || st.session(&id)).await
}

async fn post_intent(State(st): Shared, UrlPath(id): UrlPath<String>, body: Bytes) -> Response {
    blocking(move || st.set_intent(&id, parse_body(&body)?)).await
}

async fn post_idea(State(st): Shared, UrlPath(id): UrlPath<String>, body: Bytes) -> Response {
    blocking(move || st.set_idea(&id, parse_body(&body)?)).await
}

async fn get_references(State(st): Shared, UrlPath(id): UrlPath<String>, Query(q): Query<ReferenceQuery>) -> Response {
    blocking(move || st.references(&id, q)).await
}

async fn post_segment(State(st): Shared, UrlPath(id): UrlPath<String>, body: Bytes) -> Response {
    blocking(move || st.segment(&id, parse_body(&body)?)).await
}

async fn get_patterns(State(st): Shared, UrlPath(id): UrlPath<String>, Query(q): Query<PatternQuery>) -> Response {
    blocking(move || st.work_patterns(&id, q)).await
}

async fn get_board(State(st): Shared, UrlPath(id): UrlPath<String>) -> Response {
    blocking(move || st.board(&id)).await
}

async fn post_board_op(State(st): Shared, UrlPath(id): UrlPath<String>, body: Bytes) -> Response {
    blocking(move || st.board_op(&id, parse_body(&body)?)).await
}

async fn post_undo(State(st): Shared, UrlPath(id): UrlPath<String>, body: Bytes) -> Response {
    blocking(move || st.undo(&id, parse_body(&body)?)).await
}

async fn get_export(State(st): Shared, UrlPath(id): UrlPath<String>, Query(q): Query<ExportQuery>) -> Response {
    match tokio::task::spawn_blocking(move || st.export(&id, q)).await {
        Ok(Ok(svg)) => ([(header::CONTENT_TYPE, "image/svg+xml")], svg).into_response(),
        Ok(Err(e)) => e.into_response(),
        Err(_) => ApiError::new(500, "Internal", "request handler panicked").into_response(),
    }
}

pub fn router(studio: Arc<Studio>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/session", post(create_session))
        .route("/session/{id}", get(get_session))
        .route("/session/{id}/intent", post(post_intent))
        .route("/session/{id}/idea", post(post_idea))
        .route("/session/{id}/references", get(get_references))
        .route("/session/{id}/segment", post(post_segment))
        .route("/session/{id}/board", get(get_board))
        .route("/session/{id}/board/ops", post(post_board_op))
        .route("/session/{id}/undo", post(post_undo))
        .route("/session/{id}/export.svg", get(get_export))
        .route("/works/{id}/patterns", get(get_patterns))
        .with_state(studio)
}

/// Serve until Ctrl-C.
pub async fn serve(studio: Arc<Studio>, listen: &str) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(listen).await?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(studio))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
