//! Clients for the external model providers.
//!
//! Every provider call goes through [`Gateway::call`], which looks the
//! request up in a content-addressed cache first. A cache file is named by
//! the SHA-256 of the provider kind and the canonical JSON request, and
//! holds `{"kind", "request", "response"}`. Replay fixtures use the same
//! format, so a directory of canned responses is simply a warm cache.
//!
//! In offline mode only the cache is consulted. The embedder falls back to
//! the deterministic [`MockEmbedder`] and segmentation to the classical
//! [`segment_by_points`].

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use jianzhi_core::ideation::{PromptBundle, TextProvider};
use jianzhi_core::raster::{BinaryImage, Pixel, PixelRegion};
use jianzhi_core::retrieval::{EmbedItem, Embedder, MockEmbedder};
use jianzhi_core::segment::{segment_by_points, SegmentError};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::imaging::{decode_mask_pbm, sha256_hex};

/// Prepended to every image-generation prompt.
pub const GENERATION_STYLE_CLAUSE: &str =
    "monochrome Chinese paper-cutting, white background, connected silhouette";
pub const DEFAULT_GENERATION_COUNT: u32 = 4;
pub const DEFAULT_GENERATION_SIZE: u32 = 1024;
pub const MAX_GENERATION_COUNT: u32 = 8;
pub const DEFAULT_EMBED_DIM: usize = 64;
pub const DEFAULT_MOCK_SEED: u64 = 0x006a_6961_6e7a_6869;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    Text,
    Embed,
    Generate,
    Segment,
}

impl ProviderKind {
    pub const ALL: [ProviderKind; 4] = [
        ProviderKind::Text,
        ProviderKind::Embed,
        ProviderKind::Generate,
        ProviderKind::Segment,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ProviderKind::Text => "text",
            ProviderKind::Embed => "embed",
            ProviderKind::Generate => "generate",
            ProviderKind::Segment => "segment",
        }
    }

    fn env_stem(self) -> &'static str {
        match self {
            ProviderKind::Text => "TEXT",
            ProviderKind::Embed => "EMBED",
            ProviderKind::Generate => "GEN",
            ProviderKind::Segment => "SEG",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    pub endpoint: Option<String>,
    /// Name of the environment variable holding the API key.
    pub credential_ref: String,
    pub timeout: Duration,
    pub max_retries: u32,
    /// First retry delay; doubles on every further attempt.
    pub backoff: Duration,
    pub cache_dir: PathBuf,
    pub offline: bool,
}

impl ProviderConfig {
    pub fn new(kind: ProviderKind, cache_dir: &Path) -> Self {
        ProviderConfig {
            kind,
            endpoint: None,
            credential_ref: format!("HC_API_KEY_{}", kind.env_stem()),
            timeout: Duration::from_secs(60),
            max_retries: 2,
            backoff: Duration::from_millis(500),
            cache_dir: cache_dir.to_path_buf(),
            offline: false,
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.timeout.is_zero() {
            return Err(GatewayError::InvalidRequest("timeout must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GatewayConfig {
    pub text: ProviderConfig,
    pub embed: ProviderConfig,
    pub generate: ProviderConfig,
    pub segment: ProviderConfig,
    pub embed_dim: usize,
    pub mock_seed: u64,
    /// When offline, embed with the mock instead of failing on cache misses.
    pub mock_when_offline: bool,
}

impl GatewayConfig {
    pub fn offline(cache_dir: &Path) -> Self {
        let mut c = Self::with_cache(cache_dir);
        c.set_offline(true);
        c
    }

    pub fn with_cache(cache_dir: &Path) -> Self {
        GatewayConfig {
            text: ProviderConfig::new(ProviderKind::Text, cache_dir),
            embed: ProviderConfig::new(ProviderKind::Embed, cache_dir),
            generate: ProviderConfig::new(ProviderKind::Generate, cache_dir),
            segment: ProviderConfig::new(ProviderKind::Segment, cache_dir),
            embed_dim: DEFAULT_EMBED_DIM,
            mock_seed: DEFAULT_MOCK_SEED,
            mock_when_offline: true,
        }
    }

    pub fn set_offline(&mut self, offline: bool) {
        for k in ProviderKind::ALL {
            self.provider_mut(k).offline = offline;
        }
    }

    pub fn provider(&self, kind: ProviderKind) -> &ProviderConfig {
        match kind {
            ProviderKind::Text => &self.text,
            ProviderKind::Embed => &self.embed,
            ProviderKind::Generate => &self.generate,
            ProviderKind::Segment => &self.segment,
        }
    }

    pub fn provider_mut(&mut self, kind: ProviderKind) -> &mut ProviderConfig {
        match kind {
            ProviderKind::Text => &mut self.text,
            ProviderKind::Embed => &mut self.embed,
            ProviderKind::Generate => &mut self.generate,
            ProviderKind::Segment => &mut self.segment,
        }
    }

    /// Read `HC_*` settings through `var`, normally `std::env::var`.
    pub fn from_env(var: impl Fn(&str) -> Option<String>) -> Self {
        let cache_dir = var("HC_CACHE_DIR").map_or_else(|| PathBuf::from(".jianzhi-cache"), PathBuf::from);
        let mut c = Self::with_cache(&cache_dir);
        for k in ProviderKind::ALL {
            let p = c.provider_mut(k);
            p.endpoint = var(&format!("HC_{}_ENDPOINT", k.env_stem())).filter(|s| !s.is_empty());
            if let Some(t) = var("HC_TIMEOUT_SECS").and_then(|s| s.parse::<f64>().ok()) {
                if t > 0.0 && t.is_finite() {
                    p.timeout = Duration::from_secs_f64(t);
                }
            }
            if let Some(r) = var("HC_MAX_RETRIES").and_then(|s| s.parse().ok()) {
                p.max_retries = r;
            }
        }
        if let Some(d) = var("HC_EMBED_DIM").and_then(|s| s.parse().ok()).filter(|d| *d > 0) {
            c.embed_dim = d;
        }
        c.set_offline(var("HC_OFFLINE").is_some_and(|v| matches!(v.as_str(), "1" | "true" | "yes")));
        c
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GatewayError {
    #[error("provider timed out")]
    Timeout,
    #[error("provider returned status {0}")]
    ProviderError(u16),
    #[error("offline and no cached reply for {0}")]
    OfflineMiss(String),
    #[error("no endpoint configured for the {0} provider")]
    NotConfigured(&'static str),
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("idea text is empty")]
    EmptyIdea,
    #[error("embedding has dimension {found}, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("unexpected provider reply: {0}")]
    BadReply(String),
    #[error("cache: {0}")]
    Cache(String),
    #[error("segmentation failed on both routes: {0}")]
    SegmentationFailed(SegmentError),
}

impl GatewayError {
    pub fn kind(&self) -> &'static str {
        match self {
            GatewayError::Timeout => "Timeout",
            GatewayError::ProviderError(_) => "ProviderError",
            GatewayError::OfflineMiss(_) => "OfflineMiss",
            GatewayError::NotConfigured(_) => "NotConfigured",
            GatewayError::Transport(_) => "Transport",
            GatewayError::InvalidRequest(_) => "InvalidRequest",
            GatewayError::EmptyIdea => "EmptyIdea",
            GatewayError::DimensionMismatch { .. } => "DimensionMismatch",
            GatewayError::BadReply(_) => "BadReply",
            GatewayError::Cache(_) => "Cache",
            GatewayError::SegmentationFailed(_) => "SegmentationFailed",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TransportError {
    Timeout,
    Io(String),
}

/// One JSON POST. Swappable so tests can count or script network traffic.
pub trait Transport: Send + Sync {
    fn post_json(
        &self,
        url: &str,
        bearer: Option<&str>,
        body: &[u8],
        timeout: Duration,
    ) -> Result<HttpResponse, TransportError>;
}

pub struct UreqTransport;

impl Transport for UreqTransport {
    fn post_json(
        &self,
        url: &str,
        bearer: Option<&str>,
        body: &[u8],
        timeout: Duration,
    ) -> Result<HttpResponse, TransportError> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let mut req = agent.post(url).header("content-type", "application/json");
        if let Some(key) = bearer {
            req = req.header("authorization", &format!("Bearer {key}"));
        }
        match req.send(body) {
            Ok(mut resp) => {
                let status = resp.status().as_u16();
                let body = resp
                    .body_mut()
                    .read_to_vec()
                    .map_err(|e| TransportError::Io(e.to_string()))?;
                Ok(HttpResponse { status, body })
            }
            Err(ureq::Error::Timeout(_)) => Err(TransportError::Timeout),
            Err(e) => Err(TransportError::Io(e.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheRecord {
    pub kind: ProviderKind,
    pub request: Value,
    pub response: Value,
}

pub fn cache_key(kind: ProviderKind, request: &Value) -> String {
    // serde_json maps are ordered, so this serialization is canonical.
    let canonical = serde_json::to_string(request).expect("JSON values serialize");
    sha256_hex(format!("{}\n{canonical}", kind.as_str()).as_bytes())
}

pub fn cache_path(cache_dir: &Path, kind: ProviderKind, key: &str) -> PathBuf {
    cache_dir.join(kind.as_str()).join(format!("{key}.json"))
}

/// Write a replay fixture (or warm the cache) for one request.
pub fn write_cache_record(cache_dir: &Path, kind: ProviderKind, request: Value, response: Value) -> Result<PathBuf, GatewayError> {
    let key = cache_key(kind, &request);
    let path = cache_path(cache_dir, kind, &key);
    let rec = CacheRecord { kind, request, response };
    write_atomic(&path, serde_json::to_string_pretty(&rec).expect("serializes").as_bytes())?;
    Ok(path)
}

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), GatewayError> {
    let cache_err = |e: std::io::Error| GatewayError::Cache(format!("{}: {e}", path.display()));
    let dir = path.parent().expect("cache files live in a directory");
    fs::create_dir_all(dir).map_err(cache_err)?;
    let tmp = dir.join(format!(
        ".{}.{}.{}.tmp",
        path.file_name().and_then(|n| n.to_str()).unwrap_or("entry"),
        std::process::id(),
        TMP_COUNTER.fetch_add(1, Ordering::Relaxed)
    ));
    fs::write(&tmp, bytes).map_err(cache_err)?;
    fs::rename(&tmp, path).map_err(cache_err)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub prompt: String,
    pub count: u32,
    pub width: u32,
    pub height: u32,
}

impl GenerationRequest {
    pub fn new(prompt: String) -> Self {
        GenerationRequest {
            prompt,
            count: DEFAULT_GENERATION_COUNT,
            width: DEFAULT_GENERATION_SIZE,
            height: DEFAULT_GENERATION_SIZE,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedImage {
    /// Path relative to the cache directory.
    pub image_ref: String,
    pub sha256: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentSource {
    Provider,
    Fallback,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentOutcome {
    pub mask: PixelRegion,
    pub source: SegmentSource,
    pub fault: Option<String>,
}

/// The fixed generation prompt template.
pub fn build_generation_prompt(idea_text: &str, user_suffix: &str) -> Result<String, GatewayError> {
    let idea = idea_text.trim();
    if idea.is_empty() {
        return Err(GatewayError::EmptyIdea);
    }
    let mut p = format!("{GENERATION_STYLE_CLAUSE}. {idea}");
    let suffix = user_suffix.trim();
    if !suffix.is_empty() {
        p.push(' ');
        p.push_str(suffix);
    }
    Ok(p)
}

/// Maps a credential variable name to its value.
pub type CredentialLookup = Box<dyn Fn(&str) -> Option<String> + Send + Sync>;

pub struct Gateway {
    pub config: GatewayConfig,
    transport: Arc<dyn Transport>,
    sleep: Arc<dyn Fn(Duration) + Send + Sync>,
    mock: MockEmbedder,
    network_calls: AtomicU64,
    credentials: CredentialLookup,
}

impl Gateway {
    pub fn new(config: GatewayConfig) -> Self {
        Self::with_transport(config, Arc::new(UreqTransport))
    }

    pub fn with_transport(config: GatewayConfig, transport: Arc<dyn Transport>) -> Self {
        let mock = MockEmbedder::new(config.embed_dim, config.mock_seed);
        Gateway {
            config,
            transport,
            sleep: Arc::new(std::thread::sleep),
            mock,
            network_calls: AtomicU64::new(0),
            credentials: Box::new(|name| std::env::var(name).ok()),
        }
    }

    /// Replace the backoff sleep, e.g. with a recorder in tests.
    pub fn with_sleep(mut self, sleep: Arc<dyn Fn(Duration) + Send + Sync>) -> Self {
        self.sleep = sleep;
        self
    }

    pub fn with_credentials(mut self, lookup: CredentialLookup) -> Self {
        self.credentials = lookup;
        self
    }

    /// Attempts made over the transport so far.
    pub fn network_calls(&self) -> u64 {
        self.network_calls.load(Ordering::SeqCst)
    }

    pub fn mock_embedder(&self) -> &MockEmbedder {
        &self.mock
    }

    /// Cached or live provider reply for `request`. `wire` is what is sent;
    /// it defaults to `request` and may carry bulky data the key leaves out.
    pub fn call(&self, kind: ProviderKind, request: Value, wire: Option<Value>) -> Result<Value, GatewayError> {
        let cfg = self.config.provider(kind);
        cfg.validate()?;
        let key = cache_key(kind, &request);
        let path = cache_path(&cfg.cache_dir, kind, &key);
        if let Ok(bytes) = fs::read(&path) {
            let rec: CacheRecord = serde_json::from_slice(&bytes)
                .map_err(|e| GatewayError::Cache(format!("{}: {e}", path.display())))?;
            return Ok(rec.response);
        }
        if cfg.offline {
            return Err(GatewayError::OfflineMiss(key));
        }
        let endpoint = cfg
            .endpoint
            .as_deref()
            .ok_or(GatewayError::NotConfigured(kind.as_str()))?;
        let body = serde_json::to_vec(wire.as_ref().unwrap_or(&request)).expect("JSON values serialize");
        let credential = (self.credentials)(&cfg.credential_ref);

        let mut last = GatewayError::Transport("no attempt made".into());
        for attempt in 0..=cfg.max_retries {
            if attempt > 0 {
                (self.sleep)(cfg.backoff.saturating_mul(1 << (attempt - 1).min(16)));
            }
            self.network_calls.fetch_add(1, Ordering::SeqCst);
            match self.transport.post_json(endpoint, credential.as_deref(), &body, cfg.timeout) {
                Ok(r) if (200..300).contains(&r.status) => {
                    let response: Value = serde_json::from_slice(&r.body)
                        .map_err(|e| GatewayError::BadReply(e.to_string()))?;
                    write_atomic(
                        &path,
                        serde_json::to_string_pretty(&CacheRecord {
                            kind,
                            request,
                            response: response.clone(),
                        })
                        .expect("serializes")
                        .as_bytes(),
                    )?;
                    return Ok(response);
                }
                Ok(r) if r.status == 408 || r.status == 429 || r.status >= 500 => {
                    last = GatewayError::ProviderError(r.status);
                }
                Ok(r) => return Err(GatewayError::ProviderError(r.status)),
                Err(TransportError::Timeout) => last = GatewayError::Timeout,
                Err(TransportError::Io(e)) => last = GatewayError::Transport(e),
            }
        }
        Err(last)
    }

    pub fn suggest_text(&self, bundle: &PromptBundle) -> Result<String, GatewayError> {
        let request = json!({ "bundle": bundle });
        let reply = self.call(ProviderKind::Text, request, None)?;
        reply
            .get("text")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| GatewayError::BadReply("missing \"text\"".into()))
    }

    /// Generate images and store them under `<cache_dir>/generated/`, named
    /// by content hash.
    pub fn generate_images(&self, req: &GenerationRequest) -> Result<Vec<GeneratedImage>, GatewayError> {
        if req.count == 0 || req.count > MAX_GENERATION_COUNT {
            return Err(GatewayError::InvalidRequest(format!(
                "count must be between 1 and {MAX_GENERATION_COUNT}"
            )));
        }
        if req.prompt.trim().is_empty() {
            return Err(GatewayError::EmptyIdea);
        }
        let request = json!({
            "prompt": req.prompt,
            "n": req.count,
            "size": [req.width, req.height],
        });
        let reply = self.call(ProviderKind::Generate, request, None)?;
        let images = reply
            .get("images")
            .and_then(Value::as_array)
            .ok_or_else(|| GatewayError::BadReply("missing \"images\"".into()))?;
        let dir = &self.config.generate.cache_dir;
        let mut out = Vec::new();
        for img in images {
            let bytes = img
                .as_str()
                .and_then(|s| B64.decode(s).ok())
                .ok_or_else(|| GatewayError::BadReply("image is not base64".into()))?;
            let sha = sha256_hex(&bytes);
            let image_ref = format!("generated/{sha}.png");
            let path = dir.join(&image_ref);
            if !path.exists() {
                write_atomic(&path, &bytes)?;
            }
            out.push(GeneratedImage { image_ref, sha256: sha });
        }
        Ok(out)
    }

    pub fn embed_item(&self, item: EmbedItem<'_>) -> Result<Vec<f64>, GatewayError> {
        let cfg = &self.config.embed;
        if cfg.endpoint.is_none() || (cfg.offline && self.config.mock_when_offline) {
            return Ok(self.mock.embed(item).expect("mock embedder is total"));
        }
        let request = match item {
            EmbedItem::Text(t) => json!({ "text": t }),
            EmbedItem::Image { image_ref, caption } => json!({ "image_ref": image_ref, "caption": caption }),
        };
        let reply = self.call(ProviderKind::Embed, request, None)?;
        let v: Vec<f64> = reply
            .get("embedding")
            .and_then(Value::as_array)
            .ok_or_else(|| GatewayError::BadReply("missing \"embedding\"".into()))?
            .iter()
            .map(|x| x.as_f64().ok_or_else(|| GatewayError::BadReply("non-numeric embedding".into())))
            .collect::<Result<_, _>>()?;
        if v.len() != self.config.embed_dim {
            return Err(GatewayError::DimensionMismatch {
                expected: self.config.embed_dim,
                found: v.len(),
            });
        }
        Ok(v)
    }

    /// Point-prompted segmentation. Any provider fault, or a provider mask
    /// that contradicts a click, routes to the classical fallback.
    pub fn segment(
        &self,
        image_bytes: &[u8],
        binary: &BinaryImage,
        fg: &[Pixel],
        bg: &[Pixel],
    ) -> Result<SegmentOutcome, GatewayError> {
        if fg.is_empty() {
            return Err(GatewayError::SegmentationFailed(SegmentError::NoForegroundPoint));
        }
        let fault = match self.segment_provider(image_bytes, binary, fg, bg) {
            Ok(mask) => {
                return Ok(SegmentOutcome {
                    mask,
                    source: SegmentSource::Provider,
                    fault: None,
                })
            }
            Err(e) => e,
        };
        let mask = segment_by_points(binary, fg, bg).map_err(GatewayError::SegmentationFailed)?;
        Ok(SegmentOutcome {
            mask,
            source: SegmentSource::Fallback,
            fault: Some(fault),
        })
    }

    fn segment_provider(
        &self,
        image_bytes: &[u8],
        binary: &BinaryImage,
        fg: &[Pixel],
        bg: &[Pixel],
    ) -> Result<PixelRegion, String> {
        let pts = |ps: &[Pixel]| ps.iter().map(|p| json!([p.x, p.y])).collect::<Vec<_>>();
        let request = json!({
            "image_sha256": sha256_hex(image_bytes),
            "fg": pts(fg),
            "bg": pts(bg),
        });
        let mut wire = request.clone();
        wire["image_b64"] = Value::String(B64.encode(image_bytes));
        let reply = self
            .call(ProviderKind::Segment, request, Some(wire))
            .map_err(|e| e.to_string())?;
        let pbm = reply
            .get("mask_pbm_b64")
            .and_then(Value::as_str)
            .and_then(|s| B64.decode(s).ok())
            .ok_or("reply has no mask")?;
        let mask = decode_mask_pbm(&pbm).map_err(|e| e.to_string())?;
        if (mask.width(), mask.height()) != (binary.width(), binary.height()) {
            return Err("mask size differs from the image".into());
        }
        let region = mask.foreground_region();
        let fg_ok = fg.iter().all(|p| region.contains(p.x, p.y));
        let bg_ok = bg.iter().all(|p| !region.contains(p.x, p.y));
        if !fg_ok || !bg_ok {
            return Err("provider mask contradicts a click".into());
        }
        Ok(region)
    }
}

impl Embedder for Gateway {
    fn dim(&self) -> usize {
        self.config.embed_dim
    }

    fn embed(&self, item: EmbedItem<'_>) -> Result<Vec<f64>, String> {
        self.embed_item(item).map_err(|e| e.to_string())
    }
}

impl TextProvider for Gateway {
    fn complete(&self, bundle: &PromptBundle) -> Result<String, String> {
        self.suggest_text(bundle).map_err(|e| e.to_string())
    }
}
