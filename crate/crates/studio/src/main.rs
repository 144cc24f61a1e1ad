use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use jianzhi_core::classify::DEFAULT_K as CLASSIFY_K;
use jianzhi_core::cutout::DEFAULT_MIN_AREA;
use jianzhi_core::retrieval::{
    build_index, evaluate_recall, search, EmbedItem, Embedder, LookupEmbedder, MockEmbedder, RetrievalError,
    DEFAULT_K, DEFAULT_RECALL_KS,
};
use jianzhi_core::taxonomy::PatternCategory;
use jianzhi_studio::corpus::{
    index_items, load_corpus, load_eval_pairs, load_exemplars, read_index, write_index, CorpusError, EmbedderInfo,
    IndexFile,
};
use jianzhi_studio::gateway::{Gateway, GatewayConfig, GatewayError};
use jianzhi_studio::imaging::{encode_mask_pbm, load_gray, sha256_hex};
use jianzhi_studio::pipeline::{binarize_default, extract_patterns};
use jianzhi_studio::service::{serve, ServiceConfig, Studio};
use jianzhi_studio::session::{load_session, SessionError};
use jianzhi_studio::svg::{export_svg, ExportOptions, SvgError};
use serde_json::{json, Value};

/// Paper-cutting design studio: corpus tools, retrieval index and the HTTP
/// service. Provider settings come from the HC_* environment variables.
#[derive(Parser)]
#[command(name = "jianzhi", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Corpus directory (default: $HC_DATA_DIR, then ./data).
    #[arg(long)]
    data: Option<PathBuf>,
}

impl DataArgs {
    fn dir(&self) -> PathBuf {
        self.data
            .clone()
            .or_else(|| std::env::var_os("HC_DATA_DIR").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("data"))
    }
}

#[derive(Args, Clone)]
struct GatewayArgs {
    /// Never contact providers; use caches and the mock embedder.
    #[arg(long)]
    offline: bool,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
}

impl GatewayArgs {
    fn config(&self) -> GatewayConfig {
        let mut c = GatewayConfig::from_env(|k| std::env::var(k).ok());
        if let Some(d) = &self.cache_dir {
            for k in jianzhi_studio::gateway::ProviderKind::ALL {
                c.provider_mut(k).cache_dir = d.clone();
            }
        }
        if self.offline {
            c.set_offline(true);
        }
        c
    }
}

#[derive(Subcommand)]
enum Command {
    /// Validate a corpus directory and print its statistics.
    Ingest {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Extract cut-outs from work images into PBM masks and a manifest.
    ExtractPatterns {
        #[command(flatten)]
        data: DataArgs,
        /// Only this work (default: every work in the corpus).
        #[arg(long)]
        work: Option<String>,
        /// Process a single image file instead of corpus works.
        #[arg(long, requires = "work")]
        image: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MIN_AREA)]
        min_area: usize,
        #[arg(long, default_value_t = CLASSIFY_K)]
        k: usize,
    },
    /// Build or query the retrieval index.
    Index {
        #[command(subcommand)]
        command: IndexCommand,
    },
    /// Rank indexed works against a text query.
    Search(SearchArgs),
    /// Measure recall@k of an index over query/ground-truth pairs.
    EvalRecall {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long, num_args = 1.., value_delimiter = ',', default_values_t = DEFAULT_RECALL_KS)]
        ks: Vec<usize>,
        /// Embed each query as its ground truth's stored vector.
        #[arg(long)]
        identity: bool,
        #[command(flatten)]
        gateway: GatewayArgs,
    },
    /// Run the HTTP service.
    Serve {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        gateway: GatewayArgs,
        /// Listen address (default: $HC_LISTEN, then 127.0.0.1:8640).
        #[arg(long)]
        listen: Option<String>,
        #[arg(long)]
        sessions: Option<PathBuf>,
        #[arg(long)]
        index: Option<PathBuf>,
        #[arg(long)]
        k_retrieve: Option<usize>,
    },
    /// Export a saved session's board as SVG.
    Export {
        #[arg(long)]
        session: PathBuf,
        /// Output file (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        mm_per_unit: Option<f64>,
    },
}

#[derive(Subcommand)]
enum IndexCommand {
    Build {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        gateway: GatewayArgs,
        #[arg(long)]
        out: PathBuf,
    },
    Search(SearchArgs),
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    query: String,
    #[arg(short, long, default_value_t = DEFAULT_K)]
    k: usize,
    #[command(flatten)]
    gateway: GatewayArgs,
}

fn error_kind(e: &anyhow::Error) -> String {
    if let Some(c) = e.downcast_ref::<CorpusError>() {
        return c.kind().into();
    }
    if let Some(g) = e.downcast_ref::<GatewayError>() {
        return g.kind().into();
    }
    if let Some(r) = e.downcast_ref::<RetrievalError>() {
        return variant(r);
    }
    if let Some(s) = e.downcast_ref::<SessionError>() {
        return match s {
            SessionError::Stale { .. } => "StaleVersion".into(),
            SessionError::Board(b) => variant(b),
            SessionError::NothingToUndo => "NothingToUndo".into(),
            SessionError::CorruptSession(_) => "CorruptSession".into(),
            SessionError::Io(_) => "Io".into(),
        };
    }
    if let Some(s) = e.downcast_ref::<SvgError>() {
        return match s {
            SvgError::UnsupportedFeature(_) => "UnsupportedFeature".into(),
            _ => "SvgError".into(),
        };
    }
    if e.downcast_ref::<std::io::Error>().is_some() {
        return "Io".into();
    }
    "Error".into()
}

fn variant<E: serde::Serialize>(e: &E) -> String {
    match serde_json::to_value(e) {
        Ok(Value::String(s)) => s,
        Ok(Value::Object(m)) => m.keys().next().cloned().unwrap_or_default(),
        _ => "Error".into(),
    }
}

/// A closed stdout (e.g. piped into `head`) is not an error.
fn print(v: &Value) {
    let text = serde_json::to_string_pretty(v).expect("JSON values serialize");
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn embedder_info(g: &Gateway) -> EmbedderInfo {
    let c = &g.config;
    match &c.embed.endpoint {
        Some(endpoint) if !(c.embed.offline && c.mock_when_offline) => EmbedderInfo::Provider {
            endpoint: endpoint.clone(),
            dim: c.embed_dim,
        },
        _ => EmbedderInfo::Mock {
            dim: c.embed_dim,
            seed: c.mock_seed,
        },
    }
}

/// The embedder an index was built with.
fn query_embedder(info: &EmbedderInfo, args: &GatewayArgs) -> Box<dyn Embedder> {
    match info {
        EmbedderInfo::Mock { dim, seed } => Box::new(MockEmbedder::new(*dim, *seed)),
        EmbedderInfo::Provider { endpoint, dim } => {
            let mut c = args.config();
            c.embed.endpoint = Some(endpoint.clone());
            c.embed_dim = *dim;
            c.mock_when_offline = false;
            Box::new(Gateway::new(c))
        }
    }
}

fn ingest(data: &Path) -> anyhow::Result<Value> {
    let kb = load_corpus(data)?;
    let exemplars = load_exemplars(data)?;
    let regions: BTreeMap<&str, usize> = kb
        .region_distribution()
        .into_iter()
        .map(|(r, n)| (r.as_str(), n))
        .collect();
    Ok(json!({
        "works": kb.works().len(),
        "regions": regions,
        "factors": kb.factors().factors.len(),
        "types": kb.factors().type_count(),
        "lexicon": {
            "unit": kb.patterns().count(PatternCategory::Unit),
            "composite": kb.patterns().count(PatternCategory::Composite),
        },
        "pattern_labels": kb.pattern_annotations().len(),
        "templates": kb.templates().len(),
        "exemplars": exemplars.len(),
    }))
}

fn extract_one(
    work_id: &str,
    image: &Path,
    out: &Path,
    min_area: usize,
    k: usize,
    exemplars: &[jianzhi_core::classify::Exemplar],
) -> anyhow::Result<Value> {
    let mask = binarize_default(&load_gray(image)?);
    let (manifest, cutouts) = extract_patterns(work_id, &mask, min_area, exemplars, k);
    let dir = out.join(work_id);
    fs::create_dir_all(&dir).with_context(|| dir.display().to_string())?;
    for c in &cutouts {
        let (local, _, _) = c.region.to_local_bitmap(0).expect("cut-outs are non-empty");
        fs::write(dir.join(format!("cutout-{:04}.pbm", c.cutout_id)), encode_mask_pbm(&local))?;
    }
    let text = serde_json::to_string_pretty(&manifest)? + "\n";
    fs::write(dir.join("manifest.json"), &text)?;
    Ok(json!({
        "work_id": work_id,
        "cutouts": manifest.cutouts.len(),
        "manifest_sha256": sha256_hex(text.as_bytes()),
    }))
}

fn run_search(args: &SearchArgs) -> anyhow::Result<Value> {
    let file = read_index(&args.index)?;
    let embedder = query_embedder(&file.embedder, &args.gateway);
    let q = embedder
        .embed(EmbedItem::Text(&args.query))
        .map_err(|_| RetrievalError::EmbedderFault(args.query.clone()))?;
    Ok(serde_json::to_value(search(&file.index, &q, args.k)?)?)
}

fn run(cli: Cli) -> anyhow::Result<Option<Value>> {
    match cli.command {
        Command::Ingest { data } => ingest(&data.dir()).map(Some),
        Command::ExtractPatterns {
            data,
            work,
            image,
            out,
            min_area,
            k,
        } => {
            anyhow::ensure!(min_area >= 1, "min-area must be at least 1");
            let dir = data.dir();
            let exemplars = if dir.join("exemplars.jsonl").exists() {
                load_exemplars(&dir)?
            } else {
                Vec::new()
            };
            let mut reports = Vec::new();
            if let Some(image) = image {
                let id = work.expect("clap enforces --work with --image");
                reports.push(extract_one(&id, &image, &out, min_area, k, &exemplars)?);
            } else {
                let kb = load_corpus(&dir)?;
                let works: Vec<_> = match &work {
                    Some(id) => vec![kb.work(id).ok_or_else(|| anyhow::anyhow!("no work {id:?}"))?],
                    None => kb.works().iter().collect(),
                };
                for w in works {
                    reports.push(extract_one(&w.work_id, &dir.join(&w.image_ref), &out, min_area, k, &exemplars)?);
                }
            }
            Ok(Some(Value::Array(reports)))
        }
        Command::Index {
            command: IndexCommand::Build { data, gateway, out },
        } => {
            let kb = load_corpus(&data.dir())?;
            let g = Gateway::new(gateway.config());
            let index = build_index(&index_items(&kb), &g)?;
            let file = IndexFile::new(embedder_info(&g), index);
            write_index(&out, &file)?;
            Ok(Some(json!({
                "entries": file.index.len(),
                "dim": file.index.dim,
                "build_stamp": file.index.build_stamp,
                "sha256": sha256_hex(&fs::read(&out)?),
            })))
        }
        Command::Index {
            command: IndexCommand::Search(args),
        }
        | Command::Search(args) => run_search(&args).map(Some),
        Command::EvalRecall {
            index,
            pairs,
            ks,
            identity,
            gateway,
        } => {
            anyhow::ensure!(ks.iter().all(|k| *k >= 1), "every k must be at least 1");
            let file = read_index(&index)?;
            let pairs: Vec<(String, String)> = load_eval_pairs(&pairs)?.into_iter().map(|p| (p.query, p.gt)).collect();
            let embedder: Box<dyn Embedder> = if identity {
                Box::new(LookupEmbedder {
                    dim: file.index.dim,
                    table: pairs
                        .iter()
                        .filter_map(|(q, gt)| file.index.vector(gt).map(|v| (q.clone(), v.to_vec())))
                        .collect(),
                    default: None,
                })
            } else {
                query_embedder(&file.embedder, &gateway)
            };
            Ok(Some(serde_json::to_value(evaluate_recall(&file.index, &pairs, embedder.as_ref(), &ks)?)?))
        }
        Command::Serve {
            data,
            gateway,
            listen,
            sessions,
            index,
            k_retrieve,
        } => {
            let mut config = ServiceConfig::from_env(|k| std::env::var(k).ok());
            config.data_dir = data.dir();
            config.gateway = gateway.config();
            if let Some(l) = listen {
                config.listen = l;
            }
            if sessions.is_some() {
                config.session_dir = sessions;
            }
            config.index_path = index;
            if let Some(k) = k_retrieve {
                config.k_retrieve = k;
            }
            let listen = config.listen.clone();
            let studio = Arc::new(Studio::open(config)?);
            tokio::runtime::Runtime::new()?.block_on(serve(studio, &listen))?;
            Ok(None)
        }
        Command::Export {
            session,
            out,
            mm_per_unit,
        } => {
            anyhow::ensure!(
                mm_per_unit.map_or(true, |m| m > 0.0 && m.is_finite()),
                "mm-per-unit must be positive"
            );
            let s = load_session(&session)?;
            let svg = export_svg(&s.board, ExportOptions { mm_per_unit });
            match out {
                Some(p) => {
                    fs::write(&p, &svg)?;
                    Ok(Some(json!({ "out": p, "sha256": sha256_hex(svg.as_bytes()) })))
                }
                None => {
                    let _ = std::io::stdout().lock().write_all(svg.as_bytes());
                    Ok(None)
                }
            }
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(Some(v)) => {
            print(&v);
            ExitCode::SUCCESS
        }
        Ok(None) => ExitCode::SUCCESS,
        Err(e) => {
            let body = json!({ "error": error_kind(&e), "message": format!("{e:#}") });
            eprintln!("{}", serde_json::to_string(&body).expect("JSON values serialize"));
            ExitCode::FAILURE
        }
    }
}
