//! On-disk corpus layout and record formats.
//!
//! ```text
//! <data_dir>/
//!   taxonomy.json          factors, lexicon and interpretations
//!   annotations/*.jsonl    work annotations, read in file-name order
//!   patterns.jsonl         per-cut-out labels (optional)
//!   templates.jsonl        paired prompt templates (optional)
//!   exemplars.jsonl        labelled descriptors for the classifier (optional)
//!   images/                work images referenced by `image_ref`
//! ```
//!
//! Every `.jsonl` file starts with a header line naming its schema and
//! version, e.g. `{"schema":"jianzhi.annotations","version":1}`.

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use jianzhi_core::classify::Exemplar;
use jianzhi_core::knowledge::{KbError, KnowledgeBase, PatternAnnotation, PromptTemplate, WorkAnnotation};
use jianzhi_core::retrieval::{IndexItem, RetrievalIndex};
use jianzhi_core::taxonomy::{
    FactorTaxonomy, IdeationFactor, LexiconEntry, PatternInterpretation, PatternTaxonomy,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const FORMAT_VERSION: u32 = 1;
pub const ANNOTATIONS_SCHEMA: &str = "jianzhi.annotations";
pub const PATTERNS_SCHEMA: &str = "jianzhi.patterns";
pub const TEMPLATES_SCHEMA: &str = "jianzhi.templates";
pub const EXEMPLARS_SCHEMA: &str = "jianzhi.exemplars";
pub const TAXONOMY_SCHEMA: &str = "jianzhi.taxonomy";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Schema {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Kb(#[from] KbError),
}

impl CorpusError {
    /// Short machine-readable name of the error class.
    pub fn kind(&self) -> &'static str {
        match self {
            CorpusError::Io { .. } => "Io",
            CorpusError::Schema { .. } => "SchemaError",
            CorpusError::Kb(KbError::UnknownType { .. }) => "UnknownType",
            CorpusError::Kb(KbError::DuplicateId(_)) => "DuplicateId",
            CorpusError::Kb(_) => "SchemaError",
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaHeader {
    pub schema: String,
    pub version: u32,
}

/// Read a headed JSON-lines file. Blank lines are skipped.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path, schema: &str) -> Result<Vec<T>, CorpusError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let schema_err = |line: usize, message: String| CorpusError::Schema {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut out = Vec::new();
    let mut header_seen = false;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        if !header_seen {
            let h: SchemaHeader = serde_json::from_str(&line)
                .map_err(|e| schema_err(i + 1, format!("bad schema header: {e}")))?;
            if h.schema != schema || h.version != FORMAT_VERSION {
                return Err(schema_err(
                    i + 1,
                    format!("expected {schema} v{FORMAT_VERSION}, found {} v{}", h.schema, h.version),
                ));
            }
            header_seen = true;
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| schema_err(i + 1, e.to_string()))?);
    }
    if !header_seen {
        return Err(schema_err(1, "missing schema header".into()));
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, schema: &str, records: &[T]) -> Result<(), CorpusError> {
    let mut s = serde_json::to_string(&SchemaHeader {
        schema: schema.into(),
        version: FORMAT_VERSION,
    })
    .expect("header serializes");
    s.push('\n');
    for r in records {
        s.push_str(&serde_json::to_string(r).expect("record serializes"));
        s.push('\n');
    }
    fs::write(path, s).map_err(io_err(path))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaxonomyFile {
    pub schema: String,
    pub version: u32,
    pub factors: Vec<IdeationFactor>,
    pub lexicon: Vec<LexiconEntry>,
    pub interpretations: Vec<PatternInterpretation>,
}

pub fn load_taxonomy(path: &Path) -> Result<(FactorTaxonomy, PatternTaxonomy), CorpusError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let schema_err = |message: String| CorpusError::Schema {
        path: path.to_path_buf(),
        line: 0,
        message,
    };
    let file: TaxonomyFile = serde_json::from_str(&text).map_err(|e| schema_err(e.to_string()))?;
    if file.schema != TAXONOMY_SCHEMA || file.version != FORMAT_VERSION {
        return Err(schema_err(format!(
            "expected {TAXONOMY_SCHEMA} v{FORMAT_VERSION}, found {} v{}",
            file.schema, file.version
        )));
    }
    let factors = FactorTaxonomy::new(file.factors).map_err(|e| schema_err(e.to_string()))?;
    let patterns =
        PatternTaxonomy::new(file.lexicon, file.interpretations).map_err(|e| schema_err(e.to_string()))?;
    Ok((factors, patterns))
}

fn optional_jsonl<T: DeserializeOwned>(path: &Path, schema: &str) -> Result<Vec<T>, CorpusError> {
    if path.exists() {
        read_jsonl(path, schema)
    } else {
        Ok(Vec::new())
    }
}

/// Load and validate a corpus directory.
pub fn load_corpus(data_dir: &Path) -> Result<KnowledgeBase, CorpusError> {
    let (factors, patterns) = load_taxonomy(&data_dir.join("taxonomy.json"))?;

    let ann_dir = data_dir.join("annotations");
    let mut works: Vec<WorkAnnotation> = Vec::new();
    if ann_dir.exists() {
        let mut files: Vec<PathBuf> = fs::read_dir(&ann_dir)
            .map_err(io_err(&ann_dir))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        files.sort();
        for f in files {
            works.extend(read_jsonl::<WorkAnnotation>(&f, ANNOTATIONS_SCHEMA)?);
        }
    }
    let pattern_annotations: Vec<PatternAnnotation> =
        optional_jsonl(&data_dir.join("patterns.jsonl"), PATTERNS_SCHEMA)?;
    let templates: Vec<PromptTemplate> = optional_jsonl(&data_dir.join("templates.jsonl"), TEMPLATES_SCHEMA)?;
    Ok(KnowledgeBase::new(factors, patterns, works, pattern_annotations, templates)?)
}

pub fn load_exemplars(data_dir: &Path) -> Result<Vec<Exemplar>, CorpusError> {
    optional_jsonl(&data_dir.join("exemplars.jsonl"), EXEMPLARS_SCHEMA)
}

/// A query paired with the work it should retrieve.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalPair {
    pub query: String,
    pub gt: String,
}

/// Plain JSON lines without a header, one pair per line.
pub fn load_eval_pairs(path: &Path) -> Result<Vec<EvalPair>, CorpusError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| CorpusError::Schema {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// The text an index stores for a work: title, composite patterns and
/// annotation explanations.
pub fn caption_of(work: &WorkAnnotation) -> String {
    let mut parts = vec![work.title.clone()];
    parts.extend(work.composite_patterns.iter().cloned());
    parts.extend(work.assignments.iter().map(|a| a.explanation.clone()));
    parts.join(". ")
}

pub fn index_items(kb: &KnowledgeBase) -> Vec<IndexItem> {
    kb.works()
        .iter()
        .map(|w| IndexItem {
            id: w.work_id.clone(),
            image_ref: w.image_ref.clone(),
            caption: caption_of(w),
            metadata: [
                ("title".to_string(), w.title.clone()),
                ("region".to_string(), w.region.as_str().to_string()),
                ("image_ref".to_string(), w.image_ref.clone()),
            ]
            .into_iter()
            .collect(),
        })
        .collect()
}

pub const INDEX_FORMAT: &str = "jianzhi.index";

/// How an index was embedded, so queries can be embedded the same way.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EmbedderInfo {
    Mock { dim: usize, seed: u64 },
    Provider { endpoint: String, dim: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexFile {
    pub format: String,
    pub version: u32,
    pub embedder: EmbedderInfo,
    pub index: RetrievalIndex,
}

impl IndexFile {
    pub fn new(embedder: EmbedderInfo, index: RetrievalIndex) -> Self {
        IndexFile {
            format: INDEX_FORMAT.into(),
            version: FORMAT_VERSION,
            embedder,
            index,
        }
    }
}

pub fn write_index(path: &Path, file: &IndexFile) -> Result<(), CorpusError> {
    let text = serde_json::to_string(file).expect("index serializes");
    fs::write(path, text + "\n").map_err(io_err(path))
}

/// Read an index file and verify its vectors against the stored stamp.
pub fn read_index(path: &Path) -> Result<IndexFile, CorpusError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let schema_err = |message: String| CorpusError::Schema {
        path: path.to_path_buf(),
        line: 0,
        message,
    };
    let file: IndexFile = serde_json::from_str(&text).map_err(|e| schema_err(e.to_string()))?;
    if file.format != INDEX_FORMAT || file.version != FORMAT_VERSION {
        return Err(schema_err(format!(
            "expected {INDEX_FORMAT} v{FORMAT_VERSION}, found {} v{}",
            file.format, file.version
        )));
    }
    file.index.verify().map_err(|e| schema_err(e.to_string()))?;
    Ok(file)
}
