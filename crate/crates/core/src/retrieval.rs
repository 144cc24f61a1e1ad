//! Exact cosine top-k retrieval and the recall@k harness.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fmath;
use crate::hash::{fnv1a, SplitMix64};
use crate::text::tokenize;

pub const DEFAULT_K: usize = 20;
pub const DEFAULT_RECALL_KS: [usize; 3] = [1, 5, 10];

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum RetrievalError {
    #[error("vector has zero norm")]
    ZeroVector,
    #[error("vector has a non-finite entry")]
    NonFinite,
    #[error("dimension mismatch for {id:?}: expected {expected}, found {found}")]
    DimensionMismatch {
        id: String,
        expected: usize,
        found: usize,
    },
    #[error("embedder failed on {0:?}")]
    EmbedderFault(String),
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("ground truth {0:?} is not in the index")]
    UnknownGroundTruth(String),
    #[error("no evaluation pairs")]
    EmptyEvaluation,
    #[error("stored build stamp does not match the contents")]
    StampMismatch,
}

pub fn normalize(v: &[f64]) -> Result<Vec<f64>, RetrievalError> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(RetrievalError::NonFinite);
    }
    let norm = fmath::sqrt(v.iter().map(|x| x * x).sum());
    if norm == 0.0 {
        return Err(RetrievalError::ZeroVector);
    }
    Ok(v.iter().map(|x| x / norm).collect())
}

/// Folds from `+0.0` so that orthogonal vectors never score `-0.0`, which
/// would rank below `+0.0` under `total_cmp` and break the id tie rule.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + x * y)
}

/// What an embedder is asked to embed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EmbedItem<'a> {
    Text(&'a str),
    Image { image_ref: &'a str, caption: &'a str },
}

pub trait Embedder {
    fn dim(&self) -> usize;
    fn embed(&self, item: EmbedItem<'_>) -> Result<Vec<f64>, String>;
}

/// Deterministic stand-in for a text/image embedding model: every token
/// seeds a pseudo-random vector, and an item embeds to the normalized sum.
/// Images embed through their caption, or their reference when uncaptioned.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MockEmbedder {
    pub dim: usize,
    pub seed: u64,
}

impl MockEmbedder {
    pub fn new(dim: usize, seed: u64) -> Self {
        MockEmbedder { dim, seed }
    }

    fn text_vector(&self, text: &str) -> Vec<f64> {
        let mut acc = alloc::vec![0.0; self.dim];
        let mut tokens = tokenize(text);
        if tokens.is_empty() {
            tokens.push(String::new());
        }
        for t in &tokens {
            let mut rng = SplitMix64::new(fnv1a(t.as_bytes()) ^ self.seed);
            for a in acc.iter_mut() {
                *a += rng.next_signed_unit();
            }
        }
        normalize(&acc).unwrap_or_else(|_| {
            let mut v = alloc::vec![0.0; self.dim];
            v[0] = 1.0;
            v
        })
    }
}

impl Embedder for MockEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, item: EmbedItem<'_>) -> Result<Vec<f64>, String> {
        Ok(match item {
            EmbedItem::Text(t) => self.text_vector(t),
            EmbedItem::Image { image_ref, caption } => {
                if caption.trim().is_empty() {
                    self.text_vector(image_ref)
                } else {
                    self.text_vector(caption)
                }
            }
        })
    }
}

/// Maps each known query text straight to a fixed vector, typically the
/// stored vector of the query's ground-truth item.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LookupEmbedder {
    pub dim: usize,
    pub table: BTreeMap<String, Vec<f64>>,
    /// Returned for texts missing from the table.
    pub default: Option<Vec<f64>>,
}

impl Embedder for LookupEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, item: EmbedItem<'_>) -> Result<Vec<f64>, String> {
        let key = match item {
            EmbedItem::Text(t) => t,
            EmbedItem::Image { image_ref, .. } => image_ref,
        };
        self.table
            .get(key)
            .or(self.default.as_ref())
            .cloned()
            .ok_or_else(|| alloc::format!("no vector for {key:?}"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexItem {
    pub id: String,
    pub image_ref: String,
    #[serde(default)]
    pub caption: String,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub vector: Vec<f64>,
    pub metadata: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetrievalIndex {
    pub dim: usize,
    pub entries: BTreeMap<String, IndexEntry>,
    /// Hex digest of ids and vector bits; equal stamps mean equal contents.
    pub build_stamp: String,
}

impl RetrievalIndex {
    /// Build from already computed vectors, normalizing each.
    pub fn from_vectors(
        dim: usize,
        items: impl IntoIterator<Item = (String, Vec<f64>, BTreeMap<String, String>)>,
    ) -> Result<Self, RetrievalError> {
        let mut entries = BTreeMap::new();
        for (id, v, metadata) in items {
            if v.len() != dim {
                return Err(RetrievalError::DimensionMismatch {
                    id,
                    expected: dim,
                    found: v.len(),
                });
            }
            let vector = normalize(&v)?;
            if entries.contains_key(&id) {
                return Err(RetrievalError::DuplicateId(id));
            }
            entries.insert(id, IndexEntry { vector, metadata });
        }
        let build_stamp = stamp(dim, &entries);
        Ok(RetrievalIndex {
            dim,
            entries,
            build_stamp,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn vector(&self, id: &str) -> Option<&[f64]> {
        self.entries.get(id).map(|e| e.vector.as_slice())
    }

    /// Recompute the stamp and check every stored invariant.
    pub fn verify(&self) -> Result<(), RetrievalError> {
        for (id, e) in &self.entries {
            if e.vector.len() != self.dim {
                return Err(RetrievalError::DimensionMismatch {
                    id: id.clone(),
                    expected: self.dim,
                    found: e.vector.len(),
                });
            }
            if e.vector.iter().any(|x| !x.is_finite()) {
                return Err(RetrievalError::NonFinite);
            }
            if (dot(&e.vector, &e.vector) - 1.0).abs() > 1e-6 {
                return Err(RetrievalError::ZeroVector);
            }
        }
        if stamp(self.dim, &self.entries) != self.build_stamp {
            return Err(RetrievalError::StampMismatch);
        }
        Ok(())
    }
}

fn stamp(dim: usize, entries: &BTreeMap<String, IndexEntry>) -> String {
    let mut bytes = Vec::new();
    bytes.extend_from_slice(&(dim as u64).to_le_bytes());
    for (id, e) in entries {
        bytes.extend_from_slice(id.as_bytes());
        bytes.push(0);
        for x in &e.vector {
            bytes.extend_from_slice(&x.to_bits().to_le_bytes());
        }
    }
    alloc::format!("{:016x}", fnv1a(&bytes))
}

/// Embed and index every item. Any embedder fault aborts the build.
pub fn build_index(items: &[IndexItem], embedder: &dyn Embedder) -> Result<RetrievalIndex, RetrievalError> {
    let dim = embedder.dim();
    let mut vectors = Vec::with_capacity(items.len());
    for it in items {
        let v = embedder
            .embed(EmbedItem::Image {
                image_ref: &it.image_ref,
                caption: &it.caption,
            })
            .map_err(|_| RetrievalError::EmbedderFault(it.id.clone()))?;
        vectors.push((it.id.clone(), v, it.metadata.clone()));
    }
    RetrievalIndex::from_vectors(dim, vectors)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedResult {
    pub work_id: String,
    pub score: f64,
    pub rank: usize,
}

fn ranking(a: &(f64, &String), b: &(f64, &String)) -> Ordering {
    b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1))
}

/// Top `min(k, len)` entries by cosine similarity, ties by ascending id.
pub fn search(index: &RetrievalIndex, query: &[f64], k: usize) -> Result<Vec<RankedResult>, RetrievalError> {
    if query.len() != index.dim {
        return Err(RetrievalError::DimensionMismatch {
            id: String::from("<query>"),
            expected: index.dim,
            found: query.len(),
        });
    }
    let q = normalize(query)?;
    let mut scored: Vec<(f64, &String)> = index
        .entries
        .iter()
        .map(|(id, e)| (dot(&q, &e.vector), id))
        .collect();
    let k = k.min(scored.len());
    if k == 0 {
        return Ok(Vec::new());
    }
    if k < scored.len() {
        scored.select_nth_unstable_by(k - 1, ranking);
        scored.truncate(k);
    }
    scored.sort_by(ranking);
    Ok(scored
        .into_iter()
        .enumerate()
        .map(|(i, (score, id))| RankedResult {
            work_id: id.clone(),
            score,
            rank: i + 1,
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecallReport {
    pub ks: Vec<usize>,
    pub recall_at: BTreeMap<usize, f64>,
    pub n_queries: usize,
}

/// recall@k: the share of queries whose ground truth is in the top k.
pub fn evaluate_recall(
    index: &RetrievalIndex,
    pairs: &[(String, String)],
    embedder: &dyn Embedder,
    ks: &[usize],
) -> Result<RecallReport, RetrievalError> {
    if pairs.is_empty() {
        return Err(RetrievalError::EmptyEvaluation);
    }
    if let Some((_, gt)) = pairs.iter().find(|(_, gt)| !index.entries.contains_key(gt)) {
        return Err(RetrievalError::UnknownGroundTruth(gt.clone()));
    }
    let max_k = ks.iter().copied().max().unwrap_or(0);
    let mut hits: BTreeMap<usize, usize> = ks.iter().map(|k| (*k, 0)).collect();
    for (query, gt) in pairs {
        let q = embedder
            .embed(EmbedItem::Text(query))
            .map_err(|_| RetrievalError::EmbedderFault(query.clone()))?;
        let top = search(index, &q, max_k)?;
        if let Some(pos) = top.iter().position(|r| &r.work_id == gt) {
            for (k, h) in hits.iter_mut() {
                if pos < *k {
                    *h += 1;
                }
            }
        }
    }
    let n = pairs.len();
    Ok(RecallReport {
        ks: ks.to_vec(),
        recall_at: hits.into_iter().map(|(k, h)| (k, h as f64 / n as f64)).collect(),
        n_queries: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::string::ToString;
    use alloc::vec;

    fn idx(vs: &[(&str, &[f64])]) -> RetrievalIndex {
        RetrievalIndex::from_vectors(
            vs[0].1.len(),
            vs.iter().map(|(id, v)| (id.to_string(), v.to_vec(), BTreeMap::new())),
        )
        .unwrap()
    }

    #[test]
    fn zero_scores_tie_by_id() {
        let index = idx(&[("w00", &[-1.0, -1.0, 0.0, -1.0]), ("w01", &[0.0, 0.0, 0.0, -1.0])]);
        let r = search(&index, &[0.0, 0.0, -1.0, 0.0], 1).unwrap();
        assert_eq!(r[0].work_id, "w00");
        assert_eq!(r[0].score.to_bits(), 0.0f64.to_bits());
    }

    #[test]
    fn normalize_basics() {
        assert_eq!(normalize(&[3.0, 4.0]).unwrap(), [0.6, 0.8]);
        assert_eq!(normalize(&[0.0, 1.0]).unwrap(), [0.0, 1.0]);
        assert_eq!(normalize(&[0.0, 0.0]), Err(RetrievalError::ZeroVector));
        assert_eq!(normalize(&[f64::NAN]), Err(RetrievalError::NonFinite));
    }

    #[test]
    fn exact_match_ranks_first() {
        let i = idx(&[("a", &[1.0, 0.0]), ("b", &[0.6, 0.8]), ("c", &[0.0, 1.0])]);
        let r = search(&i, &[0.6, 0.8], 3).unwrap();
        assert_eq!(r[0].work_id, "b");
        assert!((r[0].score - 1.0).abs() < 1e-12);
        assert_eq!(r.iter().map(|x| x.rank).collect::<Vec<_>>(), [1, 2, 3]);
    }

    #[test]
    fn orthogonal_query_ties_by_id() {
        let i = idx(&[("c", &[1.0, 0.0, 0.0]), ("a", &[0.0, 1.0, 0.0]), ("b", &[1.0, 1.0, 0.0])]);
        let r = search(&i, &[0.0, 0.0, 1.0], 20).unwrap();
        assert_eq!(r.iter().map(|x| x.work_id.as_str()).collect::<Vec<_>>(), ["a", "b", "c"]);
        assert!(r.iter().all(|x| x.score == 0.0));
    }

    #[test]
    fn dimension_mismatch() {
        let i = idx(&[("a", &[1.0, 0.0])]);
        assert!(matches!(search(&i, &[1.0], 1), Err(RetrievalError::DimensionMismatch { .. })));
    }

    #[test]
    fn mock_embedder_is_deterministic_and_separating() {
        let m = MockEmbedder::new(32, 7);
        let a = m.embed(EmbedItem::Text("Magpie on plum")).unwrap();
        assert_eq!(a, m.embed(EmbedItem::Text("magpie, on PLUM")).unwrap());
        assert_ne!(a, m.embed(EmbedItem::Text("dragon boat")).unwrap());
        let img = m.embed(EmbedItem::Image { image_ref: "x.png", caption: "" }).unwrap();
        assert_eq!(img.len(), 32);
        assert!((dot(&a, &a) - 1.0).abs() < 1e-12);
    }

    struct Failing;
    impl Embedder for Failing {
        fn dim(&self) -> usize {
            2
        }
        fn embed(&self, item: EmbedItem<'_>) -> Result<Vec<f64>, String> {
            match item {
                EmbedItem::Image { image_ref: "2.png", .. } => Err("boom".into()),
                _ => Ok(vec![1.0, 0.0]),
            }
        }
    }

    #[test]
    fn embedder_fault_aborts_build() {
        let items: Vec<IndexItem> = (1..=3)
            .map(|i| IndexItem {
                id: i.to_string(),
                image_ref: format!("{i}.png"),
                caption: String::new(),
                metadata: BTreeMap::new(),
            })
            .collect();
        assert_eq!(build_index(&items, &Failing), Err(RetrievalError::EmbedderFault("2".into())));
        assert_eq!(build_index(&[], &Failing).unwrap().len(), 0);
        let ok = build_index(&items, &MockEmbedder::new(8, 1)).unwrap();
        assert_eq!((ok.len(), ok.dim), (3, 8));
        ok.verify().unwrap();
        let mut tampered = ok.clone();
        tampered.entries.get_mut("1").unwrap().vector.reverse();
        assert_eq!(tampered.verify(), Err(RetrievalError::StampMismatch));
    }

    #[test]
    fn recall_with_identity_and_adversarial_embedders() {
        let m = MockEmbedder::new(16, 3);
        let items: Vec<IndexItem> = (0..10)
            .map(|i| IndexItem {
                id: format!("w{i:02}"),
                image_ref: format!("w{i}.png"),
                caption: format!("caption number {i}"),
                metadata: BTreeMap::new(),
            })
            .collect();
        let index = build_index(&items, &m).unwrap();
        let pairs: Vec<(String, String)> =
            (0..10).map(|i| (format!("query {i}"), format!("w{i:02}"))).collect();
        let identity = LookupEmbedder {
            dim: 16,
            table: pairs
                .iter()
                .map(|(q, gt)| (q.clone(), index.vector(gt).unwrap().to_vec()))
                .collect(),
            default: None,
        };
        let r = evaluate_recall(&index, &pairs, &identity, &DEFAULT_RECALL_KS).unwrap();
        assert!(r.recall_at.values().all(|v| *v == 1.0));

        let mut fixed = vec![0.0; 16];
        fixed[0] = 1.0;
        let orthogonal: Vec<(String, Vec<f64>, BTreeMap<String, String>)> = (0..10)
            .map(|i| {
                let mut v = vec![0.0; 16];
                v[1 + i % 15] = 1.0;
                v[(2 + i) % 15 + 1] += 0.5;
                (format!("w{i:02}"), v, BTreeMap::new())
            })
            .collect();
        let index = RetrievalIndex::from_vectors(16, orthogonal).unwrap();
        let adversarial = LookupEmbedder { dim: 16, table: BTreeMap::new(), default: Some(fixed) };
        let r = evaluate_recall(&index, &pairs, &adversarial, &DEFAULT_RECALL_KS).unwrap();
        assert_eq!(r.recall_at[&1], 0.1);
        assert_eq!(r.recall_at[&5], 0.5);
        assert_eq!(r.recall_at[&10], 1.0);
    }

    #[test]
    fn recall_errors() {
        let i = idx(&[("a", &[1.0, 0.0])]);
        let m = MockEmbedder::new(2, 0);
        assert_eq!(evaluate_recall(&i, &[], &m, &[1]), Err(RetrievalError::EmptyEvaluation));
        assert_eq!(
            evaluate_recall(&i, &[("q".into(), "zz".into())], &m, &[1]),
            Err(RetrievalError::UnknownGroundTruth("zz".into()))
        );
    }
}
