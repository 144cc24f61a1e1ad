//! The annotated corpus and the offline suggestion engine.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::taxonomy::{
    FactorTaxonomy, PatternInterpretation, PatternSubcategory, PatternTaxonomy, Region,
    TaxonomyError,
};
use crate::text::tokenize;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub factor: String,
    pub type_name: String,
    pub explanation: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkAnnotation {
    pub work_id: String,
    pub title: String,
    pub region: Region,
    pub image_ref: String,
    /// One entry per factor. Kept as a list so that malformed records with
    /// repeated factors can be represented and reported.
    pub assignments: Vec<Assignment>,
    #[serde(default)]
    pub composite_patterns: Vec<String>,
}

impl WorkAnnotation {
    pub fn type_for(&self, factor: &str) -> Option<&str> {
        self.assignments
            .iter()
            .find(|a| a.factor == factor)
            .map(|a| a.type_name.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Violation {
    MissingFactor(String),
    DuplicateFactor(String),
    UnknownFactor(String),
    UnknownType { factor: String, type_name: String },
}

pub fn validate_annotation(a: &WorkAnnotation, t: &FactorTaxonomy) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    for asg in &a.assignments {
        if t.factor(&asg.factor).is_none() {
            out.push(Violation::UnknownFactor(asg.factor.clone()));
            continue;
        }
        if !seen.insert(asg.factor.as_str()) {
            if !out.contains(&Violation::DuplicateFactor(asg.factor.clone())) {
                out.push(Violation::DuplicateFactor(asg.factor.clone()));
            }
            continue;
        }
        if !t.has_type(&asg.factor, &asg.type_name) {
            out.push(Violation::UnknownType {
                factor: asg.factor.clone(),
                type_name: asg.type_name.clone(),
            });
        }
    }
    for f in &t.factors {
        if !seen.contains(f.name.as_str()) {
            out.push(Violation::MissingFactor(f.name.clone()));
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternAnnotation {
    pub cutout_id: u32,
    pub work_id: String,
    pub subcategory: PatternSubcategory,
    pub pattern_name: String,
    pub geometry_ref: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub work_id: String,
    pub question: String,
    pub answer: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KbError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("work {work_id}: factor {factor:?} has no type {type_name:?}")]
    UnknownType {
        work_id: String,
        factor: String,
        type_name: String,
    },
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("unknown pattern {0:?}")]
    UnknownPattern(String),
    #[error("unknown factor {0:?}")]
    UnknownFactor(String),
    #[error("corpus has no works")]
    EmptyCorpus,
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SuggestionKind {
    Object,
    Pattern,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Suggestion {
    pub kind: SuggestionKind,
    pub name: String,
    pub interpretation: PatternInterpretation,
    pub score: u32,
}

/// Immutable, validated corpus snapshot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeBase {
    factors: FactorTaxonomy,
    patterns: PatternTaxonomy,
    works: Vec<WorkAnnotation>,
    pattern_annotations: Vec<PatternAnnotation>,
    templates: Vec<PromptTemplate>,
}

impl KnowledgeBase {
    pub fn new(
        factors: FactorTaxonomy,
        patterns: PatternTaxonomy,
        works: Vec<WorkAnnotation>,
        pattern_annotations: Vec<PatternAnnotation>,
        templates: Vec<PromptTemplate>,
    ) -> Result<Self, KbError> {
        factors.validate()?;
        patterns.validate()?;

        let mut ids = BTreeSet::new();
        for w in &works {
            if !ids.insert(w.work_id.as_str()) {
                return Err(KbError::DuplicateId(w.work_id.clone()));
            }
            if let Some(v) = validate_annotation(w, &factors).into_iter().next() {
                return Err(match v {
                    Violation::UnknownType { factor, type_name } => KbError::UnknownType {
                        work_id: w.work_id.clone(),
                        factor,
                        type_name,
                    },
                    other => KbError::Schema(alloc::format!("work {}: {:?}", w.work_id, other)),
                });
            }
            for p in &w.composite_patterns {
                match patterns.entry(p) {
                    None => return Err(KbError::UnknownPattern(p.clone())),
                    Some(e) if e.subcategory.category() != crate::taxonomy::PatternCategory::Composite => {
                        return Err(KbError::Schema(alloc::format!(
                            "work {}: {p:?} is not a composite pattern",
                            w.work_id
                        )))
                    }
                    Some(_) => {}
                }
            }
        }

        let mut cut_ids = BTreeSet::new();
        for pa in &pattern_annotations {
            if !ids.contains(pa.work_id.as_str()) {
                return Err(KbError::Schema(alloc::format!(
                    "pattern annotation for unknown work {:?}",
                    pa.work_id
                )));
            }
            if !cut_ids.insert((pa.work_id.as_str(), pa.cutout_id)) {
                return Err(KbError::DuplicateId(alloc::format!(
                    "{}#{}",
                    pa.work_id, pa.cutout_id
                )));
            }
            let entry = patterns
                .entry(&pa.pattern_name)
                .ok_or_else(|| KbError::UnknownPattern(pa.pattern_name.clone()))?;
            if entry.subcategory != pa.subcategory {
                return Err(KbError::Schema(alloc::format!(
                    "{:?} is {}, annotation says {}",
                    pa.pattern_name, entry.subcategory, pa.subcategory
                )));
            }
        }
        for t in &templates {
            if !ids.contains(t.work_id.as_str()) {
                return Err(KbError::Schema(alloc::format!(
                    "prompt template for unknown work {:?}",
                    t.work_id
                )));
            }
        }

        Ok(KnowledgeBase {
            factors,
            patterns,
            works,
            pattern_annotations,
            templates,
        })
    }

    pub fn factors(&self) -> &FactorTaxonomy {
        &self.factors
    }

    pub fn patterns(&self) -> &PatternTaxonomy {
        &self.patterns
    }

    pub fn works(&self) -> &[WorkAnnotation] {
        &self.works
    }

    pub fn work(&self, id: &str) -> Option<&WorkAnnotation> {
        self.works.iter().find(|w| w.work_id == id)
    }

    pub fn pattern_annotations(&self) -> &[PatternAnnotation] {
        &self.pattern_annotations
    }

    pub fn templates(&self) -> &[PromptTemplate] {
        &self.templates
    }

    pub fn interpretation_of(&self, name: &str) -> Result<&PatternInterpretation, KbError> {
        self.patterns
            .interpretation(name)
            .ok_or_else(|| KbError::UnknownPattern(name.into()))
    }

    pub fn region_distribution(&self) -> BTreeMap<Region, usize> {
        let mut out: BTreeMap<Region, usize> = Region::ALL.iter().map(|r| (*r, 0)).collect();
        for w in &self.works {
            *out.get_mut(&w.region).expect("closed enum") += 1;
        }
        out
    }

    /// Pattern names a work contains: its composite patterns plus the
    /// labels of its annotated cut-outs.
    pub fn patterns_of(&self, work_id: &str) -> BTreeSet<&str> {
        let mut out: BTreeSet<&str> = BTreeSet::new();
        if let Some(w) = self.work(work_id) {
            out.extend(w.composite_patterns.iter().map(String::as_str));
        }
        out.extend(
            self.pattern_annotations
                .iter()
                .filter(|p| p.work_id == work_id)
                .map(|p| p.pattern_name.as_str()),
        );
        out
    }

    /// Score of one work against the request: selected factor types it
    /// shares plus distinct keywords found among its explanation tokens.
    pub fn work_score(
        &self,
        work: &WorkAnnotation,
        keywords: &BTreeSet<String>,
        selections: &BTreeMap<String, String>,
    ) -> u32 {
        let matched = selections
            .iter()
            .filter(|(f, t)| work.type_for(f) == Some(t.as_str()))
            .count();
        let tokens: BTreeSet<String> = work
            .assignments
            .iter()
            .flat_map(|a| tokenize(&a.explanation))
            .collect();
        let overlap = keywords.iter().filter(|k| tokens.contains(*k)).count();
        (matched + overlap) as u32
    }

    /// Rank every lexicon entry. An entry scores the best
    /// [`work_score`](Self::work_score) among works containing it, or 0.
    /// Primary composites are objects; everything else is a pattern.
    pub fn suggest(
        &self,
        intent_keywords: &[String],
        selections: &BTreeMap<String, String>,
    ) -> Result<Vec<Suggestion>, KbError> {
        if self.works.is_empty() {
            return Err(KbError::EmptyCorpus);
        }
        if let Some(f) = selections.keys().find(|f| self.factors.factor(f).is_none()) {
            return Err(KbError::UnknownFactor(f.clone()));
        }
        let keywords: BTreeSet<String> =
            intent_keywords.iter().flat_map(|k| tokenize(k)).collect();

        let mut best: BTreeMap<&str, u32> = BTreeMap::new();
        for w in &self.works {
            let s = self.work_score(w, &keywords, selections);
            for p in self.patterns_of(&w.work_id) {
                let e = best.entry(p).or_insert(0);
                *e = (*e).max(s);
            }
        }

        let mut out: Vec<Suggestion> = self
            .patterns
            .lexicon
            .iter()
            .map(|e| Suggestion {
                kind: if e.subcategory == PatternSubcategory::PrimaryComposite {
                    SuggestionKind::Object
                } else {
                    SuggestionKind::Pattern
                },
                name: e.name.clone(),
                interpretation: self
                    .patterns
                    .interpretation(&e.name)
                    .expect("validated taxonomy")
                    .clone(),
                score: best.get(e.name.as_str()).copied().unwrap_or(0),
            })
            .collect();
        out.sort_by(|a, b| b.score.cmp(&a.score).then_with(|| a.name.cmp(&b.name)));
        Ok(out)
    }
}
