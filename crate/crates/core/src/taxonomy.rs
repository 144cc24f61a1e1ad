//! Ideation-factor and pattern taxonomies.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const FACTOR_NAMES: [&str; 4] = ["Function", "Subject Matter", "Style", "Method of Expression"];
pub const TYPE_COUNT: usize = 18;
/// Subcategory of the single-level factors (Style, Method of Expression).
pub const NO_SUBCATEGORY: &str = "-";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TaxonomyError {
    #[error("factor names must be exactly {FACTOR_NAMES:?}, found {0:?}")]
    FactorSet(Vec<String>),
    #[error("expected {TYPE_COUNT} types in total, found {0}")]
    TypeCount(usize),
    #[error("duplicate type {type_name:?} in factor {factor:?}")]
    DuplicateType { factor: String, type_name: String },
    #[error("type {type_name:?} of factor {factor:?} has unknown subcategory {subcategory:?}")]
    UnknownSubcategory {
        factor: String,
        type_name: String,
        subcategory: String,
    },
    #[error("{subcategory} must have {expected} lexicon entries, found {found}")]
    LexiconCount {
        subcategory: PatternSubcategory,
        expected: usize,
        found: usize,
    },
    #[error("duplicate lexicon name {0:?}")]
    DuplicatePattern(String),
    #[error("duplicate interpretation id {0:?}")]
    DuplicateInterpretation(String),
    #[error("pattern {pattern:?} refers to missing interpretation {interpretation_id:?}")]
    MissingInterpretation {
        pattern: String,
        interpretation_id: String,
    },
    #[error("interpretation {interpretation_id:?} names {found:?} but is attached to {pattern:?}")]
    InterpretationMismatch {
        pattern: String,
        interpretation_id: String,
        found: String,
    },
    #[error("interpretation of {pattern:?} combines with unknown pattern {other:?}")]
    UnknownCombination { pattern: String, other: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeDef {
    pub name: String,
    pub subcategory: String,
    pub definition: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub example_work_id: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdeationFactor {
    pub name: String,
    pub subcategories: Vec<String>,
    pub types: Vec<TypeDef>,
}

impl IdeationFactor {
    pub fn type_named(&self, name: &str) -> Option<&TypeDef> {
        self.types.iter().find(|t| t.name == name)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorTaxonomy {
    pub factors: Vec<IdeationFactor>,
}

impl FactorTaxonomy {
    pub fn new(factors: Vec<IdeationFactor>) -> Result<Self, TaxonomyError> {
        let t = FactorTaxonomy { factors };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), TaxonomyError> {
        let names: BTreeSet<&str> = self.factors.iter().map(|f| f.name.as_str()).collect();
        let expected: BTreeSet<&str> = FACTOR_NAMES.into_iter().collect();
        if names != expected || self.factors.len() != FACTOR_NAMES.len() {
            return Err(TaxonomyError::FactorSet(
                self.factors.iter().map(|f| f.name.clone()).collect(),
            ));
        }
        let total: usize = self.factors.iter().map(|f| f.types.len()).sum();
        if total != TYPE_COUNT {
            return Err(TaxonomyError::TypeCount(total));
        }
        for f in &self.factors {
            let mut seen = BTreeSet::new();
            for t in &f.types {
                if !seen.insert(t.name.as_str()) {
                    return Err(TaxonomyError::DuplicateType {
                        factor: f.name.clone(),
                        type_name: t.name.clone(),
                    });
                }
                if !f.subcategories.contains(&t.subcategory) {
                    return Err(TaxonomyError::UnknownSubcategory {
                        factor: f.name.clone(),
                        type_name: t.name.clone(),
                        subcategory: t.subcategory.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn factor(&self, name: &str) -> Option<&IdeationFactor> {
        self.factors.iter().find(|f| f.name == name)
    }

    pub fn has_type(&self, factor: &str, type_name: &str) -> bool {
        self.factor(factor)
            .is_some_and(|f| f.type_named(type_name).is_some())
    }

    pub fn type_count(&self) -> usize {
        self.factors.iter().map(|f| f.types.len()).sum()
    }
}

fn type_def(name: &str, subcategory: &str, definition: &str) -> TypeDef {
    TypeDef {
        name: name.into(),
        subcategory: subcategory.into(),
        definition: definition.into(),
        example_work_id: None,
    }
}

/// The 4-factor, 18-type ideation taxonomy with its published definitions.
pub fn reference_factor_taxonomy() -> FactorTaxonomy {
    let spiritual = "Spiritual Function";
    let practical = "Practical Function";
    let traditional = "Traditional Subject Matter";
    let innovative = "Innovative Subject Matter";
    let factors = alloc::vec![
        IdeationFactor {
            name: "Function".into(),
            subcategories: alloc::vec![spiritual.into(), practical.into()],
            types: alloc::vec![
                type_def("Witchcraft Belief", spiritual, "Serve as a symbol in witchcraft activities, embodying related beliefs and rituals"),
                type_def("Indigenous Belief", spiritual, "Reflect unique local belief systems as a form of cultural expression"),
                type_def("Religious Belief", spiritual, "Act as a symbol in religious ceremonies or doctrines, conveying religious content"),
                type_def("Cultural Dissemination", spiritual, "Serve as an medium to disseminate culture and historical information"),
                type_def("Interpersonal Communication", practical, "Act as a medium in social etiquette settings in interpersonal communication"),
                type_def("Festive Atmosphere Evoking", practical, "Enhance the atmosphere and cultural features in holiday or seasonal celebrations"),
                type_def("Daily Decoration", practical, "Serve as decorative items in daily life"),
            ],
        },
        IdeationFactor {
            name: "Subject Matter".into(),
            subcategories: alloc::vec![traditional.into(), innovative.into()],
            types: alloc::vec![
                type_def("Primitive Paper-cutting", traditional, "Present paper-cutting by initial form in history"),
                type_def("Flora and Fauna", traditional, "Present paper-cutting by animals and plants"),
                type_def("Landscape", traditional, "Present paper-cutting about natural and cultural landscapes"),
                type_def("Historical Figure and Story", traditional, "Present paper-cutting centered around stories of characters"),
                type_def("Folk Life", traditional, "Present paper-cutting about traditional customs and culture"),
                type_def("Contemporary Subject", innovative, "Paper-cutting integrated with modern subjects"),
            ],
        },
        IdeationFactor {
            name: "Style".into(),
            subcategories: alloc::vec![NO_SUBCATEGORY.into()],
            types: alloc::vec![
                type_def("Abstract Style", NO_SUBCATEGORY, "Express ideas with non-representational forms by paper-cutting"),
                type_def("Realistic Style", NO_SUBCATEGORY, "Replicate real objects and scenes by paper-cutting"),
            ],
        },
        IdeationFactor {
            name: "Method of Expression".into(),
            subcategories: alloc::vec![NO_SUBCATEGORY.into()],
            types: alloc::vec![
                type_def("Metaphor", NO_SUBCATEGORY, "Use similar or related content to indirectly express meaning or emotion"),
                type_def("Symbolism", NO_SUBCATEGORY, "Use specific content to represent theme"),
                type_def("Homophony", NO_SUBCATEGORY, "Use similarity of pronunciation to embed positive wishes into specific objects"),
            ],
        },
    ];
    FactorTaxonomy { factors }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PatternCategory {
    #[serde(rename = "Unit Pattern")]
    Unit,
    #[serde(rename = "Composite Pattern")]
    Composite,
}

impl PatternCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            PatternCategory::Unit => "Unit Pattern",
            PatternCategory::Composite => "Composite Pattern",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PatternSubcategory {
    #[serde(rename = "Geometric Unit")]
    GeometricUnit,
    #[serde(rename = "Semantic Unit")]
    SemanticUnit,
    #[serde(rename = "Sawtooth")]
    Sawtooth,
    #[serde(rename = "Primary Composite")]
    PrimaryComposite,
    #[serde(rename = "Decorative Composite")]
    DecorativeComposite,
}

impl PatternSubcategory {
    pub const ALL: [PatternSubcategory; 5] = [
        PatternSubcategory::GeometricUnit,
        PatternSubcategory::SemanticUnit,
        PatternSubcategory::Sawtooth,
        PatternSubcategory::PrimaryComposite,
        PatternSubcategory::DecorativeComposite,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PatternSubcategory::GeometricUnit => "Geometric Unit",
            PatternSubcategory::SemanticUnit => "Semantic Unit",
            PatternSubcategory::Sawtooth => "Sawtooth",
            PatternSubcategory::PrimaryComposite => "Primary Composite",
            PatternSubcategory::DecorativeComposite => "Decorative Composite",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.as_str() == s)
    }

    pub fn category(self) -> PatternCategory {
        match self {
            PatternSubcategory::GeometricUnit
            | PatternSubcategory::SemanticUnit
            | PatternSubcategory::Sawtooth => PatternCategory::Unit,
            _ => PatternCategory::Composite,
        }
    }

    /// Number of lexicon entries the taxonomy defines for this subcategory.
    pub fn lexicon_size(self) -> usize {
        match self {
            PatternSubcategory::GeometricUnit => 8,
            PatternSubcategory::SemanticUnit => 12,
            PatternSubcategory::Sawtooth => 5,
            PatternSubcategory::PrimaryComposite => 34,
            PatternSubcategory::DecorativeComposite => 8,
        }
    }
}

impl fmt::Display for PatternSubcategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Where a lexicon name comes from: the published pattern discussion, or
/// a stand-in chosen by this project to fill the published counts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NameSource {
    Paper,
    Project,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub name: String,
    pub subcategory: PatternSubcategory,
    pub interpretation_id: String,
    pub source: NameSource,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternInterpretation {
    pub id: String,
    pub pattern_name: String,
    pub meaning: String,
    pub structure_notes: String,
    pub common_combinations: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternTaxonomy {
    pub lexicon: Vec<LexiconEntry>,
    pub interpretations: Vec<PatternInterpretation>,
}

impl PatternTaxonomy {
    pub fn new(
        lexicon: Vec<LexiconEntry>,
        interpretations: Vec<PatternInterpretation>,
    ) -> Result<Self, TaxonomyError> {
        let t = PatternTaxonomy {
            lexicon,
            interpretations,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), TaxonomyError> {
        for sub in PatternSubcategory::ALL {
            let found = self.lexicon.iter().filter(|e| e.subcategory == sub).count();
            if found != sub.lexicon_size() {
                return Err(TaxonomyError::LexiconCount {
                    subcategory: sub,
                    expected: sub.lexicon_size(),
                    found,
                });
            }
        }
        let mut names = BTreeSet::new();
        for e in &self.lexicon {
            if !names.insert(e.name.as_str()) {
                return Err(TaxonomyError::DuplicatePattern(e.name.clone()));
            }
        }
        let mut ids = BTreeSet::new();
        for i in &self.interpretations {
            if !ids.insert(i.id.as_str()) {
                return Err(TaxonomyError::DuplicateInterpretation(i.id.clone()));
            }
            for other in &i.common_combinations {
                if !names.contains(other.as_str()) {
                    return Err(TaxonomyError::UnknownCombination {
                        pattern: i.pattern_name.clone(),
                        other: other.clone(),
                    });
                }
            }
        }
        for e in &self.lexicon {
            let Some(i) = self.interpretations.iter().find(|i| i.id == e.interpretation_id) else {
                return Err(TaxonomyError::MissingInterpretation {
                    pattern: e.name.clone(),
                    interpretation_id: e.interpretation_id.clone(),
                });
            };
            if i.pattern_name != e.name {
                return Err(TaxonomyError::InterpretationMismatch {
                    pattern: e.name.clone(),
                    interpretation_id: e.interpretation_id.clone(),
                    found: i.pattern_name.clone(),
                });
            }
        }
        Ok(())
    }

    pub fn entry(&self, name: &str) -> Option<&LexiconEntry> {
        self.lexicon.iter().find(|e| e.name == name)
    }

    pub fn interpretation(&self, name: &str) -> Option<&PatternInterpretation> {
        let e = self.entry(name)?;
        self.interpretations.iter().find(|i| i.id == e.interpretation_id)
    }

    pub fn count(&self, category: PatternCategory) -> usize {
        self.lexicon
            .iter()
            .filter(|e| e.subcategory.category() == category)
            .count()
    }
}

/// Lexicon names per subcategory, with their source.
pub fn reference_lexicon_names() -> Vec<(PatternSubcategory, &'static str, NameSource)> {
    use NameSource::{Paper, Project};
    use PatternSubcategory::*;
    let mut out = Vec::new();
    let mut push = |sub, names: &[(&'static str, NameSource)]| {
        for &(n, s) in names {
            out.push((sub, n, s));
        }
    };
    push(GeometricUnit, &[
        ("circle", Project), ("triangle", Project), ("square", Project), ("rhombus", Project),
        ("teardrop", Project), ("rectangle", Project), ("hexagon", Project), ("spiral", Project),
    ]);
    push(SemanticUnit, &[
        ("crescent", Paper), ("cloud", Paper), ("fire", Paper), ("water wave", Project),
        ("leaf", Project), ("petal", Project), ("eye", Project), ("feather", Project),
        ("scale mesh", Project), ("copper coin", Project), ("ruyi", Project), ("thunder fret", Project),
    ]);
    push(Sawtooth, &[
        ("fine sawtooth", Project), ("coarse sawtooth", Project), ("curved sawtooth", Project),
        ("radial sawtooth", Project), ("double sawtooth", Project),
    ]);
    push(PrimaryComposite, &[
        ("magpie", Paper), ("peony", Paper), ("butterfly", Paper), ("phoenix", Paper),
        ("potted flower", Paper), ("dragon", Project), ("fish", Project), ("lotus", Project),
        ("rooster", Project), ("tiger", Project), ("ox", Project), ("rabbit", Project),
        ("horse", Project), ("goat", Project), ("monkey", Project), ("dog", Project),
        ("pig", Project), ("rat", Project), ("snake", Project), ("crane", Project),
        ("deer", Project), ("bat", Project), ("mandarin duck", Project), ("frog", Project),
        ("pomegranate", Project), ("gourd", Project), ("peach", Project), ("chrysanthemum", Project),
        ("bamboo", Project), ("pine", Project), ("lion", Project), ("human figure", Project),
        ("pagoda", Project), ("boat", Project),
    ]);
    push(DecorativeComposite, &[
        ("plum blossom", Paper), ("corner flower", Project), ("border lace", Project),
        ("rosette", Project), ("scroll vine", Project), ("wave border", Project),
        ("lattice", Project), ("tassel", Project),
    ]);
    out
}

/// Interpretation id used for a lexicon name in the shipped data.
pub fn interpretation_id_for(name: &str) -> String {
    let mut id = "interp-".to_string();
    for ch in name.chars() {
        id.push(if ch == ' ' { '-' } else { ch });
    }
    id
}

/// The seven human-geography regions used to organize the corpus.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Region {
    #[serde(rename = "Central China")]
    CentralChina,
    #[serde(rename = "East China")]
    EastChina,
    #[serde(rename = "North China")]
    NorthChina,
    #[serde(rename = "Northeast")]
    Northeast,
    #[serde(rename = "Northwest")]
    Northwest,
    #[serde(rename = "South China")]
    SouthChina,
    #[serde(rename = "Southwest")]
    Southwest,
}

impl Region {
    pub const ALL: [Region; 7] = [
        Region::CentralChina,
        Region::EastChina,
        Region::NorthChina,
        Region::Northeast,
        Region::Northwest,
        Region::SouthChina,
        Region::Southwest,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Region::CentralChina => "Central China",
            Region::EastChina => "East China",
            Region::NorthChina => "North China",
            Region::Northeast => "Northeast",
            Region::Northwest => "Northwest",
            Region::SouthChina => "South China",
            Region::Southwest => "Southwest",
        }
    }

    pub fn parse(s: &str) -> Option<Region> {
        Self::ALL.into_iter().find(|r| r.as_str() == s)
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use alloc::format;
    use alloc::vec;

    /// Reference lexicon with placeholder interpretations.
    pub(crate) fn sample_patterns() -> PatternTaxonomy {
        let names = reference_lexicon_names();
        let lexicon = names
            .iter()
            .map(|&(sub, n, source)| LexiconEntry {
                name: n.into(),
                subcategory: sub,
                interpretation_id: interpretation_id_for(n),
                source,
            })
            .collect();
        let interpretations = names
            .iter()
            .map(|&(_, n, _)| PatternInterpretation {
                id: interpretation_id_for(n),
                pattern_name: n.into(),
                meaning: format!("meaning of {n}"),
                structure_notes: String::new(),
                common_combinations: vec![],
            })
            .collect();
        PatternTaxonomy::new(lexicon, interpretations).unwrap()
    }

    #[test]
    fn reference_factor_counts() {
        let t = reference_factor_taxonomy();
        t.validate().unwrap();
        assert_eq!(t.factors.len(), 4);
        assert_eq!(t.type_count(), 18);
        let counts: Vec<usize> = t.factors.iter().map(|f| f.types.len()).collect();
        assert_eq!(counts, [7, 6, 2, 3]);
        assert!(t.has_type("Subject Matter", "Landscape"));
        assert!(!t.has_type("Style", "Landscape"));
    }

    #[test]
    fn reference_lexicon_counts() {
        let p = sample_patterns();
        assert_eq!(p.count(PatternCategory::Unit), 25);
        assert_eq!(p.count(PatternCategory::Composite), 42);
        for sub in PatternSubcategory::ALL {
            let n = p.lexicon.iter().filter(|e| e.subcategory == sub).count();
            assert_eq!(n, sub.lexicon_size());
        }
    }

    #[test]
    fn lexicon_names_do_not_contain_each_other_as_words() {
        let names: Vec<&str> = reference_lexicon_names().iter().map(|e| e.1).collect();
        for a in &names {
            for b in &names {
                if a != b {
                    let words: Vec<&str> = b.split(' ').collect();
                    let a_words: Vec<&str> = a.split(' ').collect();
                    let contained = words.windows(a_words.len()).any(|w| w == a_words.as_slice());
                    assert!(!contained, "{a:?} inside {b:?}");
                }
            }
        }
    }

    #[test]
    fn broken_taxonomies_are_rejected() {
        let mut t = reference_factor_taxonomy();
        let dup = t.factors[2].types[0].clone();
        t.factors[2].types.push(dup);
        assert!(matches!(t.validate(), Err(TaxonomyError::TypeCount(19))));
        t.factors[2].types.pop();
        t.factors[0].types[0].subcategory = "Nope".into();
        assert!(matches!(t.validate(), Err(TaxonomyError::UnknownSubcategory { .. })));

        let mut p = sample_patterns();
        p.lexicon[1].name = p.lexicon[0].name.clone();
        assert!(matches!(p.validate(), Err(TaxonomyError::DuplicatePattern(_))));
        let mut p = sample_patterns();
        p.lexicon.pop();
        assert!(matches!(p.validate(), Err(TaxonomyError::LexiconCount { .. })));
        let mut p = sample_patterns();
        p.interpretations[0].common_combinations.push("unicorn".into());
        assert!(matches!(p.validate(), Err(TaxonomyError::UnknownCombination { .. })));
    }

    #[test]
    fn region_names_round_trip() {
        for r in Region::ALL {
            assert_eq!(Region::parse(r.as_str()), Some(r));
        }
        assert_eq!(Region::parse("northeast"), None);
    }
}
