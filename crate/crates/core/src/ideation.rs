//! From design intent to an editable idea description.
//!
//! A provider reply is expected in the structured-suggestion wire format:
//!
//! ```text
//! OBJECTS:
//! - magpie — herald of good news
//! PATTERNS:
//! - plum blossom — endurance through winter
//! ```
//!
//! Anything else falls back to the knowledge base's own suggestions.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::knowledge::{KbError, KnowledgeBase, SuggestionKind, Violation};
use crate::text::keywords_from_text;

pub const DEFAULT_EXEMPLARS: usize = 4;
pub const ITEM_SEPARATOR: &str = " — ";

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignIntent {
    pub intent_text: String,
    /// Factor name → selected type name.
    #[serde(default)]
    pub selections: BTreeMap<String, String>,
}

impl DesignIntent {
    pub fn validate(&self, kb: &KnowledgeBase) -> Vec<Violation> {
        let mut out = Vec::new();
        for (f, t) in &self.selections {
            if kb.factors().factor(f).is_none() {
                out.push(Violation::UnknownFactor(f.clone()));
            } else if !kb.factors().has_type(f, t) {
                out.push(Violation::UnknownType {
                    factor: f.clone(),
                    type_name: t.clone(),
                });
            }
        }
        out
    }

    pub fn keywords(&self) -> Vec<String> {
        keywords_from_text(&self.intent_text)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptExemplar {
    pub work_id: String,
    pub question: String,
    pub answer: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system_preamble: String,
    pub exemplars: Vec<PromptExemplar>,
    pub user_block: String,
    pub provider_hints: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IdeationError {
    #[error("no prompt templates to draw exemplars from")]
    EmptyTemplateCorpus,
    #[error("intent does not match the taxonomy: {0:?}")]
    InvalidIntent(Vec<Violation>),
    #[error("idea has neither accepted suggestions nor intent text")]
    EmptyIdea,
    #[error("suggestion reference {0:?} does not match the suggestion set")]
    BadReference(SuggestionRef),
}

fn system_preamble(kb: &KnowledgeBase) -> String {
    let mut s = String::from(
        "You help design traditional Chinese paper-cuttings. Ideas are described by four factors; \
         each factor takes one of the types below.\n",
    );
    for f in &kb.factors().factors {
        s.push_str(&format!("{}:\n", f.name));
        for t in &f.types {
            s.push_str(&format!("- {}: {}\n", t.name, t.definition));
        }
    }
    s.push_str(
        "Reply with two blocks. A line \"OBJECTS:\" followed by main subjects, then a line \
         \"PATTERNS:\" followed by unit or decorative patterns. Each item is one line of the form \
         \"- name — meaning\".\n",
    );
    s
}

/// Assemble the few-shot prompt. Templates are ranked by how many of the
/// intent's selected types their source work shares, then by work id, then
/// by file order; the first `e` are used.
pub fn build_ideation_prompt(
    intent: &DesignIntent,
    kb: &KnowledgeBase,
    e: usize,
) -> Result<PromptBundle, IdeationError> {
    let violations = intent.validate(kb);
    if !violations.is_empty() {
        return Err(IdeationError::InvalidIntent(violations));
    }
    if e > 0 && kb.templates().is_empty() {
        return Err(IdeationError::EmptyTemplateCorpus);
    }

    let mut ranked: Vec<(usize, usize)> = kb
        .templates()
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let shared = kb.work(&t.work_id).map_or(0, |w| {
                intent
                    .selections
                    .iter()
                    .filter(|(f, ty)| w.type_for(f) == Some(ty.as_str()))
                    .count()
            });
            (shared, i)
        })
        .collect();
    let templates = kb.templates();
    ranked.sort_by(|a, b| {
        b.0.cmp(&a.0)
            .then_with(|| templates[a.1].work_id.cmp(&templates[b.1].work_id))
            .then(a.1.cmp(&b.1))
    });
    let exemplars = ranked
        .iter()
        .take(e)
        .map(|&(_, i)| PromptExemplar {
            work_id: templates[i].work_id.clone(),
            question: templates[i].question.clone(),
            answer: templates[i].answer.clone(),
        })
        .collect();

    let mut user_block = format!("Design intent: {}\nSelections:\n", intent.intent_text);
    for (f, t) in &intent.selections {
        user_block.push_str(&format!("- {f}: {t}\n"));
    }

    let mut provider_hints = BTreeMap::new();
    provider_hints.insert("reply_format".into(), "OBJECTS/PATTERNS blocks".into());
    provider_hints.insert("temperature".into(), "0".into());

    Ok(PromptBundle {
        system_preamble: system_preamble(kb),
        exemplars,
        user_block,
        provider_hints,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuggestionItem {
    pub name: String,
    pub meaning: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SuggestionSource {
    Provider,
    Fallback,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuggestionSet {
    pub objects: Vec<SuggestionItem>,
    pub patterns: Vec<SuggestionItem>,
    pub source: SuggestionSource,
}

impl SuggestionSet {
    pub fn get(&self, kind: SuggestionKind, index: usize) -> Option<&SuggestionItem> {
        match kind {
            SuggestionKind::Object => self.objects.get(index),
            SuggestionKind::Pattern => self.patterns.get(index),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("reply has no OBJECTS or PATTERNS block")]
    NoBlocks,
    #[error("line {line}: expected \"- name — meaning\"")]
    BadItem { line: usize },
    #[error("line {line}: text outside a block")]
    StrayText { line: usize },
    #[error("reply blocks are empty")]
    Empty,
}

/// Parse a reply in the wire format. Blank lines are ignored; every other
/// line must be a block header or an item inside a block.
pub fn parse_suggestion_reply(
    reply: &str,
) -> Result<(Vec<SuggestionItem>, Vec<SuggestionItem>), ParseError> {
    let mut objects = Vec::new();
    let mut patterns = Vec::new();
    let mut current: Option<SuggestionKind> = None;
    let mut saw_block = false;
    for (n, raw) in reply.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        match line {
            "OBJECTS:" => {
                current = Some(SuggestionKind::Object);
                saw_block = true;
                continue;
            }
            "PATTERNS:" => {
                current = Some(SuggestionKind::Pattern);
                saw_block = true;
                continue;
            }
            _ => {}
        }
        let Some(kind) = current else {
            return Err(ParseError::StrayText { line: n + 1 });
        };
        let item = line
            .strip_prefix("- ")
            .and_then(|rest| rest.split_once(ITEM_SEPARATOR))
            .map(|(name, meaning)| (name.trim(), meaning.trim()))
            .filter(|(name, meaning)| !name.is_empty() && !meaning.is_empty())
            .ok_or(ParseError::BadItem { line: n + 1 })?;
        let item = SuggestionItem {
            name: item.0.into(),
            meaning: item.1.into(),
        };
        match kind {
            SuggestionKind::Object => objects.push(item),
            SuggestionKind::Pattern => patterns.push(item),
        }
    }
    if !saw_block {
        return Err(ParseError::NoBlocks);
    }
    if objects.is_empty() && patterns.is_empty() {
        return Err(ParseError::Empty);
    }
    Ok((objects, patterns))
}

/// Render a suggestion set in the wire format.
pub fn render_suggestion_reply(objects: &[SuggestionItem], patterns: &[SuggestionItem]) -> String {
    let mut s = String::from("OBJECTS:\n");
    for i in objects {
        s.push_str(&format!("- {}{ITEM_SEPARATOR}{}\n", i.name, i.meaning));
    }
    s.push_str("PATTERNS:\n");
    for i in patterns {
        s.push_str(&format!("- {}{ITEM_SEPARATOR}{}\n", i.name, i.meaning));
    }
    s
}

/// Suggestions computed from the corpus alone.
pub fn fallback_suggestions(
    intent: &DesignIntent,
    kb: &KnowledgeBase,
) -> Result<SuggestionSet, KbError> {
    let ranked = kb.suggest(&intent.keywords(), &intent.selections)?;
    let mut objects = Vec::new();
    let mut patterns = Vec::new();
    for s in ranked {
        let item = SuggestionItem {
            name: s.name,
            meaning: s.interpretation.meaning,
        };
        match s.kind {
            SuggestionKind::Object => objects.push(item),
            SuggestionKind::Pattern => patterns.push(item),
        }
    }
    Ok(SuggestionSet {
        objects,
        patterns,
        source: SuggestionSource::Fallback,
    })
}

/// A text-model provider. Implementations live outside the core.
pub trait TextProvider {
    fn complete(&self, bundle: &PromptBundle) -> Result<String, String>;
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SuggestionOutcome {
    pub set: SuggestionSet,
    /// Why the provider path was abandoned, if it was.
    pub fault: Option<String>,
}

/// Ask the provider, falling back to corpus suggestions on any fault or
/// unparseable reply. Fails only when the fallback itself cannot run.
pub fn request_suggestions(
    bundle: &PromptBundle,
    intent: &DesignIntent,
    kb: &KnowledgeBase,
    provider: Option<&dyn TextProvider>,
) -> Result<SuggestionOutcome, KbError> {
    let fault = match provider {
        None => String::from("no text provider configured"),
        Some(p) => match p.complete(bundle) {
            Ok(reply) => match parse_suggestion_reply(&reply) {
                Ok((objects, patterns)) => {
                    return Ok(SuggestionOutcome {
                        set: SuggestionSet {
                            objects,
                            patterns,
                            source: SuggestionSource::Provider,
                        },
                        fault: None,
                    })
                }
                Err(e) => format!("unparseable reply: {e}"),
            },
            Err(e) => format!("provider fault: {e}"),
        },
    };
    Ok(SuggestionOutcome {
        set: fallback_suggestions(intent, kb)?,
        fault: Some(fault),
    })
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SuggestionRef {
    pub kind: SuggestionKind,
    pub index: usize,
    pub name: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdeaDescription {
    pub text: String,
    pub accepted: Vec<SuggestionRef>,
    pub intent: DesignIntent,
}

fn join_names(names: &[&str]) -> String {
    match names {
        [] => String::new(),
        [one] => String::from(*one),
        [init @ .., last] => format!("{} and {}", init.join(", "), last),
    }
}

/// Fill the idea sentence:
/// `<Style> paper-cutting image, featuring <names>, expressing <Subject
/// Matter> and <Method of Expression>, for <Function>`. Missing parts are
/// left out; the intent text stands in for the names when none were
/// accepted.
pub fn compose_idea(
    intent: &DesignIntent,
    set: &SuggestionSet,
    accepted: &[SuggestionRef],
) -> Result<IdeaDescription, IdeationError> {
    let mut refs: Vec<SuggestionRef> = Vec::new();
    for r in accepted {
        match set.get(r.kind, r.index) {
            Some(item) if item.name == r.name => {}
            _ => return Err(IdeationError::BadReference(r.clone())),
        }
        if !refs.iter().any(|x| x.name == r.name) {
            refs.push(r.clone());
        }
    }
    let text_intent = intent.intent_text.trim();
    if refs.is_empty() && text_intent.is_empty() {
        return Err(IdeationError::EmptyIdea);
    }

    let sel = |f: &str| intent.selections.get(f).map(String::as_str);
    let mut text = match sel("Style") {
        Some(style) => format!("{style} paper-cutting image"),
        None => String::from("Paper-cutting image"),
    };
    let names: Vec<&str> = refs.iter().map(|r| r.name.as_str()).collect();
    if names.is_empty() {
        text.push_str(&format!(", featuring {text_intent}"));
    } else {
        text.push_str(&format!(", featuring {}", join_names(&names)));
    }
    let expressed: Vec<&str> = [sel("Subject Matter"), sel("Method of Expression")]
        .into_iter()
        .flatten()
        .collect();
    if !expressed.is_empty() {
        text.push_str(&format!(", expressing {}", join_names(&expressed)));
    }
    if let Some(function) = sel("Function") {
        text.push_str(&format!(", for {function}"));
    }

    Ok(IdeaDescription {
        text,
        accepted: refs,
        intent: intent.clone(),
    })
}

pub fn edit_idea(idea: &IdeaDescription, new_text: &str) -> IdeaDescription {
    IdeaDescription {
        text: new_text.into(),
        ..idea.clone()
    }
}
