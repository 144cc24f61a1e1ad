//! Design sessions and their JSON persistence.
//!
//! A session document stores the workflow state together with the board
//! and the op log that produced it. Loading replays the log and rejects the
//! document if the result differs from the stored board.

use std::fs;
use std::path::Path;

use jianzhi_core::ideation::{DesignIntent, IdeaDescription, SuggestionSet};
use jianzhi_core::moodboard::{BoardError, BoardOp, Canvas, SceneGraph};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SESSION_SCHEMA: &str = "jianzhi.session";
pub const SESSION_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Retrieved,
    Generated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub origin: Origin,
    pub rank: usize,
    pub image_ref: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub work_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSet {
    pub retrieved: Vec<Reference>,
    pub generated: Vec<Reference>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub schema: String,
    pub format_version: u32,
    pub session_id: String,
    pub intent: Option<DesignIntent>,
    pub suggestions: Option<SuggestionSet>,
    /// Faults that sent a request down a fallback path, oldest first.
    #[serde(default)]
    pub faults: Vec<String>,
    pub idea: Option<IdeaDescription>,
    #[serde(default)]
    pub references: ReferenceSet,
    pub board: SceneGraph,
    pub op_log: Vec<BoardOp>,
    /// Bumped on every board change; clients echo it back on mutations.
    pub board_version: u64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SessionError {
    #[error("board version is {current}, request was made against {given}")]
    Stale { current: u64, given: u64 },
    #[error(transparent)]
    Board(#[from] BoardError),
    #[error("nothing to undo")]
    NothingToUndo,
    #[error("corrupt session: {0}")]
    CorruptSession(String),
    #[error("{0}")]
    Io(String),
}

impl Session {
    pub fn new(session_id: String, canvas: Canvas) -> Self {
        Session {
            schema: SESSION_SCHEMA.into(),
            format_version: SESSION_VERSION,
            session_id,
            intent: None,
            suggestions: None,
            faults: Vec::new(),
            idea: None,
            references: ReferenceSet::default(),
            board: SceneGraph::new(canvas),
            op_log: Vec::new(),
            board_version: 0,
        }
    }

    fn check_version(&self, given: u64) -> Result<(), SessionError> {
        if given != self.board_version {
            return Err(SessionError::Stale {
                current: self.board_version,
                given,
            });
        }
        Ok(())
    }

    /// Apply one board op against `version`. Returns the id of any node the
    /// op created.
    pub fn apply_op(&mut self, op: BoardOp, version: u64) -> Result<Option<String>, SessionError> {
        self.check_version(version)?;
        let created = self.board.apply(&op)?;
        self.op_log.push(op);
        self.board_version += 1;
        Ok(created)
    }

    /// Drop the last op and rebuild the board from the rest of the log.
    pub fn undo(&mut self, version: u64) -> Result<BoardOp, SessionError> {
        self.check_version(version)?;
        let last = self.op_log.last().cloned().ok_or(SessionError::NothingToUndo)?;
        let board = SceneGraph::replay(self.board.canvas, &self.op_log[..self.op_log.len() - 1])
            .map_err(|(i, e)| SessionError::CorruptSession(format!("op {i} no longer applies: {e}")))?;
        self.board = board;
        self.op_log.pop();
        self.board_version += 1;
        Ok(last)
    }

    pub fn replayed_board(&self) -> Result<SceneGraph, SessionError> {
        SceneGraph::replay(self.board.canvas, &self.op_log)
            .map_err(|(i, e)| SessionError::CorruptSession(format!("op {i} fails on replay: {e}")))
    }

    /// Board must satisfy the forest invariants and equal its op-log replay.
    pub fn verify(&self) -> Result<(), SessionError> {
        if self.schema != SESSION_SCHEMA || self.format_version != SESSION_VERSION {
            return Err(SessionError::CorruptSession(format!(
                "expected {SESSION_SCHEMA} v{SESSION_VERSION}, found {} v{}",
                self.schema, self.format_version
            )));
        }
        self.board
            .check_invariants()
            .map_err(|e| SessionError::CorruptSession(e.to_string()))?;
        if self.replayed_board()? != self.board {
            return Err(SessionError::CorruptSession("op log does not reproduce the board".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sessions serialize")
    }

    pub fn from_json(text: &str) -> Result<Session, SessionError> {
        let s: Session = serde_json::from_str(text).map_err(|e| SessionError::CorruptSession(e.to_string()))?;
        s.verify()?;
        Ok(s)
    }
}

pub fn save_session(session: &Session, path: &Path) -> Result<(), SessionError> {
    let io = |e: std::io::Error| SessionError::Io(format!("{}: {e}", path.display()));
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io)?;
    }
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, session.to_json()).map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

pub fn load_session(path: &Path) -> Result<Session, SessionError> {
    let text = fs::read_to_string(path).map_err(|e| SessionError::Io(format!("{}: {e}", path.display())))?;
    Session::from_json(&text)
}
