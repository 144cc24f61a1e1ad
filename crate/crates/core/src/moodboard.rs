//! The mood-board scene graph.
//!
//! A board is a forest of elements and groups drawn back to front in
//! `roots` order. Transforms are left-composed: applying an operation `M`
//! to a node with transform `T` leaves it with `M·T`. A node's world
//! transform is the product of its ancestors' transforms and its own.
//!
//! A cut-out applied to a contour becomes a hole of that contour. Its path
//! is rewritten into the contour's local frame and its own transform reset
//! to identity, so the hole follows every later move of the contour.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Affine, Bbox};
use crate::path::VectorPath;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementKind {
    Contour,
    Cutout,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fill {
    Foreground,
    Hole,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Retrieved,
    Generated,
    Extracted,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: Source,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub work_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutout_id: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Element {
    pub id: String,
    pub path: VectorPath,
    #[serde(default)]
    pub transform: Affine,
    pub kind: ElementKind,
    pub fill: Fill,
    pub provenance: Provenance,
    /// Cut-outs applied to this element, in application order.
    #[serde(default)]
    pub holes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Group {
    pub id: String,
    pub children: Vec<String>,
    #[serde(default)]
    pub transform: Affine,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Node {
    Element(Element),
    Group(Group),
}

impl Node {
    pub fn id(&self) -> &str {
        match self {
            Node::Element(e) => &e.id,
            Node::Group(g) => &g.id,
        }
    }

    pub fn transform(&self) -> Affine {
        match self {
            Node::Element(e) => e.transform,
            Node::Group(g) => g.transform,
        }
    }

    fn transform_mut(&mut self) -> &mut Affine {
        match self {
            Node::Element(e) => &mut e.transform,
            Node::Group(g) => &mut g.transform,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Canvas {
    pub width: f64,
    pub height: f64,
}

impl Default for Canvas {
    fn default() -> Self {
        Canvas {
            width: 1024.0,
            height: 1024.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransformOp {
    Translate { dx: f64, dy: f64 },
    Scale { sx: f64, sy: f64 },
    Rotate { degrees: f64 },
    FlipH,
    FlipV,
}

impl TransformOp {
    pub fn matrix(&self) -> Affine {
        match *self {
            TransformOp::Translate { dx, dy } => Affine::translate(dx, dy),
            TransformOp::Scale { sx, sy } => Affine::scale(sx, sy),
            TransformOp::Rotate { degrees } => Affine::rotate_degrees(degrees),
            TransformOp::FlipH => Affine::flip_h(),
            TransformOp::FlipV => Affine::flip_v(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum BoardOp {
    AddElement {
        element: Element,
    },
    Transform {
        id: String,
        transform: TransformOp,
    },
    Group {
        ids: Vec<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        group_id: Option<String>,
    },
    Ungroup {
        id: String,
    },
    Duplicate {
        id: String,
    },
    ApplyCutout {
        cutout_id: String,
        target_id: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum BoardError {
    #[error("id {0:?} is already in use")]
    DuplicateId(String),
    #[error("unknown id {0:?}")]
    UnknownId(String),
    #[error("transform would not be invertible")]
    SingularTransform,
    #[error("grouped ids must be at least two distinct siblings")]
    CrossParentGroup,
    #[error("{0:?} is not a group")]
    NotAGroup(String),
    #[error("cut-out does not overlap its target")]
    NoOverlap,
    #[error("{0:?} is not a free cut-out element")]
    NotACutout(String),
    #[error("{0:?} cannot receive a cut-out")]
    InvalidTarget(String),
    #[error("{0:?} is attached as a hole and cannot be edited on its own")]
    AttachedHole(String),
    #[error("invalid element: {0}")]
    InvalidElement(String),
    #[error("scene graph invariant broken: {0}")]
    Corrupt(String),
}

/// Ids and provenance work ids: non-empty ASCII letters, digits, `-`, `_`
/// and `.`.
pub fn is_valid_id(id: &str) -> bool {
    !id.is_empty()
        && id
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'-' | b'_' | b'.'))
}

/// Where a node is referenced from.
#[derive(Clone, Debug, PartialEq, Eq)]
enum Parent {
    Root,
    Group(String),
    HoleOf(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneGraph {
    pub canvas: Canvas,
    /// Back to front.
    pub roots: Vec<String>,
    pub nodes: BTreeMap<String, Node>,
    /// Counter for generated ids.
    pub next_serial: u64,
}

impl Default for SceneGraph {
    fn default() -> Self {
        Self::new(Canvas::default())
    }
}

impl SceneGraph {
    pub fn new(canvas: Canvas) -> Self {
        SceneGraph {
            canvas,
            roots: Vec::new(),
            nodes: BTreeMap::new(),
            next_serial: 1,
        }
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.get(id)
    }

    pub fn element(&self, id: &str) -> Option<&Element> {
        match self.nodes.get(id) {
            Some(Node::Element(e)) => Some(e),
            _ => None,
        }
    }

    fn fresh_id(&mut self, prefix: &str) -> String {
        loop {
            let id = format!("{prefix}{}", self.next_serial);
            self.next_serial += 1;
            if !self.nodes.contains_key(&id) {
                return id;
            }
        }
    }

    fn parent_of(&self, id: &str) -> Option<Parent> {
        if self.roots.iter().any(|r| r == id) {
            return Some(Parent::Root);
        }
        for n in self.nodes.values() {
            match n {
                Node::Group(g) if g.children.iter().any(|c| c == id) => {
                    return Some(Parent::Group(g.id.clone()))
                }
                Node::Element(e) if e.holes.iter().any(|h| h == id) => {
                    return Some(Parent::HoleOf(e.id.clone()))
                }
                _ => {}
            }
        }
        None
    }

    fn siblings_mut(&mut self, parent: &Parent) -> &mut Vec<String> {
        match parent {
            Parent::Root => &mut self.roots,
            Parent::Group(g) => match self.nodes.get_mut(g) {
                Some(Node::Group(g)) => &mut g.children,
                _ => unreachable!("parent is a group"),
            },
            Parent::HoleOf(e) => match self.nodes.get_mut(e) {
                Some(Node::Element(e)) => &mut e.holes,
                _ => unreachable!("parent is an element"),
            },
        }
    }

    /// Parent transforms composed from the root down to `id`, including
    /// `id`'s own.
    pub fn world_transform(&self, id: &str) -> Option<Affine> {
        let node = self.nodes.get(id)?;
        let mut t = node.transform();
        let mut cur = String::from(id);
        while let Some(p) = self.parent_of(&cur) {
            match p {
                Parent::Root => break,
                Parent::Group(g) | Parent::HoleOf(g) => {
                    t = self.nodes[&g].transform() * t;
                    cur = g;
                }
            }
        }
        Some(t)
    }

    /// World-space bbox of an element's path.
    pub fn world_bbox(&self, id: &str) -> Option<Bbox> {
        let e = self.element(id)?;
        let w = self.world_transform(id)?;
        e.path.transformed(&w).bbox()
    }

    fn movable(&self, id: &str) -> Result<Parent, BoardError> {
        if !self.nodes.contains_key(id) {
            return Err(BoardError::UnknownId(id.into()));
        }
        match self.parent_of(id) {
            Some(Parent::HoleOf(_)) => Err(BoardError::AttachedHole(id.into())),
            Some(p) => Ok(p),
            None => Err(BoardError::Corrupt(format!("{id:?} is unreachable"))),
        }
    }

    pub fn add_element(&mut self, element: Element) -> Result<(), BoardError> {
        if self.nodes.contains_key(&element.id) {
            return Err(BoardError::DuplicateId(element.id));
        }
        if !is_valid_id(&element.id) {
            return Err(BoardError::InvalidElement(format!("bad id {:?}", element.id)));
        }
        if let Some(w) = &element.provenance.work_id {
            if !is_valid_id(w) {
                return Err(BoardError::InvalidElement(format!("bad work id {w:?}")));
            }
        }
        if !element.transform.is_invertible() || !element.transform.is_finite() {
            return Err(BoardError::SingularTransform);
        }
        if element.kind == ElementKind::Cutout && element.fill != Fill::Hole {
            return Err(BoardError::InvalidElement("a cut-out must have hole fill".into()));
        }
        if !element.holes.is_empty() {
            return Err(BoardError::InvalidElement("new elements carry no holes".into()));
        }
        element
            .path
            .validate()
            .map_err(|e| BoardError::InvalidElement(format!("{e}")))?;
        let mut element = element;
        element.path = element.path.quantized();
        element
            .path
            .validate()
            .map_err(|e| BoardError::InvalidElement(format!("{e}")))?;
        self.roots.push(element.id.clone());
        self.nodes.insert(element.id.clone(), Node::Element(element));
        Ok(())
    }

    pub fn apply_transform(&mut self, id: &str, op: TransformOp) -> Result<(), BoardError> {
        self.movable(id)?;
        if let TransformOp::Scale { sx, sy } = op {
            if sx == 0.0 || sy == 0.0 {
                return Err(BoardError::SingularTransform);
            }
        }
        let m = op.matrix();
        let node = self.nodes.get_mut(id).expect("checked");
        let next = m * node.transform();
        if !next.is_finite() || !next.is_invertible() {
            return Err(BoardError::SingularTransform);
        }
        *node.transform_mut() = next;
        Ok(())
    }

    /// Wrap sibling nodes in a new identity group placed where the topmost
    /// of them was. Returns the group id.
    pub fn group(&mut self, ids: &[String], group_id: Option<String>) -> Result<String, BoardError> {
        let distinct: BTreeSet<&String> = ids.iter().collect();
        if ids.len() < 2 || distinct.len() != ids.len() {
            return Err(BoardError::CrossParentGroup);
        }
        let mut parent: Option<Parent> = None;
        for id in ids {
            let p = self.movable(id)?;
            match &parent {
                None => parent = Some(p),
                Some(q) if *q == p => {}
                Some(_) => return Err(BoardError::CrossParentGroup),
            }
        }
        let parent = parent.expect("at least two ids");
        if let Some(g) = &group_id {
            if !is_valid_id(g) {
                return Err(BoardError::InvalidElement(format!("bad id {g:?}")));
            }
            if self.nodes.contains_key(g) {
                return Err(BoardError::DuplicateId(g.clone()));
            }
        }
        let gid = match group_id {
            Some(g) => g,
            None => self.fresh_id("g"),
        };

        let siblings = self.siblings_mut(&parent);
        let mut members: Vec<(usize, String)> = ids
            .iter()
            .map(|id| (siblings.iter().position(|s| s == id).expect("sibling"), id.clone()))
            .collect();
        members.sort();
        let top = members.last().expect("non-empty").0;
        let below_top = members.len() - 1;
        let insert_at = top - below_top;
        siblings.retain(|s| !ids.contains(s));
        siblings.insert(insert_at, gid.clone());
        self.nodes.insert(
            gid.clone(),
            Node::Group(Group {
                id: gid.clone(),
                children: members.into_iter().map(|(_, id)| id).collect(),
                transform: Affine::IDENTITY,
            }),
        );
        Ok(gid)
    }

    /// Dissolve a group, folding its transform into each child.
    pub fn ungroup(&mut self, id: &str) -> Result<(), BoardError> {
        let parent = self.movable(id)?;
        let Some(Node::Group(g)) = self.nodes.get(id).cloned() else {
            return Err(BoardError::NotAGroup(id.into()));
        };
        for c in &g.children {
            let child = self.nodes.get(c).expect("child exists");
            let t = g.transform * child.transform();
            if !t.is_invertible() || !t.is_finite() {
                return Err(BoardError::SingularTransform);
            }
        }
        for c in &g.children {
            let child = self.nodes.get_mut(c).expect("child exists");
            let t = g.transform * child.transform();
            *child.transform_mut() = t;
        }
        let siblings = self.siblings_mut(&parent);
        let at = siblings.iter().position(|s| s == id).expect("sibling");
        siblings.splice(at..=at, g.children.iter().cloned());
        self.nodes.remove(id);
        Ok(())
    }

    fn copy_subtree(&mut self, id: &str) -> String {
        let node = self.nodes[id].clone();
        match node {
            Node::Element(mut e) => {
                let new_id = self.fresh_id("n");
                let holes: Vec<String> = e.holes.iter().map(|h| self.copy_subtree(h)).collect();
                e.id = new_id.clone();
                e.holes = holes;
                self.nodes.insert(new_id.clone(), Node::Element(e));
                new_id
            }
            Node::Group(mut g) => {
                let new_id = self.fresh_id("g");
                let children: Vec<String> = g.children.iter().map(|c| self.copy_subtree(c)).collect();
                g.id = new_id.clone();
                g.children = children;
                self.nodes.insert(new_id.clone(), Node::Group(g));
                new_id
            }
        }
    }

    /// Deep copy placed directly above the source. Returns the new id.
    pub fn duplicate(&mut self, id: &str) -> Result<String, BoardError> {
        let parent = self.movable(id)?;
        let new_id = self.copy_subtree(id);
        let siblings = self.siblings_mut(&parent);
        let at = siblings.iter().position(|s| s == id).expect("sibling");
        siblings.insert(at + 1, new_id.clone());
        Ok(new_id)
    }

    pub fn apply_cutout(&mut self, cutout_id: &str, target_id: &str) -> Result<(), BoardError> {
        let cut_parent = self.movable(cutout_id)?;
        match self.element(cutout_id) {
            Some(e) if e.kind == ElementKind::Cutout => {}
            _ => return Err(BoardError::NotACutout(cutout_id.into())),
        }
        self.movable(target_id)?;
        match self.element(target_id) {
            Some(e) if e.kind == ElementKind::Contour && target_id != cutout_id => {}
            _ => return Err(BoardError::InvalidTarget(target_id.into())),
        }
        let (Some(cb), Some(tb)) = (self.world_bbox(cutout_id), self.world_bbox(target_id)) else {
            return Err(BoardError::NoOverlap);
        };
        if !cb.intersects(&tb) {
            return Err(BoardError::NoOverlap);
        }
        let wt = self.world_transform(target_id).expect("exists");
        let wc = self.world_transform(cutout_id).expect("exists");
        let local = wt.inverse().ok_or(BoardError::SingularTransform)? * wc;
        let baked = self.element(cutout_id).expect("exists").path.transformed(&local).quantized();
        baked
            .validate()
            .map_err(|e| BoardError::InvalidElement(format!("{e}")))?;

        self.siblings_mut(&cut_parent).retain(|s| s != cutout_id);
        if let Some(Node::Element(c)) = self.nodes.get_mut(cutout_id) {
            c.path = baked;
            c.transform = Affine::IDENTITY;
        }
        if let Some(Node::Element(t)) = self.nodes.get_mut(target_id) {
            t.holes.push(cutout_id.into());
        }
        Ok(())
    }

    /// Apply one operation; on error the board is unchanged. Returns the id
    /// created by the operation, if any.
    pub fn apply(&mut self, op: &BoardOp) -> Result<Option<String>, BoardError> {
        match op {
            BoardOp::AddElement { element } => self.add_element(element.clone()).map(|_| Some(element.id.clone())),
            BoardOp::Transform { id, transform } => self.apply_transform(id, *transform).map(|_| None),
            BoardOp::Group { ids, group_id } => self.group(ids, group_id.clone()).map(Some),
            BoardOp::Ungroup { id } => self.ungroup(id).map(|_| None),
            BoardOp::Duplicate { id } => self.duplicate(id).map(Some),
            BoardOp::ApplyCutout { cutout_id, target_id } => {
                self.apply_cutout(cutout_id, target_id).map(|_| None)
            }
        }
    }

    /// Rebuild a board by applying `ops` in order to an empty board.
    pub fn replay(canvas: Canvas, ops: &[BoardOp]) -> Result<SceneGraph, (usize, BoardError)> {
        let mut b = SceneGraph::new(canvas);
        for (i, op) in ops.iter().enumerate() {
            b.apply(op).map_err(|e| (i, e))?;
        }
        Ok(b)
    }

    /// Check the forest and element invariants.
    pub fn check_invariants(&self) -> Result<(), BoardError> {
        let bad = |m: String| Err(BoardError::Corrupt(m));
        let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
        let mut stack: Vec<&str> = self.roots.iter().map(String::as_str).collect();
        while let Some(id) = stack.pop() {
            let count = seen.entry(id).or_insert(0);
            *count += 1;
            if *count > 1 {
                return bad(format!("{id:?} referenced more than once"));
            }
            match self.nodes.get(id) {
                None => return bad(format!("dangling reference {id:?}")),
                Some(Node::Group(g)) => {
                    if g.id != id {
                        return bad(format!("group keyed {id:?} has id {:?}", g.id));
                    }
                    if !g.transform.is_invertible() {
                        return bad(format!("group {id:?} has a singular transform"));
                    }
                    stack.extend(g.children.iter().map(String::as_str));
                }
                Some(Node::Element(e)) => {
                    if e.id != id {
                        return bad(format!("element keyed {id:?} has id {:?}", e.id));
                    }
                    if !e.transform.is_invertible() {
                        return bad(format!("element {id:?} has a singular transform"));
                    }
                    if e.kind == ElementKind::Cutout && e.fill != Fill::Hole {
                        return bad(format!("cut-out {id:?} is not a hole"));
                    }
                    if !e.holes.is_empty() && e.kind != ElementKind::Contour {
                        return bad(format!("{id:?} carries holes but is not a contour"));
                    }
                    for h in &e.holes {
                        match self.nodes.get(h) {
                            Some(Node::Element(he))
                                if he.kind == ElementKind::Cutout
                                    && he.holes.is_empty()
                                    && he.transform == Affine::IDENTITY => {}
                            _ => return bad(format!("hole {h:?} of {id:?} is malformed")),
                        }
                    }
                    stack.extend(e.holes.iter().map(String::as_str));
                }
            }
        }
        if seen.len() != self.nodes.len() {
            return bad("some nodes are unreachable".into());
        }
        Ok(())
    }

    /// Elements in draw order (back to front) with their world transforms.
    /// Attached holes are not listed on their own.
    pub fn draw_order(&self) -> Vec<(&Element, Affine)> {
        let mut out = Vec::new();
        fn walk<'a>(g: &'a SceneGraph, ids: &'a [String], parent: Affine, out: &mut Vec<(&'a Element, Affine)>) {
            for id in ids {
                match &g.nodes[id] {
                    Node::Element(e) => out.push((e, parent * e.transform)),
                    Node::Group(gr) => walk(g, &gr.children, parent * gr.transform, out),
                }
            }
        }
        walk(self, &self.roots, Affine::IDENTITY, &mut out);
        out
    }

    /// Number of nodes in the subtree rooted at `id`, holes included.
    pub fn subtree_size(&self, id: &str) -> usize {
        match self.nodes.get(id) {
            None => 0,
            Some(Node::Element(e)) => 1 + e.holes.iter().map(|h| self.subtree_size(h)).sum::<usize>(),
            Some(Node::Group(g)) => 1 + g.children.iter().map(|c| self.subtree_size(c)).sum::<usize>(),
        }
    }
}
