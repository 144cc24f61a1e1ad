//! Canonical SVG export and import of mood boards.
//!
//! The profile is documented in `docs/export-profile.md`. Export is a pure
//! function of the board, and importing an export gives back an equal
//! board, so export → import → export is byte-identical.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use jianzhi_core::geometry::{Affine, Point};
use jianzhi_core::moodboard::{
    Canvas, Element, ElementKind, Fill, Group, Node, Provenance, SceneGraph, Source,
};
use jianzhi_core::path::quantize;
use jianzhi_core::VectorPath;
use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use thiserror::Error;

pub const SVG_NS: &str = "http://www.w3.org/2000/svg";
pub const CANVAS_GROUP_ID: &str = "canvas";
const BLACK: &str = "#000000";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SvgError {
    #[error("not well-formed XML: {0}")]
    Xml(String),
    #[error("unsupported feature: {0}")]
    UnsupportedFeature(String),
    #[error("malformed document: {0}")]
    Malformed(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ExportOptions {
    /// Physical size of one canvas unit. Without it the document size is
    /// given in user units.
    pub mm_per_unit: Option<f64>,
}

/// Four decimals, trailing zeros trimmed. Inputs are already multiples of
/// the path quantum.
fn fmt_coord(v: f64) -> String {
    let k = (quantize(v) * 10_000.0).round() as i64;
    let sign = if k < 0 { "-" } else { "" };
    let k = k.unsigned_abs();
    let (int, frac) = (k / 10_000, k % 10_000);
    if frac == 0 {
        format!("{sign}{int}")
    } else {
        let f = format!("{frac:04}");
        format!("{sign}{int}.{}", f.trim_end_matches('0'))
    }
}

/// Shortest representation that parses back to the same bits.
fn fmt_exact(v: f64) -> String {
    format!("{v}")
}

fn fmt_matrix(t: &Affine) -> String {
    format!(
        "matrix({} {} {} {} {} {})",
        fmt_exact(t.a),
        fmt_exact(t.b),
        fmt_exact(t.c),
        fmt_exact(t.d),
        fmt_exact(t.e),
        fmt_exact(t.f)
    )
}

fn path_data(subpaths: &[&Vec<Point>]) -> String {
    let mut d = String::new();
    for sp in subpaths {
        let open = &sp[..sp.len() - 1];
        for (i, p) in open.iter().enumerate() {
            if !d.is_empty() {
                d.push(' ');
            }
            let _ = write!(d, "{} {} {}", if i == 0 { "M" } else { "L" }, fmt_coord(p.x), fmt_coord(p.y));
        }
        d.push_str(" Z");
    }
    d
}

fn source_str(s: Source) -> &'static str {
    match s {
        Source::Retrieved => "retrieved",
        Source::Generated => "generated",
        Source::Extracted => "extracted",
    }
}

fn parse_source(s: &str) -> Result<Source, SvgError> {
    match s {
        "retrieved" => Ok(Source::Retrieved),
        "generated" => Ok(Source::Generated),
        "extracted" => Ok(Source::Extracted),
        other => Err(SvgError::Malformed(format!("unknown source {other:?}"))),
    }
}

fn escape(s: &str) -> String {
    quick_xml::escape::escape(s).into_owned()
}

fn write_tag(out: &mut String, depth: usize, name: &str, attrs: &BTreeMap<&str, String>, self_close: bool) {
    out.push_str(&"  ".repeat(depth));
    out.push('<');
    out.push_str(name);
    for (k, v) in attrs {
        let _ = write!(out, " {k}=\"{}\"", escape(v));
    }
    out.push_str(if self_close { "/>\n" } else { ">\n" });
}

fn element_attrs(board: &SceneGraph, e: &Element) -> BTreeMap<&'static str, String> {
    let holes: Vec<&Element> = e
        .holes
        .iter()
        .map(|h| board.element(h).expect("valid board"))
        .collect();
    let mut subpaths: Vec<&Vec<Point>> = e.path.subpaths.iter().collect();
    for h in &holes {
        subpaths.extend(h.path.subpaths.iter());
    }

    let mut a = BTreeMap::new();
    a.insert("d", path_data(&subpaths));
    a.insert("id", e.id.clone());
    a.insert("transform", fmt_matrix(&e.transform));
    a.insert("fill-rule", "evenodd".into());
    a.insert(
        "data-kind",
        match e.kind {
            ElementKind::Contour => "contour",
            ElementKind::Cutout => "cutout",
        }
        .into(),
    );
    match e.fill {
        Fill::Foreground => {
            a.insert("fill", BLACK.into());
        }
        Fill::Hole => {
            a.insert("fill", "none".into());
            a.insert("stroke", BLACK.into());
        }
    }
    a.insert("data-source", source_str(e.provenance.source).into());
    if let Some(w) = &e.provenance.work_id {
        a.insert("data-work", w.clone());
    }
    if let Some(c) = e.provenance.cutout_id {
        a.insert("data-cutout", c.to_string());
    }
    if !holes.is_empty() {
        let join = |f: &dyn Fn(&Element) -> String| holes.iter().map(|h| f(h)).collect::<Vec<_>>().join(" ");
        a.insert("data-holes", join(&|h| format!("{}:{}", h.id, h.path.subpaths.len())));
        a.insert("data-hole-sources", join(&|h| source_str(h.provenance.source).into()));
        a.insert("data-hole-works", join(&|h| h.provenance.work_id.clone().unwrap_or_else(|| "-".into())));
        a.insert(
            "data-hole-cutouts",
            join(&|h| h.provenance.cutout_id.map_or_else(|| "-".into(), |c| c.to_string())),
        );
    }
    a
}

fn write_node(out: &mut String, board: &SceneGraph, id: &str, depth: usize) {
    match &board.nodes[id] {
        Node::Element(e) => write_tag(out, depth, "path", &element_attrs(board, e), true),
        Node::Group(g) => {
            let mut a = BTreeMap::new();
            a.insert("id", g.id.clone());
            a.insert("transform", fmt_matrix(&g.transform));
            write_tag(out, depth, "g", &a, false);
            for c in &g.children {
                write_node(out, board, c, depth + 1);
            }
            out.push_str(&"  ".repeat(depth));
            out.push_str("</g>\n");
        }
    }
}

pub fn export_svg(board: &SceneGraph, opts: ExportOptions) -> String {
    let (w, h) = (board.canvas.width, board.canvas.height);
    let mut a = BTreeMap::new();
    a.insert("xmlns", SVG_NS.to_string());
    a.insert("viewBox", format!("0 0 {} {}", fmt_exact(w), fmt_exact(h)));
    a.insert("data-next-serial", board.next_serial.to_string());
    match opts.mm_per_unit {
        Some(s) => {
            a.insert("width", format!("{}mm", fmt_exact(w * s)));
            a.insert("height", format!("{}mm", fmt_exact(h * s)));
            a.insert("data-scale", fmt_exact(s));
        }
        None => {
            a.insert("width", fmt_exact(w));
            a.insert("height", fmt_exact(h));
        }
    }
    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    write_tag(&mut out, 0, "svg", &a, false);
    let mut ga = BTreeMap::new();
    ga.insert("id", CANVAS_GROUP_ID.to_string());
    if board.roots.is_empty() {
        write_tag(&mut out, 1, "g", &ga, true);
    } else {
        write_tag(&mut out, 1, "g", &ga, false);
        for r in &board.roots {
            write_node(&mut out, board, r, 2);
        }
        out.push_str("  </g>\n");
    }
    out.push_str("</svg>\n");
    out
}

// ---------------------------------------------------------------- import

fn attrs_of(tag: &BytesStart<'_>, allowed: &[&str]) -> Result<BTreeMap<String, String>, SvgError> {
    let name = String::from_utf8_lossy(tag.name().as_ref()).into_owned();
    let mut out = BTreeMap::new();
    for a in tag.attributes() {
        let a = a.map_err(|e| SvgError::Xml(e.to_string()))?;
        let key = String::from_utf8_lossy(a.key.as_ref()).into_owned();
        if !allowed.contains(&key.as_str()) {
            return Err(SvgError::UnsupportedFeature(format!("attribute {key:?} on <{name}>")));
        }
        let value = a
            .unescape_value()
            .map_err(|e| SvgError::Xml(e.to_string()))?
            .into_owned();
        out.insert(key, value);
    }
    Ok(out)
}

fn num(s: &str) -> Result<f64, SvgError> {
    let v: f64 = s
        .parse()
        .map_err(|_| SvgError::Malformed(format!("bad number {s:?}")))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(SvgError::Malformed(format!("non-finite number {s:?}")))
    }
}

fn parse_matrix(s: Option<&String>) -> Result<Affine, SvgError> {
    let Some(s) = s else {
        return Ok(Affine::IDENTITY);
    };
    let inner = s
        .trim()
        .strip_prefix("matrix(")
        .and_then(|r| r.strip_suffix(')'))
        .ok_or_else(|| SvgError::UnsupportedFeature(format!("transform {s:?}")))?;
    let v: Vec<f64> = inner
        .split([' ', ','])
        .filter(|t| !t.is_empty())
        .map(num)
        .collect::<Result<_, _>>()?;
    if v.len() != 6 {
        return Err(SvgError::Malformed(format!("transform {s:?}")));
    }
    Ok(Affine::new(v[0], v[1], v[2], v[3], v[4], v[5]))
}

fn parse_path_data(d: &str) -> Result<Vec<Vec<Point>>, SvgError> {
    let mut subpaths = Vec::new();
    let mut cur: Vec<Point> = Vec::new();
    let mut tokens = d.split_ascii_whitespace();
    while let Some(cmd) = tokens.next() {
        match cmd {
            "M" | "L" => {
                if (cmd == "M") != cur.is_empty() {
                    return Err(SvgError::Malformed("subpaths must be M L… Z".into()));
                }
                let x = num(tokens.next().ok_or_else(|| SvgError::Malformed("missing x".into()))?)?;
                let y = num(tokens.next().ok_or_else(|| SvgError::Malformed("missing y".into()))?)?;
                cur.push(Point::new(quantize(x), quantize(y)));
            }
            "Z" => {
                if cur.is_empty() {
                    return Err(SvgError::Malformed("empty subpath".into()));
                }
                cur.push(cur[0]);
                subpaths.push(std::mem::take(&mut cur));
            }
            other => return Err(SvgError::UnsupportedFeature(format!("path command {other:?}"))),
        }
    }
    if !cur.is_empty() {
        return Err(SvgError::Malformed("unclosed subpath".into()));
    }
    Ok(subpaths)
}

const PATH_ATTRS: &[&str] = &[
    "d",
    "data-cutout",
    "data-hole-cutouts",
    "data-hole-sources",
    "data-hole-works",
    "data-holes",
    "data-kind",
    "data-source",
    "data-work",
    "fill",
    "fill-rule",
    "id",
    "stroke",
    "transform",
];

fn optional_field(s: &str) -> Option<String> {
    (s != "-").then(|| s.to_string())
}

/// Build the element and its holes from a `<path>` tag.
fn read_path(a: &BTreeMap<String, String>) -> Result<(Element, Vec<Element>), SvgError> {
    let get = |k: &str| a.get(k).ok_or_else(|| SvgError::Malformed(format!("<path> without {k}")));
    if get("fill-rule")? != "evenodd" {
        return Err(SvgError::UnsupportedFeature("fill-rule other than evenodd".into()));
    }
    let fill = match (get("fill")?.as_str(), a.get("stroke").map(String::as_str)) {
        (BLACK, None) => Fill::Foreground,
        ("none", Some(BLACK)) => Fill::Hole,
        (f, s) => return Err(SvgError::UnsupportedFeature(format!("fill {f:?} with stroke {s:?}"))),
    };
    let kind = match get("data-kind")?.as_str() {
        "contour" => ElementKind::Contour,
        "cutout" => ElementKind::Cutout,
        k => return Err(SvgError::Malformed(format!("unknown kind {k:?}"))),
    };
    let provenance = Provenance {
        source: parse_source(get("data-source")?)?,
        work_id: a.get("data-work").cloned(),
        cutout_id: a
            .get("data-cutout")
            .map(|c| c.parse().map_err(|_| SvgError::Malformed(format!("cutout id {c:?}"))))
            .transpose()?,
    };
    let mut subpaths = parse_path_data(get("d")?)?;

    let mut holes = Vec::new();
    if let Some(spec) = a.get("data-holes") {
        let split = |k: &str| -> Result<Vec<String>, SvgError> {
            Ok(get(k)?.split(' ').map(str::to_string).collect())
        };
        let entries: Vec<&str> = spec.split(' ').collect();
        let (sources, works, cutouts) = (
            split("data-hole-sources")?,
            split("data-hole-works")?,
            split("data-hole-cutouts")?,
        );
        if [sources.len(), works.len(), cutouts.len()] != [entries.len(); 3] {
            return Err(SvgError::Malformed("hole attribute lists differ in length".into()));
        }
        let mut counts = Vec::new();
        for e in &entries {
            let (id, n) = e
                .rsplit_once(':')
                .ok_or_else(|| SvgError::Malformed(format!("hole entry {e:?}")))?;
            let n: usize = n.parse().map_err(|_| SvgError::Malformed(format!("hole entry {e:?}")))?;
            counts.push((id.to_string(), n));
        }
        let total: usize = counts.iter().map(|(_, n)| n).sum();
        if total >= subpaths.len() {
            return Err(SvgError::Malformed("holes leave the element without an outline".into()));
        }
        let mut hole_paths = subpaths.split_off(subpaths.len() - total);
        for (i, (id, n)) in counts.into_iter().enumerate() {
            let rest = hole_paths.split_off(n);
            let path = VectorPath::new(std::mem::replace(&mut hole_paths, rest))
                .map_err(|e| SvgError::Malformed(e.to_string()))?;
            holes.push(Element {
                id,
                path,
                transform: Affine::IDENTITY,
                kind: ElementKind::Cutout,
                fill: Fill::Hole,
                provenance: Provenance {
                    source: parse_source(&sources[i])?,
                    work_id: optional_field(&works[i]),
                    cutout_id: optional_field(&cutouts[i])
                        .map(|c| c.parse().map_err(|_| SvgError::Malformed(format!("cutout id {c:?}"))))
                        .transpose()?,
                },
                holes: Vec::new(),
            });
        }
    }
    let element = Element {
        id: get("id")?.clone(),
        path: VectorPath::new(subpaths).map_err(|e| SvgError::Malformed(e.to_string()))?,
        transform: parse_matrix(a.get("transform"))?,
        kind,
        fill,
        provenance,
        holes: holes.iter().map(|h| h.id.clone()).collect(),
    };
    Ok((element, holes))
}

struct Builder {
    board: SceneGraph,
    /// Open `<g>` ids; `None` is the canvas group.
    stack: Vec<Option<String>>,
}

impl Builder {
    fn attach(&mut self, id: String) -> Result<(), SvgError> {
        match self.stack.last() {
            Some(None) => self.board.roots.push(id),
            Some(Some(g)) => match self.board.nodes.get_mut(g) {
                Some(Node::Group(g)) => g.children.push(id),
                _ => unreachable!("open groups are registered"),
            },
            None => return Err(SvgError::Malformed("content outside the canvas group".into())),
        }
        Ok(())
    }

    fn insert(&mut self, id: String, node: Node) -> Result<(), SvgError> {
        if self.board.nodes.insert(id.clone(), node).is_some() {
            return Err(SvgError::Malformed(format!("duplicate id {id:?}")));
        }
        Ok(())
    }
}

pub fn import_svg(bytes: &[u8]) -> Result<SceneGraph, SvgError> {
    let text = std::str::from_utf8(bytes).map_err(|e| SvgError::Xml(e.to_string()))?;
    let mut reader = Reader::from_str(text);
    let mut b: Option<Builder> = None;
    let mut depth = 0usize;
    let mut closed = false;

    loop {
        let ev = reader.read_event().map_err(|e| SvgError::Xml(e.to_string()))?;
        let (tag, empty) = match &ev {
            Event::Eof => break,
            Event::Decl(_) => continue,
            Event::Text(t) if t.iter().all(u8::is_ascii_whitespace) => continue,
            Event::Start(t) => (t.clone(), false),
            Event::Empty(t) => (t.clone(), true),
            Event::End(_) => {
                depth = depth.checked_sub(1).ok_or_else(|| SvgError::Xml("unbalanced".into()))?;
                if let Some(b) = b.as_mut() {
                    if depth >= 1 {
                        b.stack.pop();
                    }
                }
                if depth == 0 {
                    closed = true;
                }
                continue;
            }
            other => return Err(SvgError::UnsupportedFeature(format!("{other:?}"))),
        };
        if closed {
            return Err(SvgError::Malformed("content after </svg>".into()));
        }
        let name = String::from_utf8_lossy(tag.name().as_ref()).into_owned();
        match (depth, name.as_str()) {
            (0, "svg") => {
                let a = attrs_of(
                    &tag,
                    &["xmlns", "width", "height", "viewBox", "data-next-serial", "data-scale"],
                )?;
                if a.get("xmlns").map(String::as_str) != Some(SVG_NS) {
                    return Err(SvgError::Malformed("missing SVG namespace".into()));
                }
                let vb: Vec<f64> = a
                    .get("viewBox")
                    .ok_or_else(|| SvgError::Malformed("missing viewBox".into()))?
                    .split_ascii_whitespace()
                    .map(num)
                    .collect::<Result<_, _>>()?;
                if vb.len() != 4 || vb[0] != 0.0 || vb[1] != 0.0 || vb[2] <= 0.0 || vb[3] <= 0.0 {
                    return Err(SvgError::UnsupportedFeature("viewBox must be 0 0 w h".into()));
                }
                let mut board = SceneGraph::new(Canvas {
                    width: vb[2],
                    height: vb[3],
                });
                board.next_serial = a
                    .get("data-next-serial")
                    .map(|s| s.parse().map_err(|_| SvgError::Malformed("bad data-next-serial".into())))
                    .transpose()?
                    .unwrap_or(1);
                b = Some(Builder { board, stack: Vec::new() });
            }
            (1, "g") => {
                let a = attrs_of(&tag, &["id"])?;
                if a.get("id").map(String::as_str) != Some(CANVAS_GROUP_ID) {
                    return Err(SvgError::Malformed("first group must be the canvas".into()));
                }
                let b = b.as_mut().expect("svg opened at depth 0");
                if !b.stack.is_empty() || !b.board.roots.is_empty() {
                    return Err(SvgError::Malformed("more than one canvas group".into()));
                }
                if !empty {
                    b.stack.push(None);
                }
            }
            (d, "g") if d >= 2 => {
                let a = attrs_of(&tag, &["id", "transform"])?;
                let id = a
                    .get("id")
                    .cloned()
                    .ok_or_else(|| SvgError::Malformed("<g> without id".into()))?;
                let transform = parse_matrix(a.get("transform"))?;
                let b = b.as_mut().expect("svg opened");
                b.attach(id.clone())?;
                b.insert(
                    id.clone(),
                    Node::Group(Group {
                        id: id.clone(),
                        children: Vec::new(),
                        transform,
                    }),
                )?;
                if !empty {
                    b.stack.push(Some(id));
                }
            }
            (d, "path") if d >= 2 => {
                let a = attrs_of(&tag, PATH_ATTRS)?;
                let (element, holes) = read_path(&a)?;
                let b = b.as_mut().expect("svg opened");
                b.attach(element.id.clone())?;
                for h in holes {
                    b.insert(h.id.clone(), Node::Element(h))?;
                }
                b.insert(element.id.clone(), Node::Element(element))?;
                if !empty {
                    return Err(SvgError::UnsupportedFeature("content inside <path>".into()));
                }
            }
            _ => return Err(SvgError::UnsupportedFeature(format!("element <{name}> at depth {depth}"))),
        }
        if !empty {
            depth += 1;
        } else if depth == 0 {
            closed = true;
        }
    }
    if !closed {
        return Err(SvgError::Xml("document not closed".into()));
    }
    let board = b.ok_or_else(|| SvgError::Malformed("no <svg> element".into()))?.board;
    board
        .check_invariants()
        .map_err(|e| SvgError::Malformed(e.to_string()))?;
    Ok(board)
}

/// Number of subpaths in each top-level `<path>` of an export, by id.
pub fn subpath_counts(svg: &str) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    let mut reader = Reader::from_str(svg);
    while let Ok(ev) = reader.read_event() {
        match ev {
            Event::Eof => break,
            Event::Empty(t) | Event::Start(t) if t.name().as_ref() == b"path" => {
                let a: BTreeMap<String, String> = t
                    .attributes()
                    .filter_map(Result::ok)
                    .map(|a| {
                        (
                            String::from_utf8_lossy(a.key.as_ref()).into_owned(),
                            a.unescape_value().map(|v| v.into_owned()).unwrap_or_default(),
                        )
                    })
                    .collect();
                if let (Some(id), Some(d)) = (a.get("id"), a.get("d")) {
                    out.insert(id.clone(), d.matches('Z').count());
                }
            }
            _ => {}
        }
    }
    out
}
