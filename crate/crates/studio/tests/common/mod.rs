#![allow(dead_code)]

use std::collections::VecDeque;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use jianzhi_core::moodboard::{BoardOp, Element, ElementKind, Fill, Provenance, SceneGraph, Source, TransformOp};
use jianzhi_core::raster::BinaryImage;
use jianzhi_core::{Affine, Point, VectorPath};
use jianzhi_studio::gateway::{Gateway, GatewayConfig};
use jianzhi_studio::service::{ServiceConfig, Studio};
use serde_json::Value;
use tower::ServiceExt;

pub fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/corpus")
}

pub fn offline_config(cache: &Path) -> ServiceConfig {
    ServiceConfig::new(corpus_dir(), GatewayConfig::offline(cache))
}

pub fn offline_studio(cache: &Path) -> Arc<Studio> {
    let config = offline_config(cache);
    let gateway = Gateway::new(config.gateway.clone());
    Arc::new(Studio::with_gateway(config, gateway).expect("fixture corpus loads"))
}

/// Background components that do not touch the border, found by
/// breadth-first flood fill, in order of first pixel. Pixels are sorted in
/// raster order.
pub fn flood_fill_hole_pixels(img: &BinaryImage, min_area: usize) -> Vec<Vec<(u32, u32)>> {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let mut seen = vec![false; (w * h) as usize];
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let i = (y * w + x) as usize;
            if seen[i] || img.get(x as u32, y as u32) {
                continue;
            }
            seen[i] = true;
            let mut queue = VecDeque::from([(x, y)]);
            let mut pixels = Vec::new();
            let mut border = false;
            while let Some((cx, cy)) = queue.pop_front() {
                pixels.push((cx as u32, cy as u32));
                border |= cx == 0 || cy == 0 || cx == w - 1 || cy == h - 1;
                for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                    let (nx, ny) = (cx + dx, cy + dy);
                    if nx < 0 || ny < 0 || nx >= w || ny >= h {
                        continue;
                    }
                    let j = (ny * w + nx) as usize;
                    if !seen[j] && !img.get(nx as u32, ny as u32) {
                        seen[j] = true;
                        queue.push_back((nx, ny));
                    }
                }
            }
            if !border && pixels.len() >= min_area {
                pixels.sort_by_key(|&(x, y)| (y, x));
                out.push(pixels);
            }
        }
    }
    out
}

pub fn flood_fill_holes(img: &BinaryImage, min_area: usize) -> Vec<usize> {
    flood_fill_hole_pixels(img, min_area).iter().map(Vec::len).collect()
}

/// Ink pixels 8-connected to `(x, y)`, by breadth-first search.
pub fn ink_component_area(img: &BinaryImage, x: u32, y: u32) -> usize {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let mut seen = vec![false; (w * h) as usize];
    if !img.get(x, y) {
        return 0;
    }
    seen[(y as i64 * w + x as i64) as usize] = true;
    let mut queue = VecDeque::from([(x as i64, y as i64)]);
    let mut area = 0;
    while let Some((cx, cy)) = queue.pop_front() {
        area += 1;
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (nx, ny) = (cx + dx, cy + dy);
                if nx < 0 || ny < 0 || nx >= w || ny >= h {
                    continue;
                }
                let j = (ny * w + nx) as usize;
                if !seen[j] && img.get(nx as u32, ny as u32) {
                    seen[j] = true;
                    queue.push_back((nx, ny));
                }
            }
        }
    }
    area
}

pub async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (status, bytes) = call_raw(app, method, uri, body).await;
    let v = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
    };
    (status, v)
}

pub async fn call_raw(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(match body {
            Some(v) => Body::from(serde_json::to_vec(&v).unwrap()),
            None => Body::empty(),
        })
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    (status, bytes.to_vec())
}

pub fn square_element(id: String, cutout: bool, x: f64, y: f64, s: f64) -> Element {
    Element {
        id,
        path: VectorPath::from_rings(vec![vec![
            Point::new(x, y),
            Point::new(x + s, y),
            Point::new(x + s, y + s),
            Point::new(x, y + s),
        ]])
        .unwrap(),
        transform: Affine::IDENTITY,
        kind: if cutout { ElementKind::Cutout } else { ElementKind::Contour },
        fill: if cutout { Fill::Hole } else { Fill::Foreground },
        provenance: Provenance {
            source: Source::Generated,
            work_id: None,
            cutout_id: None,
        },
        holes: vec![],
    }
}

/// Turn four random numbers into an op against `board`. Ops that refer to
/// missing or unsuitable nodes are produced on purpose.
pub fn decode_op(board: &SceneGraph, step: usize, code: (u8, u8, u8, i16)) -> BoardOp {
    let ids: Vec<&String> = board.nodes.keys().collect();
    let pick = |n: u8| -> String {
        if ids.is_empty() {
            "missing".into()
        } else {
            ids[n as usize % ids.len()].clone()
        }
    };
    let (op, a, b, v) = code;
    let f = v as f64 / 8.0;
    match op % 9 {
        0 | 1 => BoardOp::AddElement {
            element: square_element(format!("e{step}"), a % 3 == 0, f, b as f64 / 4.0, 2.0 + (a % 7) as f64),
        },
        2 => BoardOp::Transform {
            id: pick(a),
            transform: match b % 5 {
                0 => TransformOp::Translate { dx: f, dy: -f / 2.0 },
                1 => TransformOp::Scale { sx: if v == 0 { 0.0 } else { 1.0 + (v % 3) as f64 / 4.0 }, sy: -1.5 },
                2 => TransformOp::Rotate { degrees: f },
                3 => TransformOp::FlipH,
                _ => TransformOp::FlipV,
            },
        },
        3 | 4 => BoardOp::Group {
            ids: (0..(2 + b % 3)).map(|i| pick(a.wrapping_add(i))).collect(),
            group_id: None,
        },
        5 => BoardOp::Ungroup { id: pick(a) },
        6 => BoardOp::Duplicate { id: pick(a) },
        _ => BoardOp::ApplyCutout {
            cutout_id: pick(a),
            target_id: pick(b),
        },
    }
}
