//! Pure algorithmic core of the jianzhi paper-cutting studio.
//!
//! Everything here works on in-memory values and needs only `alloc`:
//! the design-space taxonomies and annotated corpus ([`taxonomy`],
//! [`knowledge`]), factor-guided ideation ([`ideation`]), exact cosine
//! retrieval ([`retrieval`]), the classical cut-out pipeline (binarization,
//! hole extraction, boundary tracing, vectorization, shape descriptors,
//! k-NN classification, point-prompted segmentation) and the mood-board
//! scene graph ([`moodboard`]).
//!
//! File formats, provider clients, the HTTP service and the CLI live in the
//! `jianzhi-studio` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod classify;
pub mod contour;
pub mod cutout;
pub mod descriptor;
pub mod geometry;
pub mod ideation;
pub mod knowledge;
pub mod moodboard;
pub mod path;
pub mod raster;
pub mod retrieval;
pub mod sawtooth;
pub mod segment;
pub mod synth;
pub mod taxonomy;
pub mod text;
pub mod vectorize;

mod fmath;
mod hash;

pub use geometry::{Affine, Bbox, Point};
pub use path::VectorPath;
pub use raster::{BinaryImage, GrayImage, PixelRegion};
