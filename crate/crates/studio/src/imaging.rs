//! Raster file IO.
//!
//! Work images are grayscale PNG (any format `image` can read is accepted).
//! Masks are written as binary PBM, where a set bit (black) is a mask pixel.

use std::fs;
use std::io::Cursor;
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, ImageEncoder, ImageFormat, Luma};
use jianzhi_core::raster::{BinaryImage, GrayImage};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImagingError {
    #[error("{0}: {1}")]
    Io(String, std::io::Error),
    #[error("{0}: {1}")]
    Decode(String, image::ImageError),
    #[error("{0}: image is empty")]
    Empty(String),
}

pub fn decode_gray(bytes: &[u8], name: &str) -> Result<GrayImage, ImagingError> {
    let img = image::load_from_memory(bytes).map_err(|e| ImagingError::Decode(name.into(), e))?;
    let luma = img.to_luma8();
    GrayImage::new(luma.width(), luma.height(), luma.into_raw()).map_err(|_| ImagingError::Empty(name.into()))
}

pub fn load_gray(path: &Path) -> Result<GrayImage, ImagingError> {
    let name = path.display().to_string();
    let bytes = fs::read(path).map_err(|e| ImagingError::Io(name.clone(), e))?;
    decode_gray(&bytes, &name)
}

pub fn encode_gray_png(img: &GrayImage) -> Vec<u8> {
    let mut out = Vec::new();
    image::codecs::png::PngEncoder::new(&mut out)
        .write_image(img.data(), img.width(), img.height(), ExtendedColorType::L8)
        .expect("in-memory PNG encoding");
    out
}

/// Foreground (ink) renders black on white.
pub fn binary_to_gray(img: &BinaryImage) -> GrayImage {
    let data = img.bits().iter().map(|b| if *b { 0 } else { 255 }).collect();
    GrayImage::new(img.width(), img.height(), data).expect("same dimensions")
}

pub fn encode_mask_pbm(mask: &BinaryImage) -> Vec<u8> {
    let mut out = Vec::new();
    // The encoder takes 0/1 luma samples (1 = white) and writes the
    // inverted bit, so mask pixels end up as set bits.
    let samples: Vec<u8> = mask.bits().iter().map(|b| u8::from(!*b)).collect();
    PnmEncoder::new(&mut out)
        .with_subtype(PnmSubtype::Bitmap(SampleEncoding::Binary))
        .write_image(&samples, mask.width(), mask.height(), ExtendedColorType::L8)
        .expect("in-memory PBM encoding");
    out
}

pub fn decode_mask_pbm(bytes: &[u8]) -> Result<BinaryImage, ImagingError> {
    let img = image::load(Cursor::new(bytes), ImageFormat::Pnm)
        .map_err(|e| ImagingError::Decode("mask".into(), e))?
        .to_luma8();
    let bits = img.pixels().map(|Luma([v])| *v < 128).collect();
    BinaryImage::new(img.width(), img.height(), bits).map_err(|_| ImagingError::Empty("mask".into()))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
