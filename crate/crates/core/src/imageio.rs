//! 8-bit grayscale PNG encoding shared by contour images and canvases.

use std::io::Cursor;
use std::path::Path;

use image::{GrayImage, ImageFormat};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageIoError {
    #[error("image codec: {0}")]
    Codec(#[from] image::ImageError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("buffer of {len} bytes does not match {width}x{height}")]
    Size { len: usize, width: u32, height: u32 },
}

pub fn encode_gray_png(width: u32, height: u32, gray: &[u8]) -> Result<Vec<u8>, ImageIoError> {
    let img = GrayImage::from_raw(width, height, gray.to_vec()).ok_or(ImageIoError::Size {
        len: gray.len(),
        width,
        height,
    })?;
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png)?;
    Ok(out.into_inner())
}

/// Decodes any supported image, converting to 8-bit luma.
pub fn decode_gray_png(bytes: &[u8]) -> Result<(u32, u32, Vec<u8>), ImageIoError> {
    let img = image::load_from_memory(bytes)?.into_luma8();
    Ok((img.width(), img.height(), img.into_raw()))
}

pub fn write_gray_png(path: &Path, width: u32, height: u32, gray: &[u8]) -> Result<(), ImageIoError> {
    std::fs::write(path, encode_gray_png(width, height, gray)?)?;
    Ok(())
}

pub fn read_gray_png(path: &Path) -> Result<(u32, u32, Vec<u8>), ImageIoError> {
    decode_gray_png(&std::fs::read(path)?)
}
