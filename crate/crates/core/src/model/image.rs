use std::path::Path;

use image::{DynamicImage, GrayImage, RgbImage};

use super::Shape;
use crate::codec::{Reader, Writer};
use crate::error::{Error, Result};

const RAW_MAGIC: &[u8; 4] = b"PHIT";

/// 8-bit image tensor, channel-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub shape: Shape,
    pub pixels: Vec<u8>,
}

impl Image {
    pub fn new(shape: Shape, pixels: Vec<u8>) -> Result<Self> {
        if shape.is_empty() || pixels.len() != shape.len() {
            return Err(Error::dim(format!("{} pixels for a {shape} image", pixels.len())));
        }
        Ok(Image { shape, pixels })
    }

    /// Quantized integer input, `p >> (8 − bits)`.
    pub fn quantized(&self, bits: u32) -> Vec<i64> {
        quantize_pixels(&self.pixels, bits)
    }

    /// Normalized float input, `p / 256`.
    pub fn normalized(&self) -> Vec<f64> {
        self.pixels.iter().map(|&p| p as f64 / 256.0).collect()
    }

    /// Writes PGM (one channel) or PPM (three channels).
    pub fn save_pnm(&self, path: &Path) -> Result<()> {
        let Shape { c, h, w } = self.shape;
        let img = match c {
            1 => DynamicImage::ImageLuma8(GrayImage::from_raw(w as u32, h as u32, self.pixels.clone()).unwrap()),
            3 => {
                let plane = h * w;
                let interleaved = (0..plane).flat_map(|i| (0..3).map(move |ch| ch * plane + i)).map(|i| self.pixels[i]).collect();
                DynamicImage::ImageRgb8(RgbImage::from_raw(w as u32, h as u32, interleaved).unwrap())
            }
            _ => return Err(Error::dim(format!("PNM holds 1 or 3 channels, image has {c}"))),
        };
        img.save_with_format(path, image::ImageFormat::Pnm)
            .map_err(|e| Error::format(format!("writing {}: {e}", path.display())))
    }

    pub fn to_raw_tensor(&self) -> Vec<u8> {
        let mut w = Writer::new(RAW_MAGIC, 1);
        w.u32(self.shape.c as u32).u32(self.shape.h as u32).u32(self.shape.w as u32);
        let mut out = w.finish();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn from_raw_tensor(bytes: &[u8]) -> Result<Self> {
        let (mut r, version) = Reader::new(bytes, RAW_MAGIC)?;
        if version != 1 {
            return Err(Error::format(format!("unsupported tensor version {version}")));
        }
        let shape = Shape::new(r.u32()? as usize, r.u32()? as usize, r.u32()? as usize);
        let header = 6 + 12;
        Image::new(shape, bytes[header..].to_vec())
    }
}

pub fn quantize_pixels(pixels: &[u8], bits: u32) -> Vec<i64> {
    let shift = 8 - bits.clamp(1, 8);
    pixels.iter().map(|&p| (p >> shift) as i64).collect()
}

/// Reads a PGM/PPM (by content) or a raw tensor file.
pub fn load_image(path: &Path) -> Result<Image> {
    let bytes = std::fs::read(path)?;
    if bytes.starts_with(RAW_MAGIC) {
        return Image::from_raw_tensor(&bytes);
    }
    let img = image::load_from_memory_with_format(&bytes, image::ImageFormat::Pnm)
        .map_err(|e| Error::format(format!("{}: {e}", path.display())))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img {
        DynamicImage::ImageLuma8(g) => Image::new(Shape::new(1, h, w), g.into_raw()),
        other => {
            let rgb = other.to_rgb8().into_raw();
            let plane = h * w;
            let mut pixels = vec![0u8; 3 * plane];
            for (i, px) in rgb.chunks_exact(3).enumerate() {
                for ch in 0..3 {
                    pixels[ch * plane + i] = px[ch];
                }
            }
            Image::new(Shape::new(3, h, w), pixels)
        }
    }
}

pub fn save_raw_tensor(img: &Image, path: &Path) -> Result<()> {
    std::fs::write(path, img.to_raw_tensor())?;
    Ok(())
}
