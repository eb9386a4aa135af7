//! 8-bit grayscale rasters.
//!
//! Everything downstream of decoding works on a single luma channel. Color
//! input is reduced with the integer approximation
//! `Y = (77 R + 150 G + 29 B) >> 8`, which keeps results identical across
//! platforms.

use std::path::Path;

use image::{DynamicImage, GrayImage, ImageFormat};
use thiserror::Error;

pub const LUMA_R: u32 = 77;
pub const LUMA_G: u32 = 150;
pub const LUMA_B: u32 = 29;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("cannot decode image: {0}")]
    Decode(#[from] image::ImageError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("pixel buffer of {got} bytes does not match {width}x{height}")]
    Shape { width: u32, height: u32, got: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Raster {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl Raster {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self, RasterError> {
        if pixels.len() != (width as usize) * (height as usize) {
            return Err(RasterError::Shape {
                width,
                height,
                got: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: u32, height: u32, value: u8) -> Self {
        Self {
            width,
            height,
            pixels: vec![value; (width as usize) * (height as usize)],
        }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> u8) -> Self {
        let mut pixels = Vec::with_capacity((width as usize) * (height as usize));
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            pixels,
        }
    }

    #[inline]
    pub fn width(&self) -> u32 {
        self.width
    }

    #[inline]
    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.pixels[(y as usize) * (self.width as usize) + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, v: u8) {
        let w = self.width as usize;
        self.pixels[(y as usize) * w + x as usize] = v;
    }

    /// Decodes any supported container (PGM/PPM, TIFF, PNG, JPEG).
    pub fn decode(bytes: &[u8]) -> Result<Self, RasterError> {
        let img = image::load_from_memory(bytes)?;
        Ok(Self::from_dynamic(&img))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RasterError> {
        let bytes = std::fs::read(path)?;
        Self::decode(&bytes)
    }

    pub fn from_dynamic(img: &DynamicImage) -> Self {
        match img {
            DynamicImage::ImageLuma8(g) => Self {
                width: g.width(),
                height: g.height(),
                pixels: g.as_raw().clone(),
            },
            other => {
                let rgb = other.to_rgb8();
                let pixels = rgb
                    .pixels()
                    .map(|p| {
                        let [r, g, b] = p.0;
                        ((LUMA_R * r as u32 + LUMA_G * g as u32 + LUMA_B * b as u32) >> 8) as u8
                    })
                    .collect();
                Self {
                    width: rgb.width(),
                    height: rgb.height(),
                    pixels,
                }
            }
        }
    }

    pub fn to_gray_image(&self) -> GrayImage {
        GrayImage::from_raw(self.width, self.height, self.pixels.clone())
            .expect("raster shape is validated on construction")
    }

    /// Binary PGM (P5) encoding.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<(), RasterError> {
        self.to_gray_image()
            .save_with_format(path, ImageFormat::Png)?;
        Ok(())
    }

    /// Axis-aligned sub-rectangle; caller guarantees bounds.
    pub fn crop(&self, x0: u32, y0: u32, w: u32, h: u32) -> Self {
        assert!(x0 + w <= self.width && y0 + h <= self.height, "crop out of bounds");
        Self::from_fn(w, h, |x, y| self.get(x0 + x, y0 + y))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_decodes_back() {
        let r = Raster::from_fn(7, 5, |x, y| (x * 30 + y) as u8);
        let back = Raster::decode(&r.to_pgm()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn color_uses_integer_luma() {
        let img = image::RgbImage::from_pixel(2, 2, image::Rgb([200, 100, 50]));
        let r = Raster::from_dynamic(&DynamicImage::ImageRgb8(img));
        let expected = ((77 * 200 + 150 * 100 + 29 * 50) >> 8) as u8;
        assert!(r.pixels().iter().all(|&p| p == expected));
    }

    #[test]
    fn shape_mismatch_rejected() {
        assert!(matches!(
            Raster::new(3, 3, vec![0; 8]),
            Err(RasterError::Shape { .. })
        ));
    }
}
