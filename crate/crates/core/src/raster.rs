//! In-memory raster images and 8-bit PNG I/O.

use std::path::Path;

use crate::error::{Error, Result};

/// An `H x W x 3` color raster with channel values in `[0, 1]`, stored
/// row-major as `(row, col, channel)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RasterImage {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl RasterImage {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), height * width * 3, "raster data length");
        RasterImage {
            height,
            width,
            data,
        }
    }

    pub fn filled(height: usize, width: usize, rgb: [f64; 3]) -> Self {
        let mut data = Vec::with_capacity(height * width * 3);
        for _ in 0..height * width {
            data.extend_from_slice(&rgb);
        }
        RasterImage::new(height, width, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn n_pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn pixel(&self, row: usize, col: usize) -> [f64; 3] {
        let i = (row * self.width + col) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, row: usize, col: usize, rgb: [f64; 3]) {
        let i = (row * self.width + col) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    /// Clamp every value into `[0, 1]`.
    pub fn clamped(mut self) -> Self {
        for v in &mut self.data {
            *v = v.clamp(0.0, 1.0);
        }
        self
    }

    pub fn is_normalized(&self) -> bool {
        self.data.iter().all(|&v| (0.0..=1.0).contains(&v))
    }

    /// Rec. 601 luminance: `0.299 R + 0.587 G + 0.114 B`.
    pub fn to_gray(&self) -> GrayImage {
        let mut data = Vec::with_capacity(self.n_pixels());
        for px in self.data.chunks_exact(3) {
            data.push(0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2]);
        }
        GrayImage {
            height: self.height,
            width: self.width,
            data,
        }
    }

    /// Rectangular crop (`row0..row0+h`, `col0..col0+w`).
    pub fn crop(&self, row0: usize, col0: usize, h: usize, w: usize) -> RasterImage {
        assert!(row0 + h <= self.height && col0 + w <= self.width, "crop out of bounds");
        let mut data = Vec::with_capacity(h * w * 3);
        for r in 0..h {
            let start = ((row0 + r) * self.width + col0) * 3;
            data.extend_from_slice(&self.data[start..start + w * 3]);
        }
        RasterImage::new(h, w, data)
    }

    /// Write as an 8-bit PNG (values scaled by 255 and rounded).
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::with_capacity(self.data.len());
        for &v in &self.data {
            buf.push((v.clamp(0.0, 1.0) * 255.0).round() as u8);
        }
        image::save_buffer(
            path.as_ref(),
            &buf,
            self.width as u32,
            self.height as u32,
            image::ExtendedColorType::Rgb8,
        )
        .map_err(|e| Error::InvalidArgument(format!("png encode: {e}")))
    }

    /// Read an 8-bit PNG; values are divided by 255.
    pub fn load_png(path: impl AsRef<Path>) -> Result<RasterImage> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::MissingInput(path.display().to_string()));
        }
        let img = image::open(path)
            .map_err(|e| Error::InvalidArgument(format!("png decode {}: {e}", path.display())))?
            .into_rgb8();
        let (w, h) = (img.width() as usize, img.height() as usize);
        let data = img.into_raw().iter().map(|&b| b as f64 / 255.0).collect();
        Ok(RasterImage::new(h, w, data))
    }

    /// Mean color over all pixels.
    pub fn mean_rgb(&self) -> [f64; 3] {
        let mut acc = [0.0; 3];
        for px in self.data.chunks_exact(3) {
            acc[0] += px[0];
            acc[1] += px[1];
            acc[2] += px[2];
        }
        let n = self.n_pixels() as f64;
        [acc[0] / n, acc[1] / n, acc[2] / n]
    }
}

/// Single-channel raster in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), height * width, "gray data length");
        GrayImage {
            height,
            width,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn std(&self) -> f64 {
        let m = self.mean();
        (self.data.iter().map(|v| (v - m).powi(2)).sum::<f64>() / self.data.len() as f64).sqrt()
    }

    /// Rotate 90 degrees clockwise.
    pub fn rot90(&self) -> GrayImage {
        let (h, w) = (self.height, self.width);
        let mut data = vec![0.0; h * w];
        for r in 0..h {
            for c in 0..w {
                data[c * h + (h - 1 - r)] = self.at(r, c);
            }
        }
        GrayImage::new(w, h, data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gray_of_white_is_one() {
        let img = RasterImage::filled(4, 4, [1.0, 1.0, 1.0]);
        let g = img.to_gray();
        for &v in g.data() {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn png_roundtrip_is_exact_for_8bit_values() {
        let dir = std::env::temp_dir().join("histoprog-raster-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("rt.png");
        let mut img = RasterImage::filled(5, 3, [0.0; 3]);
        for (i, v) in img.data_mut().iter_mut().enumerate() {
            *v = ((i * 7) % 256) as f64 / 255.0;
        }
        img.save_png(&path).unwrap();
        let back = RasterImage::load_png(&path).unwrap();
        assert_eq!(img, back);
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn rot90_four_times_is_identity() {
        let g = GrayImage::new(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let r = g.rot90().rot90().rot90().rot90();
        assert_eq!(g, r);
    }
}
