//! Owned 8-bit RGB images with PNG input/output.

use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RasterError {
    #[error("image is empty")]
    EmptyImage,
    #[error("image dimensions {width}x{height} overflow")]
    TooLarge { width: u32, height: u32 },
    #[error("buffer length {got} does not match {width}x{height}x3")]
    BadBuffer { width: u32, height: u32, got: usize },
    #[error("png: {0}")]
    Png(String),
}

/// Row-major RGB image, three samples per pixel.
#[derive(Clone, PartialEq, Eq)]
pub struct Image {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl std::fmt::Debug for Image {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Image({}x{})", self.width, self.height)
    }
}

impl Image {
    /// Black image of the given size.
    pub fn new(width: u32, height: u32) -> Result<Self, RasterError> {
        let len = (width as usize)
            .checked_mul(height as usize)
            .and_then(|n| n.checked_mul(3))
            .ok_or(RasterError::TooLarge { width, height })?;
        Ok(Self { width, height, data: vec![0; len] })
    }

    pub fn from_raw(width: u32, height: u32, data: Vec<u8>) -> Result<Self, RasterError> {
        if data.len() != width as usize * height as usize * 3 {
            return Err(RasterError::BadBuffer { width, height, got: data.len() });
        }
        Ok(Self { width, height, data })
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(width as usize * height as usize * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self { width, height, data }
    }

    pub fn filled(width: u32, height: u32, px: [u8; 3]) -> Self {
        Self::from_fn(width, height, |_, _| px)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn is_empty(&self) -> bool {
        self.width == 0 || self.height == 0
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    fn offset(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * 3
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = self.offset(x, y);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn put_pixel(&mut self, x: u32, y: u32, px: [u8; 3]) {
        let i = self.offset(x, y);
        self.data[i..i + 3].copy_from_slice(&px);
    }

    pub fn decode_png(bytes: &[u8]) -> Result<Self, RasterError> {
        let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
            .map_err(|e| RasterError::Png(e.to_string()))?
            .into_rgb8();
        let (w, h) = img.dimensions();
        Self::from_raw(w, h, img.into_raw())
    }

    pub fn encode_png(&self) -> Result<Vec<u8>, RasterError> {
        let buf = image::RgbImage::from_raw(self.width, self.height, self.data.clone()).ok_or(
            RasterError::BadBuffer { width: self.width, height: self.height, got: self.data.len() },
        )?;
        let mut out = std::io::Cursor::new(Vec::new());
        buf.write_to(&mut out, image::ImageFormat::Png)
            .map_err(|e| RasterError::Png(e.to_string()))?;
        Ok(out.into_inner())
    }

    pub fn load_png(path: impl AsRef<Path>) -> Result<Self, RasterError> {
        let bytes = std::fs::read(path.as_ref())
            .map_err(|e| RasterError::Png(format!("{}: {e}", path.as_ref().display())))?;
        Self::decode_png(&bytes)
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<(), RasterError> {
        let bytes = self.encode_png()?;
        std::fs::write(path.as_ref(), bytes)
            .map_err(|e| RasterError::Png(format!("{}: {e}", path.as_ref().display())))
    }
}
