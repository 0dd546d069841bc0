use crate::nncore::Matrix2D;
use crate::{Error, Result};

/// Camera resolution of the in-sole camera (HQVGA).
pub const CAMERA_WIDTH: usize = 240;
pub const CAMERA_HEIGHT: usize = 160;
/// Force-model input resolution.
pub const MODEL_WIDTH: usize = 45;
pub const MODEL_HEIGHT: usize = 30;

/// 8-bit single-channel image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::Dimension(format!(
                "{} pixels cannot form a {width}x{height} image",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self {
            width,
            height,
            pixels: vec![value; width * height],
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.pixels[y * self.width + x] = v;
    }

    pub fn mirror_horizontal(&self) -> Self {
        let mut out = self.clone();
        for y in 0..self.height {
            out.pixels[y * self.width..(y + 1) * self.width].reverse();
        }
        out
    }
}

/// Nearest-neighbour resize; output `(x, y)` samples input
/// `(⌊x·in_w/out_w⌋, ⌊y·in_h/out_h⌋)`.
pub fn resize_nearest(img: &GrayImage, out_w: usize, out_h: usize) -> Result<GrayImage> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::Dimension(format!(
            "cannot resize to {out_w}x{out_h}"
        )));
    }
    if img.width == 0 || img.height == 0 {
        return Err(Error::Dimension("cannot resize an empty image".into()));
    }
    let xs: Vec<usize> = (0..out_w).map(|x| x * img.width / out_w).collect();
    let mut pixels = Vec::with_capacity(out_w * out_h);
    for y in 0..out_h {
        let row = &img.pixels[(y * img.height / out_h) * img.width..][..img.width];
        pixels.extend(xs.iter().map(|&sx| row[sx]));
    }
    Ok(GrayImage {
        width: out_w,
        height: out_h,
        pixels,
    })
}

/// Flattens a 45×30 image into a `1 × 1350` row scaled by 1/255.
pub fn to_model_input(img: &GrayImage) -> Result<Matrix2D> {
    if (img.width, img.height) != (MODEL_WIDTH, MODEL_HEIGHT) {
        return Err(Error::Dimension(format!(
            "model input must be {MODEL_WIDTH}x{MODEL_HEIGHT}, got {}x{}",
            img.width, img.height
        )));
    }
    Matrix2D::from_vec(1, img.pixels.len(), flatten_scaled(img))
}

/// Row-major intensities scaled to `[0, 1]`.
pub fn flatten_scaled(img: &GrayImage) -> Vec<f32> {
    img.pixels.iter().map(|&p| p as f32 / 255.0).collect()
}

/// Camera frame of any size to the force-model input row.
pub fn preprocess_frame(img: &GrayImage) -> Result<Vec<f32>> {
    let small = resize_nearest(img, MODEL_WIDTH, MODEL_HEIGHT)?;
    Ok(flatten_scaled(&small))
}
