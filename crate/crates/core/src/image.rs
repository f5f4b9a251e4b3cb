//! Grayscale images with real-valued pixels and the patch geometry used by
//! training and scanning.
//!
//! Pixels live in `[0, 1]` and are stored row-major. Pixel `(x, y)` is column
//! `x`, row `y`. All geometric operations here are pure.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImageError {
    #[error("image dimensions must be positive, got {width}x{height}")]
    EmptyImage { width: usize, height: usize },
    #[error("pixel buffer has {got} values, expected {expected}")]
    BufferSize { expected: usize, got: usize },
    #[error("pixel {index} = {value} lies outside [0, 1]")]
    PixelRange { index: usize, value: f64 },
    #[error("crop {w}x{h} at ({x}, {y}) exceeds {width}x{height} image")]
    OutOfBounds {
        x: usize,
        y: usize,
        w: usize,
        h: usize,
        width: usize,
        height: usize,
    },
}

/// A `width × height` grid of pixels in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::EmptyImage { width, height });
        }
        if pixels.len() != width * height {
            return Err(ImageError::BufferSize {
                expected: width * height,
                got: pixels.len(),
            });
        }
        if let Some((index, &value)) = pixels
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(ImageError::PixelRange { index, value });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// Builds an image from arbitrary reals, clamping each value into `[0, 1]`.
    /// NaN maps to 0.
    pub fn from_clamped(
        width: usize,
        height: usize,
        mut pixels: Vec<f64>,
    ) -> Result<Self, ImageError> {
        for p in &mut pixels {
            *p = if p.is_nan() { 0.0 } else { p.clamp(0.0, 1.0) };
        }
        Self::new(width, height, pixels)
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel; results are clamped.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                let v = f(x, y);
                pixels.push(if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) });
            }
        }
        Self {
            width,
            height,
            pixels,
        }
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self::from_fn(width, height, |_, _| value)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    /// Writes a pixel, clamping into `[0, 1]`.
    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        self.pixels[y * self.width + x] = value.clamp(0.0, 1.0);
    }

    pub fn crop(&self, x: usize, y: usize, w: usize, h: usize) -> Result<Image, ImageError> {
        if w == 0 || h == 0 || x + w > self.width || y + h > self.height {
            return Err(ImageError::OutOfBounds {
                x,
                y,
                w,
                h,
                width: self.width,
                height: self.height,
            });
        }
        let mut pixels = Vec::with_capacity(w * h);
        for row in y..y + h {
            let start = row * self.width + x;
            pixels.extend_from_slice(&self.pixels[start..start + w]);
        }
        Ok(Image {
            width: w,
            height: h,
            pixels,
        })
    }

    /// Bilinear resize. Output pixel `i` samples the source at
    /// `(i + 0.5) * src / dst - 0.5`, clamped to the source extent.
    pub fn resize(&self, w: usize, h: usize) -> Image {
        assert!(w > 0 && h > 0, "resize target must be non-empty");
        if w == self.width && h == self.height {
            return self.clone();
        }
        let sx = self.width as f64 / w as f64;
        let sy = self.height as f64 / h as f64;
        let max_x = (self.width - 1) as f64;
        let max_y = (self.height - 1) as f64;
        let xs: Vec<f64> = (0..w)
            .map(|i| ((i as f64 + 0.5) * sx - 0.5).clamp(0.0, max_x))
            .collect();
        let mut pixels = Vec::with_capacity(w * h);
        for j in 0..h {
            let fy = ((j as f64 + 0.5) * sy - 0.5).clamp(0.0, max_y);
            for &fx in &xs {
                pixels.push(self.bilinear(fx, fy).clamp(0.0, 1.0));
            }
        }
        Image {
            width: w,
            height: h,
            pixels,
        }
    }

    /// Rotates about the image center by `angle_deg`, positive clockwise as
    /// displayed (y axis pointing down). Samples falling outside the source
    /// are 0.
    pub fn rotate(&self, angle_deg: f64) -> Image {
        let (sin, cos) = snapped_sin_cos(angle_deg);
        let cx = (self.width as f64 - 1.0) / 2.0;
        let cy = (self.height as f64 - 1.0) / 2.0;
        let max_x = (self.width - 1) as f64;
        let max_y = (self.height - 1) as f64;
        const EDGE: f64 = 1e-9;
        let mut pixels = Vec::with_capacity(self.pixels.len());
        for y in 0..self.height {
            let dy = y as f64 - cy;
            for x in 0..self.width {
                let dx = x as f64 - cx;
                // inverse map: rotate the output offset by -angle
                let sx = cx + dx * cos + dy * sin;
                let sy = cy - dx * sin + dy * cos;
                let v = if sx < -EDGE || sy < -EDGE || sx > max_x + EDGE || sy > max_y + EDGE {
                    0.0
                } else {
                    self.bilinear(sx.clamp(0.0, max_x), sy.clamp(0.0, max_y))
                };
                pixels.push(v.clamp(0.0, 1.0));
            }
        }
        Image {
            width: self.width,
            height: self.height,
            pixels,
        }
    }

    /// Bilinear sample at real coordinates already inside the source extent.
    #[inline]
    pub(crate) fn bilinear(&self, fx: f64, fy: f64) -> f64 {
        let x0 = fx.floor() as usize;
        let y0 = fy.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let tx = fx - x0 as f64;
        let ty = fy - y0 as f64;
        let top = self.get(x0, y0) * (1.0 - tx) + self.get(x1, y0) * tx;
        let bottom = self.get(x0, y1) * (1.0 - tx) + self.get(x1, y1) * tx;
        top * (1.0 - ty) + bottom * ty
    }
}

/// sin/cos with exact values at multiples of 90° so quarter turns permute
/// pixels without interpolation error.
fn snapped_sin_cos(angle_deg: f64) -> (f64, f64) {
    let quarter = angle_deg / 90.0;
    if quarter == quarter.round() {
        match (quarter.round() as i64).rem_euclid(4) {
            0 => (0.0, 1.0),
            1 => (1.0, 0.0),
            2 => (0.0, -1.0),
            _ => (-1.0, 0.0),
        }
    } else {
        angle_deg.to_radians().sin_cos()
    }
}

/// Flattens a patch row-major and standardizes it to zero mean and unit
/// population variance. Near-constant patches (std < 1e-8) map to zeros.
pub fn normalize_patch(patch: &Image) -> Vec<f64> {
    let mut out = Vec::with_capacity(patch.pixels.len());
    normalize_into(&patch.pixels, &mut out);
    out
}

/// Population standard deviation of the pixel values.
pub fn patch_contrast(patch: &Image) -> f64 {
    mean_std(&patch.pixels).1
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Standardizes `values` into `out` and returns their standard deviation.
pub(crate) fn normalize_into(values: &[f64], out: &mut Vec<f64>) -> f64 {
    out.clear();
    let (mean, std) = mean_std(values);
    if std < 1e-8 {
        out.resize(values.len(), 0.0);
    } else {
        out.extend(values.iter().map(|v| (v - mean) / std));
    }
    std
}
