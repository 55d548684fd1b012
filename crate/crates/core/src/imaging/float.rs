use super::{quantize, ImageBuffer, ModalityTag};
use crate::error::Result;

/// Interleaved floating-point image, values nominally in `[0, 1]`.
///
/// `channels` is 3 for color data and 1 for masks and noise layers.
#[derive(Clone, Debug, PartialEq)]
pub struct FloatImage {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

impl FloatImage {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![0.0; width * height * channels],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, channels: 1, data }
    }

    pub fn from_image(img: &ImageBuffer) -> Self {
        Self {
            width: img.width(),
            height: img.height(),
            channels: 3,
            data: img.pixels().iter().map(|&v| f32::from(v) / 255.0).collect(),
        }
    }

    /// Quantizes back to 8 bits (round half up, clamp).
    pub fn to_image(&self, modality: ModalityTag) -> Result<ImageBuffer> {
        let pixels = match self.channels {
            3 => self.data.iter().map(|&v| quantize(f64::from(v) * 255.0)).collect(),
            1 => self
                .data
                .iter()
                .flat_map(|&v| {
                    let q = quantize(f64::from(v) * 255.0);
                    [q, q, q]
                })
                .collect(),
            n => unreachable!("unsupported channel count {n}"),
        };
        ImageBuffer::new(self.width, self.height, pixels, modality)
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn at_mut(&mut self, x: usize, y: usize, c: usize) -> &mut f32 {
        &mut self.data[(y * self.width + x) * self.channels + c]
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Self {
        Self {
            data: self.data.iter().map(|&v| f(v)).collect(),
            ..*self
        }
    }

    pub fn clamp01(&mut self) {
        for v in &mut self.data {
            *v = v.clamp(0.0, 1.0);
        }
    }

    pub fn max_value(&self) -> f32 {
        self.data.iter().copied().fold(f32::NEG_INFINITY, f32::max)
    }

    /// Bilinear sample with edge clamping.
    pub fn sample(&self, x: f32, y: f32, c: usize) -> f32 {
        let fx = x.clamp(0.0, (self.width - 1) as f32);
        let fy = y.clamp(0.0, (self.height - 1) as f32);
        let x0 = fx.floor() as usize;
        let y0 = fy.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let tx = fx - x0 as f32;
        let ty = fy - y0 as f32;
        let top = self.at(x0, y0, c) * (1.0 - tx) + self.at(x1, y0, c) * tx;
        let bottom = self.at(x0, y1, c) * (1.0 - tx) + self.at(x1, y1, c) * tx;
        top * (1.0 - ty) + bottom * ty
    }

    /// Separable Gaussian blur, edges clamped. `sigma <= 0` is a no-op.
    pub fn gaussian_blur(&self, sigma: f32) -> Self {
        if sigma <= 0.0 {
            return self.clone();
        }
        let kernel = gaussian_kernel(sigma);
        self.separable(&kernel)
    }

    /// Applies the same 1-D kernel (odd length, centered) along rows then columns.
    pub fn separable(&self, kernel: &[f32]) -> Self {
        let r = (kernel.len() / 2) as isize;
        let (w, h, ch) = (self.width as isize, self.height as isize, self.channels);
        let mut tmp = Self::new(self.width, self.height, ch);
        for y in 0..h {
            for x in 0..w {
                for c in 0..ch {
                    let mut acc = 0.0;
                    for (k, &wt) in kernel.iter().enumerate() {
                        let sx = (x + k as isize - r).clamp(0, w - 1);
                        acc += wt * self.at(sx as usize, y as usize, c);
                    }
                    *tmp.at_mut(x as usize, y as usize, c) = acc;
                }
            }
        }
        let mut out = Self::new(self.width, self.height, ch);
        for y in 0..h {
            for x in 0..w {
                for c in 0..ch {
                    let mut acc = 0.0;
                    for (k, &wt) in kernel.iter().enumerate() {
                        let sy = (y + k as isize - r).clamp(0, h - 1);
                        acc += wt * tmp.at(x as usize, sy as usize, c);
                    }
                    *out.at_mut(x as usize, y as usize, c) = acc;
                }
            }
        }
        out
    }

    /// Dense 2-D convolution with a square `size x size` kernel, edges clamped.
    pub fn convolve(&self, kernel: &[f32], size: usize) -> Self {
        debug_assert_eq!(kernel.len(), size * size);
        let r = (size / 2) as isize;
        let (w, h, ch) = (self.width as isize, self.height as isize, self.channels);
        let taps: Vec<(isize, isize, f32)> = kernel
            .iter()
            .enumerate()
            .filter(|(_, &k)| k != 0.0)
            .map(|(i, &k)| ((i % size) as isize - r, (i / size) as isize - r, k))
            .collect();
        let mut out = Self::new(self.width, self.height, ch);
        for y in 0..h {
            for x in 0..w {
                for c in 0..ch {
                    let mut acc = 0.0;
                    for &(dx, dy, k) in &taps {
                        let sx = (x + dx).clamp(0, w - 1) as usize;
                        let sy = (y + dy).clamp(0, h - 1) as usize;
                        acc += k * self.at(sx, sy, c);
                    }
                    *out.at_mut(x as usize, y as usize, c) = acc;
                }
            }
        }
        out
    }

    /// Rotation by 180 degrees.
    pub fn rot180(&self) -> Self {
        let n = self.width * self.height;
        let mut out = Self::new(self.width, self.height, self.channels);
        for i in 0..n {
            for c in 0..self.channels {
                out.data[i * self.channels + c] = self.data[(n - 1 - i) * self.channels + c];
            }
        }
        out
    }
}

/// Normalized Gaussian taps covering `±ceil(3 sigma)`.
pub(crate) fn gaussian_kernel(sigma: f32) -> Vec<f32> {
    let r = (3.0 * sigma).ceil().max(1.0) as isize;
    let denom = 2.0 * sigma * sigma;
    let mut k: Vec<f32> = (-r..=r).map(|i| (-((i * i) as f32) / denom).exp()).collect();
    let total: f32 = k.iter().sum();
    for v in &mut k {
        *v /= total;
    }
    k
}

pub(crate) fn rgb_to_hsv(r: f32, g: f32, b: f32) -> (f32, f32, f32) {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let v = max;
    let s = if max > 0.0 { delta / max } else { 0.0 };
    let h = if delta == 0.0 {
        0.0
    } else if max == r {
        ((g - b) / delta).rem_euclid(6.0) / 6.0
    } else if max == g {
        ((b - r) / delta + 2.0) / 6.0
    } else {
        ((r - g) / delta + 4.0) / 6.0
    };
    (h, s, v)
}

pub(crate) fn hsv_to_rgb(h: f32, s: f32, v: f32) -> (f32, f32, f32) {
    if s == 0.0 {
        return (v, v, v);
    }
    let h6 = (h.rem_euclid(1.0)) * 6.0;
    let i = h6.floor();
    let f = h6 - i;
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    match i as i32 % 6 {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    }
}
