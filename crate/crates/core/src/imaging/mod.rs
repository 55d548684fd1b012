//! Image representation and the deterministic geometric and pixel primitives
//! shared by the corruption and augmentation modules.
//!
//! Every image is stored as interleaved 8-bit RGB. Infrared images keep the
//! same layout but carry the single-channel constraint `R == G == B` at every
//! pixel; constructors reject infrared buffers that break it.

mod float;
mod io;

pub use float::FloatImage;
pub(crate) use float::{hsv_to_rgb, rgb_to_hsv};
pub use io::{decode_image, encode_image, encode_jpeg, encode_png, load_image, save_image, ImageFormat};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Working size (width, height) used by the training pipelines.
pub const WORKING_SIZE: (usize, usize) = (144, 288);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModalityTag {
    Visible,
    Infrared,
}

impl ModalityTag {
    pub const ALL: [ModalityTag; 2] = [ModalityTag::Visible, ModalityTag::Infrared];

    pub fn as_str(self) -> &'static str {
        match self {
            ModalityTag::Visible => "visible",
            ModalityTag::Infrared => "infrared",
        }
    }
}

impl fmt::Display for ModalityTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModalityTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "visible" | "v" | "rgb" => Ok(ModalityTag::Visible),
            "infrared" | "i" | "ir" | "thermal" => Ok(ModalityTag::Infrared),
            other => Err(Error::invalid(format!("unknown modality `{other}`"))),
        }
    }
}

/// Axis-aligned rectangle in pixel coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl Rect {
    pub const fn new(x: usize, y: usize, w: usize, h: usize) -> Self {
        Self { x, y, w, h }
    }

    pub fn area(&self) -> usize {
        self.w * self.h
    }

    pub fn fits(&self, width: usize, height: usize) -> bool {
        self.w >= 1 && self.h >= 1 && self.x + self.w <= width && self.y + self.h <= height
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x && x < self.x + self.w && y >= self.y && y < self.y + self.h
    }

    /// Center in pixel units, `(x + w/2, y + h/2)`.
    pub fn center(&self) -> (f64, f64) {
        (
            self.x as f64 + self.w as f64 / 2.0,
            self.y as f64 + self.h as f64 / 2.0,
        )
    }

    pub fn whole(width: usize, height: usize) -> Self {
        Self::new(0, 0, width, height)
    }
}

impl fmt::Display for Rect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\t{}\t{}\t{}", self.x, self.y, self.w, self.h)
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
    modality: ModalityTag,
}

impl fmt::Debug for ImageBuffer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ImageBuffer")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("modality", &self.modality)
            .finish_non_exhaustive()
    }
}

impl ImageBuffer {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>, modality: ModalityTag) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid(format!("image dimensions must be positive, got {width}x{height}")));
        }
        if pixels.len() != width * height * 3 {
            return Err(Error::invalid(format!(
                "pixel buffer has {} bytes, expected {}",
                pixels.len(),
                width * height * 3
            )));
        }
        let img = Self { width, height, pixels, modality };
        if modality == ModalityTag::Infrared && !img.is_single_channel() {
            return Err(Error::invalid("infrared image violates R=G=B"));
        }
        Ok(img)
    }

    /// Builds an infrared image from arbitrary RGB bytes by projecting to luminance.
    pub fn infrared_from_rgb(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        let img = Self::new(width, height, pixels, ModalityTag::Visible)?;
        Ok(to_grayscale(&img).retag(ModalityTag::Infrared))
    }

    /// Builds an image from a single luminance plane.
    pub fn from_luma(width: usize, height: usize, luma: &[u8], modality: ModalityTag) -> Result<Self> {
        if luma.len() != width * height {
            return Err(Error::invalid("luma plane length mismatch"));
        }
        let pixels = luma.iter().flat_map(|&v| [v, v, v]).collect();
        Self::new(width, height, pixels, modality)
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3], modality: ModalityTag) -> Result<Self> {
        let pixels = (0..width * height).flat_map(|_| rgb).collect();
        Self::new(width, height, pixels, modality)
    }

    pub fn zeros_like(other: &ImageBuffer) -> Self {
        Self {
            width: other.width,
            height: other.height,
            pixels: vec![0; other.pixels.len()],
            modality: other.modality,
        }
    }

    /// Same pixels, different tag. Only valid when the data already satisfies
    /// the target modality's invariant.
    pub(crate) fn retag(mut self, modality: ModalityTag) -> Self {
        debug_assert!(modality == ModalityTag::Visible || self.is_single_channel());
        self.modality = modality;
        self
    }

    /// Wraps bytes produced by an operator that preserves this image's
    /// invariants (same dims, same modality).
    pub(crate) fn with_pixels(&self, pixels: Vec<u8>) -> Self {
        debug_assert_eq!(pixels.len(), self.pixels.len());
        let out = Self {
            width: self.width,
            height: self.height,
            pixels,
            modality: self.modality,
        };
        debug_assert!(out.modality == ModalityTag::Visible || out.is_single_channel());
        out
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn modality(&self) -> ModalityTag {
        self.modality
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    #[inline]
    pub(crate) fn put(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn is_single_channel(&self) -> bool {
        self.pixels
            .chunks_exact(3)
            .all(|p| p[0] == p[1] && p[1] == p[2])
    }

    /// Largest `|R-G|` or `|R-B|` over all pixels.
    pub fn max_channel_spread(&self) -> u8 {
        self.pixels
            .chunks_exact(3)
            .map(|p| p[0].abs_diff(p[1]).max(p[0].abs_diff(p[2])))
            .max()
            .unwrap_or(0)
    }

    /// First channel of every pixel.
    pub fn luma_plane(&self) -> Vec<u8> {
        self.pixels.chunks_exact(3).map(|p| p[0]).collect()
    }

    /// Copies out the bytes of `rect` row by row.
    pub fn region(&self, rect: Rect) -> Result<Vec<u8>> {
        if !rect.fits(self.width, self.height) {
            return Err(Error::invalid(format!("rect {rect:?} outside {}x{}", self.width, self.height)));
        }
        let mut out = Vec::with_capacity(rect.area() * 3);
        for y in rect.y..rect.y + rect.h {
            let start = (y * self.width + rect.x) * 3;
            out.extend_from_slice(&self.pixels[start..start + rect.w * 3]);
        }
        Ok(out)
    }

    /// Writes `bytes` (as returned by [`region`](Self::region)) into `rect`.
    pub(crate) fn write_region(&mut self, rect: Rect, bytes: &[u8]) {
        debug_assert!(rect.fits(self.width, self.height));
        debug_assert_eq!(bytes.len(), rect.area() * 3);
        for (row, y) in (rect.y..rect.y + rect.h).enumerate() {
            let start = (y * self.width + rect.x) * 3;
            self.pixels[start..start + rect.w * 3]
                .copy_from_slice(&bytes[row * rect.w * 3..(row + 1) * rect.w * 3]);
        }
    }

    /// Number of pixels whose RGB triple differs between two equal-size images.
    pub fn count_changed(&self, other: &ImageBuffer) -> usize {
        self.pixels
            .chunks_exact(3)
            .zip(other.pixels.chunks_exact(3))
            .filter(|(a, b)| a != b)
            .count()
    }
}

/// Round-half-up and clamp to the 8-bit range.
#[inline]
pub fn quantize(v: f64) -> u8 {
    if v.is_nan() {
        return 0;
    }
    (v + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// BT.601 luma with integer weights, rounding half up.
#[inline]
pub fn luma(rgb: [u8; 3]) -> u8 {
    let sum = 299 * u32::from(rgb[0]) + 587 * u32::from(rgb[1]) + 114 * u32::from(rgb[2]);
    ((sum + 500) / 1000) as u8
}

/// Bilinear resize with edge clamping (pixel-center alignment).
pub fn resize(img: &ImageBuffer, width: usize, height: usize) -> Result<ImageBuffer> {
    if width == 0 || height == 0 {
        return Err(Error::invalid(format!("resize target must be positive, got {width}x{height}")));
    }
    if (width, height) == img.dims() {
        return Ok(img.clone());
    }
    let (sw, sh) = img.dims();
    let sx = sw as f64 / width as f64;
    let sy = sh as f64 / height as f64;
    let xs: Vec<(usize, usize, f64)> = (0..width)
        .map(|x| axis_sample((x as f64 + 0.5) * sx - 0.5, sw))
        .collect();
    let mut pixels = Vec::with_capacity(width * height * 3);
    for y in 0..height {
        let (y0, y1, fy) = axis_sample((y as f64 + 0.5) * sy - 0.5, sh);
        for &(x0, x1, fx) in &xs {
            let p00 = img.get(x0, y0);
            let p10 = img.get(x1, y0);
            let p01 = img.get(x0, y1);
            let p11 = img.get(x1, y1);
            for c in 0..3 {
                let top = f64::from(p00[c]) * (1.0 - fx) + f64::from(p10[c]) * fx;
                let bottom = f64::from(p01[c]) * (1.0 - fx) + f64::from(p11[c]) * fx;
                pixels.push(quantize(top * (1.0 - fy) + bottom * fy));
            }
        }
    }
    ImageBuffer::new(width, height, pixels, img.modality())
}

fn axis_sample(pos: f64, len: usize) -> (usize, usize, f64) {
    let max = (len - 1) as f64;
    let p = pos.clamp(0.0, max);
    let i0 = p.floor() as usize;
    let i1 = (i0 + 1).min(len - 1);
    (i0, i1, p - i0 as f64)
}

/// Crops a window of the zero-padded image, offset drawn uniformly per axis.
pub fn random_crop_with_padding(img: &ImageBuffer, pad: usize, rng: &mut Rng) -> ImageBuffer {
    let ox = rng.below(2 * pad as u64 + 1) as usize;
    let oy = rng.below(2 * pad as u64 + 1) as usize;
    crop_padded_at(img, pad, ox, oy)
}

/// Window of the `pad`-zero-padded image whose top-left is `(ox, oy)` in
/// padded coordinates.
pub fn crop_padded_at(img: &ImageBuffer, pad: usize, ox: usize, oy: usize) -> ImageBuffer {
    if ox == pad && oy == pad {
        return img.clone();
    }
    let (w, h) = img.dims();
    let mut out = ImageBuffer::zeros_like(img);
    for y in 0..h {
        let sy = (y + oy) as isize - pad as isize;
        if sy < 0 || sy >= h as isize {
            continue;
        }
        for x in 0..w {
            let sx = (x + ox) as isize - pad as isize;
            if sx < 0 || sx >= w as isize {
                continue;
            }
            out.put(x, y, img.get(sx as usize, sy as usize));
        }
    }
    out
}

pub fn horizontal_flip(img: &ImageBuffer, p: f64, rng: &mut Rng) -> Result<ImageBuffer> {
    check_probability(p)?;
    Ok(if rng.bernoulli(p) { mirror(img) } else { img.clone() })
}

/// Column-mirrored copy.
pub fn mirror(img: &ImageBuffer) -> ImageBuffer {
    let (w, _) = img.dims();
    let pixels = img
        .pixels()
        .chunks_exact(w * 3)
        .flat_map(|row| row.chunks_exact(3).rev().flatten().copied().collect::<Vec<_>>())
        .collect();
    img.with_pixels(pixels)
}

pub fn to_grayscale(img: &ImageBuffer) -> ImageBuffer {
    let pixels = img
        .pixels()
        .chunks_exact(3)
        .flat_map(|p| {
            let v = luma([p[0], p[1], p[2]]);
            [v, v, v]
        })
        .collect();
    ImageBuffer {
        width: img.width,
        height: img.height,
        pixels,
        modality: img.modality,
    }
}

/// Peak signal-to-noise ratio in dB with peak 255. Identical images give
/// `f64::INFINITY`.
pub fn psnr(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(Error::invalid(format!(
            "psnr needs equal dims, got {:?} and {:?}",
            a.dims(),
            b.dims()
        )));
    }
    let sse: f64 = a
        .pixels()
        .iter()
        .zip(b.pixels())
        .map(|(&x, &y)| {
            let d = f64::from(x) - f64::from(y);
            d * d
        })
        .sum();
    let mse = sse / a.pixels().len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (255.0f64 * 255.0 / mse).log10())
}

pub(crate) fn check_probability(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::invalid(format!("probability {p} outside [0, 1]")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient(w: usize, h: usize, modality: ModalityTag) -> ImageBuffer {
        let mut px = Vec::new();
        for y in 0..h {
            for x in 0..w {
                let v = ((x * 37 + y * 11) % 256) as u8;
                match modality {
                    ModalityTag::Visible => px.extend_from_slice(&[v, v / 2, 255 - v]),
                    ModalityTag::Infrared => px.extend_from_slice(&[v, v, v]),
                }
            }
        }
        ImageBuffer::new(w, h, px, modality).unwrap()
    }

    #[test]
    fn constructor_rejects_bad_buffers() {
        assert!(ImageBuffer::new(0, 3, vec![], ModalityTag::Visible).is_err());
        assert!(ImageBuffer::new(2, 2, vec![0; 11], ModalityTag::Visible).is_err());
        assert!(ImageBuffer::new(1, 1, vec![1, 2, 3], ModalityTag::Infrared).is_err());
        assert!(ImageBuffer::new(1, 1, vec![4, 4, 4], ModalityTag::Infrared).is_ok());
    }

    #[test]
    fn resize_to_working_size() {
        let img = gradient(37, 91, ModalityTag::Visible);
        let out = resize(&img, 144, 288).unwrap();
        assert_eq!(out.dims(), (144, 288));
        assert_eq!(out.modality(), ModalityTag::Visible);
    }

    #[test]
    fn resize_identity_and_errors() {
        let img = gradient(20, 30, ModalityTag::Infrared);
        assert_eq!(resize(&img, 20, 30).unwrap(), img);
        assert!(resize(&img, 0, 30).is_err());
        let up = resize(&img, 61, 17).unwrap();
        assert!(up.is_single_channel());
    }

    #[test]
    fn resize_checkerboard_matches_hand_bilinear() {
        // 2x2 checkerboard [[0, 255], [255, 0]] upsampled to 4x4. Source
        // sample positions per axis are (x + 0.5) / 2 - 0.5 clamped to
        // [0, 1], i.e. 0, 0.25, 0.75, 1. Frozen from the direct formula:
        // v(u, w) = 255 * (u (1 - w) + w (1 - u)).
        let px: Vec<u8> = [0u8, 255, 255, 0].iter().flat_map(|&v| [v, v, v]).collect();
        let img = ImageBuffer::new(2, 2, px, ModalityTag::Visible).unwrap();
        let out = resize(&img, 4, 4).unwrap();
        let pos = [0.0, 0.25, 0.75, 1.0];
        for (y, &w) in pos.iter().enumerate() {
            for (x, &u) in pos.iter().enumerate() {
                let expect = quantize(255.0 * (u * (1.0 - w) + w * (1.0 - u)));
                assert_eq!(out.get(x, y)[0], expect, "({x},{y})");
            }
        }
        let row1: Vec<u8> = (0..4).map(|x| out.get(x, 1)[0]).collect();
        assert_eq!(row1, vec![64, 96, 159, 191]);
    }

    #[test]
    fn crop_pad_zero_is_identity() {
        let img = gradient(13, 9, ModalityTag::Visible);
        let mut rng = Rng::new(4);
        assert_eq!(random_crop_with_padding(&img, 0, &mut rng), img);
    }

    #[test]
    fn crop_deterministic() {
        let img = gradient(13, 9, ModalityTag::Visible);
        let a = random_crop_with_padding(&img, 10, &mut Rng::new(77));
        let b = random_crop_with_padding(&img, 10, &mut Rng::new(77));
        assert_eq!(a, b);
        assert_eq!(a.dims(), img.dims());
    }

    #[test]
    fn crop_exposes_padding() {
        let img = ImageBuffer::filled(16, 16, [255; 3], ModalityTag::Visible).unwrap();
        let any_zero = (0..100).any(|s| {
            let out = random_crop_with_padding(&img, 10, &mut Rng::new(s));
            out.pixels().contains(&0)
        });
        assert!(any_zero);
    }

    #[test]
    fn flip_probabilities() {
        let img = gradient(7, 5, ModalityTag::Visible);
        let mut rng = Rng::new(1);
        assert_eq!(horizontal_flip(&img, 0.0, &mut rng).unwrap(), img);
        let once = horizontal_flip(&img, 1.0, &mut rng).unwrap();
        assert_ne!(once, img);
        assert_eq!(horizontal_flip(&once, 1.0, &mut rng).unwrap(), img);
        assert!(horizontal_flip(&img, 1.5, &mut rng).is_err());
        assert!(horizontal_flip(&img, -0.1, &mut rng).is_err());
    }

    #[test]
    fn flip_rate() {
        let img = gradient(3, 2, ModalityTag::Visible);
        let flips = (0..10_000u64)
            .filter(|&s| horizontal_flip(&img, 0.5, &mut Rng::new(s)).unwrap() != img)
            .count();
        assert!((4800..=5200).contains(&flips), "{flips}");
    }

    #[test]
    fn grayscale_values() {
        let red = ImageBuffer::filled(3, 3, [255, 0, 0], ModalityTag::Visible).unwrap();
        let g = to_grayscale(&red);
        assert!(g.pixels().iter().all(|&v| v == 76));
        let gray = gradient(9, 4, ModalityTag::Infrared);
        assert_eq!(to_grayscale(&gray), gray);
        assert!(to_grayscale(&gradient(9, 4, ModalityTag::Visible)).is_single_channel());
    }

    #[test]
    fn psnr_definitions() {
        let a = ImageBuffer::filled(4, 4, [0; 3], ModalityTag::Visible).unwrap();
        let b = ImageBuffer::filled(4, 4, [255; 3], ModalityTag::Visible).unwrap();
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
        assert!(psnr(&a, &b).unwrap().abs() < 1e-12);
        let p = ImageBuffer::filled(1, 1, [100; 3], ModalityTag::Visible).unwrap();
        let q = ImageBuffer::filled(1, 1, [110; 3], ModalityTag::Visible).unwrap();
        let expect = 10.0 * (255.0f64 * 255.0 / 100.0).log10();
        assert!((psnr(&p, &q).unwrap() - expect).abs() < 1e-12);
        assert!((expect - 28.131).abs() < 1e-3);
        let c = ImageBuffer::filled(2, 1, [0; 3], ModalityTag::Visible).unwrap();
        assert!(psnr(&a, &c).is_err());
    }

    #[test]
    fn region_round_trip() {
        let mut img = gradient(10, 8, ModalityTag::Visible);
        let r = Rect::new(2, 3, 4, 2);
        let bytes = img.region(r).unwrap();
        assert_eq!(bytes.len(), 24);
        let orig = img.clone();
        img.write_region(r, &bytes);
        assert_eq!(img, orig);
        assert!(img.region(Rect::new(8, 0, 4, 1)).is_err());
    }
}
