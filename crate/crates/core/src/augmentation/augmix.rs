//! AugMix: several short chains of label-preserving operations mixed with
//! Dirichlet weights, then blended with the original by a Beta weight.
//!
//! The operation set leaves out color, contrast, brightness and sharpness so
//! the training distribution does not overlap the corruption benchmark.
//! Every operation acts identically on each channel, so infrared images
//! stay gray.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{check_probability, quantize, FloatImage, ImageBuffer};
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmixParams {
    pub probability: f64,
    /// Number of chains.
    pub width: usize,
    /// Operations per chain; `None` draws 1..=3 per chain.
    pub depth: Option<usize>,
    /// Magnitude level, 1..=10.
    pub severity: u8,
    /// Dirichlet / Beta concentration.
    pub alpha: f64,
}

impl Default for AugmixParams {
    fn default() -> Self {
        Self {
            probability: 1.0,
            width: 3,
            depth: None,
            severity: 3,
            alpha: 1.0,
        }
    }
}

impl AugmixParams {
    pub fn validate(&self) -> Result<()> {
        check_probability(self.probability)?;
        if self.width == 0 || self.depth == Some(0) {
            return Err(Error::invalid("augmix width and depth must be >= 1"));
        }
        if !(1..=10).contains(&self.severity) {
            return Err(Error::invalid(format!("augmix severity {} outside [1, 10]", self.severity)));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::invalid("augmix alpha must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AugmixOp {
    AutoContrast,
    Equalize,
    Posterize,
    Rotate,
    Solarize,
    ShearX,
    ShearY,
    TranslateX,
    TranslateY,
}

impl AugmixOp {
    pub const ALL: [AugmixOp; 9] = [
        AugmixOp::AutoContrast,
        AugmixOp::Equalize,
        AugmixOp::Posterize,
        AugmixOp::Rotate,
        AugmixOp::Solarize,
        AugmixOp::ShearX,
        AugmixOp::ShearY,
        AugmixOp::TranslateX,
        AugmixOp::TranslateY,
    ];

    pub fn apply(self, img: &ImageBuffer, severity: u8, rng: &mut Rng) -> ImageBuffer {
        let level = rng.uniform(0.1, f64::from(severity));
        let int_param = |max: f64| (level * max / 10.0) as i64;
        let float_param = |max: f64| level * max / 10.0;
        let (w, h) = img.dims();
        match self {
            AugmixOp::AutoContrast => autocontrast(img),
            AugmixOp::Equalize => equalize(img),
            AugmixOp::Posterize => posterize(img, (4 - int_param(4.0)).clamp(0, 8) as u32),
            AugmixOp::Solarize => solarize(img, (256 - int_param(256.0)) as i32),
            AugmixOp::Rotate => {
                let deg = int_param(30.0) as f64 * random_sign(rng);
                let (s, c) = (-deg.to_radians()).sin_cos();
                // Inverse map around the image center.
                let (cx, cy) = (w as f64 / 2.0, h as f64 / 2.0);
                affine(img, [c, -s, cx - c * cx + s * cy, s, c, cy - s * cx - c * cy])
            }
            AugmixOp::ShearX => {
                let k = float_param(0.3) * random_sign(rng);
                affine(img, [1.0, k, 0.0, 0.0, 1.0, 0.0])
            }
            AugmixOp::ShearY => {
                let k = float_param(0.3) * random_sign(rng);
                affine(img, [1.0, 0.0, 0.0, k, 1.0, 0.0])
            }
            AugmixOp::TranslateX => {
                let t = int_param(w as f64 / 3.0) as f64 * random_sign(rng);
                affine(img, [1.0, 0.0, t, 0.0, 1.0, 0.0])
            }
            AugmixOp::TranslateY => {
                let t = int_param(h as f64 / 3.0) as f64 * random_sign(rng);
                affine(img, [1.0, 0.0, 0.0, 0.0, 1.0, t])
            }
        }
    }
}

fn random_sign(rng: &mut Rng) -> f64 {
    if rng.below(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Output pixel `(x, y)` samples the input at `m * (x, y, 1)` (bilinear,
/// zero outside).
fn affine(img: &ImageBuffer, m: [f64; 6]) -> ImageBuffer {
    let (w, h) = img.dims();
    let src = FloatImage::from_image(img);
    let mut pixels = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        for x in 0..w {
            // Pixel centers.
            let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
            let sx = m[0] * px + m[1] * py + m[2] - 0.5;
            let sy = m[3] * px + m[4] * py + m[5] - 0.5;
            for c in 0..3 {
                pixels.push(quantize(f64::from(sample_zero(&src, sx, sy, c)) * 255.0));
            }
        }
    }
    img.with_pixels(pixels)
}

fn sample_zero(src: &FloatImage, x: f64, y: f64, c: usize) -> f32 {
    let x0 = x.floor();
    let y0 = y.floor();
    let tx = (x - x0) as f32;
    let ty = (y - y0) as f32;
    let get = |xi: f64, yi: f64| -> f32 {
        if xi < 0.0 || yi < 0.0 || xi >= src.width as f64 || yi >= src.height as f64 {
            0.0
        } else {
            src.at(xi as usize, yi as usize, c)
        }
    };
    let top = get(x0, y0) * (1.0 - tx) + get(x0 + 1.0, y0) * tx;
    let bottom = get(x0, y0 + 1.0) * (1.0 - tx) + get(x0 + 1.0, y0 + 1.0) * tx;
    top * (1.0 - ty) + bottom * ty
}

fn per_channel_lut(img: &ImageBuffer, luts: &[[u8; 256]; 3]) -> ImageBuffer {
    let pixels = img
        .pixels()
        .chunks_exact(3)
        .flat_map(|p| [luts[0][p[0] as usize], luts[1][p[1] as usize], luts[2][p[2] as usize]])
        .collect();
    img.with_pixels(pixels)
}

fn histograms(img: &ImageBuffer) -> [[usize; 256]; 3] {
    let mut h = [[0usize; 256]; 3];
    for p in img.pixels().chunks_exact(3) {
        for c in 0..3 {
            h[c][p[c] as usize] += 1;
        }
    }
    h
}

pub fn autocontrast(img: &ImageBuffer) -> ImageBuffer {
    let hist = histograms(img);
    let luts = hist.map(|h| {
        let lo = h.iter().position(|&n| n > 0).unwrap_or(0);
        let hi = h.iter().rposition(|&n| n > 0).unwrap_or(255);
        let mut lut = [0u8; 256];
        for (i, v) in lut.iter_mut().enumerate() {
            *v = if hi <= lo {
                i as u8
            } else {
                quantize((i as f64 - lo as f64) * 255.0 / (hi - lo) as f64)
            };
        }
        lut
    });
    per_channel_lut(img, &luts)
}

/// Histogram equalization with the PIL step rule.
pub fn equalize(img: &ImageBuffer) -> ImageBuffer {
    let hist = histograms(img);
    let luts = hist.map(|h| {
        let mut lut = [0u8; 256];
        for (i, v) in lut.iter_mut().enumerate() {
            *v = i as u8;
        }
        let nonzero: Vec<usize> = h.iter().copied().filter(|&n| n > 0).collect();
        if nonzero.len() <= 1 {
            return lut;
        }
        let step = (nonzero.iter().sum::<usize>() - nonzero[nonzero.len() - 1]) / 255;
        if step == 0 {
            return lut;
        }
        let mut n = step / 2;
        for (i, v) in lut.iter_mut().enumerate() {
            *v = (n / step).min(255) as u8;
            n += h[i];
        }
        lut
    });
    per_channel_lut(img, &luts)
}

pub fn posterize(img: &ImageBuffer, bits: u32) -> ImageBuffer {
    let mask: u8 = if bits == 0 { 0 } else { !((1u16 << (8 - bits.min(8))) - 1) as u8 };
    img.with_pixels(img.pixels().iter().map(|&v| v & mask).collect())
}

pub fn solarize(img: &ImageBuffer, threshold: i32) -> ImageBuffer {
    img.with_pixels(
        img.pixels()
            .iter()
            .map(|&v| if i32::from(v) >= threshold { 255 - v } else { v })
            .collect(),
    )
}

/// Convex blend `(1 - m) * original + m * sum_i weights[i] * chains[i]`.
pub fn augmix_mix(original: &ImageBuffer, chains: &[ImageBuffer], weights: &[f64], m: f64) -> Result<ImageBuffer> {
    if chains.len() != weights.len() {
        return Err(Error::invalid("one weight per chain required"));
    }
    if chains.iter().any(|c| c.dims() != original.dims()) {
        return Err(Error::invalid("augmix chains must match the original dims"));
    }
    let pixels = (0..original.pixels().len())
        .map(|i| {
            let mixed: f64 = chains
                .iter()
                .zip(weights)
                .map(|(c, &w)| w * f64::from(c.pixels()[i]))
                .sum();
            quantize((1.0 - m) * f64::from(original.pixels()[i]) + m * mixed)
        })
        .collect();
    Ok(original.with_pixels(pixels))
}

/// Chains and mixing weights drawn by one AugMix call.
#[derive(Clone, Debug)]
pub struct AugmixDraw {
    pub chains: Vec<ImageBuffer>,
    pub weights: Vec<f64>,
    pub m: f64,
}

pub fn augmix_draw(img: &ImageBuffer, params: &AugmixParams, rng: &mut Rng) -> Result<AugmixDraw> {
    params.validate()?;
    let weights = rng.dirichlet(params.alpha, params.width);
    let m = rng.beta(params.alpha, params.alpha);
    let mut chains = Vec::with_capacity(params.width);
    for _ in 0..params.width {
        let depth = params.depth.unwrap_or_else(|| 1 + rng.index(3));
        let mut aug = img.clone();
        for _ in 0..depth {
            let op = AugmixOp::ALL[rng.index(AugmixOp::ALL.len())];
            aug = op.apply(&aug, params.severity, rng);
        }
        chains.push(aug);
    }
    Ok(AugmixDraw { chains, weights, m })
}

/// AugMix on one image (always applied; `params.probability` is the policy
/// trigger and is handled by the caller).
pub fn augmix(img: &ImageBuffer, params: &AugmixParams, rng: &mut Rng) -> Result<ImageBuffer> {
    let draw = augmix_draw(img, params, rng)?;
    augmix_mix(img, &draw.chains, &draw.weights, draw.m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augmentation::tests::textured;
    use crate::imaging::ModalityTag;

    #[test]
    fn all_weight_on_original_is_identity() {
        let img = textured(20, 30, ModalityTag::Visible, 1);
        let draw = augmix_draw(&img, &AugmixParams::default(), &mut Rng::new(3)).unwrap();
        assert_eq!(augmix_mix(&img, &draw.chains, &draw.weights, 0.0).unwrap(), img);
    }

    #[test]
    fn seeded() {
        let img = textured(20, 30, ModalityTag::Visible, 1);
        let p = AugmixParams::default();
        assert_eq!(augmix(&img, &p, &mut Rng::new(5)).unwrap(), augmix(&img, &p, &mut Rng::new(5)).unwrap());
    }

    #[test]
    fn output_inside_candidate_envelope() {
        let img = textured(24, 32, ModalityTag::Visible, 2);
        for s in 0..20 {
            let mut a = Rng::new(s);
            let draw = augmix_draw(&img, &AugmixParams::default(), &mut a).unwrap();
            let out = augmix_mix(&img, &draw.chains, &draw.weights, draw.m).unwrap();
            for i in 0..img.pixels().len() {
                let mut lo = img.pixels()[i];
                let mut hi = lo;
                for c in &draw.chains {
                    lo = lo.min(c.pixels()[i]);
                    hi = hi.max(c.pixels()[i]);
                }
                assert!(out.pixels()[i] >= lo && out.pixels()[i] <= hi);
            }
        }
    }

    #[test]
    fn every_op_keeps_infrared_gray() {
        let img = textured(24, 32, ModalityTag::Infrared, 3);
        for op in AugmixOp::ALL {
            for s in 0..5 {
                assert!(op.apply(&img, 10, &mut Rng::new(s)).is_single_channel(), "{op:?}");
            }
        }
        assert!(augmix(&img, &AugmixParams::default(), &mut Rng::new(1)).unwrap().is_single_channel());
    }

    #[test]
    fn point_ops() {
        let img = ImageBuffer::filled(2, 2, [200, 100, 17], ModalityTag::Visible).unwrap();
        assert_eq!(posterize(&img, 4).get(0, 0), [192, 96, 16]);
        assert_eq!(solarize(&img, 128).get(0, 0), [55, 100, 17]);
        assert_eq!(autocontrast(&img), img);
        assert_eq!(equalize(&img), img);
    }

    #[test]
    fn invalid_params() {
        let img = textured(4, 4, ModalityTag::Visible, 0);
        let p = AugmixParams { width: 0, ..Default::default() };
        assert!(augmix(&img, &p, &mut Rng::new(0)).is_err());
    }
}
