//! Pixel-level implementations of the corruption kinds.
//!
//! Each function maps a clean image to its corrupted version. When the input
//! is infrared, random layers (noise, masks, streaks) are drawn once per pixel
//! and shared by all three channels, and colored overlays are replaced by
//! their luma, so the output keeps `R == G == B`.

use super::params::*;
use super::textures::{frost_texture, plasma_fractal};
use crate::error::Result;
use crate::imaging::{self, hsv_to_rgb, rgb_to_hsv, FloatImage, ImageBuffer, ModalityTag};
use crate::rng::Rng;

fn is_ir(img: &ImageBuffer) -> bool {
    img.modality() == ModalityTag::Infrared
}

fn finish(mut x: FloatImage, img: &ImageBuffer) -> Result<ImageBuffer> {
    x.clamp01();
    x.to_image(img.modality())
}

/// BT.601 luma of a float color.
fn luma_f(c: [f32; 3]) -> f32 {
    0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2]
}

/// Colored overlay for visible images, its gray equivalent for infrared.
fn tint(color: [f32; 3], ir: bool) -> [f32; 3] {
    if ir {
        let g = luma_f(color);
        [g, g, g]
    } else {
        color
    }
}

/// Per-element noise: one draw per channel for visible, one per pixel for infrared.
fn pointwise_noise(img: &ImageBuffer, rng: &mut Rng, mut f: impl FnMut(f32, &mut Rng, bool) -> f32) -> FloatImage {
    let mut x = FloatImage::from_image(img);
    if is_ir(img) {
        for px in x.data.chunks_exact_mut(3) {
            let v = f(px[0], rng, true);
            px.fill(v);
        }
    } else {
        for v in &mut x.data {
            *v = f(*v, rng, false);
        }
    }
    x
}

pub fn gaussian_noise(img: &ImageBuffer, sigma: f32, rng: &mut Rng) -> Result<ImageBuffer> {
    let x = pointwise_noise(img, rng, |v, r, _| v + (r.normal() * f64::from(sigma)) as f32);
    finish(x, img)
}

pub fn shot_noise(img: &ImageBuffer, rate: f32, rng: &mut Rng) -> Result<ImageBuffer> {
    let x = pointwise_noise(img, rng, |v, r, _| {
        r.poisson(f64::from(v) * f64::from(rate)) as f32 / rate
    });
    finish(x, img)
}

pub fn impulse_noise(img: &ImageBuffer, amount: f32, rng: &mut Rng) -> Result<ImageBuffer> {
    let amount = f64::from(amount);
    let x = pointwise_noise(img, rng, |v, r, _| {
        let u = r.next_f64();
        if u < amount / 2.0 {
            0.0
        } else if u < amount {
            1.0
        } else {
            v
        }
    });
    finish(x, img)
}

pub fn speckle_noise(img: &ImageBuffer, sigma: f32, rng: &mut Rng) -> Result<ImageBuffer> {
    let x = pointwise_noise(img, rng, |v, r, _| v + v * (r.normal() * f64::from(sigma)) as f32);
    finish(x, img)
}

pub fn gaussian_blur(img: &ImageBuffer, sigma: f32) -> Result<ImageBuffer> {
    finish(FloatImage::from_image(img).gaussian_blur(sigma), img)
}

pub fn defocus_blur(img: &ImageBuffer, p: &DefocusParams) -> Result<ImageBuffer> {
    let r = p.radius.ceil() as isize;
    let half = r.max(8);
    let size = (2 * half + 1) as usize;
    let mut disk = FloatImage::new(size, size, 1);
    for y in -half..=half {
        for x in -half..=half {
            if (x * x + y * y) as f32 <= p.radius * p.radius {
                *disk.at_mut((x + half) as usize, (y + half) as usize, 0) = 1.0;
            }
        }
    }
    let mut kernel = disk.gaussian_blur(p.alias_sigma).data;
    let total: f32 = kernel.iter().sum();
    for k in &mut kernel {
        *k /= total;
    }
    finish(FloatImage::from_image(img).convolve(&kernel, size), img)
}

pub fn glass_blur(img: &ImageBuffer, p: &GlassParams, rng: &mut Rng) -> Result<ImageBuffer> {
    // Blur, quantize, shuffle local pixels, blur again.
    let mut work = gaussian_blur(img, p.sigma)?;
    let (w, h) = work.dims();
    let d = p.max_delta;
    for _ in 0..p.iterations {
        if h <= 2 * d || w <= 2 * d {
            break;
        }
        for y in (d + 1..h - d).rev() {
            for x in (d + 1..w - d).rev() {
                let dx = rng.range_inclusive(-(d as i64), d as i64 - 1);
                let dy = rng.range_inclusive(-(d as i64), d as i64 - 1);
                let nx = (x as i64 + dx) as usize;
                let ny = (y as i64 + dy) as usize;
                let a = work.get(x, y);
                let b = work.get(nx, ny);
                work.put(x, y, b);
                work.put(nx, ny, a);
            }
        }
    }
    gaussian_blur(&work, p.sigma)
}

/// One-sided Gaussian motion kernel along `angle_deg`, integer shifts with
/// edge replication.
pub(crate) fn motion_blur_float(x: &FloatImage, radius: f32, sigma: f32, angle_deg: f64) -> FloatImage {
    let width = (radius * 2.0 + 1.0).round() as usize;
    let mut weights: Vec<f32> = (0..width)
        .map(|i| (-((i * i) as f32) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f32 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    let (sin, cos) = angle_deg.to_radians().sin_cos();
    let mut out = FloatImage::new(x.width, x.height, x.channels);
    let (wi, hi) = (x.width as i64, x.height as i64);
    for (i, &wt) in weights.iter().enumerate() {
        let dy = -((i as f64 * sin) - 0.5).ceil() as i64;
        let dx = -((i as f64 * cos) - 0.5).ceil() as i64;
        if dy.abs() >= hi || dx.abs() >= wi {
            break;
        }
        for yy in 0..hi {
            let sy = (yy - dy).clamp(0, hi - 1) as usize;
            for xx in 0..wi {
                let sx = (xx - dx).clamp(0, wi - 1) as usize;
                for c in 0..x.channels {
                    *out.at_mut(xx as usize, yy as usize, c) += wt * x.at(sx, sy, c);
                }
            }
        }
    }
    out
}

pub fn motion_blur(img: &ImageBuffer, p: &MotionParams, rng: &mut Rng) -> Result<ImageBuffer> {
    let angle = rng.uniform(-45.0, 45.0);
    finish(motion_blur_float(&FloatImage::from_image(img), p.radius, p.sigma, angle), img)
}

/// Scales about the center by `zoom` (>= 1) and keeps the central window.
fn clipped_zoom(x: &FloatImage, zoom: f32) -> FloatImage {
    let cx = (x.width as f32 - 1.0) / 2.0;
    let cy = (x.height as f32 - 1.0) / 2.0;
    let mut out = FloatImage::new(x.width, x.height, x.channels);
    for yy in 0..x.height {
        let sy = cy + (yy as f32 - cy) / zoom;
        for xx in 0..x.width {
            let sx = cx + (xx as f32 - cx) / zoom;
            for c in 0..x.channels {
                *out.at_mut(xx, yy, c) = x.sample(sx, sy, c);
            }
        }
    }
    out
}

pub fn zoom_blur(img: &ImageBuffer, p: &ZoomParams) -> Result<ImageBuffer> {
    let x = FloatImage::from_image(img);
    let zooms = p.factors();
    let mut acc = x.clone();
    for &z in &zooms {
        let zoomed = clipped_zoom(&x, z);
        for (a, b) in acc.data.iter_mut().zip(&zoomed.data) {
            *a += b;
        }
    }
    let n = (zooms.len() + 1) as f32;
    finish(acc.map(|v| v / n), img)
}

pub fn snow(img: &ImageBuffer, p: &SnowParams, rng: &mut Rng) -> Result<ImageBuffer> {
    let x = FloatImage::from_image(img);
    let (w, h) = (x.width, x.height);
    let mut layer = FloatImage::from_fn(w, h, |_, _| rng.gaussian(f64::from(p.loc), f64::from(p.scale)) as f32);
    layer = clipped_zoom(&layer, p.zoom);
    for v in &mut layer.data {
        if *v < p.threshold {
            *v = 0.0;
        }
    }
    layer.clamp01();
    let angle = rng.uniform(-135.0, -45.0);
    let layer = motion_blur_float(&layer, p.blur_radius, p.blur_sigma, angle);
    let flipped = layer.rot180();
    let mut out = x.clone();
    for i in 0..w * h {
        let px = &x.data[i * 3..i * 3 + 3];
        let gray = luma_f([px[0], px[1], px[2]]) * 1.5 + 0.5;
        let flakes = layer.data[i] + flipped.data[i];
        for (c, &v) in px.iter().enumerate() {
            let base = p.blend * v + (1.0 - p.blend) * v.max(gray);
            out.data[i * 3 + c] = base + flakes;
        }
    }
    finish(out, img)
}

const FROST_TINT: [f32; 3] = [0.80, 0.89, 1.0];

pub fn frost(img: &ImageBuffer, p: &FrostParams, rng: &mut Rng) -> Result<ImageBuffer> {
    let x = FloatImage::from_image(img);
    let texture = frost_texture(x.width, x.height, rng);
    let color = tint(FROST_TINT, is_ir(img));
    let mut out = x.clone();
    for (i, px) in out.data.chunks_exact_mut(3).enumerate() {
        let f = texture.data[i];
        for c in 0..3 {
            px[c] = p.image_weight * px[c] + p.frost_weight * f * color[c];
        }
    }
    finish(out, img)
}

pub fn fog(img: &ImageBuffer, p: &FogParams, rng: &mut Rng) -> Result<ImageBuffer> {
    let x = FloatImage::from_image(img);
    let size = x.width.max(x.height).next_power_of_two().max(2);
    let plasma = plasma_fractal(size, p.decay, rng);
    let max = x.max_value();
    let mut out = x.clone();
    for yy in 0..x.height {
        for xx in 0..x.width {
            let f = p.strength * plasma.at(xx, yy, 0);
            for c in 0..3 {
                let v = out.at_mut(xx, yy, c);
                *v = (*v + f) * max / (max + p.strength);
            }
        }
    }
    finish(out, img)
}

const RAIN_COLOR: [f32; 3] = [0.78, 0.80, 0.86];

/// Thin bright streaks at a shared slant, softened by a short motion blur
/// along the streak direction.
pub fn rain(img: &ImageBuffer, p: &RainParams, rng: &mut Rng) -> Result<ImageBuffer> {
    let x = FloatImage::from_image(img);
    let (w, h) = (x.width, x.height);
    let slant = rng.uniform(-f64::from(p.max_angle), f64::from(p.max_angle));
    let (dx, dy) = (slant.to_radians().sin(), slant.to_radians().cos());
    let streaks = ((p.density as f64) * (w * h) as f64).round().max(1.0) as usize;
    let mut layer = FloatImage::new(w, h, 1);
    for _ in 0..streaks {
        let x0 = rng.uniform(0.0, w as f64);
        let y0 = rng.uniform(-0.2 * h as f64, h as f64);
        let len = f64::from(p.length_frac) * h as f64 * rng.uniform(0.5, 1.0);
        let value = rng.uniform(0.6, 1.0) as f32;
        let steps = (len * 2.0).ceil() as usize;
        for s in 0..=steps {
            let t = s as f64 * 0.5;
            let px = (x0 + t * dx).floor();
            let py = (y0 + t * dy).floor();
            if px < 0.0 || px >= w as f64 || py >= h as f64 {
                break;
            }
            if py < 0.0 {
                continue;
            }
            let v = layer.at_mut(px as usize, py as usize, 0);
            *v = v.max(value);
        }
    }
    let layer = motion_blur_float(&layer, 2.0, 1.5, 90.0 - slant);
    let color = tint(RAIN_COLOR, is_ir(img));
    let dim = 1.0 - 0.15 * p.intensity;
    let mut out = x.clone();
    for (i, px) in out.data.chunks_exact_mut(3).enumerate() {
        let a = (layer.data[i] * p.intensity).min(1.0);
        for c in 0..3 {
            px[c] = px[c] * dim * (1.0 - a) + color[c] * a;
        }
    }
    finish(out, img)
}

const WATER_COLOR: [f32; 3] = [175.0 / 255.0, 238.0 / 255.0, 238.0 / 255.0];
const MUD_COLOR: [f32; 3] = [63.0 / 255.0, 42.0 / 255.0, 20.0 / 255.0];

pub fn spatter(img: &ImageBuffer, p: &SpatterParams, rng: &mut Rng) -> Result<ImageBuffer> {
    let x = FloatImage::from_image(img);
    let (w, h) = (x.width, x.height);
    let mut liquid = FloatImage::from_fn(w, h, |_, _| rng.gaussian(f64::from(p.loc), f64::from(p.scale)) as f32)
        .gaussian_blur(p.sigma);
    for v in &mut liquid.data {
        if *v < p.threshold {
            *v = 0.0;
        }
    }
    let ir = is_ir(img);
    let mut out = x.clone();
    if p.mud {
        let binary = liquid.map(|v| if v > p.threshold { 1.0 } else { 0.0 });
        let mask = binary.gaussian_blur(p.intensity).map(|v| if v < 0.8 { 0.0 } else { v });
        let color = tint(MUD_COLOR, ir);
        for (i, px) in out.data.chunks_exact_mut(3).enumerate() {
            let m = mask.data[i];
            for c in 0..3 {
                px[c] = px[c] * (1.0 - m) + color[c] * m;
            }
        }
    } else {
        let mut mask = liquid.gaussian_blur(1.0);
        let peak = mask.max_value();
        if peak > 0.0 {
            for v in &mut mask.data {
                *v = *v / peak * p.intensity;
            }
        }
        let color = tint(WATER_COLOR, ir);
        for (i, px) in out.data.chunks_exact_mut(3).enumerate() {
            let m = mask.data[i];
            for c in 0..3 {
                px[c] += m * color[c];
            }
        }
    }
    finish(out, img)
}

fn map_hsv(img: &ImageBuffer, f: impl Fn(f32, f32, f32) -> (f32, f32, f32)) -> Result<ImageBuffer> {
    let mut x = FloatImage::from_image(img);
    for px in x.data.chunks_exact_mut(3) {
        let (hh, s, v) = rgb_to_hsv(px[0], px[1], px[2]);
        let (hh, s, v) = f(hh, s, v);
        let (r, g, b) = hsv_to_rgb(hh, s.clamp(0.0, 1.0), v.clamp(0.0, 1.0));
        px.copy_from_slice(&[r, g, b]);
    }
    finish(x, img)
}

pub fn brightness(img: &ImageBuffer, delta: f32) -> Result<ImageBuffer> {
    map_hsv(img, |h, s, v| (h, s, v + delta))
}

pub fn saturate(img: &ImageBuffer, p: &SaturateParams) -> Result<ImageBuffer> {
    map_hsv(img, |h, s, v| (h, s * p.scale + p.shift, v))
}

pub fn contrast(img: &ImageBuffer, factor: f32) -> Result<ImageBuffer> {
    let mut x = FloatImage::from_image(img);
    let n = (x.width * x.height) as f64;
    let mut means = [0f64; 3];
    for px in x.data.chunks_exact(3) {
        for c in 0..3 {
            means[c] += f64::from(px[c]);
        }
    }
    let means = means.map(|m| (m / n) as f32);
    for px in x.data.chunks_exact_mut(3) {
        for c in 0..3 {
            px[c] = (px[c] - means[c]) * factor + means[c];
        }
    }
    finish(x, img)
}

/// Solves the affine map sending `from[i]` to `to[i]` for three points.
fn affine_from_points(from: [[f64; 2]; 3], to: [[f64; 2]; 3]) -> [[f64; 3]; 2] {
    let [[x0, y0], [x1, y1], [x2, y2]] = from;
    let det = x0 * (y1 - y2) - y0 * (x1 - x2) + (x1 * y2 - x2 * y1);
    let mut m = [[0.0; 3]; 2];
    for (row, out) in m.iter_mut().enumerate() {
        let (u0, u1, u2) = (to[0][row], to[1][row], to[2][row]);
        out[0] = (u0 * (y1 - y2) - y0 * (u1 - u2) + (u1 * y2 - u2 * y1)) / det;
        out[1] = (x0 * (u1 - u2) - u0 * (x1 - x2) + (x1 * u2 - x2 * u1)) / det;
        out[2] = (x0 * (y1 * u2 - y2 * u1) - y0 * (x1 * u2 - x2 * u1) + u0 * (x1 * y2 - x2 * y1)) / det;
    }
    m
}

pub fn elastic_transform(img: &ImageBuffer, p: &ElasticParams, rng: &mut Rng) -> Result<ImageBuffer> {
    let x = FloatImage::from_image(img);
    let (w, h) = (x.width, x.height);
    let side = w.min(h) as f64;
    let alpha = f64::from(p.alpha_frac) * side;
    let sigma = (f64::from(p.sigma_frac) * side) as f32;
    let affine = f64::from(p.affine_frac) * side;

    // Three anchor points around the center, jittered; the warp sends each
    // output pixel back through the inverse map.
    let c = [w as f64 / 2.0, h as f64 / 2.0];
    let s = (side / 3.0).floor().max(1.0);
    let anchors = [[c[0] + s, c[1] + s], [c[0] + s, c[1] - s], [c[0] - s, c[1] - s]];
    let mut moved = anchors;
    for pt in &mut moved {
        pt[0] += rng.uniform(-affine, affine);
        pt[1] += rng.uniform(-affine, affine);
    }
    let inverse = affine_from_points(moved, anchors);

    let field = |rng: &mut Rng| {
        let raw = FloatImage::from_fn(w, h, |_, _| rng.uniform(-1.0, 1.0) as f32);
        raw.gaussian_blur(sigma.max(1e-3))
    };
    let fx = field(rng);
    let fy = field(rng);

    let mut out = FloatImage::new(w, h, 3);
    for yy in 0..h {
        for xx in 0..w {
            let qx = xx as f64 + f64::from(fx.at(xx, yy, 0)) * alpha;
            let qy = yy as f64 + f64::from(fy.at(xx, yy, 0)) * alpha;
            let sx = inverse[0][0] * qx + inverse[0][1] * qy + inverse[0][2];
            let sy = inverse[1][0] * qx + inverse[1][1] * qy + inverse[1][2];
            let (rx, ry) = (reflect(sx, w), reflect(sy, h));
            for ch in 0..3 {
                *out.at_mut(xx, yy, ch) = x.sample(rx as f32, ry as f32, ch);
            }
        }
    }
    finish(out, img)
}

/// Mirror-reflects a coordinate into `[0, len - 1]`.
fn reflect(v: f64, len: usize) -> f64 {
    let max = (len - 1) as f64;
    if max == 0.0 {
        return 0.0;
    }
    let period = 2.0 * max;
    let m = v.rem_euclid(period);
    if m > max {
        period - m
    } else {
        m
    }
}

pub fn pixelate(img: &ImageBuffer, factor: f32) -> Result<ImageBuffer> {
    let (w, h) = img.dims();
    let sw = ((w as f32 * factor) as usize).max(1);
    let sh = ((h as f32 * factor) as usize).max(1);
    let x = FloatImage::from_image(img);
    let mut small = FloatImage::new(sw, sh, 3);
    for y in 0..sh {
        let y0 = y * h / sh;
        let y1 = ((y + 1) * h).div_ceil(sh).max(y0 + 1);
        for xx in 0..sw {
            let x0 = xx * w / sw;
            let x1 = ((xx + 1) * w).div_ceil(sw).max(x0 + 1);
            let n = ((y1 - y0) * (x1 - x0)) as f32;
            for c in 0..3 {
                let mut acc = 0.0;
                for sy in y0..y1 {
                    for sx in x0..x1 {
                        acc += x.at(sx, sy, c);
                    }
                }
                *small.at_mut(xx, y, c) = acc / n;
            }
        }
    }
    let mut out = FloatImage::new(w, h, 3);
    for y in 0..h {
        let sy = (y * sh / h).min(sh - 1);
        for xx in 0..w {
            let sx = (xx * sw / w).min(sw - 1);
            for c in 0..3 {
                *out.at_mut(xx, y, c) = small.at(sx, sy, c);
            }
        }
    }
    finish(out, img)
}

pub fn jpeg_compression(img: &ImageBuffer, quality: u8) -> Result<ImageBuffer> {
    let bytes = imaging::encode_jpeg(img, quality)?;
    imaging::decode_image(&bytes, img.modality())
        .map_err(|e| crate::Error::invalid(format!("jpeg round trip failed: {e}")))
}
