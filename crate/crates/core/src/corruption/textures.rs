//! Procedural layers: plasma fractal for fog and an ice-crystal texture
//! standing in for the photographic frost overlays.

use crate::imaging::FloatImage;
use crate::rng::Rng;

/// Diamond-square plasma on a `size x size` torus (size a power of two),
/// normalized to `[0, 1]`.
pub fn plasma_fractal(size: usize, decay: f32, rng: &mut Rng) -> FloatImage {
    debug_assert!(size.is_power_of_two());
    let mut map = vec![0f64; size * size];
    let idx = |r: usize, c: usize| (r % size) * size + (c % size);
    let mut step = size;
    let mut wibble = 100f64;
    while step >= 2 {
        let half = step / 2;
        let jitter = |rng: &mut Rng, sum: f64| sum / 4.0 + wibble * rng.uniform(-wibble, wibble);
        // squares
        for r in (0..size).step_by(step) {
            for c in (0..size).step_by(step) {
                let sum = map[idx(r, c)] + map[idx(r + step, c)] + map[idx(r, c + step)] + map[idx(r + step, c + step)];
                map[idx(r + half, c + half)] = jitter(rng, sum);
            }
        }
        // diamonds on the row lattice, then on the column lattice
        for r in (0..size).step_by(step) {
            for c in (0..size).step_by(step) {
                let sum = map[idx(r + half, c + half)]
                    + map[idx(r + size - half, c + half)]
                    + map[idx(r, c)]
                    + map[idx(r, c + step)];
                map[idx(r, c + half)] = jitter(rng, sum);
            }
        }
        for r in (0..size).step_by(step) {
            for c in (0..size).step_by(step) {
                let sum = map[idx(r + half, c + half)]
                    + map[idx(r + half, c + size - half)]
                    + map[idx(r, c)]
                    + map[idx(r + step, c)];
                map[idx(r + half, c)] = jitter(rng, sum);
            }
        }
        step /= 2;
        wibble /= f64::from(decay);
    }
    let min = map.iter().copied().fold(f64::INFINITY, f64::min);
    let max = map.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = (max - min).max(f64::MIN_POSITIVE);
    FloatImage {
        width: size,
        height: size,
        channels: 1,
        data: map.into_iter().map(|v| ((v - min) / span) as f32).collect(),
    }
}

/// Single-channel frost intensity in `[0, 1]`: a low-frequency haze with
/// scattered needle-like crystals.
pub fn frost_texture(width: usize, height: usize, rng: &mut Rng) -> FloatImage {
    let size = width.max(height).next_power_of_two().max(2);
    let haze = plasma_fractal(size, 2.0, rng);
    let mut layer = FloatImage::from_fn(width, height, |x, y| 0.35 * haze.at(x, y, 0));
    let crystals = (width * height / 40).max(1);
    for _ in 0..crystals {
        let x0 = rng.uniform(0.0, width as f64);
        let y0 = rng.uniform(0.0, height as f64);
        let angle = rng.uniform(0.0, std::f64::consts::PI);
        let len = rng.uniform(2.0, 12.0);
        let value = rng.uniform(0.4, 1.0) as f32;
        let (dx, dy) = (angle.cos(), angle.sin());
        let steps = (len * 2.0) as usize;
        for s in 0..=steps {
            let t = s as f64 * 0.5;
            let px = (x0 + t * dx).floor();
            let py = (y0 + t * dy).floor();
            if px < 0.0 || py < 0.0 || px >= width as f64 || py >= height as f64 {
                break;
            }
            let v = layer.at_mut(px as usize, py as usize, 0);
            *v = v.max(value);
        }
    }
    let mut out = layer.gaussian_blur(0.6);
    out.clamp01();
    out
}
