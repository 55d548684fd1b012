use serde::{Deserialize, Serialize};

use super::ImagePair;
use crate::error::{Error, Result};
use crate::imaging::{check_probability, ImageBuffer, ModalityTag, Rect};
use crate::rng::Rng;

/// Rect draws give up after this many out-of-bounds attempts.
pub const MAX_RECT_ATTEMPTS: usize = 64;

/// Soft random erasing parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EraseParams {
    pub probability: f64,
    /// Patch area as a fraction of the image area.
    pub area_ratio_range: (f64, f64),
    /// Patch height / width.
    pub aspect_range: (f64, f64),
    /// Share of in-patch pixels that receive random values.
    pub pixel_fill_fraction: f64,
}

impl Default for EraseParams {
    fn default() -> Self {
        Self {
            probability: 0.5,
            area_ratio_range: (0.02, 0.4),
            aspect_range: (0.3, 3.3),
            pixel_fill_fraction: 0.5,
        }
    }
}

impl EraseParams {
    pub fn validate(&self) -> Result<()> {
        check_probability(self.probability)?;
        check_range("area_ratio_range", self.area_ratio_range, Some(1.0))?;
        check_range("aspect_range", self.aspect_range, None)?;
        if !(self.pixel_fill_fraction > 0.0 && self.pixel_fill_fraction <= 1.0) {
            return Err(Error::invalid(format!(
                "pixel_fill_fraction {} outside (0, 1]",
                self.pixel_fill_fraction
            )));
        }
        Ok(())
    }
}

pub(crate) fn check_range(name: &str, (lo, hi): (f64, f64), max: Option<f64>) -> Result<()> {
    let ok = lo > 0.0 && lo <= hi && max.is_none_or(|m| hi <= m) && hi.is_finite();
    if ok {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} ({lo}, {hi}) is not a valid range")))
    }
}

/// Random-erasing style rect: area and aspect drawn uniformly, redrawn while
/// the rect does not fit, `None` after [`MAX_RECT_ATTEMPTS`] misses.
pub fn sample_rect(
    width: usize,
    height: usize,
    area_ratio_range: (f64, f64),
    aspect_range: (f64, f64),
    rng: &mut Rng,
) -> Option<Rect> {
    let size = sample_size(width, height, area_ratio_range, aspect_range, rng)?;
    Some(place(width, height, size, rng))
}

pub(crate) fn sample_size(
    width: usize,
    height: usize,
    area_ratio_range: (f64, f64),
    aspect_range: (f64, f64),
    rng: &mut Rng,
) -> Option<(usize, usize)> {
    let total = (width * height) as f64;
    for _ in 0..MAX_RECT_ATTEMPTS {
        let area = rng.uniform(area_ratio_range.0, area_ratio_range.1) * total;
        let aspect = rng.uniform(aspect_range.0, aspect_range.1);
        let h = (area * aspect).sqrt().round() as usize;
        let w = (area / aspect).sqrt().round() as usize;
        if w >= 1 && h >= 1 && w <= width && h <= height {
            return Some((w, h));
        }
    }
    None
}

/// Uniform top-left position for a `size` rect inside the image.
pub(crate) fn place(width: usize, height: usize, (w, h): (usize, usize), rng: &mut Rng) -> Rect {
    let x = rng.below((width - w + 1) as u64) as usize;
    let y = rng.below((height - h + 1) as u64) as usize;
    Rect::new(x, y, w, h)
}

/// Number of pixels a soft erase replaces inside `rect`.
pub fn fill_count(rect: Rect, fill_fraction: f64) -> usize {
    ((fill_fraction * rect.area() as f64) + 0.5).floor() as usize
}

/// Replaces `fill_count(rect, fill)` distinct pixels of `rect` with random
/// values: independent per channel on visible images, gray on infrared.
pub fn soft_erase_in(img: &ImageBuffer, rect: Rect, fill_fraction: f64, rng: &mut Rng) -> Result<ImageBuffer> {
    if !rect.fits(img.width(), img.height()) {
        return Err(Error::invalid(format!("rect {rect:?} outside image")));
    }
    let n = fill_count(rect, fill_fraction).min(rect.area());
    let mut out = img.clone();
    for idx in rng.sample_indices(rect.area(), n) {
        let x = rect.x + idx % rect.w;
        let y = rect.y + idx / rect.w;
        let value = match img.modality() {
            ModalityTag::Visible => [rng.next_u8(), rng.next_u8(), rng.next_u8()],
            ModalityTag::Infrared => {
                let v = rng.next_u8();
                [v, v, v]
            }
        };
        out.put(x, y, value);
    }
    Ok(out)
}

/// S-REA with the sampled rect reported (`None` when not triggered or skipped).
pub fn soft_random_erase_logged(
    img: &ImageBuffer,
    params: &EraseParams,
    rng: &mut Rng,
) -> Result<(ImageBuffer, Option<Rect>)> {
    params.validate()?;
    if !rng.bernoulli(params.probability) {
        return Ok((img.clone(), None));
    }
    let Some(rect) = sample_rect(img.width(), img.height(), params.area_ratio_range, params.aspect_range, rng)
    else {
        return Ok((img.clone(), None));
    };
    Ok((soft_erase_in(img, rect, params.pixel_fill_fraction, rng)?, Some(rect)))
}

/// Soft random erasing (S-REA).
pub fn soft_random_erase(img: &ImageBuffer, params: &EraseParams, rng: &mut Rng) -> Result<ImageBuffer> {
    Ok(soft_random_erase_logged(img, params, rng)?.0)
}

/// Rects drawn by one MS-REA call, per modality.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MsReaLog {
    pub visible: Option<Rect>,
    pub infrared: Option<Rect>,
}

/// Multimodal soft random erasing: independent triggers and rects per
/// modality, gray replacement values on the infrared image.
pub fn ms_rea_logged(pair: &ImagePair, params: &EraseParams, rng: &mut Rng) -> Result<(ImagePair, MsReaLog)> {
    let (visible, v_rect) = soft_random_erase_logged(&pair.visible, params, rng)?;
    let (infrared, i_rect) = soft_random_erase_logged(&pair.infrared, params, rng)?;
    Ok((
        pair.replace(visible, infrared),
        MsReaLog {
            visible: v_rect,
            infrared: i_rect,
        },
    ))
}

pub fn ms_rea(pair: &ImagePair, params: &EraseParams, rng: &mut Rng) -> Result<ImagePair> {
    Ok(ms_rea_logged(pair, params, rng)?.0)
}
