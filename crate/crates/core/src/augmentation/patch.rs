use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::erase::{check_range, place, sample_size};
use super::ImagePair;
use crate::error::{Error, Result};
use crate::imaging::{check_probability, luma, ImageBuffer, Rect};
use crate::rng::Rng;

/// Patch geometry shared by S-PATCH, MS-PATCH and M-PATCH.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatchParams {
    pub probability: f64,
    pub area_ratio_range: (f64, f64),
    pub aspect_range: (f64, f64),
}

impl Default for PatchParams {
    fn default() -> Self {
        Self {
            probability: 0.5,
            area_ratio_range: (0.02, 0.4),
            aspect_range: (0.3, 3.3),
        }
    }
}

impl PatchParams {
    pub fn validate(&self) -> Result<()> {
        check_probability(self.probability)?;
        check_range("area_ratio_range", self.area_ratio_range, Some(1.0))?;
        check_range("aspect_range", self.aspect_range, None)
    }

    fn size(&self, width: usize, height: usize, rng: &mut Rng) -> Option<(usize, usize)> {
        sample_size(width, height, self.area_ratio_range, self.aspect_range, rng)
    }
}

/// Source and destination of one same-image patch copy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PatchMove {
    pub src: Rect,
    pub dst: Rect,
}

/// Copies `src` onto `dst` within the same image. The source is read in full
/// before any write, so overlapping rects are fine.
pub fn self_patch_mix_at(img: &ImageBuffer, src: Rect, dst: Rect) -> Result<ImageBuffer> {
    if (src.w, src.h) != (dst.w, dst.h) {
        return Err(Error::invalid("source and destination rects differ in size"));
    }
    if !dst.fits(img.width(), img.height()) {
        return Err(Error::invalid(format!("destination {dst:?} outside image")));
    }
    let patch = img.region(src)?;
    let mut out = img.clone();
    out.write_region(dst, &patch);
    Ok(out)
}

pub fn self_patch_mix_logged(
    img: &ImageBuffer,
    params: &PatchParams,
    rng: &mut Rng,
) -> Result<(ImageBuffer, Option<PatchMove>)> {
    params.validate()?;
    if !rng.bernoulli(params.probability) {
        return Ok((img.clone(), None));
    }
    let (w, h) = img.dims();
    let Some(size) = params.size(w, h, rng) else {
        return Ok((img.clone(), None));
    };
    let src = place(w, h, size, rng);
    let dst = place(w, h, size, rng);
    Ok((self_patch_mix_at(img, src, dst)?, Some(PatchMove { src, dst })))
}

/// Self patch mixing (S-PATCH): a random patch pasted elsewhere on the same image.
pub fn self_patch_mix(img: &ImageBuffer, params: &PatchParams, rng: &mut Rng) -> Result<ImageBuffer> {
    Ok(self_patch_mix_logged(img, params, rng)?.0)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MsPatchLog {
    pub visible: Option<PatchMove>,
    pub infrared: Option<PatchMove>,
}

/// S-PATCH on each modality with independent draws (MS-PATCH).
pub fn ms_patch_logged(pair: &ImagePair, params: &PatchParams, rng: &mut Rng) -> Result<(ImagePair, MsPatchLog)> {
    let (visible, v) = self_patch_mix_logged(&pair.visible, params, rng)?;
    let (infrared, i) = self_patch_mix_logged(&pair.infrared, params, rng)?;
    Ok((pair.replace(visible, infrared), MsPatchLog { visible: v, infrared: i }))
}

pub fn ms_patch(pair: &ImagePair, params: &PatchParams, rng: &mut Rng) -> Result<ImagePair> {
    Ok(ms_patch_logged(pair, params, rng)?.0)
}

/// Cross-modal patch exchange variants.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PatchVariant {
    /// Same source, same destination.
    SS,
    /// Same source, different destinations.
    SD,
    /// Different sources, different destinations.
    DD,
}

impl PatchVariant {
    pub const ALL: [PatchVariant; 3] = [PatchVariant::SS, PatchVariant::SD, PatchVariant::DD];
}

impl fmt::Display for PatchVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PatchVariant::SS => "ss",
            PatchVariant::SD => "sd",
            PatchVariant::DD => "dd",
        })
    }
}

impl FromStr for PatchVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ss" => Ok(PatchVariant::SS),
            "sd" => Ok(PatchVariant::SD),
            "dd" => Ok(PatchVariant::DD),
            other => Err(Error::invalid(format!("unknown patch variant `{other}`"))),
        }
    }
}

/// Rects of one M-PATCH exchange.
///
/// The visible patch is read at `visible_src` and lands on the infrared image
/// at `infrared_dst`; the infrared patch is read at `infrared_src` and lands
/// on the visible image at `visible_dst`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MPatchGeometry {
    pub visible_src: Rect,
    pub infrared_src: Rect,
    pub visible_dst: Rect,
    pub infrared_dst: Rect,
}

impl MPatchGeometry {
    pub fn draw(variant: PatchVariant, width: usize, height: usize, params: &PatchParams, rng: &mut Rng) -> Option<Self> {
        match variant {
            PatchVariant::SS => {
                let size = params.size(width, height, rng)?;
                let r = place(width, height, size, rng);
                Some(Self { visible_src: r, infrared_src: r, visible_dst: r, infrared_dst: r })
            }
            PatchVariant::SD => {
                let size = params.size(width, height, rng)?;
                let src = place(width, height, size, rng);
                let infrared_dst = place(width, height, size, rng);
                let visible_dst = place(width, height, size, rng);
                Some(Self { visible_src: src, infrared_src: src, visible_dst, infrared_dst })
            }
            PatchVariant::DD => {
                let v_size = params.size(width, height, rng)?;
                let visible_src = place(width, height, v_size, rng);
                let infrared_dst = place(width, height, v_size, rng);
                let i_size = params.size(width, height, rng)?;
                let infrared_src = place(width, height, i_size, rng);
                let visible_dst = place(width, height, i_size, rng);
                Some(Self { visible_src, infrared_src, visible_dst, infrared_dst })
            }
        }
    }
}

/// Applies an explicit M-PATCH geometry. Both sources are read before any
/// write; the visible patch is grayscaled when pasted onto infrared.
pub fn m_patch_at(pair: &ImagePair, g: &MPatchGeometry) -> Result<ImagePair> {
    if pair.visible.dims() != pair.infrared.dims() {
        return Err(Error::invalid(format!(
            "m-patch needs equal dims, got {:?} and {:?}",
            pair.visible.dims(),
            pair.infrared.dims()
        )));
    }
    if (g.visible_src.w, g.visible_src.h) != (g.infrared_dst.w, g.infrared_dst.h)
        || (g.infrared_src.w, g.infrared_src.h) != (g.visible_dst.w, g.visible_dst.h)
    {
        return Err(Error::invalid("m-patch source/destination sizes differ"));
    }
    let (w, h) = pair.visible.dims();
    if !g.visible_dst.fits(w, h) || !g.infrared_dst.fits(w, h) {
        return Err(Error::invalid("m-patch destination outside image"));
    }
    let mut v_patch = pair.visible.region(g.visible_src)?;
    let i_patch = pair.infrared.region(g.infrared_src)?;
    for px in v_patch.chunks_exact_mut(3) {
        let v = luma([px[0], px[1], px[2]]);
        px.fill(v);
    }
    let mut visible = pair.visible.clone();
    let mut infrared = pair.infrared.clone();
    visible.write_region(g.visible_dst, &i_patch);
    infrared.write_region(g.infrared_dst, &v_patch);
    Ok(pair.replace(visible, infrared))
}

pub fn m_patch_logged(
    pair: &ImagePair,
    variant: PatchVariant,
    params: &PatchParams,
    rng: &mut Rng,
) -> Result<(ImagePair, Option<MPatchGeometry>)> {
    params.validate()?;
    if pair.visible.dims() != pair.infrared.dims() {
        return Err(Error::invalid("m-patch needs equal dims"));
    }
    if !rng.bernoulli(params.probability) {
        return Ok((pair.clone(), None));
    }
    let (w, h) = pair.visible.dims();
    let Some(g) = MPatchGeometry::draw(variant, w, h, params, rng) else {
        return Ok((pair.clone(), None));
    };
    Ok((m_patch_at(pair, &g)?, Some(g)))
}

/// Multimodal patch mixing (M-PATCH).
pub fn m_patch(pair: &ImagePair, variant: PatchVariant, params: &PatchParams, rng: &mut Rng) -> Result<ImagePair> {
    Ok(m_patch_logged(pair, variant, params, rng)?.0)
}
