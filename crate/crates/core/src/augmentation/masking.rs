//! Whole-modality operators: modality masking and the two fixed-intensity
//! corruption-like augmentations (blur, luminosity/saturation).

use super::ImagePair;
use crate::error::Result;
use crate::imaging::{check_probability, quantize, FloatImage, ImageBuffer, ModalityTag};
use crate::rng::Rng;

/// Default trigger probability of masking and the intuitive augmentations.
pub const DEFAULT_MODALITY_PROBABILITY: f64 = 1.0 / 8.0;
/// Gaussian standard deviation of the intuitive blur, in pixels.
pub const INTUITIVE_BLUR_SIGMA: f32 = 3.0;
pub const VISIBLE_LUMINOSITY_FACTORS: [f64; 2] = [2.0, 0.5];
pub const INFRARED_SATURATION_FACTOR: f64 = 1.5;

fn pick_modality(rng: &mut Rng) -> ModalityTag {
    if rng.below(2) == 0 {
        ModalityTag::Visible
    } else {
        ModalityTag::Infrared
    }
}

/// Equiprobable modality, drawn only when the trigger fires.
fn trigger(probability: f64, rng: &mut Rng) -> Result<Option<ModalityTag>> {
    check_probability(probability)?;
    Ok(if rng.bernoulli(probability) { Some(pick_modality(rng)) } else { None })
}

/// Blanks exactly one modality with probability `probability`; reports which.
pub fn modality_mask_logged(pair: &ImagePair, probability: f64, rng: &mut Rng) -> Result<(ImagePair, Option<ModalityTag>)> {
    let Some(target) = trigger(probability, rng)? else {
        return Ok((pair.clone(), None));
    };
    Ok((mask_modality(pair, target), Some(target)))
}

pub fn modality_mask(pair: &ImagePair, probability: f64, rng: &mut Rng) -> Result<ImagePair> {
    Ok(modality_mask_logged(pair, probability, rng)?.0)
}

/// Replaces `target` with an all-zero image of the same size.
pub fn mask_modality(pair: &ImagePair, target: ModalityTag) -> ImagePair {
    let mut out = pair.clone();
    match target {
        ModalityTag::Visible => out.visible = ImageBuffer::zeros_like(&pair.visible),
        ModalityTag::Infrared => out.infrared = ImageBuffer::zeros_like(&pair.infrared),
    }
    out
}

fn blur(img: &ImageBuffer) -> ImageBuffer {
    FloatImage::from_image(img)
        .gaussian_blur(INTUITIVE_BLUR_SIGMA)
        .to_image(img.modality())
        .expect("blur keeps dims and modality invariants")
}

pub fn intuitive_blur_logged(pair: &ImagePair, probability: f64, rng: &mut Rng) -> Result<(ImagePair, Option<ModalityTag>)> {
    let Some(target) = trigger(probability, rng)? else {
        return Ok((pair.clone(), None));
    };
    let mut out = pair.clone();
    match target {
        ModalityTag::Visible => out.visible = blur(&pair.visible),
        ModalityTag::Infrared => out.infrared = blur(&pair.infrared),
    }
    Ok((out, Some(target)))
}

/// Gaussian blur (sigma 3) on one equiprobably chosen modality.
pub fn intuitive_blur(pair: &ImagePair, probability: f64, rng: &mut Rng) -> Result<ImagePair> {
    Ok(intuitive_blur_logged(pair, probability, rng)?.0)
}

/// Multiplies every intensity by `factor`, clamping to 255.
pub fn enhance_brightness(img: &ImageBuffer, factor: f64) -> ImageBuffer {
    let pixels = img.pixels().iter().map(|&v| quantize(f64::from(v) * factor)).collect();
    img.with_pixels(pixels)
}

/// Which modality changed and by what factor.
pub type LumSatEvent = (ModalityTag, f64);

pub fn intuitive_lum_sat_logged(pair: &ImagePair, probability: f64, rng: &mut Rng) -> Result<(ImagePair, Option<LumSatEvent>)> {
    let Some(target) = trigger(probability, rng)? else {
        return Ok((pair.clone(), None));
    };
    let mut out = pair.clone();
    let factor = match target {
        ModalityTag::Visible => {
            let f = VISIBLE_LUMINOSITY_FACTORS[rng.index(2)];
            out.visible = enhance_brightness(&pair.visible, f);
            f
        }
        ModalityTag::Infrared => {
            out.infrared = enhance_brightness(&pair.infrared, INFRARED_SATURATION_FACTOR);
            INFRARED_SATURATION_FACTOR
        }
    };
    Ok((out, Some((target, factor))))
}

/// Visible brightness x2 or x0.5, or infrared saturation x1.5, on one modality.
pub fn intuitive_lum_sat(pair: &ImagePair, probability: f64, rng: &mut Rng) -> Result<ImagePair> {
    Ok(intuitive_lum_sat_logged(pair, probability, rng)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augmentation::tests::textured_pair;
    use crate::imaging::psnr;

    #[test]
    fn zero_probability_identities() {
        let pair = textured_pair(20, 30, 1);
        for s in 0..20 {
            let mut rng = Rng::new(s);
            assert_eq!(modality_mask(&pair, 0.0, &mut rng).unwrap(), pair);
            assert_eq!(intuitive_blur(&pair, 0.0, &mut rng).unwrap(), pair);
            assert_eq!(intuitive_lum_sat(&pair, 0.0, &mut rng).unwrap(), pair);
        }
    }

    #[test]
    fn forced_infrared_mask() {
        let pair = textured_pair(20, 30, 1);
        let out = mask_modality(&pair, ModalityTag::Infrared);
        assert!(out.infrared.pixels().iter().all(|&v| v == 0));
        assert_eq!(out.visible, pair.visible);
    }

    #[test]
    fn mask_never_blanks_both() {
        let pair = textured_pair(8, 8, 2);
        for s in 0..500 {
            let (out, target) = modality_mask_logged(&pair, 1.0, &mut Rng::new(s)).unwrap();
            let v_blank = out.visible.pixels().iter().all(|&v| v == 0);
            let i_blank = out.infrared.pixels().iter().all(|&v| v == 0);
            assert!(v_blank ^ i_blank);
            assert_eq!(target == Some(ModalityTag::Visible), v_blank);
        }
    }

    #[test]
    fn mask_rejects_bad_probability() {
        let pair = textured_pair(8, 8, 2);
        assert!(modality_mask(&pair, 1.2, &mut Rng::new(0)).is_err());
    }

    #[test]
    fn blur_behaviour() {
        let pair = textured_pair(30, 40, 3);
        let (out, target) = intuitive_blur_logged(&pair, 1.0, &mut Rng::new(7)).unwrap();
        let (before, after) = match target.unwrap() {
            ModalityTag::Visible => (&pair.visible, &out.visible),
            ModalityTag::Infrared => (&pair.infrared, &out.infrared),
        };
        let p = psnr(before, after).unwrap();
        assert!(p.is_finite() && p > 0.0);
        assert!(out.infrared.is_single_channel());

        let flat = ImagePair::new(
            ImageBuffer::filled(12, 12, [90, 40, 200], ModalityTag::Visible).unwrap(),
            ImageBuffer::filled(12, 12, [77; 3], ModalityTag::Infrared).unwrap(),
            0,
        )
        .unwrap();
        for s in 0..10 {
            assert_eq!(intuitive_blur(&flat, 1.0, &mut Rng::new(s)).unwrap(), flat);
        }
    }

    #[test]
    fn luminosity_factors() {
        let v100 = ImageBuffer::filled(4, 4, [100; 3], ModalityTag::Visible).unwrap();
        assert!(enhance_brightness(&v100, 2.0).pixels().iter().all(|&v| v == 200));
        let v200 = ImageBuffer::filled(4, 4, [200; 3], ModalityTag::Visible).unwrap();
        assert!(enhance_brightness(&v200, 2.0).pixels().iter().all(|&v| v == 255));
        assert!(enhance_brightness(&v100, 0.5).pixels().iter().all(|&v| v == 50));

        let pair = ImagePair::new(v100, ImageBuffer::filled(4, 4, [100; 3], ModalityTag::Infrared).unwrap(), 0).unwrap();
        for s in 0..100 {
            let (out, ev) = intuitive_lum_sat_logged(&pair, 1.0, &mut Rng::new(s)).unwrap();
            match ev.unwrap() {
                (ModalityTag::Visible, f) => {
                    let expect = if f == 2.0 { 200 } else { 50 };
                    assert!(out.visible.pixels().iter().all(|&v| v == expect));
                    assert_eq!(out.infrared, pair.infrared);
                }
                (ModalityTag::Infrared, f) => {
                    assert_eq!(f, 1.5);
                    assert!(out.infrared.pixels().iter().all(|&v| v == 150));
                    assert_eq!(out.visible, pair.visible);
                }
            }
        }
    }
}
