//! Ordered augmentation pipelines and the named training presets.
//!
//! A policy is a list of steps run in order. Steps fall into four stages
//! (preprocessing, AugMix, local operators, masking) and a valid policy never
//! goes back to an earlier stage. Steps that act on single images draw from
//! the stream for the visible image first, then the infrared one.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::augmix::{augmix, AugmixParams};
use super::erase::{ms_rea_logged, soft_random_erase_logged, EraseParams};
use super::masking::{
    intuitive_blur_logged, intuitive_lum_sat_logged, modality_mask_logged, DEFAULT_MODALITY_PROBABILITY,
};
use super::patch::{m_patch_logged, ms_patch_logged, self_patch_mix_logged, MPatchGeometry, PatchParams, PatchVariant};
use super::ImagePair;
use crate::error::{Error, Result};
use crate::imaging::{
    check_probability, crop_padded_at, mirror, resize, ImageBuffer, ModalityTag, Rect, WORKING_SIZE,
};
use crate::rng::{derive_seed, Rng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum AugmentStep {
    Resize { width: usize, height: usize },
    /// Zero-pad by `pad` on every side, then take a random window of the
    /// original size.
    RandomCrop { pad: usize },
    HorizontalFlip { probability: f64 },
    Augmix(AugmixParams),
    /// S-REA, visible image only.
    SoftErase(EraseParams),
    MsRea(EraseParams),
    /// S-PATCH, visible image only.
    SelfPatch(PatchParams),
    MsPatch(PatchParams),
    MPatch { variant: PatchVariant, params: PatchParams },
    Masking { probability: f64 },
    Blur { probability: f64 },
    LumSat { probability: f64 },
}

impl AugmentStep {
    pub fn stage(&self) -> u8 {
        match self {
            AugmentStep::Resize { .. } | AugmentStep::RandomCrop { .. } | AugmentStep::HorizontalFlip { .. } => 0,
            AugmentStep::Augmix(_) => 1,
            AugmentStep::Masking { .. } => 3,
            _ => 2,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AugmentStep::Resize { .. } => "resize",
            AugmentStep::RandomCrop { .. } => "random_crop",
            AugmentStep::HorizontalFlip { .. } => "horizontal_flip",
            AugmentStep::Augmix(_) => "augmix",
            AugmentStep::SoftErase(_) => "soft_erase",
            AugmentStep::MsRea(_) => "ms_rea",
            AugmentStep::SelfPatch(_) => "self_patch",
            AugmentStep::MsPatch(_) => "ms_patch",
            AugmentStep::MPatch { .. } => "m_patch",
            AugmentStep::Masking { .. } => "masking",
            AugmentStep::Blur { .. } => "blur",
            AugmentStep::LumSat { .. } => "lum_sat",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            AugmentStep::Resize { width, height } if *width == 0 || *height == 0 => {
                Err(Error::invalid("resize target must be non-empty"))
            }
            AugmentStep::Resize { .. } | AugmentStep::RandomCrop { .. } => Ok(()),
            AugmentStep::HorizontalFlip { probability }
            | AugmentStep::Masking { probability }
            | AugmentStep::Blur { probability }
            | AugmentStep::LumSat { probability } => check_probability(*probability),
            AugmentStep::Augmix(p) => p.validate(),
            AugmentStep::SoftErase(p) | AugmentStep::MsRea(p) => p.validate(),
            AugmentStep::SelfPatch(p) | AugmentStep::MsPatch(p) | AugmentStep::MPatch { params: p, .. } => {
                p.validate()
            }
        }
    }

    /// The same step with every random choice switched off.
    fn without_randomness(&self) -> Option<AugmentStep> {
        let mut step = self.clone();
        match &mut step {
            AugmentStep::Resize { .. } => {}
            AugmentStep::RandomCrop { .. } => return None,
            AugmentStep::HorizontalFlip { probability }
            | AugmentStep::Masking { probability }
            | AugmentStep::Blur { probability }
            | AugmentStep::LumSat { probability } => *probability = 0.0,
            AugmentStep::Augmix(p) => p.probability = 0.0,
            AugmentStep::SoftErase(p) | AugmentStep::MsRea(p) => p.probability = 0.0,
            AugmentStep::SelfPatch(p) | AugmentStep::MsPatch(p) | AugmentStep::MPatch { params: p, .. } => {
                p.probability = 0.0
            }
        }
        Some(step)
    }
}

/// Named pipelines used for training.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Preset {
    Standard,
    Augmix,
    AugmixSRea,
    AugmixMsRea,
    AugmixSPatch,
    AugmixMsPatch,
    AugmixMPatch(PatchVariant),
    AugmixMasking,
    MlMda,
    Blur,
    LumSat,
}

impl Preset {
    pub const ALL: [Preset; 13] = [
        Preset::Standard,
        Preset::Augmix,
        Preset::AugmixSRea,
        Preset::AugmixMsRea,
        Preset::AugmixSPatch,
        Preset::AugmixMsPatch,
        Preset::AugmixMPatch(PatchVariant::SS),
        Preset::AugmixMPatch(PatchVariant::SD),
        Preset::AugmixMPatch(PatchVariant::DD),
        Preset::AugmixMasking,
        Preset::MlMda,
        Preset::Blur,
        Preset::LumSat,
    ];

    pub fn name(self) -> String {
        match self {
            Preset::Standard => "standard".into(),
            Preset::Augmix => "augmix".into(),
            Preset::AugmixSRea => "augmix+s-rea".into(),
            Preset::AugmixMsRea => "augmix+ms-rea".into(),
            Preset::AugmixSPatch => "augmix+s-patch".into(),
            Preset::AugmixMsPatch => "augmix+ms-patch".into(),
            Preset::AugmixMPatch(v) => format!("augmix+m-patch-{v}"),
            Preset::AugmixMasking => "augmix+masking".into(),
            Preset::MlMda => "ml-mda".into(),
            Preset::Blur => "blur".into(),
            Preset::LumSat => "lumsat".into(),
        }
    }

    pub fn policy(self) -> AugmentPolicy {
        let (w, h) = WORKING_SIZE;
        let mut steps = vec![
            AugmentStep::Resize { width: w, height: h },
            AugmentStep::RandomCrop { pad: 10 },
            AugmentStep::HorizontalFlip { probability: 0.5 },
        ];
        if self != Preset::Standard {
            steps.push(AugmentStep::Augmix(AugmixParams::default()));
        }
        let masking = AugmentStep::Masking {
            probability: DEFAULT_MODALITY_PROBABILITY,
        };
        match self {
            Preset::Standard | Preset::Augmix => {}
            Preset::AugmixSRea => steps.push(AugmentStep::SoftErase(EraseParams::default())),
            Preset::AugmixMsRea => steps.push(AugmentStep::MsRea(EraseParams::default())),
            Preset::AugmixSPatch => steps.push(AugmentStep::SelfPatch(PatchParams::default())),
            Preset::AugmixMsPatch => steps.push(AugmentStep::MsPatch(PatchParams::default())),
            Preset::AugmixMPatch(variant) => steps.push(AugmentStep::MPatch {
                variant,
                params: PatchParams::default(),
            }),
            Preset::AugmixMasking => steps.push(masking),
            Preset::MlMda => {
                steps.push(AugmentStep::MsRea(EraseParams::default()));
                steps.push(masking);
            }
            Preset::Blur => steps.push(AugmentStep::Blur {
                probability: DEFAULT_MODALITY_PROBABILITY,
            }),
            Preset::LumSat => steps.push(AugmentStep::LumSat {
                probability: DEFAULT_MODALITY_PROBABILITY,
            }),
        }
        AugmentPolicy { name: self.name(), steps }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .trim()
            .to_ascii_lowercase()
            .chars()
            .filter(|c| !matches!(c, ' ' | '_'))
            .collect();
        let key = key.replace("ml-mda", "mlmda");
        Preset::ALL
            .into_iter()
            .find(|p| p.name().replace("ml-mda", "mlmda") == key)
            .ok_or_else(|| {
                let names: Vec<String> = Preset::ALL.iter().map(|p| p.name()).collect();
                Error::invalid(format!("unknown preset `{s}` (expected one of {})", names.join(", ")))
            })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentPolicy {
    pub name: String,
    pub steps: Vec<AugmentStep>,
}

impl AugmentPolicy {
    pub fn preset(preset: Preset) -> Self {
        preset.policy()
    }

    pub fn validate(&self) -> Result<()> {
        let mut stage = 0;
        for step in &self.steps {
            step.validate()?;
            if step.stage() < stage {
                return Err(Error::invalid(format!(
                    "policy `{}`: step `{}` comes after a later-stage step",
                    self.name,
                    step.name()
                )));
            }
            stage = step.stage();
        }
        Ok(())
    }

    /// Probability of the masking step, 0 when the policy has none.
    pub fn masking_probability(&self) -> f64 {
        self.steps
            .iter()
            .find_map(|s| match s {
                AugmentStep::Masking { probability } => Some(*probability),
                _ => None,
            })
            .unwrap_or(0.0)
    }

    /// Sets the masking probability, appending a masking step if needed.
    pub fn with_masking_probability(mut self, p: f64) -> Self {
        match self.steps.iter_mut().find(|s| matches!(s, AugmentStep::Masking { .. })) {
            Some(AugmentStep::Masking { probability }) => *probability = p,
            _ => self.steps.push(AugmentStep::Masking { probability: p }),
        }
        self
    }

    /// Keeps only the deterministic part of the pipeline (resizing).
    pub fn with_random_steps_disabled(&self) -> Self {
        Self {
            name: self.name.clone(),
            steps: self.steps.iter().filter_map(AugmentStep::without_randomness).collect(),
        }
    }
}

/// What one step did to a pair; steps that drew nothing leave no event.
#[derive(Clone, Debug, PartialEq)]
pub enum PolicyEvent {
    Crop { modality: ModalityTag, window: Rect },
    Flip { modality: ModalityTag },
    Augmix { modality: ModalityTag },
    Erase { modality: ModalityTag, rect: Rect },
    Patch { modality: ModalityTag, src: Rect, dst: Rect },
    MPatch { variant: PatchVariant, geometry: MPatchGeometry },
    Mask { modality: ModalityTag },
    Blur { modality: ModalityTag },
    LumSat { modality: ModalityTag, factor: f64 },
}

fn rect_cols(r: Rect) -> String {
    format!("{}\t{}\t{}\t{}", r.x, r.y, r.w, r.h)
}

impl PolicyEvent {
    /// Tab-separated rows: `pair op modality role x y w h`. Operators without
    /// a rect leave the four geometry columns as `-`.
    pub fn to_lines(&self, pair: usize) -> Vec<String> {
        let none = "-\t-\t-\t-";
        let row = |op: &str, m: ModalityTag, role: &str, geom: String| format!("{pair}\t{op}\t{m}\t{role}\t{geom}");
        match self {
            PolicyEvent::Crop { modality, window } => vec![row("crop", *modality, "window", rect_cols(*window))],
            PolicyEvent::Flip { modality } => vec![row("flip", *modality, "-", none.into())],
            PolicyEvent::Augmix { modality } => vec![row("augmix", *modality, "-", none.into())],
            PolicyEvent::Erase { modality, rect } => vec![row("erase", *modality, "rect", rect_cols(*rect))],
            PolicyEvent::Patch { modality, src, dst } => vec![
                row("patch", *modality, "src", rect_cols(*src)),
                row("patch", *modality, "dst", rect_cols(*dst)),
            ],
            PolicyEvent::MPatch { variant, geometry: g } => {
                let op = format!("m_patch_{variant}");
                vec![
                    row(&op, ModalityTag::Visible, "src", rect_cols(g.visible_src)),
                    row(&op, ModalityTag::Infrared, "src", rect_cols(g.infrared_src)),
                    row(&op, ModalityTag::Visible, "dst", rect_cols(g.visible_dst)),
                    row(&op, ModalityTag::Infrared, "dst", rect_cols(g.infrared_dst)),
                ]
            }
            PolicyEvent::Mask { modality } => vec![row("mask", *modality, "-", none.into())],
            PolicyEvent::Blur { modality } => vec![row("blur", *modality, "-", none.into())],
            PolicyEvent::LumSat { modality, factor } => vec![row("lum_sat", *modality, &format!("x{factor}"), none.into())],
        }
    }
}

pub const RECT_LOG_HEADER: &str = "pair\top\tmodality\trole\tx\ty\tw\th";

pub fn format_rect_log(events: &[Vec<PolicyEvent>]) -> String {
    let mut out = String::from(RECT_LOG_HEADER);
    out.push('\n');
    for (i, evs) in events.iter().enumerate() {
        for e in evs {
            for line in e.to_lines(i) {
                out.push_str(&line);
                out.push('\n');
            }
        }
    }
    out
}

/// Runs a single-image step on both images, visible first.
fn per_image(
    pair: &ImagePair,
    events: &mut Vec<PolicyEvent>,
    mut f: impl FnMut(&ImageBuffer, &mut Vec<PolicyEvent>) -> Result<ImageBuffer>,
) -> Result<ImagePair> {
    let visible = f(&pair.visible, events)?;
    let infrared = f(&pair.infrared, events)?;
    Ok(pair.replace(visible, infrared))
}

fn apply_step(pair: &ImagePair, step: &AugmentStep, rng: &mut Rng, events: &mut Vec<PolicyEvent>) -> Result<ImagePair> {
    Ok(match step {
        AugmentStep::Resize { width, height } => per_image(pair, events, |img, _| resize(img, *width, *height))?,
        AugmentStep::RandomCrop { pad } => per_image(pair, events, |img, ev| {
            let span = 2 * *pad as u64 + 1;
            let ox = rng.below(span) as usize;
            let oy = rng.below(span) as usize;
            ev.push(PolicyEvent::Crop {
                modality: img.modality(),
                window: Rect::new(ox, oy, img.width(), img.height()),
            });
            Ok(crop_padded_at(img, *pad, ox, oy))
        })?,
        AugmentStep::HorizontalFlip { probability } => per_image(pair, events, |img, ev| {
            Ok(if rng.bernoulli(*probability) {
                ev.push(PolicyEvent::Flip { modality: img.modality() });
                mirror(img)
            } else {
                img.clone()
            })
        })?,
        AugmentStep::Augmix(params) => per_image(pair, events, |img, ev| {
            if !rng.bernoulli(params.probability) {
                return Ok(img.clone());
            }
            ev.push(PolicyEvent::Augmix { modality: img.modality() });
            augmix(img, params, rng)
        })?,
        AugmentStep::SoftErase(params) => {
            let (visible, rect) = soft_random_erase_logged(&pair.visible, params, rng)?;
            if let Some(rect) = rect {
                events.push(PolicyEvent::Erase { modality: ModalityTag::Visible, rect });
            }
            pair.replace(visible, pair.infrared.clone())
        }
        AugmentStep::MsRea(params) => {
            let (out, log) = ms_rea_logged(pair, params, rng)?;
            for (modality, rect) in [(ModalityTag::Visible, log.visible), (ModalityTag::Infrared, log.infrared)] {
                if let Some(rect) = rect {
                    events.push(PolicyEvent::Erase { modality, rect });
                }
            }
            out
        }
        AugmentStep::SelfPatch(params) => {
            let (visible, mv) = self_patch_mix_logged(&pair.visible, params, rng)?;
            if let Some(mv) = mv {
                events.push(PolicyEvent::Patch { modality: ModalityTag::Visible, src: mv.src, dst: mv.dst });
            }
            pair.replace(visible, pair.infrared.clone())
        }
        AugmentStep::MsPatch(params) => {
            let (out, log) = ms_patch_logged(pair, params, rng)?;
            for (modality, mv) in [(ModalityTag::Visible, log.visible), (ModalityTag::Infrared, log.infrared)] {
                if let Some(mv) = mv {
                    events.push(PolicyEvent::Patch { modality, src: mv.src, dst: mv.dst });
                }
            }
            out
        }
        AugmentStep::MPatch { variant, params } => {
            let (out, g) = m_patch_logged(pair, *variant, params, rng)?;
            if let Some(geometry) = g {
                events.push(PolicyEvent::MPatch { variant: *variant, geometry });
            }
            out
        }
        AugmentStep::Masking { probability } => {
            let (out, m) = modality_mask_logged(pair, *probability, rng)?;
            events.extend(m.map(|modality| PolicyEvent::Mask { modality }));
            out
        }
        AugmentStep::Blur { probability } => {
            let (out, m) = intuitive_blur_logged(pair, *probability, rng)?;
            events.extend(m.map(|modality| PolicyEvent::Blur { modality }));
            out
        }
        AugmentStep::LumSat { probability } => {
            let (out, m) = intuitive_lum_sat_logged(pair, *probability, rng)?;
            events.extend(m.map(|(modality, factor)| PolicyEvent::LumSat { modality, factor }));
            out
        }
    })
}

pub fn apply_policy_logged(pair: &ImagePair, policy: &AugmentPolicy, rng: &mut Rng) -> Result<(ImagePair, Vec<PolicyEvent>)> {
    policy.validate()?;
    let mut events = Vec::new();
    let mut current = pair.clone();
    for step in &policy.steps {
        current = apply_step(&current, step, rng, &mut events)?;
    }
    Ok((current, events))
}

pub fn apply_policy(pair: &ImagePair, policy: &AugmentPolicy, rng: &mut Rng) -> Result<ImagePair> {
    Ok(apply_policy_logged(pair, policy, rng)?.0)
}

/// Applies `policy` to every pair, pair `i` using the stream seeded by
/// `derive_seed(master_seed, i)`. Output does not depend on `workers`.
pub fn apply_policy_batch(
    pairs: &[ImagePair],
    policy: &AugmentPolicy,
    master_seed: u64,
    workers: usize,
) -> Result<Vec<(ImagePair, Vec<PolicyEvent>)>> {
    policy.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    pool.install(|| {
        pairs
            .par_iter()
            .enumerate()
            .map(|(i, pair)| apply_policy_logged(pair, policy, &mut Rng::new(derive_seed(master_seed, i as u64))))
            .collect()
    })
}

const GRID_GAP: usize = 4;

/// One row per pair: visible before, infrared before, visible after,
/// infrared after. Cells are top-left aligned on a black background.
pub fn preview_grid(before: &[ImagePair], after: &[ImagePair]) -> Result<ImageBuffer> {
    if before.len() != after.len() || before.is_empty() {
        return Err(Error::invalid("preview needs equally many, and at least one, before/after pairs"));
    }
    let cells: Vec<[&ImageBuffer; 4]> = before
        .iter()
        .zip(after)
        .map(|(b, a)| [&b.visible, &b.infrared, &a.visible, &a.infrared])
        .collect();
    let cell_w = cells.iter().flatten().map(|i| i.width()).max().unwrap_or(1);
    let cell_h = cells.iter().flatten().map(|i| i.height()).max().unwrap_or(1);
    let width = 4 * cell_w + 3 * GRID_GAP;
    let height = cells.len() * cell_h + (cells.len() - 1) * GRID_GAP;
    let mut pixels = vec![0u8; width * height * 3];
    for (row, imgs) in cells.iter().enumerate() {
        for (col, img) in imgs.iter().enumerate() {
            let (ox, oy) = (col * (cell_w + GRID_GAP), row * (cell_h + GRID_GAP));
            for y in 0..img.height() {
                let src = &img.pixels()[y * img.width() * 3..(y + 1) * img.width() * 3];
                let start = ((oy + y) * width + ox) * 3;
                pixels[start..start + src.len()].copy_from_slice(src);
            }
        }
    }
    ImageBuffer::new(width, height, pixels, ModalityTag::Visible)
}
