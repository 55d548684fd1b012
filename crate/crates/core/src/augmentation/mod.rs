//! Training-time augmentation of visible/infrared image pairs.
//!
//! Pair operators take `&ImagePair` plus an [`Rng`](crate::Rng) and return a
//! new pair. Operators with a `_logged` twin also report the rects or events
//! they drew, which the statistical tests and the preview log rely on.

pub mod augmix;
pub mod erase;
pub mod masking;
pub mod patch;
pub mod policy;

pub use augmix::{augmix, augmix_mix, AugmixParams};
pub use erase::{ms_rea, soft_random_erase, EraseParams, MAX_RECT_ATTEMPTS};
pub use masking::{intuitive_blur, intuitive_lum_sat, modality_mask, DEFAULT_MODALITY_PROBABILITY};
pub use patch::{m_patch, ms_patch, self_patch_mix, MPatchGeometry, PatchParams, PatchVariant};
pub use policy::{apply_policy, apply_policy_batch, apply_policy_logged, AugmentPolicy, AugmentStep, Preset};

use crate::error::{Error, Result};
use crate::imaging::{ImageBuffer, ModalityTag};

/// One visible and one infrared image of the same person.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImagePair {
    pub visible: ImageBuffer,
    pub infrared: ImageBuffer,
    pub identity: u64,
    pub camera_v: String,
    pub camera_i: String,
    pub visible_id: String,
    pub infrared_id: String,
}

impl ImagePair {
    pub fn new(visible: ImageBuffer, infrared: ImageBuffer, identity: u64) -> Result<Self> {
        if visible.modality() != ModalityTag::Visible || infrared.modality() != ModalityTag::Infrared {
            return Err(Error::invalid(format!(
                "pair needs (visible, infrared) images, got ({}, {})",
                visible.modality(),
                infrared.modality()
            )));
        }
        Ok(Self {
            visible,
            infrared,
            identity,
            camera_v: String::new(),
            camera_i: String::new(),
            visible_id: String::new(),
            infrared_id: String::new(),
        })
    }

    pub fn with_ids(mut self, visible_id: impl Into<String>, infrared_id: impl Into<String>) -> Self {
        self.visible_id = visible_id.into();
        self.infrared_id = infrared_id.into();
        self
    }

    pub fn with_cameras(mut self, camera_v: impl Into<String>, camera_i: impl Into<String>) -> Self {
        self.camera_v = camera_v.into();
        self.camera_i = camera_i.into();
        self
    }

    pub fn get(&self, modality: ModalityTag) -> &ImageBuffer {
        match modality {
            ModalityTag::Visible => &self.visible,
            ModalityTag::Infrared => &self.infrared,
        }
    }

    /// Same metadata, new images.
    pub(crate) fn replace(&self, visible: ImageBuffer, infrared: ImageBuffer) -> Self {
        debug_assert_eq!(visible.modality(), ModalityTag::Visible);
        debug_assert_eq!(infrared.modality(), ModalityTag::Infrared);
        Self {
            visible,
            infrared,
            identity: self.identity,
            camera_v: self.camera_v.clone(),
            camera_i: self.camera_i.clone(),
            visible_id: self.visible_id.clone(),
            infrared_id: self.infrared_id.clone(),
        }
    }
}
