use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const BUILTIN: &str = include_str!("../../data/corruption_params.toml");

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefocusParams {
    pub radius: f32,
    pub alias_sigma: f32,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlassParams {
    pub sigma: f32,
    pub max_delta: usize,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotionParams {
    pub radius: f32,
    pub sigma: f32,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZoomParams {
    pub start: f32,
    pub stop: f32,
    pub step: f32,
}

impl ZoomParams {
    /// Zoom factors `start, start + step, ...` strictly below `stop`.
    pub fn factors(&self) -> Vec<f32> {
        let n = ((self.stop - self.start) / self.step - 1e-4).ceil().max(0.0) as usize;
        (0..n).map(|i| self.start + i as f32 * self.step).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnowParams {
    pub loc: f32,
    pub scale: f32,
    pub zoom: f32,
    pub threshold: f32,
    pub blur_radius: f32,
    pub blur_sigma: f32,
    pub blend: f32,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrostParams {
    pub image_weight: f32,
    pub frost_weight: f32,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FogParams {
    pub strength: f32,
    pub decay: f32,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RainParams {
    pub density: f32,
    pub length_frac: f32,
    pub intensity: f32,
    pub max_angle: f32,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatterParams {
    pub loc: f32,
    pub scale: f32,
    pub sigma: f32,
    pub threshold: f32,
    pub intensity: f32,
    pub mud: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElasticParams {
    pub alpha_frac: f32,
    pub sigma_frac: f32,
    pub affine_frac: f32,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaturateParams {
    pub scale: f32,
    pub shift: f32,
}

/// Per-level parameters for every corruption kind. Index 0 is severity 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeverityTable {
    pub version: u32,
    pub gaussian_noise: [f32; 5],
    pub shot_noise: [f32; 5],
    pub impulse_noise: [f32; 5],
    pub speckle_noise: [f32; 5],
    pub gaussian_blur: [f32; 5],
    pub defocus_blur: [DefocusParams; 5],
    pub glass_blur: [GlassParams; 5],
    pub motion_blur: [MotionParams; 5],
    pub zoom_blur: [ZoomParams; 5],
    pub snow: [SnowParams; 5],
    pub frost: [FrostParams; 5],
    pub fog: [FogParams; 5],
    pub rain: [RainParams; 5],
    pub spatter: [SpatterParams; 5],
    pub brightness: [f32; 5],
    pub contrast: [f32; 5],
    pub elastic_transform: [ElasticParams; 5],
    pub pixelate: [f32; 5],
    pub jpeg_compression: [u8; 5],
    pub saturate: [SaturateParams; 5],
}

impl SeverityTable {
    /// The table shipped in `data/corruption_params.toml`.
    pub fn builtin() -> &'static SeverityTable {
        static TABLE: std::sync::OnceLock<SeverityTable> = std::sync::OnceLock::new();
        TABLE.get_or_init(|| SeverityTable::from_toml_str(BUILTIN).expect("builtin severity table parses"))
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: SeverityTable = toml::from_str(text)
            .map_err(|e| Error::invalid(format!("severity table: {e}")))?;
        if table.version != 1 {
            return Err(Error::invalid(format!(
                "unsupported severity table version {}",
                table.version
            )));
        }
        Ok(table)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("severity table serializes")
    }
}
