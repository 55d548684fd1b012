//! The 20-kind corruption benchmark at five severity levels, its infrared
//! adaptation, and the `-C` / `-C*` dataset policies.
//!
//! Infrared images accept 19 kinds: `Brightness` is not applicable, noise
//! layers and colored overlays are composited in grayscale, and `Saturate`
//! runs the brightness transfer at the same level.

mod ops;
mod params;
mod textures;

pub use params::SeverityTable;
pub use textures::{frost_texture, plasma_fractal};

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augmentation::ImagePair;
use crate::error::{Error, Result};
use crate::imaging::{self, ImageBuffer, ModalityTag};
use crate::protocol::ImageRecord;
use crate::rng::{derive_seed, Rng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionKind {
    GaussianNoise,
    ShotNoise,
    ImpulseNoise,
    SpeckleNoise,
    DefocusBlur,
    GlassBlur,
    MotionBlur,
    ZoomBlur,
    GaussianBlur,
    Snow,
    Frost,
    Fog,
    Rain,
    Spatter,
    Brightness,
    Contrast,
    ElasticTransform,
    Pixelate,
    JpegCompression,
    Saturate,
}

impl CorruptionKind {
    pub const ALL: [CorruptionKind; 20] = [
        CorruptionKind::GaussianNoise,
        CorruptionKind::ShotNoise,
        CorruptionKind::ImpulseNoise,
        CorruptionKind::SpeckleNoise,
        CorruptionKind::DefocusBlur,
        CorruptionKind::GlassBlur,
        CorruptionKind::MotionBlur,
        CorruptionKind::ZoomBlur,
        CorruptionKind::GaussianBlur,
        CorruptionKind::Snow,
        CorruptionKind::Frost,
        CorruptionKind::Fog,
        CorruptionKind::Rain,
        CorruptionKind::Spatter,
        CorruptionKind::Brightness,
        CorruptionKind::Contrast,
        CorruptionKind::ElasticTransform,
        CorruptionKind::Pixelate,
        CorruptionKind::JpegCompression,
        CorruptionKind::Saturate,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CorruptionKind::GaussianNoise => "gaussian_noise",
            CorruptionKind::ShotNoise => "shot_noise",
            CorruptionKind::ImpulseNoise => "impulse_noise",
            CorruptionKind::SpeckleNoise => "speckle_noise",
            CorruptionKind::DefocusBlur => "defocus_blur",
            CorruptionKind::GlassBlur => "glass_blur",
            CorruptionKind::MotionBlur => "motion_blur",
            CorruptionKind::ZoomBlur => "zoom_blur",
            CorruptionKind::GaussianBlur => "gaussian_blur",
            CorruptionKind::Snow => "snow",
            CorruptionKind::Frost => "frost",
            CorruptionKind::Fog => "fog",
            CorruptionKind::Rain => "rain",
            CorruptionKind::Spatter => "spatter",
            CorruptionKind::Brightness => "brightness",
            CorruptionKind::Contrast => "contrast",
            CorruptionKind::ElasticTransform => "elastic_transform",
            CorruptionKind::Pixelate => "pixelate",
            CorruptionKind::JpegCompression => "jpeg_compression",
            CorruptionKind::Saturate => "saturate",
        }
    }

    pub fn applies_to(self, modality: ModalityTag) -> bool {
        !(modality == ModalityTag::Infrared && self == CorruptionKind::Brightness)
    }

    pub fn is_noise(self) -> bool {
        matches!(
            self,
            CorruptionKind::GaussianNoise
                | CorruptionKind::ShotNoise
                | CorruptionKind::ImpulseNoise
                | CorruptionKind::SpeckleNoise
        )
    }

    pub fn is_blur(self) -> bool {
        matches!(
            self,
            CorruptionKind::DefocusBlur
                | CorruptionKind::GlassBlur
                | CorruptionKind::MotionBlur
                | CorruptionKind::ZoomBlur
                | CorruptionKind::GaussianBlur
        )
    }
}

impl fmt::Display for CorruptionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CorruptionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        CorruptionKind::ALL
            .into_iter()
            .find(|k| k.as_str() == key)
            .ok_or_else(|| Error::invalid(format!("unknown corruption kind `{s}`")))
    }
}

/// Corruption kinds usable on images of `modality`, in canonical order.
pub fn applicable_kinds(modality: ModalityTag) -> Vec<CorruptionKind> {
    CorruptionKind::ALL
        .into_iter()
        .filter(|k| k.applies_to(modality))
        .collect()
}

/// Severity level in `1..=5`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Severity(u8);

impl Severity {
    pub const MIN: u8 = 1;
    pub const MAX: u8 = 5;

    pub fn new(level: u8) -> Result<Self> {
        if (Self::MIN..=Self::MAX).contains(&level) {
            Ok(Severity(level))
        } else {
            Err(Error::invalid(format!("severity {level} outside [1, 5]")))
        }
    }

    pub fn level(self) -> u8 {
        self.0
    }

    pub fn all() -> impl Iterator<Item = Severity> {
        (Self::MIN..=Self::MAX).map(Severity)
    }

    fn index(self) -> usize {
        usize::from(self.0 - 1)
    }
}

impl TryFrom<u8> for Severity {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        Severity::new(v)
    }
}

impl From<Severity> for u8 {
    fn from(s: Severity) -> u8 {
        s.0
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Applies one corruption with the built-in severity table.
pub fn apply_corruption(
    img: &ImageBuffer,
    kind: CorruptionKind,
    severity: Severity,
    rng: &mut Rng,
) -> Result<ImageBuffer> {
    apply_corruption_with(SeverityTable::builtin(), img, kind, severity, rng)
}

pub fn apply_corruption_with(
    table: &SeverityTable,
    img: &ImageBuffer,
    kind: CorruptionKind,
    severity: Severity,
    rng: &mut Rng,
) -> Result<ImageBuffer> {
    let modality = img.modality();
    if !kind.applies_to(modality) {
        return Err(Error::NotApplicable {
            kind: kind.to_string(),
            modality: modality.to_string(),
        });
    }
    let i = severity.index();
    let out = match kind {
        CorruptionKind::GaussianNoise => ops::gaussian_noise(img, table.gaussian_noise[i], rng),
        CorruptionKind::ShotNoise => ops::shot_noise(img, table.shot_noise[i], rng),
        CorruptionKind::ImpulseNoise => ops::impulse_noise(img, table.impulse_noise[i], rng),
        CorruptionKind::SpeckleNoise => ops::speckle_noise(img, table.speckle_noise[i], rng),
        CorruptionKind::DefocusBlur => ops::defocus_blur(img, &table.defocus_blur[i]),
        CorruptionKind::GlassBlur => ops::glass_blur(img, &table.glass_blur[i], rng),
        CorruptionKind::MotionBlur => ops::motion_blur(img, &table.motion_blur[i], rng),
        CorruptionKind::ZoomBlur => ops::zoom_blur(img, &table.zoom_blur[i]),
        CorruptionKind::GaussianBlur => ops::gaussian_blur(img, table.gaussian_blur[i]),
        CorruptionKind::Snow => ops::snow(img, &table.snow[i], rng),
        CorruptionKind::Frost => ops::frost(img, &table.frost[i], rng),
        CorruptionKind::Fog => ops::fog(img, &table.fog[i], rng),
        CorruptionKind::Rain => ops::rain(img, &table.rain[i], rng),
        CorruptionKind::Spatter => ops::spatter(img, &table.spatter[i], rng),
        CorruptionKind::Brightness => ops::brightness(img, table.brightness[i]),
        CorruptionKind::Contrast => ops::contrast(img, table.contrast[i]),
        CorruptionKind::ElasticTransform => ops::elastic_transform(img, &table.elastic_transform[i], rng),
        CorruptionKind::Pixelate => ops::pixelate(img, table.pixelate[i]),
        CorruptionKind::JpegCompression => ops::jpeg_compression(img, table.jpeg_compression[i]),
        CorruptionKind::Saturate => match modality {
            ModalityTag::Visible => ops::saturate(img, &table.saturate[i]),
            // Thermal saturation is rendered with the brightness transfer.
            ModalityTag::Infrared => ops::brightness(img, table.brightness[i]),
        },
    }?;
    debug_assert_eq!(out.dims(), img.dims());
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorruptionMode {
    /// Nothing is corrupted.
    Clean,
    /// `-C`: only visible images are corrupted.
    #[serde(rename = "c")]
    RgbOnly,
    /// `-C*`: both modalities are corrupted, independently.
    #[serde(rename = "c-star")]
    Both,
}

impl CorruptionMode {
    pub fn corrupts(self, modality: ModalityTag) -> bool {
        match self {
            CorruptionMode::Clean => false,
            CorruptionMode::RgbOnly => modality == ModalityTag::Visible,
            CorruptionMode::Both => true,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CorruptionMode::Clean => "clean",
            CorruptionMode::RgbOnly => "c",
            CorruptionMode::Both => "c-star",
        }
    }
}

impl fmt::Display for CorruptionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CorruptionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "clean" => Ok(CorruptionMode::Clean),
            "c" | "-c" | "rgb" => Ok(CorruptionMode::RgbOnly),
            "c-star" | "c*" | "-c*" | "both" => Ok(CorruptionMode::Both),
            other => Err(Error::invalid(format!("unknown corruption mode `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeverityRule {
    Fixed(Severity),
    UniformRandom,
}

impl FromStr for SeverityRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "random" => Ok(SeverityRule::UniformRandom),
            level => {
                let v: u8 = level
                    .parse()
                    .map_err(|_| Error::invalid(format!("severity must be `random` or 1..5, got `{level}`")))?;
                Ok(SeverityRule::Fixed(Severity::new(v)?))
            }
        }
    }
}

impl fmt::Display for SeverityRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SeverityRule::Fixed(s) => write!(f, "{s}"),
            SeverityRule::UniformRandom => f.write_str("random"),
        }
    }
}

/// Kinds are drawn uniformly over the kinds applicable to each image.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorruptionPolicy {
    pub mode: CorruptionMode,
    pub severity: SeverityRule,
}

impl CorruptionPolicy {
    pub fn new(mode: CorruptionMode, severity: SeverityRule) -> Self {
        Self { mode, severity }
    }

    pub fn clean() -> Self {
        Self::new(CorruptionMode::Clean, SeverityRule::UniformRandom)
    }

    /// Draws `(kind, severity, apply_seed)` for one image, or `None` when the
    /// policy leaves this modality clean (no draws are consumed then).
    pub fn draw(&self, modality: ModalityTag, rng: &mut Rng) -> Option<(CorruptionKind, Severity, u64)> {
        if !self.mode.corrupts(modality) {
            return None;
        }
        let kinds = applicable_kinds(modality);
        let kind = kinds[rng.index(kinds.len())];
        let severity = match self.severity {
            SeverityRule::Fixed(s) => s,
            SeverityRule::UniformRandom => Severity(1 + rng.below(5) as u8),
        };
        Some((kind, severity, rng.next_u64()))
    }
}

/// One corrupted image. Replaying `apply_corruption(original, kind,
/// severity, Rng::new(seed))` reproduces it byte for byte.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorruptionRecord {
    pub image_id: String,
    pub modality: ModalityTag,
    pub kind: CorruptionKind,
    pub severity: Severity,
    pub seed: u64,
}

impl CorruptionRecord {
    pub fn replay(&self, original: &ImageBuffer) -> Result<ImageBuffer> {
        if original.modality() != self.modality {
            return Err(Error::invalid(format!(
                "record {} is for a {} image, got {}",
                self.image_id,
                self.modality,
                original.modality()
            )));
        }
        apply_corruption(original, self.kind, self.severity, &mut Rng::new(self.seed))
    }

    pub fn to_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}",
            self.image_id, self.modality, self.kind, self.severity, self.seed
        )
    }

    pub fn parse_line(line: &str) -> Result<Self> {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(Error::invalid(format!("expected 5 tab-separated fields, got {}", fields.len())));
        }
        let severity: u8 = fields[3]
            .parse()
            .map_err(|_| Error::invalid(format!("bad severity `{}`", fields[3])))?;
        Ok(Self {
            image_id: fields[0].to_string(),
            modality: fields[1].parse()?,
            kind: fields[2].parse()?,
            severity: Severity::new(severity)?,
            seed: fields[4]
                .parse()
                .map_err(|_| Error::invalid(format!("bad seed `{}`", fields[4])))?,
        })
    }
}

pub fn format_record_log(records: &[CorruptionRecord]) -> String {
    records.iter().map(|r| r.to_line() + "\n").collect()
}

pub fn parse_record_log(text: &str) -> Result<Vec<CorruptionRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            CorruptionRecord::parse_line(l).map_err(|e| Error::Parse {
                path: "<record log>".into(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Corrupts each modality of a pair per `policy`. Visible draws come first.
pub fn corrupt_pair(
    pair: &ImagePair,
    policy: &CorruptionPolicy,
    rng: &mut Rng,
) -> Result<(ImagePair, Vec<CorruptionRecord>)> {
    let mut out = pair.clone();
    let mut records = Vec::new();
    for modality in ModalityTag::ALL {
        if let Some((kind, severity, seed)) = policy.draw(modality, rng) {
            let (img, id) = match modality {
                ModalityTag::Visible => (&mut out.visible, &pair.visible_id),
                ModalityTag::Infrared => (&mut out.infrared, &pair.infrared_id),
            };
            *img = apply_corruption(img, kind, severity, &mut Rng::new(seed))?;
            records.push(CorruptionRecord {
                image_id: id.clone(),
                modality,
                kind,
                severity,
                seed,
            });
        }
    }
    Ok((out, records))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ItemFailure {
    pub index: usize,
    pub image_id: String,
    pub message: String,
}

/// Outcome of [`corrupt_dataset`]. Records and failures are sorted by image index.
#[derive(Clone, Debug, Default)]
pub struct CorruptionReport {
    pub records: Vec<CorruptionRecord>,
    /// Images passed through unchanged (byte copy of the source file).
    pub copied: usize,
    pub failures: Vec<ItemFailure>,
}

pub const RECORD_LOG_NAME: &str = "corruption_records.tsv";
pub const ERROR_LOG_NAME: &str = "corruption_errors.tsv";
pub const IMAGE_DIR_NAME: &str = "images";

enum ItemOutcome {
    Corrupted(CorruptionRecord),
    Copied,
}

/// Corrupts every record of a manifest subset into `output_dir/images`,
/// mirroring the relative paths, and writes the record log.
///
/// Image `i` uses the stream `derive_seed(master_seed, i)`, so the result does
/// not depend on `workers` or scheduling. Unreadable files are reported in
/// [`CorruptionReport::failures`] and the run continues.
pub fn corrupt_dataset(
    records: &[ImageRecord],
    input_root: &Path,
    policy: &CorruptionPolicy,
    master_seed: u64,
    output_dir: &Path,
    workers: usize,
) -> Result<CorruptionReport> {
    let image_dir = output_dir.join(IMAGE_DIR_NAME);
    std::fs::create_dir_all(&image_dir).map_err(|e| Error::io(&image_dir, e))?;

    let process = |i: usize, rec: &ImageRecord| -> Result<ItemOutcome> {
        let src = input_root.join(&rec.path);
        let dst = safe_join(&image_dir, &rec.path)?;
        if let Some(parent) = dst.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let mut rng = Rng::new(derive_seed(master_seed, i as u64));
        match policy.draw(rec.modality, &mut rng) {
            None => {
                std::fs::copy(&src, &dst).map_err(|e| Error::io(&src, e))?;
                Ok(ItemOutcome::Copied)
            }
            Some((kind, severity, seed)) => {
                let img = imaging::load_image(&src, rec.modality)?;
                let out = apply_corruption(&img, kind, severity, &mut Rng::new(seed))?;
                imaging::save_image(&out, &dst)?;
                Ok(ItemOutcome::Corrupted(CorruptionRecord {
                    image_id: rec.image_id.clone(),
                    modality: rec.modality,
                    kind,
                    severity,
                    seed,
                }))
            }
        }
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    let outcomes: Vec<Result<ItemOutcome>> = pool.install(|| {
        records
            .par_iter()
            .enumerate()
            .map(|(i, rec)| process(i, rec))
            .collect()
    });

    let mut report = CorruptionReport::default();
    for (i, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(ItemOutcome::Corrupted(r)) => report.records.push(r),
            Ok(ItemOutcome::Copied) => report.copied += 1,
            Err(e) => report.failures.push(ItemFailure {
                index: i,
                image_id: records[i].image_id.clone(),
                message: e.to_string(),
            }),
        }
    }

    let log_path = output_dir.join(RECORD_LOG_NAME);
    std::fs::write(&log_path, format_record_log(&report.records)).map_err(|e| Error::io(&log_path, e))?;
    let err_path = output_dir.join(ERROR_LOG_NAME);
    if report.failures.is_empty() {
        if err_path.exists() {
            std::fs::remove_file(&err_path).map_err(|e| Error::io(&err_path, e))?;
        }
    } else {
        let text: String = report
            .failures
            .iter()
            .map(|f| format!("{}\t{}\t{}\n", f.index, f.image_id, f.message.replace(['\t', '\n'], " ")))
            .collect();
        std::fs::write(&err_path, text).map_err(|e| Error::io(&err_path, e))?;
    }
    Ok(report)
}

/// Joins a manifest-relative path under `root`, refusing absolute paths and `..`.
fn safe_join(root: &Path, rel: &Path) -> Result<PathBuf> {
    use std::path::Component;
    if rel
        .components()
        .any(|c| !matches!(c, Component::Normal(_) | Component::CurDir))
    {
        return Err(Error::invalid(format!(
            "image path {} must be relative without `..`",
            rel.display()
        )));
    }
    Ok(root.join(rel))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn probe(modality: ModalityTag) -> ImageBuffer {
        let (w, h) = (24, 40);
        let mut px = Vec::with_capacity(w * h * 3);
        for y in 0..h {
            for x in 0..w {
                let v = ((x * 29 + y * 13 + (x * y) % 7 * 19) % 256) as u8;
                px.extend_from_slice(&[v, v.wrapping_mul(3), 200u8.wrapping_sub(v)]);
            }
        }
        let img = ImageBuffer::new(w, h, px, ModalityTag::Visible).unwrap();
        match modality {
            ModalityTag::Visible => img,
            ModalityTag::Infrared => imaging::to_grayscale(&img).retag(ModalityTag::Infrared),
        }
    }

    #[test]
    fn kind_lists() {
        assert_eq!(applicable_kinds(ModalityTag::Visible).len(), 20);
        let ir = applicable_kinds(ModalityTag::Infrared);
        assert_eq!(ir.len(), 19);
        assert!(!ir.contains(&CorruptionKind::Brightness));
        assert!(ir.contains(&CorruptionKind::Saturate));
    }

    #[test]
    fn kind_names_round_trip() {
        for k in CorruptionKind::ALL {
            assert_eq!(k.as_str().parse::<CorruptionKind>().unwrap(), k);
        }
        assert!("sunburn".parse::<CorruptionKind>().is_err());
    }

    #[test]
    fn brightness_on_infrared_is_rejected() {
        let img = probe(ModalityTag::Infrared);
        let err = apply_corruption(&img, CorruptionKind::Brightness, Severity::new(3).unwrap(), &mut Rng::new(0));
        assert!(matches!(err, Err(Error::NotApplicable { .. })));
    }

    #[test]
    fn severity_bounds() {
        assert!(Severity::new(0).is_err());
        assert!(Severity::new(6).is_err());
        assert_eq!(Severity::all().count(), 5);
        assert!("random".parse::<SeverityRule>().is_ok());
        assert!("7".parse::<SeverityRule>().is_err());
    }

    #[test]
    fn every_kind_is_deterministic_and_keeps_dims() {
        for modality in ModalityTag::ALL {
            let img = probe(modality);
            for kind in applicable_kinds(modality) {
                let s = Severity::new(3).unwrap();
                let a = apply_corruption(&img, kind, s, &mut Rng::new(11)).unwrap();
                let b = apply_corruption(&img, kind, s, &mut Rng::new(11)).unwrap();
                assert_eq!(a, b, "{kind} {modality}");
                assert_eq!(a.dims(), img.dims());
                assert_eq!(a.modality(), modality);
                if modality == ModalityTag::Infrared {
                    assert_eq!(a.max_channel_spread(), 0, "{kind}");
                }
            }
        }
    }

    #[test]
    fn gaussian_noise_psnr_decreases() {
        let img = probe(ModalityTag::Visible);
        let p: Vec<f64> = [1u8, 3, 5]
            .iter()
            .map(|&l| {
                let out = apply_corruption(&img, CorruptionKind::GaussianNoise, Severity::new(l).unwrap(), &mut Rng::new(5)).unwrap();
                imaging::psnr(&img, &out).unwrap()
            })
            .collect();
        assert!(p[2] < p[1] && p[1] < p[0], "{p:?}");
    }

    #[test]
    fn clean_pair_is_untouched() {
        let pair = ImagePair::new(probe(ModalityTag::Visible), probe(ModalityTag::Infrared), 1).unwrap();
        let (out, recs) = corrupt_pair(&pair, &CorruptionPolicy::clean(), &mut Rng::new(1)).unwrap();
        assert_eq!(out, pair);
        assert!(recs.is_empty());
    }

    #[test]
    fn rgb_only_leaves_infrared() {
        let pair = ImagePair::new(probe(ModalityTag::Visible), probe(ModalityTag::Infrared), 1).unwrap();
        let policy = CorruptionPolicy::new(CorruptionMode::RgbOnly, SeverityRule::UniformRandom);
        for s in 0..20 {
            let (out, recs) = corrupt_pair(&pair, &policy, &mut Rng::new(s)).unwrap();
            assert_eq!(out.infrared, pair.infrared);
            assert_eq!(recs.len(), 1);
            assert_eq!(recs[0].modality, ModalityTag::Visible);
        }
    }

    #[test]
    fn record_line_round_trip_and_replay() {
        let pair = ImagePair::new(probe(ModalityTag::Visible), probe(ModalityTag::Infrared), 3).unwrap();
        let policy = CorruptionPolicy::new(CorruptionMode::Both, SeverityRule::UniformRandom);
        let (out, recs) = corrupt_pair(&pair, &policy, &mut Rng::new(99)).unwrap();
        let parsed = parse_record_log(&format_record_log(&recs)).unwrap();
        assert_eq!(parsed, recs);
        assert_eq!(parsed[0].replay(&pair.visible).unwrap(), out.visible);
        assert_eq!(parsed[1].replay(&pair.infrared).unwrap(), out.infrared);
        assert!(parse_record_log("a\tvisible\tsnow\t9\t1\n").is_err());
    }

    #[test]
    fn unsafe_paths_rejected() {
        assert!(safe_join(Path::new("/tmp"), Path::new("../x.png")).is_err());
        assert!(safe_join(Path::new("/tmp"), Path::new("/etc/x.png")).is_err());
        assert!(safe_join(Path::new("/tmp"), Path::new("a/b.png")).is_ok());
    }
}
