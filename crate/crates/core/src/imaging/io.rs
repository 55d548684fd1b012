use std::io::Cursor;
use std::path::Path;

use image::codecs::jpeg::JpegEncoder;
use image::{DynamicImage, ExtendedColorType, ImageEncoder};

use super::{to_grayscale, ImageBuffer, ModalityTag};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ImageFormat {
    Png,
    Jpeg,
}

/// Quality used when a corrupted image is written back as JPEG.
const OUTPUT_JPEG_QUALITY: u8 = 95;

impl ImageFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        match ext.as_deref() {
            Some("png") => Ok(ImageFormat::Png),
            Some("jpg" | "jpeg") => Ok(ImageFormat::Jpeg),
            _ => Err(Error::invalid(format!(
                "unsupported image extension for {}",
                path.display()
            ))),
        }
    }
}

/// Decodes PNG or JPEG bytes. Infrared inputs may be stored with one or
/// three channels; both are normalized to three equal channels.
pub fn decode_image(bytes: &[u8], modality: ModalityTag) -> std::result::Result<ImageBuffer, image::ImageError> {
    let dynamic = image::load_from_memory(bytes)?;
    Ok(from_dynamic(dynamic, modality))
}

fn from_dynamic(dynamic: DynamicImage, modality: ModalityTag) -> ImageBuffer {
    let rgb = dynamic.to_rgb8();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    let img = ImageBuffer::new(w, h, rgb.into_raw(), ModalityTag::Visible)
        .expect("decoder returned a consistent buffer");
    match modality {
        ModalityTag::Visible => img,
        ModalityTag::Infrared if img.is_single_channel() => img.retag(ModalityTag::Infrared),
        ModalityTag::Infrared => to_grayscale(&img).retag(ModalityTag::Infrared),
    }
}

pub fn load_image(path: &Path, modality: ModalityTag) -> Result<ImageBuffer> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_image(&bytes, modality).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

pub fn encode_png(img: &ImageBuffer) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    let encoder = image::codecs::png::PngEncoder::new(Cursor::new(&mut out));
    let (w, h) = (img.width() as u32, img.height() as u32);
    let res = match img.modality() {
        ModalityTag::Infrared => encoder.write_image(&img.luma_plane(), w, h, ExtendedColorType::L8),
        ModalityTag::Visible => encoder.write_image(img.pixels(), w, h, ExtendedColorType::Rgb8),
    };
    res.map_err(|e| Error::invalid(format!("png encode failed: {e}")))?;
    Ok(out)
}

/// Baseline JPEG. Infrared images are encoded as single-channel luma so a
/// decode stays exactly gray.
pub fn encode_jpeg(img: &ImageBuffer, quality: u8) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    let encoder = JpegEncoder::new_with_quality(Cursor::new(&mut out), quality.clamp(1, 100));
    let (w, h) = (img.width() as u32, img.height() as u32);
    let res = match img.modality() {
        ModalityTag::Infrared => encoder.write_image(&img.luma_plane(), w, h, ExtendedColorType::L8),
        ModalityTag::Visible => encoder.write_image(img.pixels(), w, h, ExtendedColorType::Rgb8),
    };
    res.map_err(|e| Error::invalid(format!("jpeg encode failed: {e}")))?;
    Ok(out)
}

pub fn encode_image(img: &ImageBuffer, format: ImageFormat) -> Result<Vec<u8>> {
    match format {
        ImageFormat::Png => encode_png(img),
        ImageFormat::Jpeg => encode_jpeg(img, OUTPUT_JPEG_QUALITY),
    }
}

/// Writes `img` in the format implied by the extension, creating parent
/// directories as needed.
pub fn save_image(img: &ImageBuffer, path: &Path) -> Result<()> {
    let bytes = encode_image(img, ImageFormat::from_path(path)?)?;
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
