//! Multimodal (visible + infrared) person re-identification toolkit:
//! a seeded corruption benchmark, multimodal data augmentation operators,
//! the leave-one-out-query evaluation protocol and retrieval metrics.

pub mod augmentation;
pub mod corruption;
pub mod error;
pub mod imaging;
pub mod metrics;
pub mod protocol;
pub mod rng;

pub use error::{Error, Result};
pub use imaging::{ImageBuffer, ModalityTag, Rect};
pub use rng::Rng;
