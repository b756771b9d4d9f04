//! Reinhard color-statistics matching in LAB space.

use serde::{Deserialize, Serialize};

use super::color::{image_to_lab, lab_to_image};
use crate::error::{Error, Result};
use crate::raster::RasterImage;

/// Per-channel LAB mean and standard deviation of a template image.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabStats {
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

impl LabStats {
    pub fn new(mean: [f64; 3], std: [f64; 3]) -> Result<Self> {
        for (i, &s) in std.iter().enumerate() {
            if s <= 0.0 {
                return Err(Error::DegenerateChannel(format!(
                    "LAB channel {i} has non-positive standard deviation {s}"
                )));
            }
        }
        Ok(LabStats { mean, std })
    }
}

const CHANNEL_NAMES: [&str; 3] = ["L", "a", "b"];

/// Per-channel LAB statistics of an image. A zero-variance channel is an
/// error because it cannot be rescaled.
pub fn lab_stats(img: &RasterImage) -> Result<LabStats> {
    let labs = image_to_lab(img);
    let n = labs.len() as f64;
    let mut mean = [0.0; 3];
    for lab in &labs {
        for c in 0..3 {
            mean[c] += lab[c];
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut var = [0.0; 3];
    for lab in &labs {
        for c in 0..3 {
            var[c] += (lab[c] - mean[c]).powi(2);
        }
    }
    let mut std = [0.0; 3];
    for c in 0..3 {
        std[c] = (var[c] / n).sqrt();
        if std[c] <= 1e-12 {
            return Err(Error::DegenerateChannel(format!(
                "LAB channel {} has zero variance",
                CHANNEL_NAMES[c]
            )));
        }
    }
    Ok(LabStats { mean, std })
}

/// Match each LAB channel of `src` to the target mean and standard
/// deviation, then convert back to sRGB (clamped to gamut).
pub fn reinhard_normalize(src: &RasterImage, target: &LabStats) -> Result<RasterImage> {
    let src_stats = lab_stats(src)?;
    let mut labs = image_to_lab(src);
    for lab in &mut labs {
        for c in 0..3 {
            lab[c] = (lab[c] - src_stats.mean[c]) / src_stats.std[c] * target.std[c]
                + target.mean[c];
        }
    }
    Ok(lab_to_image(src.height(), src.width(), &labs))
}
