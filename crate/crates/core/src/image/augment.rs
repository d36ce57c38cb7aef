use std::fmt;
use std::str::FromStr;

use image::imageops::{self, FilterType};
use image::RgbImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ingest::LabelRecord;

use super::ImageError;

/// Largest relative gap between the minority count and its target after
/// balancing.
pub const BALANCE_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AugmentationOp {
    Rotate90,
    Rotate180,
    Rotate270,
    /// Scale by 0.8.
    ScaleDown,
    /// Scale by 1.2.
    ScaleUp,
    HorizontalFlip,
}

impl AugmentationOp {
    pub const ALL: [AugmentationOp; 6] = [
        AugmentationOp::Rotate90,
        AugmentationOp::Rotate180,
        AugmentationOp::Rotate270,
        AugmentationOp::ScaleDown,
        AugmentationOp::ScaleUp,
        AugmentationOp::HorizontalFlip,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AugmentationOp::Rotate90 => "rotate90",
            AugmentationOp::Rotate180 => "rotate180",
            AugmentationOp::Rotate270 => "rotate270",
            AugmentationOp::ScaleDown => "scale0.8",
            AugmentationOp::ScaleUp => "scale1.2",
            AugmentationOp::HorizontalFlip => "hflip",
        }
    }

    pub fn scale_factor(self) -> Option<f64> {
        match self {
            AugmentationOp::ScaleDown => Some(0.8),
            AugmentationOp::ScaleUp => Some(1.2),
            _ => None,
        }
    }

    /// Output dimensions are always at least 1x1.
    pub fn apply(self, img: &RgbImage) -> RgbImage {
        match self {
            AugmentationOp::Rotate90 => imageops::rotate90(img),
            AugmentationOp::Rotate180 => imageops::rotate180(img),
            AugmentationOp::Rotate270 => imageops::rotate270(img),
            AugmentationOp::HorizontalFlip => imageops::flip_horizontal(img),
            AugmentationOp::ScaleDown | AugmentationOp::ScaleUp => {
                let f = self.scale_factor().unwrap_or(1.0);
                let (w, h) = img.dimensions();
                let nw = ((w as f64 * f).round() as u32).max(1);
                let nh = ((h as f64 * f).round() as u32).max(1);
                imageops::resize(img, nw, nh, FilterType::Triangle)
            }
        }
    }
}

impl fmt::Display for AugmentationOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AugmentationOp {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AugmentationOp::ALL
            .into_iter()
            .find(|op| op.name() == s.trim())
            .ok_or_else(|| format!("unknown augmentation op {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImage {
    pub id: String,
    pub image: RgbImage,
    pub label: LabelRecord,
}

/// Original image id and the ops applied to it, in order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub source_id: String,
    pub ops: Vec<AugmentationOp>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedImage {
    pub id: String,
    pub image: RgbImage,
    pub label: LabelRecord,
    /// `None` for originals.
    pub provenance: Option<Provenance>,
}

/// The `k`-th non-empty op sequence over `n` ops: all length-1 sequences
/// first, then length 2, and so on.
fn chain(mut k: usize, n: usize) -> Vec<usize> {
    let mut len = 1;
    let mut block = n;
    while k >= block {
        k -= block;
        len += 1;
        block = block.saturating_mul(n);
    }
    let mut out = vec![0; len];
    for slot in out.iter_mut().rev() {
        *slot = k % n;
        k /= n;
    }
    out
}

/// Synthetic samples needed to bring `minority` up to
/// `round(target_balance * majority)`, as `(source index, op indices)`.
/// Sources are used round-robin; each pass over the sources uses the next
/// op sequence.
pub fn plan_augmentation(
    minority: usize,
    majority: usize,
    n_ops: usize,
    target_balance: f64,
) -> Result<Vec<(usize, Vec<usize>)>, ImageError> {
    if n_ops == 0 {
        return Err(ImageError::NoOperations);
    }
    if !(target_balance > 0.0 && target_balance <= 1.0) {
        return Err(ImageError::InvalidBalance(target_balance));
    }
    if minority == 0 {
        return Err(ImageError::SingleClass);
    }
    let target = (target_balance * majority as f64).round() as usize;
    let need = target.saturating_sub(minority);
    Ok((0..need).map(|k| (k % minority, chain(k / minority, n_ops))).collect())
}

/// Returns the originals followed by synthetic copies of the smaller
/// related class. Synthetic images keep their source's label and are named
/// `{source}#aug{k}`.
pub fn augment_dataset(
    images: &[LabeledImage],
    ops: &[AugmentationOp],
    target_balance: f64,
) -> Result<Vec<AugmentedImage>, ImageError> {
    let pos: Vec<&LabeledImage> = images.iter().filter(|i| i.label.related).collect();
    let neg: Vec<&LabeledImage> = images.iter().filter(|i| !i.label.related).collect();
    let (minority, majority) = if pos.len() <= neg.len() { (pos, neg.len()) } else { (neg, pos.len()) };
    let plan = plan_augmentation(minority.len(), majority, ops.len(), target_balance)?;
    let synthetic: Vec<AugmentedImage> = plan
        .into_par_iter()
        .enumerate()
        .map(|(k, (src, chain))| {
            let source = minority[src];
            let applied: Vec<AugmentationOp> = chain.iter().map(|&j| ops[j]).collect();
            let image = applied.iter().fold(source.image.clone(), |img, op| op.apply(&img));
            AugmentedImage {
                id: format!("{}#aug{k}", source.id),
                image,
                label: source.label.clone(),
                provenance: Some(Provenance { source_id: source.id.clone(), ops: applied }),
            }
        })
        .collect();
    let mut out: Vec<AugmentedImage> = images
        .iter()
        .map(|i| AugmentedImage { id: i.id.clone(), image: i.image.clone(), label: i.label.clone(), provenance: None })
        .collect();
    out.extend(synthetic);
    Ok(out)
}
