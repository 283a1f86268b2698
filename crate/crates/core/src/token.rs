//! Pixel-to-token mask transfer and masked attention.
//!
//! A per-frame suppression mask is carried through the same resize/crop/pad
//! chain as the image, max-pooled onto the tokenizer's patch grid, and turned
//! into an additive key bias of `0` (keep) or `-inf` (suppress). The softmax
//! below gives masked keys a weight of exactly zero.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::pgm::save_mask;
use crate::model::BinaryMask;

/// One step of the preprocessing chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeomOp {
    /// Nearest-neighbor resize to `height × width`.
    Resize { height: usize, width: usize },
    /// Keep the window starting at (`top`, `left`).
    Crop {
        top: usize,
        left: usize,
        height: usize,
        width: usize,
    },
    /// Add static (0) borders.
    Pad {
        top: usize,
        bottom: usize,
        left: usize,
        right: usize,
    },
}

/// Ordered resize/crop/pad chain from a source raster to the tokenizer input.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GeomTransform {
    pub ops: Vec<GeomOp>,
}

impl GeomTransform {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn resize(height: usize, width: usize) -> Self {
        Self {
            ops: vec![GeomOp::Resize { height, width }],
        }
    }

    /// Scales the longer side to `target` (aspect preserved) and pads the
    /// shorter side symmetrically to a `target × target` square.
    pub fn letterbox(src_height: usize, src_width: usize, target: usize) -> Self {
        let long = src_height.max(src_width).max(1);
        let h = (src_height * target / long).max(1);
        let w = (src_width * target / long).max(1);
        let (pad_h, pad_w) = (target - h, target - w);
        Self {
            ops: vec![
                GeomOp::Resize { height: h, width: w },
                GeomOp::Pad {
                    top: pad_h / 2,
                    bottom: pad_h - pad_h / 2,
                    left: pad_w / 2,
                    right: pad_w - pad_w / 2,
                },
            ],
        }
    }

    /// Output size for a `height × width` input, or an error if a step does not fit.
    pub fn output_dims(&self, height: usize, width: usize) -> Result<(usize, usize)> {
        let (mut h, mut w) = (height, width);
        for op in &self.ops {
            match *op {
                GeomOp::Resize { height, width } => {
                    if height == 0 || width == 0 {
                        return Err(Error::Consistency("resize to an empty raster".into()));
                    }
                    (h, w) = (height, width);
                }
                GeomOp::Crop {
                    top,
                    left,
                    height,
                    width,
                } => {
                    if height == 0 || width == 0 || top + height > h || left + width > w {
                        return Err(Error::Consistency(format!(
                            "crop {height}x{width}+{top}+{left} does not fit a {h}x{w} raster"
                        )));
                    }
                    (h, w) = (height, width);
                }
                GeomOp::Pad {
                    top,
                    bottom,
                    left,
                    right,
                } => (h, w) = (h + top + bottom, w + left + right),
            }
        }
        Ok((h, w))
    }
}

fn apply_op(mask: &BinaryMask, op: &GeomOp) -> BinaryMask {
    let (w, h) = mask.dims();
    match *op {
        GeomOp::Resize { height, width } => BinaryMask::from_fn(width, height, |x, y| {
            mask.get(x * w / width, y * h / height)
        }),
        GeomOp::Crop {
            top,
            left,
            height,
            width,
        } => BinaryMask::from_fn(width, height, |x, y| mask.get(x + left, y + top)),
        GeomOp::Pad {
            top,
            bottom,
            left,
            right,
        } => BinaryMask::from_fn(w + left + right, h + top + bottom, |x, y| {
            x >= left && y >= top && x - left < w && y - top < h && mask.get(x - left, y - top)
        }),
    }
}

/// Applies `tf` to a binary mask with nearest-neighbor sampling; padded
/// borders are static.
pub fn transfer_mask(mask: &BinaryMask, tf: &GeomTransform) -> Result<BinaryMask> {
    tf.output_dims(mask.height(), mask.width())?;
    let mut out = mask.clone();
    for op in &tf.ops {
        out = apply_op(&out, op);
    }
    Ok(out)
}

/// Patch-grid indicator: cell `(u, v)` covers pixels `uP <= x < (u+1)P`,
/// `vP <= y < (v+1)P`, clipped at the raster border.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenMask {
    patch: usize,
    input_height: usize,
    input_width: usize,
    grid: BinaryMask,
}

/// Sidecar describing a token grid for external inference code.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenGridInfo {
    pub height: usize,
    pub width: usize,
    pub patch: usize,
    pub grid_h: usize,
    pub grid_w: usize,
}

impl TokenMask {
    pub fn patch(&self) -> usize {
        self.patch
    }

    pub fn grid_width(&self) -> usize {
        self.grid.width()
    }

    pub fn grid_height(&self) -> usize {
        self.grid.height()
    }

    /// Is token `(u, v)` (column, row) masked?
    pub fn get(&self, u: usize, v: usize) -> bool {
        self.grid.get(u, v)
    }

    pub fn grid(&self) -> &BinaryMask {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.grid.bits().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn info(&self) -> TokenGridInfo {
        TokenGridInfo {
            height: self.input_height,
            width: self.input_width,
            patch: self.patch,
            grid_h: self.grid.height(),
            grid_w: self.grid.width(),
        }
    }

    /// Writes the grid as a 0/255 PGM and its JSON sidecar next to it.
    pub fn save(&self, pgm_path: impl AsRef<Path>, sidecar_path: impl AsRef<Path>) -> Result<()> {
        save_mask(&self.grid, pgm_path)?;
        let p = sidecar_path.as_ref();
        let text = serde_json::to_string(&self.info()).expect("sidecar serializes");
        fs::write(p, text + "\n").map_err(|e| Error::io(p, e))
    }
}

/// Max-pools a pixel mask onto a `⌈H/P⌉ × ⌈W/P⌉` token grid.
pub fn pool_to_tokens(mask: &BinaryMask, patch: usize) -> Result<TokenMask> {
    if patch == 0 {
        return Err(Error::Config("patch size must be at least 1".into()));
    }
    let (w, h) = mask.dims();
    let (gw, gh) = (w.div_ceil(patch), h.div_ceil(patch));
    let mut grid = BinaryMask::new(gw, gh);
    for (x, y) in mask.active_pixels() {
        grid.set(x / patch, y / patch, true);
    }
    Ok(TokenMask {
        patch,
        input_height: h,
        input_width: w,
        grid,
    })
}

/// Additive key bias in row-major token order: `0` for static tokens,
/// negative infinity for masked ones.
pub fn attention_bias(tokens: &TokenMask) -> Vec<f64> {
    tokens
        .grid
        .bits()
        .iter()
        .map(|&m| if m { f64::NEG_INFINITY } else { 0.0 })
        .collect()
}

/// One bias value per line, `-inf` for masked keys.
pub fn encode_bias(bias: &[f64]) -> String {
    let mut out = String::with_capacity(bias.len() * 3);
    for b in bias {
        if *b == f64::NEG_INFINITY {
            out.push_str("-inf\n");
        } else {
            out.push_str(&format!("{b}\n"));
        }
    }
    out
}

pub fn decode_bias(path: &Path, text: &str) -> Result<Vec<f64>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| match l.trim() {
            "-inf" => Ok(f64::NEG_INFINITY),
            other => other
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::format(path, format!("bad bias value '{other}'"))),
        })
        .collect()
}

/// Softmax of `logits + bias`. Keys with a `-inf` bias get weight exactly 0;
/// the rest are normalized after subtracting their maximum.
pub fn masked_softmax(logits: &[f64], bias: &[f64]) -> Result<Vec<f64>> {
    if logits.len() != bias.len() {
        return Err(Error::Consistency(format!(
            "{} logits but {} bias entries",
            logits.len(),
            bias.len()
        )));
    }
    let mut shifted = Vec::with_capacity(logits.len());
    let mut max = f64::NEG_INFINITY;
    let mut any = false;
    for (&l, &b) in logits.iter().zip(bias) {
        if b == f64::NEG_INFINITY {
            shifted.push(None);
            continue;
        }
        let v = l + b;
        if !v.is_finite() {
            return Err(Error::Validation(format!("non-finite attention logit {v}")));
        }
        any = true;
        max = max.max(v);
        shifted.push(Some(v));
    }
    if !any {
        return Err(Error::DegenerateRow);
    }
    let mut weights: Vec<f64> = shifted
        .iter()
        .map(|v| v.map_or(0.0, |v| (v - max).exp()))
        .collect();
    let sum: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= sum;
    }
    Ok(weights)
}
