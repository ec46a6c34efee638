//! Raw (un-gzipped) MNIST IDX files.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

/// Which pool a glyph was drawn from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SourceSplit {
    Train,
    Test,
    /// Glyphs that never came from MNIST (letters, user drawings).
    External,
}

impl SourceSplit {
    pub fn code(self) -> u8 {
        match self {
            SourceSplit::Train => 0,
            SourceSplit::Test => 1,
            SourceSplit::External => 2,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(SourceSplit::Train),
            1 => Ok(SourceSplit::Test),
            2 => Ok(SourceSplit::External),
            other => Err(Error::Format(format!("unknown source split code {other}"))),
        }
    }
}

/// One grayscale glyph with values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DigitGlyph {
    pub source_split: SourceSplit,
    pub source_index: u32,
    pub label: u8,
    pub rows: usize,
    pub cols: usize,
    pub bitmap: Vec<f64>,
}

impl DigitGlyph {
    pub fn new(
        source_split: SourceSplit,
        source_index: u32,
        label: u8,
        rows: usize,
        cols: usize,
        bitmap: Vec<f64>,
    ) -> Result<Self> {
        if bitmap.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} values for a {rows}x{cols} glyph",
                bitmap.len()
            )));
        }
        if let Some(v) = bitmap.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidValue(format!("glyph value {v} outside [0, 1]")));
        }
        Ok(Self {
            source_split,
            source_index,
            label,
            rows,
            cols,
            bitmap,
        })
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.bitmap[row * self.cols + col]
    }
}

fn be_u32(bytes: &[u8], offset: usize, what: &str) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes(b.try_into().unwrap()))
        .ok_or_else(|| Error::Length(format!("truncated {what} header")))
}

/// Parsed image file: `(rows, cols, pixel bytes per image)`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, Vec<&[u8]>)> {
    let magic = be_u32(bytes, 0, "image file")?;
    if magic != IMAGES_MAGIC {
        return Err(Error::Format(format!(
            "image file magic is {magic:#010x}, expected {IMAGES_MAGIC:#010x}"
        )));
    }
    let count = be_u32(bytes, 4, "image file")? as usize;
    let rows = be_u32(bytes, 8, "image file")? as usize;
    let cols = be_u32(bytes, 12, "image file")? as usize;
    let payload = &bytes[16..];
    let per = rows * cols;
    if payload.len() < count * per {
        return Err(Error::Length(format!(
            "image file declares {count} images of {rows}x{cols} but holds {} bytes",
            payload.len()
        )));
    }
    let images = (0..count).map(|i| &payload[i * per..(i + 1) * per]).collect();
    Ok((rows, cols, images))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<&[u8]> {
    let magic = be_u32(bytes, 0, "label file")?;
    if magic != LABELS_MAGIC {
        return Err(Error::Format(format!(
            "label file magic is {magic:#010x}, expected {LABELS_MAGIC:#010x}"
        )));
    }
    let count = be_u32(bytes, 4, "label file")? as usize;
    let payload = &bytes[8..];
    if payload.len() < count {
        return Err(Error::Length(format!(
            "label file declares {count} labels but holds {}",
            payload.len()
        )));
    }
    Ok(&payload[..count])
}

/// Reads an image/label IDX pair; pixels are divided by 255 and order is kept.
pub fn load_mnist_idx(
    images_path: &Path,
    labels_path: &Path,
    split: SourceSplit,
) -> Result<Vec<DigitGlyph>> {
    let image_bytes = fs::read(images_path)?;
    let label_bytes = fs::read(labels_path)?;
    glyphs_from_idx(&image_bytes, &label_bytes, split)
}

pub fn glyphs_from_idx(
    image_bytes: &[u8],
    label_bytes: &[u8],
    split: SourceSplit,
) -> Result<Vec<DigitGlyph>> {
    let (rows, cols, images) = parse_idx_images(image_bytes)?;
    let labels = parse_idx_labels(label_bytes)?;
    if images.len() != labels.len() {
        return Err(Error::Consistency(format!(
            "{} images but {} labels",
            images.len(),
            labels.len()
        )));
    }
    Ok(images
        .iter()
        .zip(labels)
        .enumerate()
        .map(|(i, (pixels, &label))| DigitGlyph {
            source_split: split,
            source_index: i as u32,
            label,
            rows,
            cols,
            bitmap: pixels.iter().map(|&p| f64::from(p) / 255.0).collect(),
        })
        .collect())
}

pub fn write_idx_images<W: Write>(mut out: W, rows: usize, cols: usize, images: &[Vec<u8>]) -> Result<()> {
    for v in [IMAGES_MAGIC, images.len() as u32, rows as u32, cols as u32] {
        out.write_all(&v.to_be_bytes())?;
    }
    for img in images {
        if img.len() != rows * cols {
            return Err(Error::Dimension("image byte count does not match header".into()));
        }
        out.write_all(img)?;
    }
    Ok(())
}

pub fn write_idx_labels<W: Write>(mut out: W, labels: &[u8]) -> Result<()> {
    out.write_all(&LABELS_MAGIC.to_be_bytes())?;
    out.write_all(&(labels.len() as u32).to_be_bytes())?;
    out.write_all(labels)?;
    Ok(())
}
