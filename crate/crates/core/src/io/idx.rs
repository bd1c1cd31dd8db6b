//! IDX image/label files. Images with data type 0x08 (unsigned byte) are
//! flattened row-major and scaled by 1/255 into [0, 1]; type 0x0D/0x0E
//! (float/double) images are taken verbatim, which is how perturbed data is
//! written back since perturbed values may leave [0, 1]. Dimension words are
//! big-endian per the IDX convention.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

use super::{dense_labels, LabelledDataset};

const IMAGE_MAGIC_U8: u32 = 0x0000_0803;
const IMAGE_MAGIC_F32: u32 = 0x0000_0D03;
const IMAGE_MAGIC_F64: u32 = 0x0000_0E03;
const LABEL_MAGIC_U8: u32 = 0x0000_0801;

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
    path: String,
}

impl<'a> Cursor<'a> {
    fn new(data: &'a [u8], path: &Path) -> Self {
        Cursor {
            data,
            pos: 0,
            path: path.display().to_string(),
        }
    }

    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        if self.pos + len > self.data.len() {
            return Err(Error::format(format!(
                "{}: truncated at offset {} (needed {} more bytes)",
                self.path,
                self.pos,
                self.pos + len - self.data.len()
            )));
        }
        let out = &self.data[self.pos..self.pos + len];
        self.pos += len;
        Ok(out)
    }

    fn u32_be(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.data.len() {
            return Err(Error::format(format!(
                "{}: {} trailing bytes at offset {}",
                self.path,
                self.data.len() - self.pos,
                self.pos
            )));
        }
        Ok(())
    }
}

/// Load an IDX image file and its label file into a labelled dataset with
/// p = rows x cols features per column.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<LabelledDataset> {
    let image_bytes = fs::read(images_path)?;
    let mut img = Cursor::new(&image_bytes, images_path);
    let magic = img.u32_be()?;
    if ![IMAGE_MAGIC_U8, IMAGE_MAGIC_F32, IMAGE_MAGIC_F64].contains(&magic) {
        return Err(Error::format(format!(
            "{}: bad image magic {:#010x} at offset 0",
            images_path.display(),
            magic
        )));
    }
    let count = img.u32_be()? as usize;
    let rows = img.u32_be()? as usize;
    let cols = img.u32_be()? as usize;
    let p = rows * cols;
    if count == 0 || p == 0 {
        return Err(Error::format(format!(
            "{}: empty image file ({count} images of {rows}x{cols})",
            images_path.display()
        )));
    }

    // column j holds image j, flattened row-major
    let mut features = DMatrix::zeros(p, count);
    match magic {
        IMAGE_MAGIC_U8 => {
            let pixels = img.take(count * p)?;
            for j in 0..count {
                for i in 0..p {
                    features[(i, j)] = pixels[j * p + i] as f64 / 255.0;
                }
            }
        }
        IMAGE_MAGIC_F32 => {
            let bytes = img.take(count * p * 4)?;
            for j in 0..count {
                for i in 0..p {
                    let at = (j * p + i) * 4;
                    let v = f32::from_be_bytes([
                        bytes[at],
                        bytes[at + 1],
                        bytes[at + 2],
                        bytes[at + 3],
                    ]);
                    features[(i, j)] = v as f64;
                }
            }
        }
        _ => {
            let bytes = img.take(count * p * 8)?;
            for j in 0..count {
                for i in 0..p {
                    let at = (j * p + i) * 8;
                    let mut raw = [0u8; 8];
                    raw.copy_from_slice(&bytes[at..at + 8]);
                    features[(i, j)] = f64::from_be_bytes(raw);
                }
            }
        }
    }
    img.finish()?;

    let label_bytes = fs::read(labels_path)?;
    let mut lab = Cursor::new(&label_bytes, labels_path);
    let magic = lab.u32_be()?;
    if magic != LABEL_MAGIC_U8 {
        return Err(Error::format(format!(
            "{}: bad label magic {:#010x} at offset 0",
            labels_path.display(),
            magic
        )));
    }
    let label_count = lab.u32_be()? as usize;
    if label_count == 0 {
        return Err(Error::format(format!(
            "{}: label file declares zero entries",
            labels_path.display()
        )));
    }
    if label_count != count {
        return Err(Error::format(format!(
            "{} images but {} labels",
            count, label_count
        )));
    }
    let raw: Vec<i64> = lab.take(label_count)?.iter().map(|&b| b as i64).collect();
    lab.finish()?;

    let (labels, class_count, originals) = dense_labels(&raw);
    LabelledDataset::new(features, labels, class_count, originals)
}

/// Write features as a big-endian f64 IDX image file (one "row" per sample,
/// width = feature dimension) and labels as a u8 IDX label file.
pub fn write_idx(
    images_path: &Path,
    labels_path: &Path,
    features: &DMatrix<f64>,
    raw_labels: &[i64],
) -> Result<()> {
    let count = features.ncols();
    if raw_labels.len() != count {
        return Err(Error::invalid(format!(
            "{} labels for {} samples",
            raw_labels.len(),
            count
        )));
    }
    let p = features.nrows();
    let mut img = Vec::with_capacity(16 + count * p * 8);
    img.extend_from_slice(&IMAGE_MAGIC_F64.to_be_bytes());
    img.extend_from_slice(&(count as u32).to_be_bytes());
    img.extend_from_slice(&1u32.to_be_bytes());
    img.extend_from_slice(&(p as u32).to_be_bytes());
    for j in 0..count {
        for i in 0..p {
            img.extend_from_slice(&features[(i, j)].to_be_bytes());
        }
    }
    fs::write(images_path, img)?;

    let mut lab = Vec::with_capacity(8 + count);
    lab.extend_from_slice(&LABEL_MAGIC_U8.to_be_bytes());
    lab.extend_from_slice(&(count as u32).to_be_bytes());
    for &l in raw_labels {
        if !(0..=255).contains(&l) {
            return Err(Error::invalid(format!("label {l} does not fit in a byte")));
        }
        lab.push(l as u8);
    }
    fs::write(labels_path, lab)?;
    Ok(())
}
