//! IDX-format image/label loading (big-endian, magic 0x803 / 0x801).

use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone)]
pub struct MnistDataset {
    /// `N × (rows*cols)` pixels scaled to `[0, 1]`.
    pub images: Array2<f64>,
    /// `N` class labels in `0..10`.
    pub labels: Vec<u8>,
}

impl MnistDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn pixels(&self) -> usize {
        self.images.ncols()
    }

    /// First `n` examples.
    pub fn take(&self, n: usize) -> MnistDataset {
        let n = n.min(self.len());
        MnistDataset {
            images: self.images.slice(ndarray::s![..n, ..]).to_owned(),
            labels: self.labels[..n].to_vec(),
        }
    }
}

fn read_u32_be(bytes: &[u8], off: usize, path: &Path) -> Result<u32> {
    let end = off + 4;
    if bytes.len() < end {
        return Err(Error::TruncatedFile {
            path: path.display().to_string(),
            need: end,
            have: bytes.len(),
        });
    }
    Ok(u32::from_be_bytes(bytes[off..end].try_into().unwrap()))
}

fn load_idx_images(path: &Path) -> Result<(Vec<u8>, usize, usize, usize)> {
    let bytes = fs::read(path)?;
    let magic = read_u32_be(&bytes, 0, path)?;
    if magic != IMAGES_MAGIC {
        return Err(Error::BadMagic {
            path: path.display().to_string(),
            got: magic,
            want: IMAGES_MAGIC,
        });
    }
    let n = read_u32_be(&bytes, 4, path)? as usize;
    let rows = read_u32_be(&bytes, 8, path)? as usize;
    let cols = read_u32_be(&bytes, 12, path)? as usize;
    let need = 16 + n * rows * cols;
    if bytes.len() < need {
        return Err(Error::TruncatedFile {
            path: path.display().to_string(),
            need,
            have: bytes.len(),
        });
    }
    Ok((bytes[16..need].to_vec(), n, rows, cols))
}

fn load_idx_labels(path: &Path) -> Result<Vec<u8>> {
    let bytes = fs::read(path)?;
    let magic = read_u32_be(&bytes, 0, path)?;
    if magic != LABELS_MAGIC {
        return Err(Error::BadMagic {
            path: path.display().to_string(),
            got: magic,
            want: LABELS_MAGIC,
        });
    }
    let n = read_u32_be(&bytes, 4, path)? as usize;
    let need = 8 + n;
    if bytes.len() < need {
        return Err(Error::TruncatedFile {
            path: path.display().to_string(),
            need,
            have: bytes.len(),
        });
    }
    Ok(bytes[8..need].to_vec())
}

/// Loads an image/label IDX pair; pixel bytes are scaled by 1/255.
pub fn load_mnist_idx(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<MnistDataset> {
    let (pixels, n, rows, cols) = load_idx_images(images_path.as_ref())?;
    let labels = load_idx_labels(labels_path.as_ref())?;
    if labels.len() != n {
        return Err(Error::CountMismatch {
            images: n,
            labels: labels.len(),
        });
    }
    let dim = rows * cols;
    let mut images = Array2::zeros((n, dim));
    for i in 0..n {
        for p in 0..dim {
            images[[i, p]] = pixels[i * dim + p] as f64 / 255.0;
        }
    }
    Ok(MnistDataset { images, labels })
}

/// Writes raw pixel bytes (`n * rows * cols`) as an IDX image file.
pub fn write_idx_images(
    path: impl AsRef<Path>,
    pixels: &[u8],
    n: usize,
    rows: usize,
    cols: usize,
) -> Result<()> {
    if pixels.len() != n * rows * cols {
        return Err(Error::Other(format!(
            "pixel buffer has {} bytes, want {}",
            pixels.len(),
            n * rows * cols
        )));
    }
    let mut out = Vec::with_capacity(16 + pixels.len());
    out.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
    out.extend_from_slice(&(n as u32).to_be_bytes());
    out.extend_from_slice(&(rows as u32).to_be_bytes());
    out.extend_from_slice(&(cols as u32).to_be_bytes());
    out.extend_from_slice(pixels);
    fs::write(path, out)?;
    Ok(())
}

/// Writes class labels as an IDX label file.
pub fn write_idx_labels(path: impl AsRef<Path>, labels: &[u8]) -> Result<()> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    fs::write(path, out)?;
    Ok(())
}
