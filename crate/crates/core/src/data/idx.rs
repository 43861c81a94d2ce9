use byteorder::{BigEndian, ByteOrder};
use std::path::Path;

use crate::error::{QcnnError, Result};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;
pub const IMAGE_SIDE: usize = 28;
pub const IMAGE_PIXELS: usize = IMAGE_SIDE * IMAGE_SIDE;

/// Unfiltered MNIST images (row-major, 784 bytes each) and digit labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawDataset {
    pub images: Vec<Vec<u8>>,
    pub labels: Vec<u8>,
}

impl RawDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

fn format_err(path: &Path, reason: impl Into<String>) -> QcnnError {
    QcnnError::IdxFormat {
        path: path.display().to_string(),
        reason: reason.into(),
    }
}

fn header(bytes: &[u8], path: &Path, words: usize) -> Result<Vec<u32>> {
    if bytes.len() < 4 * words {
        return Err(QcnnError::IdxTruncated {
            path: path.display().to_string(),
            expected: 4 * words,
            found: bytes.len(),
        });
    }
    Ok((0..words).map(|i| BigEndian::read_u32(&bytes[4 * i..])).collect())
}

fn payload<'a>(bytes: &'a [u8], path: &Path, offset: usize, len: usize) -> Result<&'a [u8]> {
    if bytes.len() < offset + len {
        return Err(QcnnError::IdxTruncated {
            path: path.display().to_string(),
            expected: offset + len,
            found: bytes.len(),
        });
    }
    if bytes.len() > offset + len {
        return Err(format_err(
            path,
            format!("{} trailing bytes after payload", bytes.len() - offset - len),
        ));
    }
    Ok(&bytes[offset..])
}

pub fn parse_images(bytes: &[u8], path: &Path) -> Result<Vec<Vec<u8>>> {
    let h = header(bytes, path, 4)?;
    if h[0] != IMAGE_MAGIC {
        return Err(format_err(path, format!("image magic {:#010x}, expected {IMAGE_MAGIC:#010x}", h[0])));
    }
    if h[2] as usize != IMAGE_SIDE || h[3] as usize != IMAGE_SIDE {
        return Err(format_err(path, format!("image size {}x{}, expected 28x28", h[2], h[3])));
    }
    let count = h[1] as usize;
    let data = payload(bytes, path, 16, count * IMAGE_PIXELS)?;
    Ok(data.chunks_exact(IMAGE_PIXELS).map(<[u8]>::to_vec).collect())
}

pub fn parse_labels(bytes: &[u8], path: &Path) -> Result<Vec<u8>> {
    let h = header(bytes, path, 2)?;
    if h[0] != LABEL_MAGIC {
        return Err(format_err(path, format!("label magic {:#010x}, expected {LABEL_MAGIC:#010x}", h[0])));
    }
    let data = payload(bytes, path, 8, h[1] as usize)?;
    if let Some(bad) = data.iter().find(|&&d| d > 9) {
        return Err(format_err(path, format!("label {bad} is not a digit")));
    }
    Ok(data.to_vec())
}

/// Reads an IDX image file and its label file, checking magics, 28×28
/// geometry, payload lengths and matching counts.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<RawDataset> {
    let images = parse_images(&std::fs::read(images_path)?, images_path)?;
    let labels = parse_labels(&std::fs::read(labels_path)?, labels_path)?;
    if images.len() != labels.len() {
        return Err(QcnnError::CountMismatch {
            images: images.len(),
            labels: labels.len(),
        });
    }
    Ok(RawDataset { images, labels })
}

/// Serializes images and labels in IDX form.
pub fn encode_idx(raw: &RawDataset) -> (Vec<u8>, Vec<u8>) {
    let mut images = Vec::with_capacity(16 + raw.images.len() * IMAGE_PIXELS);
    for w in [IMAGE_MAGIC, raw.images.len() as u32, IMAGE_SIDE as u32, IMAGE_SIDE as u32] {
        images.extend_from_slice(&w.to_be_bytes());
    }
    for img in &raw.images {
        images.extend_from_slice(img);
    }
    let mut labels = Vec::with_capacity(8 + raw.labels.len());
    labels.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    labels.extend_from_slice(&(raw.labels.len() as u32).to_be_bytes());
    labels.extend_from_slice(&raw.labels);
    (images, labels)
}
