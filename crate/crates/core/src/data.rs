//! IDX image/label files and construction of the two-class QML task.

use std::path::Path;

use rand::seq::SliceRandom;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::seed;
use crate::tasks::{QmlSample, QmlTask};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

/// Raw grayscale images with class labels.
#[derive(Clone, Debug, PartialEq)]
pub struct RawImageSet {
    pub rows: usize,
    pub cols: usize,
    /// Row-major pixels, `rows * cols` per image.
    pub images: Vec<Vec<u8>>,
    pub labels: Vec<u8>,
    /// SHA-256 of the image file followed by the label file.
    pub checksum: String,
}

fn read_u32(bytes: &[u8], at: usize, what: &str) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Idx(format!("truncated {what} header")))
}

/// Parses an IDX image file body: magic, count, rows, cols, pixels.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, Vec<Vec<u8>>)> {
    let magic = read_u32(bytes, 0, "image")?;
    if magic != IMAGE_MAGIC {
        return Err(Error::Idx(format!(
            "bad magic 0x{magic:08x} for image file (expected 0x{IMAGE_MAGIC:08x})"
        )));
    }
    let count = read_u32(bytes, 4, "image")? as usize;
    let rows = read_u32(bytes, 8, "image")? as usize;
    let cols = read_u32(bytes, 12, "image")? as usize;
    let size = rows * cols;
    let body = &bytes[16..];
    if body.len() < count * size {
        return Err(Error::Idx(format!(
            "truncated image data: {} bytes for {count} images of {rows}x{cols}",
            body.len()
        )));
    }
    if body.len() > count * size {
        return Err(Error::Idx("trailing bytes after image data".into()));
    }
    let images = body.chunks(size.max(1)).take(count).map(<[u8]>::to_vec).collect();
    Ok((rows, cols, images))
}

/// Parses an IDX label file body: magic, count, labels.
pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = read_u32(bytes, 0, "label")?;
    if magic != LABEL_MAGIC {
        return Err(Error::Idx(format!(
            "bad magic 0x{magic:08x} for label file (expected 0x{LABEL_MAGIC:08x})"
        )));
    }
    let count = read_u32(bytes, 4, "label")? as usize;
    let body = &bytes[8..];
    if body.len() != count {
        return Err(Error::Idx(format!(
            "truncated label data: header says {count}, file has {}",
            body.len()
        )));
    }
    if let Some(bad) = body.iter().find(|&&l| l > 9) {
        return Err(Error::Idx(format!("label {bad} outside 0..9")));
    }
    Ok(body.to_vec())
}

pub fn write_idx_images(rows: usize, cols: usize, images: &[Vec<u8>]) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.len() * rows * cols);
    for v in [IMAGE_MAGIC, images.len() as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    for img in images {
        out.extend_from_slice(img);
    }
    out
}

pub fn write_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// Reads an image file and its label file.
pub fn ingest_idx(images: &Path, labels: &Path) -> Result<RawImageSet> {
    let ib = std::fs::read(images).map_err(|e| Error::io(images, e))?;
    let lb = std::fs::read(labels).map_err(|e| Error::io(labels, e))?;
    ingest_idx_bytes(&ib, &lb)
}

pub fn ingest_idx_bytes(image_bytes: &[u8], label_bytes: &[u8]) -> Result<RawImageSet> {
    let (rows, cols, images) = parse_idx_images(image_bytes)?;
    let labels = parse_idx_labels(label_bytes)?;
    if images.len() != labels.len() {
        return Err(Error::Idx(format!(
            "count mismatch: {} images, {} labels",
            images.len(),
            labels.len()
        )));
    }
    let mut h = Sha256::new();
    h.update(image_bytes);
    h.update(label_bytes);
    let checksum = h.finalize().iter().map(|b| format!("{b:02x}")).collect();
    Ok(RawImageSet {
        rows,
        cols,
        images,
        labels,
        checksum,
    })
}

/// Zero-pads an image on the right and bottom to `side × side` and scales pixels to `[0, 1]`.
pub fn pad_and_flatten(img: &[u8], rows: usize, cols: usize, side: usize) -> Vec<f64> {
    let mut out = vec![0.0; side * side];
    for r in 0..rows.min(side) {
        for c in 0..cols.min(side) {
            out[r * side + c] = img[r * cols + c] as f64 / 255.0;
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct QmlTaskSpec {
    pub classes: (u8, u8),
    pub n_train: usize,
    pub n_val: usize,
    /// Padded image side; `side²` must be a power of two.
    pub side: usize,
}

impl Default for QmlTaskSpec {
    fn default() -> Self {
        QmlTaskSpec {
            classes: (0, 3),
            n_train: 500,
            n_val: 500,
            side: 32,
        }
    }
}

/// Selects two classes, draws a stratified, disjoint train/validation split and encodes the images.
///
/// Returns the task and the source indices of the train and validation samples.
pub fn build_qml_task(
    raw: &RawImageSet,
    spec: &QmlTaskSpec,
    seed: u64,
) -> Result<(QmlTask, Vec<usize>, Vec<usize>)> {
    let dim = spec.side * spec.side;
    if !dim.is_power_of_two() || spec.side < raw.rows.max(raw.cols) {
        return Err(Error::InvalidArgument(format!(
            "cannot pad {}x{} images to side {}",
            raw.rows, raw.cols, spec.side
        )));
    }
    let (a, b) = spec.classes;
    if a == b {
        return Err(Error::InvalidArgument("the two classes must differ".into()));
    }
    let mut rng = seed::rng(seed, &[seed::tag("qml-split")]);
    let mut pools: Vec<Vec<usize>> = [a, b]
        .iter()
        .map(|&c| (0..raw.labels.len()).filter(|&i| raw.labels[i] == c).collect())
        .collect();
    for p in pools.iter_mut() {
        p.shuffle(&mut rng);
    }
    // stratified: class B gets the ceiling share of each split
    let (train_a, val_a) = (spec.n_train / 2, spec.n_val / 2);
    let (train_b, val_b) = (spec.n_train - train_a, spec.n_val - val_a);
    for (pool, need, c) in [(&pools[0], train_a + val_a, a), (&pools[1], train_b + val_b, b)] {
        if pool.len() < need {
            return Err(Error::Dataset(format!(
                "class {c} has {} samples, need {need}",
                pool.len()
            )));
        }
    }
    let mut train_idx: Vec<usize> = pools[0][..train_a]
        .iter()
        .chain(&pools[1][..train_b])
        .copied()
        .collect();
    let mut val_idx: Vec<usize> = pools[0][train_a..train_a + val_a]
        .iter()
        .chain(&pools[1][train_b..train_b + val_b])
        .copied()
        .collect();
    train_idx.shuffle(&mut rng);
    val_idx.shuffle(&mut rng);
    let sample = |i: usize| QmlSample {
        x: pad_and_flatten(&raw.images[i], raw.rows, raw.cols, spec.side),
        label: raw.labels[i] == b,
    };
    let task = QmlTask {
        n: dim.trailing_zeros() as usize,
        train: train_idx.iter().map(|&i| sample(i)).collect(),
        val: val_idx.iter().map(|&i| sample(i)).collect(),
    };
    task.validate()?;
    Ok((task, train_idx, val_idx))
}

/// Small synthetic two-class image set, for examples and tests without the real data.
pub fn synthetic_image_set(per_class: usize, seed: u64) -> RawImageSet {
    use rand::Rng;
    let mut rng = seed::rng(seed, &[seed::tag("synthetic-images")]);
    let mut images = Vec::new();
    let mut labels = Vec::new();
    for i in 0..2 * per_class {
        let label = if i % 2 == 0 { 0u8 } else { 3u8 };
        // class 0: wide block in the upper half; class 3: narrow tall block
        let img: Vec<u8> = (0..28 * 28)
            .map(|p| {
                let (r, c) = (p / 28, p % 28);
                let on = if label == 0 {
                    (4..16).contains(&r) && (3..25).contains(&c)
                } else {
                    (3..26).contains(&r) && (10..18).contains(&c)
                };
                let noise: u8 = rng.random_range(0..40);
                if on {
                    200u8.saturating_add(noise)
                } else {
                    noise
                }
            })
            .collect();
        images.push(img);
        labels.push(label);
    }
    let ib = write_idx_images(28, 28, &images);
    let lb = write_idx_labels(&labels);
    ingest_idx_bytes(&ib, &lb).expect("synthetic data is well formed")
}
