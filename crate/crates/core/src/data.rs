//! Dataset ingestion: IDX (MNIST-style) and CIFAR-10 binary files.

use std::io::Read;
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;

use crate::error::{Error, Result};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;
pub const CIFAR_RECORD_BYTES: usize = 1 + 3 * 32 * 32;

/// An 8-bit image stored channel-major (`C × H × W`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub pixels: Vec<u8>,
}

impl Image {
    pub fn new(channels: usize, height: usize, width: usize, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != channels * height * width {
            return Err(Error::invalid(format!(
                "{} pixels for a {channels}x{height}x{width} image",
                pixels.len()
            )));
        }
        Ok(Image {
            channels,
            height,
            width,
            pixels,
        })
    }

    pub fn pixel(&self, c: usize, y: usize, x: usize) -> u8 {
        self.pixels[(c * self.height + y) * self.width + x]
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    Idx,
    CifarBinary,
}

impl std::str::FromStr for DatasetFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "idx" => Ok(DatasetFormat::Idx),
            "cifar-binary" | "cifar" => Ok(DatasetFormat::CifarBinary),
            other => Err(Error::config(format!("unknown dataset format `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

/// Labeled images. Labels are class indices below `classes`.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub images: Vec<Image>,
    pub labels: Vec<usize>,
    pub classes: usize,
}

impl Dataset {
    pub fn new(images: Vec<Image>, labels: Vec<usize>) -> Result<Self> {
        if images.len() != labels.len() {
            return Err(Error::invalid(format!(
                "{} images but {} labels",
                images.len(),
                labels.len()
            )));
        }
        if let Some(first) = images.first() {
            if images.iter().any(|i| i.shape() != first.shape()) {
                return Err(Error::invalid("images in a dataset must share one shape"));
            }
        }
        let classes = labels.iter().max().map_or(0, |m| m + 1);
        Ok(Dataset {
            images,
            labels,
            classes,
        })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn image_shape(&self) -> Option<(usize, usize, usize)> {
        self.images.first().map(Image::shape)
    }

    /// The first `n` samples (all of them if `n` exceeds the size).
    pub fn take(&self, n: usize) -> Dataset {
        let n = n.min(self.len());
        Dataset {
            images: self.images[..n].to_vec(),
            labels: self.labels[..n].to_vec(),
            classes: self.classes,
        }
    }
}

fn read_be_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| {
            Error::parse(
                offset,
                format!("expected 4 header bytes, file has {}", bytes.len()),
            )
        })
}

fn expect_payload(bytes: &[u8], offset: usize, expected: usize) -> Result<&[u8]> {
    let actual = bytes.len().saturating_sub(offset);
    if actual != expected {
        return Err(Error::parse(
            offset,
            format!("expected {expected} payload bytes, found {actual}"),
        ));
    }
    Ok(&bytes[offset..])
}

/// Parses an IDX image file (magic `0x00000803`, big-endian dims `N×H×W`).
pub fn parse_idx_images(bytes: &[u8]) -> Result<Vec<Image>> {
    let magic = read_be_u32(bytes, 0)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::parse(
            0,
            format!("IDX image magic {magic:#010x}, expected {IDX_IMAGES_MAGIC:#010x}"),
        ));
    }
    let count = read_be_u32(bytes, 4)? as usize;
    let rows = read_be_u32(bytes, 8)? as usize;
    let cols = read_be_u32(bytes, 12)? as usize;
    let per = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::parse(8, "image dims overflow"))?;
    let total = count
        .checked_mul(per)
        .ok_or_else(|| Error::parse(4, "image count overflows"))?;
    let payload = expect_payload(bytes, 16, total)?;
    if per == 0 {
        return Ok(Vec::new());
    }
    Ok(payload
        .chunks_exact(per)
        .map(|c| Image {
            channels: 1,
            height: rows,
            width: cols,
            pixels: c.to_vec(),
        })
        .collect())
}

/// Parses an IDX label file (magic `0x00000801`).
pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<usize>> {
    let magic = read_be_u32(bytes, 0)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::parse(
            0,
            format!("IDX label magic {magic:#010x}, expected {IDX_LABELS_MAGIC:#010x}"),
        ));
    }
    let count = read_be_u32(bytes, 4)? as usize;
    let payload = expect_payload(bytes, 8, count)?;
    Ok(payload.iter().map(|&b| usize::from(b)).collect())
}

/// Parses CIFAR-10 binary records: one label byte then 3072 channel-major
/// pixel bytes each.
pub fn parse_cifar(bytes: &[u8]) -> Result<Dataset> {
    if !bytes.len().is_multiple_of(CIFAR_RECORD_BYTES) {
        let whole = bytes.len() / CIFAR_RECORD_BYTES;
        return Err(Error::parse(
            whole * CIFAR_RECORD_BYTES,
            format!(
                "file has {} bytes, expected a multiple of {CIFAR_RECORD_BYTES} ({} or {})",
                bytes.len(),
                whole * CIFAR_RECORD_BYTES,
                (whole + 1) * CIFAR_RECORD_BYTES
            ),
        ));
    }
    let mut images = Vec::with_capacity(bytes.len() / CIFAR_RECORD_BYTES);
    let mut labels = Vec::with_capacity(images.capacity());
    for rec in bytes.chunks_exact(CIFAR_RECORD_BYTES) {
        labels.push(usize::from(rec[0]));
        images.push(Image {
            channels: 3,
            height: 32,
            width: 32,
            pixels: rec[1..].to_vec(),
        });
    }
    Dataset::new(images, labels)
}

/// Reads a file, transparently inflating gzip content.
pub fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let raw = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(&raw[..])
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn find_file(dir: &Path, stem: &str) -> Result<PathBuf> {
    for name in [stem.to_string(), format!("{stem}.gz")] {
        let p = dir.join(name);
        if p.is_file() {
            return Ok(p);
        }
    }
    Err(Error::io(
        dir.join(stem),
        std::io::Error::new(std::io::ErrorKind::NotFound, "dataset file not found"),
    ))
}

/// Loads one split from a dataset directory.
///
/// IDX directories hold `{train,t10k}-{images-idx3,labels-idx1}-ubyte`
/// (optionally gzipped); CIFAR directories hold `data_batch_*.bin` and
/// `test_batch.bin`.
pub fn load_dataset(dir: &Path, format: DatasetFormat, split: Split) -> Result<Dataset> {
    if !dir.is_dir() {
        return Err(Error::io(
            dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "dataset directory not found"),
        ));
    }
    match format {
        DatasetFormat::Idx => {
            let prefix = match split {
                Split::Train => "train",
                Split::Test => "t10k",
            };
            let images = parse_idx_images(&read_maybe_gz(&find_file(
                dir,
                &format!("{prefix}-images-idx3-ubyte"),
            )?)?)?;
            let labels = parse_idx_labels(&read_maybe_gz(&find_file(
                dir,
                &format!("{prefix}-labels-idx1-ubyte"),
            )?)?)?;
            Dataset::new(images, labels)
        }
        DatasetFormat::CifarBinary => {
            let files: Vec<PathBuf> = match split {
                Split::Test => vec![find_file(dir, "test_batch.bin")?],
                Split::Train => {
                    let found: Vec<PathBuf> = (1..=5)
                        .filter_map(|i| find_file(dir, &format!("data_batch_{i}.bin")).ok())
                        .collect();
                    if found.is_empty() {
                        vec![find_file(dir, "data_batch_1.bin")?]
                    } else {
                        found
                    }
                }
            };
            let mut all = Dataset::default();
            for f in files {
                let part = parse_cifar(&read_maybe_gz(&f)?)?;
                all.images.extend(part.images);
                all.labels.extend(part.labels);
            }
            Dataset::new(all.images, all.labels)
        }
    }
}
